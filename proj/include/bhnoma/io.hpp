#pragma once

#include <string>
#include <vector>

#include "bhnoma/linkmodel.hpp"
#include "bhnoma/power_solver.hpp"
#include "bhnoma/scenario.hpp"
#include "bhnoma/schedulers.hpp"
#include "bhnoma/types.hpp"

namespace bhnoma {

/// Scenario JSON. Gains are linear, powers in watts, rates in bps; beam and
/// terminal ids are 1-based. An explicit channel.gains matrix overrides
/// synthesis from geometry. Parse errors name the offending field.
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

/// Generator spec JSON (all fields optional; desk-scale defaults apply).
GeneratorSpec generator_spec_from_json(const std::string& text);
std::string generator_spec_to_json(const GeneratorSpec& spec);

/// Solver config JSON (partial override of the defaults), including the
/// evaluation knobs (eta).
SolverConfig solver_config_from_json(const std::string& text);

/// Gain-table ingest: CSV with header beam_id,terminal_id,gain_linear.
/// Replaces the scenario's gain entries and restores the SIC ordering.
void apply_gain_table_csv(Scenario& scenario, const std::string& path);

/// Solution dump: slot,beam,terminal,power_W,sinr,rate_bps (1-based ids).
void write_solution_csv(const Scenario& scenario, const Solution& solution,
                        const EvalConfig& eval, const std::string& path);

/// Reload of a solution dump for re-validation. Beam activity is implied by
/// the scheduled terminals.
struct LoadedSolution {
    Assignment assignment;
    PowerPlan power;
};
LoadedSolution read_solution_csv(const Scenario& scenario, const std::string& path);

/// metric,value summary.
void write_metrics_csv(const Solution& solution, const std::string& path,
                       const std::vector<std::pair<std::string, double>>& extra = {});

void write_alg1_trace_csv(const std::vector<Alg1TraceRow>& trace, const std::string& path);
void write_swap_trace_csv(const std::vector<SwapTraceRow>& trace, const std::string& path);

}  // namespace bhnoma
