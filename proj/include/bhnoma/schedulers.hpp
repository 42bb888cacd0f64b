#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bhnoma/power_solver.hpp"
#include "bhnoma/types.hpp"

namespace bhnoma {

/// Incumbent of the swap search: the two matchings (as an Assignment), the
/// power plan that scored them and the cached score.
struct MatchingState {
    Assignment assignment;
    PowerPlan power;
    std::vector<double> capacities_bps;
    double objective = 0.0;  // cached value under the scoring solver
    SolveStatus status = SolveStatus::Ok;
    int infeasible_terminal = -1;
};

struct SwapMove {
    enum class Kind { Beam, Terminal };
    Kind kind = Kind::Beam;
    int remove_a = -1, remove_t = -1;  // beam or terminal, slot
    int add_a = -1, add_t = -1;
};

struct SwapTraceRow {
    int iter = 0;
    std::string phase;  // "beam" | "terminal"
    std::string move;
    double objective_before = 0.0;
    double objective_after = 0.0;
    bool accepted = false;
};

/// Round-robin over beam groups with residual-demand terminal picks, scored
/// by the power solver. Tries group-phase rotations before reporting the
/// construction infeasible. An optional hint bypasses the construction.
MatchingState initial_solution(const Scenario& scenario, const SolverConfig& cfg,
                               const Assignment* hint = nullptr,
                               PowerObjective objective = PowerObjective::SumSquaredShortfall);

/// Structurally valid beam swaps: remove an illuminated (beam, slot), add a
/// dark one, keeping the per-slot illumination cap and the conflict pairs.
/// Objective improvement is checked lazily at evaluation time.
std::vector<SwapMove> enumerate_beam_swaps(const MatchingState& state,
                                           const Scenario& scenario);

/// Structurally valid terminal swaps: same-beam pairs across that beam's
/// active slots, respecting the per-slot multiplexing cap.
std::vector<SwapMove> enumerate_terminal_swaps(const MatchingState& state,
                                               const Scenario& scenario);

struct UbaResult {
    Solution solution;
    std::vector<SwapTraceRow> trace;
    int iterations = 0;
    int accepted_swaps = 0;
};

/// Swap-matching upper bound: alternates a beam phase and a terminal phase,
/// first improving candidate in lexicographic order, until no swap improves,
/// the iteration cap is hit, or every demand is met.
UbaResult run_uba(const Scenario& scenario, const MatchingState& init_state,
                  const SolverConfig& cfg,
                  PowerObjective objective = PowerObjective::SumSquaredShortfall);

struct EjpbtResult {
    Solution solution;
    PowerPlan stage_power;  // per-slot allocation before the final polish
    int idle_slots = 0;
    std::vector<std::string> warnings;
};

/// Incremental per-slot scheduling engine shared by the greedy and the
/// fixed-illumination benchmarks: decides terminals under a given
/// illumination row, refreshes powers and rolls residual demands forward.
class StageDriver {
public:
    StageDriver(const Scenario& scenario, const SolverConfig& cfg);

    /// Schedule slot t under the given illumination row. When
    /// select_by_residual is set, terminals are picked directly by residual
    /// demand instead of the relaxed scheduling fractions.
    void step(int t, const std::vector<uint8_t>& alpha_row, bool select_by_residual = false);

    const std::vector<double>& residual_mbps() const { return resid_mbps_; }
    const std::vector<double>& past_mbps() const { return past_mbps_; }

    /// Full-horizon power polish over the accumulated assignment.
    EjpbtResult finish(const std::string& scheme);

private:
    const Scenario& sc_;
    const SolverConfig& cfg_;
    Assignment asg_;
    PowerPlan power_;
    std::vector<double> resid_mbps_;
    std::vector<double> past_mbps_;
    int idle_slots_ = 0;
    std::vector<std::string> warnings_;
};

/// Per-timeslot greedy: relaxed subproblem, beam-group argmax selection,
/// largest-fraction terminal picks, per-slot power refresh, residual-demand
/// bookkeeping, then one full-horizon power polish.
EjpbtResult run_ejpbt(const Scenario& scenario, const SolverConfig& cfg);

/// Shared stage machinery for schemes that fix the illumination pattern up
/// front (RA, MaxSINR, MinCCI): per slot, relax the scheduling fractions
/// under the fixed row, pick terminals, refresh powers, track residuals,
/// then polish over the full horizon.
EjpbtResult run_fixed_illumination(const Scenario& scenario, const Grid<uint8_t>& alpha,
                                   const SolverConfig& cfg, const std::string& scheme);

/// Penalty factors for the stage subproblem: twice the residual demand,
/// floored to stay positive.
std::vector<double> default_penalty_factors(const std::vector<double>& residual_mbps);

}  // namespace bhnoma
