#pragma once

#include <string>
#include <vector>

#include "bhnoma/types.hpp"

namespace bhnoma {

/// Interference-free SIC power recursion for one beam-slot: gains in SIC
/// order (descending), rates in bps, result in watts.
std::vector<double> interference_free_powers(const std::vector<double>& gains_desc,
                                             const std::vector<double>& rates_bps,
                                             double noise_W, double bandwidth_Hz);

/// Closed-form left-hand side of the per-beam power budget written in the
/// rate variables: sum_k (s2/g_k - s2/g_{k-1}) 2^{suffix_k/W} - s2/g_last.
/// Equals the sum of the recursion powers for any nonnegative rates.
double power_budget_lhs(const std::vector<double>& gains_desc,
                        const std::vector<double>& rates_bps, double noise_W,
                        double bandwidth_Hz);

/// Per-terminal rate caps: the interference-free single-slot rate at full
/// beam power. No achievable slot rate exceeds this.
std::vector<double> compute_rmax(const Scenario& scenario);

struct LbaResult {
    double lower_bound_mbps2 = 0.0;
    Solution relaxed;         // incumbent integer solution of the relaxation, if any
    bool has_incumbent = false;
    double incumbent_mbps2 = 0.0;
    int nodes_explored = 0;
    SolveStatus status = SolveStatus::Ok;  // Incomplete when the node budget ran out
};

/// Branch-and-bound over the interference-free rate formulation: continuous
/// relaxation per node via the barrier engine, most-fractional branching
/// (lowest index on ties), best-bound node selection. Returns the exact
/// optimum when the budget suffices, otherwise a valid global lower bound
/// flagged Incomplete.
LbaResult solve_lba(const Scenario& scenario, const SolverConfig& cfg);

struct SandwichReport {
    double lower = 0.0;
    double upper = 0.0;
    double relative_gap = 0.0;
    int nodes_explored = 0;
    std::string status;  // "ok" | "incomplete" | "infeasible"
};

/// Paired lower/upper bound run on one scenario.
SandwichReport sandwich_report(const Scenario& scenario, const SolverConfig& cfg);

}  // namespace bhnoma
