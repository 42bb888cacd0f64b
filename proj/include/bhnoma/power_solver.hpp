#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bhnoma/linkmodel.hpp"
#include "bhnoma/types.hpp"

namespace bhnoma {

/// Auxiliary state of the quadratic transform.
struct TransformState {
    Grid<double> theta;         // K x T, zero wherever unscheduled
    std::vector<double> delta;  // per-terminal shortfall, Mbps
};

/// What the inner convex solve optimizes. SumSquaredShortfall is the
/// primary capacity-demand objective; the other two back the alternative
/// benchmark schemes.
enum class PowerObjective { SumSquaredShortfall, MaxMinOctr, MinUnmet };

/// Surrogate concave rate (bps) at the given transform variable. With
/// theta at its closed-form optimum this equals the true Shannon rate.
/// The log argument is floored at cfg.eps_log; *clamped reports when the
/// floor was hit.
double transformed_rate(const TransformState& theta, const PowerPlan& power,
                        const Scenario& scenario, const Assignment& assignment, int k, int t,
                        const SolverConfig& cfg, bool* clamped = nullptr);

/// Closed-form optimal transform variable for fixed powers.
TransformState update_theta(const PowerPlan& power, const Scenario& scenario,
                            const Assignment& assignment, const EvalConfig& eval);

struct ConvexSolveResult {
    PowerPlan power;
    std::vector<double> delta_mbps;
    SolveStatus status = SolveStatus::Ok;
    int most_violated_terminal = -1;
    double kkt_gap = 0.0;  // duality-gap bound of the barrier solve
    int newton_steps = 0;
};

/// Inner convex subproblem: fixed assignment and fixed theta, optimize
/// powers (and the objective's auxiliaries) over the per-beam power
/// simplices, rate floors and demand slacks. Rate floors carry an
/// exact-penalty slack; unremovable slack means the assignment cannot meet
/// some terminal's floor and is reported as infeasible.
ConvexSolveResult solve_convex_subproblem(const TransformState& theta,
                                          const Scenario& scenario,
                                          const Assignment& assignment,
                                          const SolverConfig& cfg,
                                          PowerObjective objective = PowerObjective::SumSquaredShortfall,
                                          const PowerPlan* warm_start = nullptr);

struct Alg1TraceRow {
    int iter = 0;
    double objective = 0.0;  // shortfall objective (or scheme metric), Mbps^2 scale
    double max_kkt_residual = 0.0;
    int clamped_terms = 0;
};

struct Alg1Result {
    PowerPlan power;
    std::vector<double> delta_mbps;
    std::vector<Alg1TraceRow> trace;
    SolveStatus status = SolveStatus::Ok;
    int most_violated_terminal = -1;
    double objective = 0.0;  // final value of the optimized objective
};

/// Iterative power allocation for a fixed integer solution: alternates the
/// closed-form theta update with the convex solve until the objective
/// settles, then enforces capacity<=demand by the equalization
/// post-process. `init_power` may be empty (equal split per active beam).
Alg1Result run_alg1(const Scenario& scenario, const Assignment& assignment,
                    const PowerPlan& init_power, const SolverConfig& cfg,
                    PowerObjective objective = PowerObjective::SumSquaredShortfall);

struct EqualizeResult {
    PowerPlan power;
    SolveStatus status = SolveStatus::Ok;  // Warning on non-convergence
    int iterations = 0;
    double residual = 0.0;  // max relative |R_k - D_k| over the equalized set
};

/// Levenberg-Marquardt solve of R_k(p) = D_k over the powers of the
/// over-served terminals; all other powers stay frozen. Steps are projected
/// back into the power box and per-beam simplices.
EqualizeResult equalize_overserved(const Scenario& scenario, const Assignment& assignment,
                                   const PowerPlan& power,
                                   const std::vector<int>& overserved,
                                   const SolverConfig& cfg);

/// Relaxed single-slot subproblem used by the per-timeslot greedy and the
/// illumination benchmarks: binaries in [0,1], residual demands as targets,
/// a smoothed rate-floor penalty, and optionally a fixed illumination row.
struct StageResult {
    std::vector<double> alpha_bar;  // per beam, in [0,1]
    std::vector<double> beta_bar;   // per terminal, in [0,1]
    std::vector<double> power_W;    // per terminal
    SolveStatus status = SolveStatus::Ok;
};

StageResult solve_relaxed_stage(const Scenario& scenario,
                                const std::vector<double>& residual_mbps,
                                const std::vector<double>& past_rate_mbps,
                                const std::vector<double>& penalty_factors,
                                const SolverConfig& cfg,
                                const std::vector<uint8_t>* fixed_alpha = nullptr);

/// Stage power refresh once the slot's integers are decided: optimizes the
/// chosen terminals' powers against the residual demands and returns their
/// achieved single-slot rates (Mbps).
struct StagePowerResult {
    std::vector<double> power_W;     // per terminal (zero if not chosen)
    std::vector<double> rate_mbps;   // per terminal
    SolveStatus status = SolveStatus::Ok;
};

StagePowerResult solve_stage_power(const Scenario& scenario, const std::vector<int>& chosen,
                                   const std::vector<double>& residual_mbps,
                                   const std::vector<double>& past_rate_mbps,
                                   const std::vector<double>& penalty_factors,
                                   const SolverConfig& cfg);

}  // namespace bhnoma
