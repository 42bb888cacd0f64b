#pragma once

#include <string>

#include "bhnoma/schedulers.hpp"
#include "bhnoma/types.hpp"

namespace bhnoma {

/// Frequency-reuse plan over the conflict graph: 1 color (full reuse),
/// 2 colors (polarizations, full band each) or 4 colors (two band halves
/// times two polarizations). Throws when the conflict graph cannot be
/// colored with the requested count.
ColorPlan build_color_plan(const Scenario& scenario, int color_count);

/// Orthogonal-access baseline: the swap search with single-terminal slots.
Solution run_bh_oma(const Scenario& scenario, const SolverConfig& cfg);

/// Always-on NOMA with a frequency-reuse pattern: every beam illuminated in
/// every slot, terminals picked greedily by residual demand, one full-horizon
/// power optimization. Lifts the illumination cap and the conflict pairs.
Solution run_color_noma(const Scenario& scenario, int color_count, const SolverConfig& cfg);

/// Demand-proportional slot counts packed greedily, then the stage machinery
/// for terminals and power.
Solution run_ra(const Scenario& scenario, const SolverConfig& cfg);

/// Per-slot greedy beam sets by estimated SINR of each beam's strongest
/// unsatisfied terminal (equal-power full-budget estimates).
Solution run_maxsinr(const Scenario& scenario, const SolverConfig& cfg);

/// Per-slot greedy beam sets minimizing the pairwise co-channel interference
/// sum of the activated set.
Solution run_mincci(const Scenario& scenario, const SolverConfig& cfg);

/// Swap search under an alternative objective: WorstOctr maximizes the
/// common capacity-to-demand ratio, Unmet minimizes the total shortfall.
Solution run_alt_objective(const Scenario& scenario, Metric objective,
                           const SolverConfig& cfg);

/// Dispatch by CLI scheme name: uba, ejpbt, bh-oma, 1c-noma, 2c-noma,
/// 4c-noma, ra, maxsinr, mincci, scheme1, scheme2.
Solution run_scheme(const Scenario& scenario, const std::string& scheme,
                    const SolverConfig& cfg);

}  // namespace bhnoma
