#pragma once

#include <string>
#include <vector>

#include "bhnoma/types.hpp"

namespace bhnoma {

/// Per-timeslot interference structure for the scheduled terminals:
/// sinr_i = own_gain[i] * p_i / (sum_j cross(i,j) * p_j + noise).
/// Cross coefficients fold in the SIC order (stronger in-beam terminals
/// interfere fully, weaker ones through the residual-SIC ratio) and, when a
/// color plan is active, zero out orthogonal beams.
struct SlotModel {
    std::vector<int> terminals;        // scheduled terminal indices, ascending
    std::vector<double> own_gain;
    std::vector<double> bandwidth_Hz;  // per entry, color plan aware
    Grid<double> cross;                // n x n, diagonal zero
    double noise_W = 0.0;

    int size() const { return static_cast<int>(terminals.size()); }
    int find(int terminal) const {
        for (int i = 0; i < size(); ++i)
            if (terminals[i] == terminal) return i;
        return -1;
    }
};

SlotModel build_slot_model(const Scenario& scenario, const Assignment& assignment, int t,
                           const EvalConfig& cfg);

/// Rate (bps) of entry i of a slot model at the given member powers.
double slot_rate_bps(const SlotModel& m, const std::vector<double>& powers, int i);

/// SINR of a scheduled terminal. Throws std::invalid_argument when the
/// terminal is not scheduled at the slot.
double compute_sinr(const Scenario& scenario, const Assignment& assignment,
                    const PowerPlan& power, int t, int k, const EvalConfig& cfg);

struct RateResult {
    Grid<double> per_slot_rates_bps;  // K x T
    std::vector<double> capacities_bps;
};

RateResult compute_rates(const Scenario& scenario, const Assignment& assignment,
                         const PowerPlan& power, const EvalConfig& cfg);

/// Which structural constraints a scheme is held to. The always-on
/// frequency-reuse baselines lift the illumination cap and the conflict
/// pairs; everything else keeps the full set.
struct FeasibilityRegime {
    bool enforce_beam_cap = true;   // max simultaneous beams
    bool enforce_conflicts = true;  // forbidden beam pairs
    double rate_tol = 1e-6;         // relative tolerance on rate floors
};

struct Violation {
    std::string constraint;  // e.g. "beam_power", "beam_cap", "conflict", "rate_floor"
    int beam = -1;
    int terminal = -1;
    int slot = -1;
    double slack = 0.0;  // negative by how much the constraint fails
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<Violation> violations;
};

FeasibilityReport check_feasibility(const Scenario& scenario, const Assignment& assignment,
                                    const PowerPlan& power,
                                    const std::vector<double>& capacities_bps,
                                    const FeasibilityRegime& regime = {});

/// Scalar quality of a capacity vector. SumSquaredGap and Unmet are in Mbps
/// units, WorstOctr is the dimensionless min_k R_k / D_k.
double score(const Scenario& scenario, const std::vector<double>& capacities_bps,
             Metric metric);

/// Evaluates rates, capacities and all three metrics for a candidate.
Solution evaluate_solution(const Scenario& scenario, const Assignment& assignment,
                           const PowerPlan& power, const EvalConfig& cfg);

}  // namespace bhnoma
