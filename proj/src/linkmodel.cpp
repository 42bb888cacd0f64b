#include "bhnoma/linkmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bhnoma {

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::SumSquaredGap: return "sum_squared_gap";
        case Metric::WorstOctr: return "worst_octr";
        case Metric::Unmet: return "unmet";
    }
    return "?";
}

Metric metric_from_string(const std::string& name) {
    if (name == "sum_squared_gap") return Metric::SumSquaredGap;
    if (name == "worst_octr") return Metric::WorstOctr;
    if (name == "unmet") return Metric::Unmet;
    throw std::invalid_argument("unknown metric: " + name);
}

std::string status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Ok: return "ok";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Incomplete: return "incomplete";
        case SolveStatus::Warning: return "warning";
        case SolveStatus::Error: return "error";
    }
    return "?";
}

SlotModel build_slot_model(const Scenario& scenario, const Assignment& assignment, int t,
                           const EvalConfig& cfg) {
    SlotModel m;
    m.noise_W = scenario.channel.noise_power_W;
    const int K = scenario.num_terminals();
    for (int k = 0; k < K; ++k)
        if (assignment.beta(k, t)) m.terminals.push_back(k);
    const int n = m.size();
    m.own_gain.resize(n);
    m.bandwidth_Hz.resize(n);
    m.cross.assign(n, n, 0.0);

    const double eta = cfg.sic_error_ratio;
    for (int i = 0; i < n; ++i) {
        const int k = m.terminals[i];
        const int b = scenario.terminals[k].home_beam;
        m.own_gain[i] = scenario.channel.gains(b, k);
        m.bandwidth_Hz[i] =
            cfg.has_colors ? cfg.colors.per_color_bandwidth_Hz : scenario.channel.bandwidth_Hz;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const int kj = m.terminals[j];
            const int bj = scenario.terminals[kj].home_beam;
            if (bj == b) {
                // Stronger in-beam terminals (lower index) interfere fully;
                // weaker ones only through the residual SIC error.
                m.cross(i, j) = (kj < k) ? scenario.channel.gains(b, k)
                                         : eta * scenario.channel.gains(b, k);
            } else {
                const bool orthogonal = cfg.has_colors && cfg.colors.color_of_beam[bj] !=
                                                              cfg.colors.color_of_beam[b];
                m.cross(i, j) = orthogonal ? 0.0 : scenario.channel.gains(bj, k);
            }
        }
    }
    return m;
}

namespace {

double slot_sinr(const SlotModel& m, const std::vector<double>& powers, int i) {
    double denom = m.noise_W;
    for (int j = 0; j < m.size(); ++j)
        if (j != i) denom += m.cross(i, j) * powers[j];
    return m.own_gain[i] * powers[i] / denom;
}

}  // namespace

double slot_rate_bps(const SlotModel& m, const std::vector<double>& powers, int i) {
    return m.bandwidth_Hz[i] * std::log2(1.0 + slot_sinr(m, powers, i));
}

double compute_sinr(const Scenario& scenario, const Assignment& assignment,
                    const PowerPlan& power, int t, int k, const EvalConfig& cfg) {
    if (!assignment.beta(k, t))
        throw std::invalid_argument("compute_sinr: terminal not scheduled at slot");
    const SlotModel m = build_slot_model(scenario, assignment, t, cfg);
    std::vector<double> p(m.size());
    for (int i = 0; i < m.size(); ++i) p[i] = power.p(m.terminals[i], t);
    return slot_sinr(m, p, m.find(k));
}

RateResult compute_rates(const Scenario& scenario, const Assignment& assignment,
                         const PowerPlan& power, const EvalConfig& cfg) {
    const int K = scenario.num_terminals();
    const int T = scenario.T;
    RateResult out;
    out.per_slot_rates_bps.assign(K, T, 0.0);
    out.capacities_bps.assign(K, 0.0);
    for (int t = 0; t < T; ++t) {
        const SlotModel m = build_slot_model(scenario, assignment, t, cfg);
        std::vector<double> p(m.size());
        for (int i = 0; i < m.size(); ++i) p[i] = power.p(m.terminals[i], t);
        for (int i = 0; i < m.size(); ++i) {
            const double gamma = slot_sinr(m, p, i);
            const double rate = m.bandwidth_Hz[i] * std::log2(1.0 + gamma);
            out.per_slot_rates_bps(m.terminals[i], t) = rate;
        }
    }
    for (int k = 0; k < K; ++k) {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) sum += out.per_slot_rates_bps(k, t);
        out.capacities_bps[k] = sum;
    }
    return out;
}

FeasibilityReport check_feasibility(const Scenario& scenario, const Assignment& assignment,
                                    const PowerPlan& power,
                                    const std::vector<double>& capacities_bps,
                                    const FeasibilityRegime& regime) {
    FeasibilityReport rep;
    const int B = scenario.num_beams();
    const int K = scenario.num_terminals();
    const int T = scenario.T;
    const double P = scenario.P_beam_W;
    const double power_tol = 1e-9 * std::max(1.0, P);

    auto add = [&](const std::string& c, int b, int k, int t, double slack) {
        rep.violations.push_back({c, b, k, t, slack});
    };

    for (int t = 0; t < T; ++t) {
        int active = 0;
        for (int b = 0; b < B; ++b) active += assignment.alpha(b, t);
        if (regime.enforce_beam_cap && active > scenario.B0)
            add("beam_cap", -1, -1, t, static_cast<double>(scenario.B0 - active));
        if (regime.enforce_conflicts) {
            for (const auto& pr : scenario.conflict_set)
                if (assignment.alpha(pr.first, t) && assignment.alpha(pr.second, t))
                    add("conflict", pr.first, pr.second, t, -1.0);
        }
        for (int b = 0; b < B; ++b) {
            int scheduled = 0;
            double psum = 0.0;
            for (int k : scenario.beam_terminals[b]) {
                scheduled += assignment.beta(k, t);
                psum += power.p(k, t);
            }
            if (scheduled > scenario.K0 * assignment.alpha(b, t))
                add("terminal_cap", b, -1, t,
                    static_cast<double>(scenario.K0 * assignment.alpha(b, t) - scheduled));
            if (psum > P + power_tol) add("beam_power", b, -1, t, P - psum);
        }
    }
    for (int k = 0; k < K; ++k) {
        for (int t = 0; t < T; ++t) {
            const double cap = P * assignment.beta(k, t);
            if (power.p(k, t) < -power_tol || power.p(k, t) > cap + power_tol)
                add("power_box", -1, k, t, cap - power.p(k, t));
        }
        const double rmin = scenario.terminals[k].min_rate_bps;
        if (capacities_bps[k] < rmin * (1.0 - regime.rate_tol) - 1e-12)
            add("rate_floor", -1, k, -1, capacities_bps[k] - rmin);
    }
    rep.feasible = rep.violations.empty();
    return rep;
}

double score(const Scenario& scenario, const std::vector<double>& capacities_bps,
             Metric metric) {
    if (capacities_bps.size() != static_cast<size_t>(scenario.num_terminals()))
        throw std::invalid_argument("score: capacity vector length mismatch");
    double sum_sq = 0.0, unmet = 0.0, worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < scenario.num_terminals(); ++k) {
        const double r = to_mbps(capacities_bps[k]);
        const double d = to_mbps(scenario.terminals[k].demand_bps);
        sum_sq += (r - d) * (r - d);
        unmet += std::max(d - r, 0.0);
        worst = std::min(worst, r / d);
    }
    switch (metric) {
        case Metric::SumSquaredGap: return sum_sq;
        case Metric::WorstOctr: return worst;
        case Metric::Unmet: return unmet;
    }
    return 0.0;
}

Solution evaluate_solution(const Scenario& scenario, const Assignment& assignment,
                           const PowerPlan& power, const EvalConfig& cfg) {
    Solution s;
    s.assignment = assignment;
    s.power = power;
    RateResult rr = compute_rates(scenario, assignment, power, cfg);
    s.per_slot_rates_bps = std::move(rr.per_slot_rates_bps);
    s.capacities_bps = std::move(rr.capacities_bps);
    s.objective_mbps2 = score(scenario, s.capacities_bps, Metric::SumSquaredGap);
    s.aux.worst_octr = score(scenario, s.capacities_bps, Metric::WorstOctr);
    s.aux.unmet_mbps = score(scenario, s.capacities_bps, Metric::Unmet);
    double total = 0.0;
    for (double w : power.p.raw()) total += w;
    s.aux.total_power_W = total;
    return s;
}

}  // namespace bhnoma
