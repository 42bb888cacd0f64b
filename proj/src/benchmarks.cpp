#include "bhnoma/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "bhnoma/linkmodel.hpp"

namespace bhnoma {

ColorPlan build_color_plan(const Scenario& scenario, int color_count) {
    const int B = scenario.num_beams();
    ColorPlan plan;
    plan.color_count = color_count;
    plan.per_color_bandwidth_Hz =
        color_count == 4 ? 0.5 * scenario.channel.bandwidth_Hz : scenario.channel.bandwidth_Hz;
    plan.color_of_beam.assign(B, 0);
    if (color_count == 1) return plan;

    std::vector<std::vector<int>> adj(B);
    for (const auto& pr : scenario.conflict_set) {
        adj[pr.first].push_back(pr.second);
        adj[pr.second].push_back(pr.first);
    }

    if (color_count == 2) {
        // Bipartition by BFS; an odd cycle in the conflict graph defeats a
        // two-polarization pattern.
        std::vector<int> color(B, -1);
        for (int s = 0; s < B; ++s) {
            if (color[s] >= 0) continue;
            color[s] = 0;
            std::deque<int> q{s};
            while (!q.empty()) {
                const int v = q.front();
                q.pop_front();
                for (int u : adj[v]) {
                    if (color[u] < 0) {
                        color[u] = 1 - color[v];
                        q.push_back(u);
                    } else if (color[u] == color[v]) {
                        throw std::invalid_argument(
                            "build_color_plan: conflict graph is not 2-colorable");
                    }
                }
            }
        }
        plan.color_of_beam = color;
        return plan;
    }
    if (color_count != 4)
        throw std::invalid_argument("build_color_plan: color count must be 1, 2 or 4");

    // Greedy smallest-available on descending degree.
    std::vector<int> order(B);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return adj[a].size() > adj[b].size();
    });
    std::vector<int> color(B, -1);
    for (int v : order) {
        bool used[4] = {false, false, false, false};
        for (int u : adj[v])
            if (color[u] >= 0) used[color[u]] = true;
        int c = 0;
        while (c < 4 && used[c]) ++c;
        if (c == 4)
            throw std::invalid_argument("build_color_plan: conflict graph needs > 4 colors");
        color[v] = c;
    }
    plan.color_of_beam = color;
    return plan;
}

Solution run_bh_oma(const Scenario& scenario, const SolverConfig& cfg) {
    Scenario oma = scenario;
    oma.K0 = 1;
    MatchingState init = initial_solution(oma, cfg);
    UbaResult r = run_uba(oma, init, cfg);
    r.solution.scheme = "bh-oma";
    return std::move(r.solution);
}

Solution run_color_noma(const Scenario& scenario, int color_count, const SolverConfig& cfg) {
    SolverConfig ccfg = cfg;
    ccfg.eval.has_colors = true;
    ccfg.eval.colors = build_color_plan(scenario, color_count);

    StageDriver driver(scenario, ccfg);
    const std::vector<uint8_t> all_on(scenario.num_beams(), 1);
    for (int t = 0; t < scenario.T; ++t) driver.step(t, all_on, /*select_by_residual=*/true);
    EjpbtResult r = driver.finish(std::to_string(color_count) + "c-noma");
    return std::move(r.solution);
}

Solution run_ra(const Scenario& scenario, const SolverConfig& cfg) {
    const int B = scenario.num_beams();
    const int T = scenario.T;

    // Slots per beam proportional to aggregate demand, largest remainder,
    // capped at the window length.
    std::vector<double> load(B, 0.0);
    double total = 0.0;
    for (int k = 0; k < scenario.num_terminals(); ++k) {
        load[scenario.terminals[k].home_beam] += to_mbps(scenario.terminals[k].demand_bps);
        total += to_mbps(scenario.terminals[k].demand_bps);
    }
    const int slot_budget = std::min(T * scenario.B0, T * B);
    std::vector<int> count(B, 0);
    std::vector<std::pair<double, int>> remainder;
    int assigned = 0;
    for (int b = 0; b < B; ++b) {
        const double exact = slot_budget * load[b] / total;
        count[b] = std::min(static_cast<int>(exact), T);
        assigned += count[b];
        remainder.push_back({exact - count[b], b});
    }
    std::stable_sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; i < remainder.size() && assigned < slot_budget; ++i) {
        const int b = remainder[i].second;
        if (count[b] < T) {
            ++count[b];
            ++assigned;
        }
    }

    // Greedy packing: fill each slot with the beams holding the most
    // remaining slots, respecting the conflict pairs.
    Grid<uint8_t> alpha(B, T, 0);
    std::vector<int> left = count;
    for (int t = 0; t < T; ++t) {
        std::vector<int> order(B);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return left[a] > left[b]; });
        int placed = 0;
        std::vector<int> in_slot;
        for (int b : order) {
            if (left[b] <= 0 || placed >= scenario.B0) continue;
            bool clash = false;
            for (int u : in_slot)
                if (scenario.conflicts(b, u)) clash = true;
            if (clash) continue;
            alpha(b, t) = 1;
            in_slot.push_back(b);
            --left[b];
            ++placed;
        }
    }
    if (std::any_of(left.begin(), left.end(), [](int v) { return v > 0; })) {
        Solution s;
        s.scheme = "ra";
        s.status = SolveStatus::Infeasible;
        s.status_detail = "slot packing failed under the conflict pairs";
        return s;
    }

    EjpbtResult r = run_fixed_illumination(scenario, alpha, cfg, "ra");
    return std::move(r.solution);
}

namespace {

/// Strongest terminal of the beam that still carries residual demand, or -1.
int strongest_unsatisfied(const Scenario& sc, int b, const std::vector<double>& resid) {
    for (int k : sc.beam_terminals[b])  // SIC order: strongest first
        if (resid[k] > 1e-9) return k;
    return -1;
}

Solution run_greedy_beam_sets(const Scenario& scenario, const SolverConfig& cfg,
                              bool max_sinr, const std::string& scheme) {
    const int B = scenario.num_beams();
    const double P = scenario.P_beam_W;
    StageDriver driver(scenario, cfg);

    for (int t = 0; t < scenario.T; ++t) {
        std::vector<uint8_t> row(B, 0);
        std::vector<int> picked;
        for (int step = 0; step < scenario.B0; ++step) {
            int best = -1;
            double best_score = 0.0;
            for (int b = 0; b < B; ++b) {
                if (row[b]) continue;
                const int kb = strongest_unsatisfied(scenario, b, driver.residual_mbps());
                if (kb < 0) continue;  // beam has no residual demand
                bool clash = false;
                for (int u : picked)
                    if (scenario.conflicts(b, u)) clash = true;
                if (clash) continue;
                double sc_val;
                if (max_sinr) {
                    double interf = 0.0;
                    for (int u : picked) interf += scenario.channel.gains(u, kb) * P;
                    sc_val = scenario.channel.gains(b, kb) * P /
                             (interf + scenario.channel.noise_power_W);
                    if (best < 0 || sc_val > best_score) {
                        best = b;
                        best_score = sc_val;
                    }
                } else {
                    double cci = 0.0;
                    for (int u : picked) {
                        const int ku = strongest_unsatisfied(scenario, u, driver.residual_mbps());
                        cci += scenario.channel.gains(u, kb) * P;
                        if (ku >= 0) cci += scenario.channel.gains(b, ku) * P;
                    }
                    sc_val = cci;
                    if (best < 0 || sc_val < best_score) {
                        best = b;
                        best_score = sc_val;
                    }
                }
            }
            if (best < 0) break;
            row[best] = 1;
            picked.push_back(best);
        }
        driver.step(t, row);
    }
    EjpbtResult r = driver.finish(scheme);
    return std::move(r.solution);
}

}  // namespace

Solution run_maxsinr(const Scenario& scenario, const SolverConfig& cfg) {
    return run_greedy_beam_sets(scenario, cfg, true, "maxsinr");
}

Solution run_mincci(const Scenario& scenario, const SolverConfig& cfg) {
    return run_greedy_beam_sets(scenario, cfg, false, "mincci");
}

Solution run_alt_objective(const Scenario& scenario, Metric objective,
                           const SolverConfig& cfg) {
    PowerObjective po;
    std::string name;
    switch (objective) {
        case Metric::WorstOctr:
            po = PowerObjective::MaxMinOctr;
            name = "scheme1";
            break;
        case Metric::Unmet:
            po = PowerObjective::MinUnmet;
            name = "scheme2";
            break;
        default:
            throw std::invalid_argument("run_alt_objective: objective must be OCTR or unmet");
    }
    MatchingState init = initial_solution(scenario, cfg, nullptr, po);
    UbaResult r = run_uba(scenario, init, cfg, po);
    r.solution.scheme = name;
    return std::move(r.solution);
}

Solution run_scheme(const Scenario& scenario, const std::string& scheme,
                    const SolverConfig& cfg) {
    if (scheme == "uba") {
        MatchingState init = initial_solution(scenario, cfg);
        UbaResult r = run_uba(scenario, init, cfg);
        return std::move(r.solution);
    }
    if (scheme == "ejpbt") return run_ejpbt(scenario, cfg).solution;
    if (scheme == "bh-oma") return run_bh_oma(scenario, cfg);
    if (scheme == "1c-noma") return run_color_noma(scenario, 1, cfg);
    if (scheme == "2c-noma") return run_color_noma(scenario, 2, cfg);
    if (scheme == "4c-noma") return run_color_noma(scenario, 4, cfg);
    if (scheme == "ra") return run_ra(scenario, cfg);
    if (scheme == "maxsinr") return run_maxsinr(scenario, cfg);
    if (scheme == "mincci") return run_mincci(scenario, cfg);
    if (scheme == "scheme1") return run_alt_objective(scenario, Metric::WorstOctr, cfg);
    if (scheme == "scheme2") return run_alt_objective(scenario, Metric::Unmet, cfg);
    throw std::invalid_argument("unknown scheme: " + scheme);
}

}  // namespace bhnoma
