#include "bhnoma/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bhnoma/linkmodel.hpp"
#include "bhnoma/scenario.hpp"

namespace bhnoma {

namespace {

SolverConfig scoring_config(const SolverConfig& cfg) {
    SolverConfig s = cfg;
    s.max_outer_iters = std::min(cfg.max_outer_iters, cfg.scoring_outer_iters);
    s.convergence_tol = std::max(cfg.convergence_tol, cfg.scoring_tol);
    s.inner_tol = std::max(cfg.inner_tol, cfg.scoring_gap);
    return s;
}

std::vector<double> residuals_mbps(const Scenario& sc, const std::vector<double>& caps_bps) {
    std::vector<double> r(sc.num_terminals());
    for (int k = 0; k < sc.num_terminals(); ++k)
        r[k] = std::max(to_mbps(sc.terminals[k].demand_bps) -
                            (caps_bps.empty() ? 0.0 : to_mbps(caps_bps[k])),
                        0.0);
    return r;
}

/// K0 terminals of the beam with the largest residual demand; ties go to
/// the lower index (the stronger channel).
std::vector<int> pick_by_residual(const Scenario& sc, int b,
                                  const std::vector<double>& resid) {
    std::vector<int> ks = sc.beam_terminals[b];
    std::stable_sort(ks.begin(), ks.end(),
                     [&](int a, int c) { return resid[a] > resid[c]; });
    if (static_cast<int>(ks.size()) > sc.K0) ks.resize(sc.K0);
    std::sort(ks.begin(), ks.end());
    return ks;
}

/// Clean-channel per-slot rate estimate used by construction heuristics.
double rate_estimate_mbps(const Scenario& sc, int k) {
    const int b = sc.terminals[k].home_beam;
    const double snr = sc.channel.gains(b, k) * (sc.P_beam_W / sc.K0) /
                       sc.channel.noise_power_W;
    return sc.channel.bandwidth_Hz / 1e6 * std::log2(1.0 + snr);
}

MatchingState score_state(const Scenario& sc, Assignment asg, const SolverConfig& cfg,
                          PowerObjective objective, const PowerPlan* warm) {
    MatchingState st;
    st.assignment = std::move(asg);
    const SolverConfig scfg = scoring_config(cfg);
    Alg1Result r = run_alg1(sc, st.assignment, warm ? *warm : PowerPlan(), scfg, objective);
    st.status = r.status == SolveStatus::Infeasible ? SolveStatus::Infeasible : SolveStatus::Ok;
    st.infeasible_terminal = r.most_violated_terminal;
    st.power = std::move(r.power);
    st.objective = r.objective;
    if (st.status == SolveStatus::Ok) {
        RateResult rr = compute_rates(sc, st.assignment, st.power, cfg.eval);
        st.capacities_bps = std::move(rr.capacities_bps);
    } else {
        st.capacities_bps.assign(sc.num_terminals(), 0.0);
    }
    return st;
}

bool demands_met(const Scenario& sc, const std::vector<double>& caps_bps, double tol) {
    for (int k = 0; k < sc.num_terminals(); ++k)
        if (caps_bps[k] < sc.terminals[k].demand_bps * (1.0 - tol)) return false;
    return true;
}

std::string move_string(const SwapMove& mv) {
    std::ostringstream os;
    os << (mv.kind == SwapMove::Kind::Beam ? "b" : "k") << mv.remove_a << "@t" << mv.remove_t
       << "->" << (mv.kind == SwapMove::Kind::Beam ? "b" : "k") << mv.add_a << "@t"
       << mv.add_t;
    return os.str();
}

}  // namespace

std::vector<double> default_penalty_factors(const std::vector<double>& residual_mbps) {
    std::vector<double> phi(residual_mbps.size());
    for (size_t i = 0; i < phi.size(); ++i) phi[i] = std::max(2.0 * residual_mbps[i], 1.0);
    return phi;
}

MatchingState initial_solution(const Scenario& scenario, const SolverConfig& cfg,
                               const Assignment* hint, PowerObjective objective) {
    if (hint) return score_state(scenario, *hint, cfg, objective, nullptr);

    const auto groups = build_beam_groups(scenario);
    const int G = static_cast<int>(groups.size());
    MatchingState last;
    for (int rot = 0; rot < G; ++rot) {
        Assignment asg(scenario.num_beams(), scenario.num_terminals(), scenario.T);
        std::vector<double> resid(scenario.num_terminals());
        std::vector<int> visits(scenario.num_terminals(), 0);
        for (int k = 0; k < scenario.num_terminals(); ++k)
            resid[k] = to_mbps(scenario.terminals[k].demand_bps);
        for (int t = 0; t < scenario.T; ++t) {
            const auto& grp = groups[(t + rot) % G];
            for (int b : grp) {
                asg.alpha(b, t) = 1;
                // Unserved terminals first (the rate floor needs everyone
                // on air at least once), then by residual demand.
                std::vector<int> ks = scenario.beam_terminals[b];
                std::stable_sort(ks.begin(), ks.end(), [&](int x, int y) {
                    if ((visits[x] == 0) != (visits[y] == 0)) return visits[x] == 0;
                    return resid[x] > resid[y];
                });
                if (static_cast<int>(ks.size()) > scenario.K0) ks.resize(scenario.K0);
                for (int k : ks) {
                    asg.beta(k, t) = 1;
                    ++visits[k];
                    resid[k] = std::max(resid[k] - rate_estimate_mbps(scenario, k), 0.0);
                }
            }
        }
        last = score_state(scenario, std::move(asg), cfg, objective, nullptr);
        if (last.status == SolveStatus::Ok) return last;
    }
    return last;  // infeasible after all rotations
}

std::vector<SwapMove> enumerate_beam_swaps(const MatchingState& state,
                                           const Scenario& scenario) {
    std::vector<SwapMove> out;
    const Assignment& a = state.assignment;
    const int B = scenario.num_beams();
    const int T = scenario.T;
    std::vector<int> active(T, 0);
    for (int t = 0; t < T; ++t)
        for (int b = 0; b < B; ++b) active[t] += a.alpha(b, t);

    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < B; ++b) {
            if (!a.alpha(b, t)) continue;
            for (int t2 = 0; t2 < T; ++t2) {
                const int occupancy = active[t2] - (t2 == t ? 1 : 0);
                if (occupancy + 1 > scenario.B0) continue;
                for (int b2 = 0; b2 < B; ++b2) {
                    if (a.alpha(b2, t2)) continue;
                    if (b2 == b && t2 == t) continue;
                    bool clash = false;
                    for (int bb = 0; bb < B && !clash; ++bb) {
                        if (!a.alpha(bb, t2) || (bb == b && t2 == t)) continue;
                        if (scenario.conflicts(b2, bb)) clash = true;
                    }
                    if (clash) continue;
                    out.push_back({SwapMove::Kind::Beam, b, t, b2, t2});
                }
            }
        }
    }
    return out;
}

std::vector<SwapMove> enumerate_terminal_swaps(const MatchingState& state,
                                               const Scenario& scenario) {
    std::vector<SwapMove> out;
    const Assignment& a = state.assignment;
    const int T = scenario.T;
    Grid<int> count(scenario.num_beams(), T, 0);
    for (int k = 0; k < scenario.num_terminals(); ++k)
        for (int t = 0; t < T; ++t)
            if (a.beta(k, t)) ++count(scenario.terminals[k].home_beam, t);

    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < scenario.num_terminals(); ++k) {
            if (!a.beta(k, t)) continue;
            const int b = scenario.terminals[k].home_beam;
            for (int t2 = 0; t2 < T; ++t2) {
                if (!a.alpha(b, t2)) continue;
                for (int k2 : scenario.beam_terminals[b]) {
                    if (a.beta(k2, t2)) continue;
                    if (k2 == k && t2 == t) continue;
                    const int occupancy = count(b, t2) - (t2 == t ? 1 : 0);
                    if (occupancy + 1 > scenario.K0) continue;
                    out.push_back({SwapMove::Kind::Terminal, k, t, k2, t2});
                }
            }
        }
    }
    return out;
}

namespace {

Assignment apply_swap(const Scenario& sc, const MatchingState& state, const SwapMove& mv) {
    Assignment a = state.assignment;
    if (mv.kind == SwapMove::Kind::Beam) {
        a.alpha(mv.remove_a, mv.remove_t) = 0;
        for (int k : sc.beam_terminals[mv.remove_a]) a.beta(k, mv.remove_t) = 0;
        a.alpha(mv.add_a, mv.add_t) = 1;
        const auto resid = residuals_mbps(sc, state.capacities_bps);
        for (int k : pick_by_residual(sc, mv.add_a, resid)) a.beta(k, mv.add_t) = 1;
    } else {
        a.beta(mv.remove_a, mv.remove_t) = 0;
        a.beta(mv.add_a, mv.add_t) = 1;
    }
    return a;
}

}  // namespace

UbaResult run_uba(const Scenario& scenario, const MatchingState& init_state,
                  const SolverConfig& cfg, PowerObjective objective) {
    UbaResult out;
    MatchingState state = init_state;
    if (state.status != SolveStatus::Ok) {
        out.solution.status = SolveStatus::Infeasible;
        out.solution.status_detail =
            "initial state infeasible (terminal " +
            std::to_string(state.infeasible_terminal + 1) + ")";
        return out;
    }

    const double improve_tol = 1e-9;
    int iter = 0;
    for (; iter < cfg.max_swap_iters; ++iter) {
        if (demands_met(scenario, state.capacities_bps, cfg.feas_tol)) break;
        bool any_accept = false;
        for (const bool beam_phase : {true, false}) {
            const auto pool = beam_phase ? enumerate_beam_swaps(state, scenario)
                                         : enumerate_terminal_swaps(state, scenario);
            for (const SwapMove& mv : pool) {
                Assignment trial = apply_swap(scenario, state, mv);
                MatchingState cand =
                    score_state(scenario, std::move(trial), cfg, objective, &state.power);
                SwapTraceRow row{iter + 1, beam_phase ? "beam" : "terminal",
                                 move_string(mv), state.objective, cand.objective, false};
                const bool improves =
                    cand.status == SolveStatus::Ok &&
                    cand.objective <
                        state.objective - improve_tol * std::max(std::abs(state.objective), 1.0);
                if (improves) {
                    row.accepted = true;
                    out.trace.push_back(row);
                    state = std::move(cand);
                    ++out.accepted_swaps;
                    any_accept = true;
                    break;  // first improvement ends the phase
                }
                out.trace.push_back(row);
            }
        }
        if (!any_accept) break;
    }
    out.iterations = iter;

    // Full-effort polish of the final matching.
    Alg1Result fin = run_alg1(scenario, state.assignment, state.power, cfg, objective);
    if (fin.status == SolveStatus::Infeasible) {
        out.solution.status = SolveStatus::Infeasible;
        out.solution.status_detail = "final polish infeasible";
        return out;
    }
    out.solution = evaluate_solution(scenario, state.assignment, fin.power, cfg.eval);
    out.solution.scheme = "uba";
    if (fin.status == SolveStatus::Warning) {
        out.solution.status = SolveStatus::Warning;
        out.solution.status_detail = "equalization did not fully converge";
    }
    return out;
}

StageDriver::StageDriver(const Scenario& scenario, const SolverConfig& cfg)
    : sc_(scenario),
      cfg_(cfg),
      asg_(scenario.num_beams(), scenario.num_terminals(), scenario.T),
      power_(scenario.num_terminals(), scenario.T) {
    resid_mbps_.resize(sc_.num_terminals());
    past_mbps_.assign(sc_.num_terminals(), 0.0);
    for (int k = 0; k < sc_.num_terminals(); ++k)
        resid_mbps_[k] = to_mbps(sc_.terminals[k].demand_bps);
}

void StageDriver::step(int t, const std::vector<uint8_t>& alpha_row,
                       bool select_by_residual) {
    bool any = false;
    for (int b = 0; b < sc_.num_beams(); ++b) any = any || alpha_row[b];
    if (!any) {
        ++idle_slots_;
        return;
    }
    const auto phi = default_penalty_factors(resid_mbps_);
    StageResult rel;
    if (!select_by_residual) {
        rel = solve_relaxed_stage(sc_, resid_mbps_, past_mbps_, phi, cfg_, &alpha_row);
        if (rel.status != SolveStatus::Ok) {
            ++idle_slots_;
            warnings_.push_back("slot " + std::to_string(t + 1) + " left idle");
            return;
        }
    }
    auto floor_unmet = [&](int k) {
        return past_mbps_[k] < to_mbps(sc_.terminals[k].min_rate_bps);
    };
    std::vector<int> chosen;
    for (int b = 0; b < sc_.num_beams(); ++b) {
        if (!alpha_row[b]) continue;
        asg_.alpha(b, t) = 1;
        // Largest fractional schedule (or residual demand) wins, except that
        // terminals still short of their rate floor go first; the smoothed
        // penalty alone cannot force discrete coverage in a short window.
        std::vector<int> ks = sc_.beam_terminals[b];
        std::stable_sort(ks.begin(), ks.end(), [&](int x, int y) {
            if (floor_unmet(x) != floor_unmet(y)) return floor_unmet(x);
            if (select_by_residual) return resid_mbps_[x] > resid_mbps_[y];
            return rel.beta_bar[x] > rel.beta_bar[y];
        });
        if (static_cast<int>(ks.size()) > sc_.K0) ks.resize(sc_.K0);
        for (int k : ks) chosen.push_back(k);
    }
    std::sort(chosen.begin(), chosen.end());
    StagePowerResult sp = solve_stage_power(sc_, chosen, resid_mbps_, past_mbps_, phi, cfg_);
    for (int k : chosen) {
        asg_.beta(k, t) = 1;
        power_.p(k, t) = sp.power_W[k];
        resid_mbps_[k] = std::max(resid_mbps_[k] - sp.rate_mbps[k], 0.0);
        past_mbps_[k] += sp.rate_mbps[k];
    }
}

EjpbtResult StageDriver::finish(const std::string& scheme) {
    EjpbtResult out;
    out.idle_slots = idle_slots_;
    out.warnings = warnings_;
    out.stage_power = power_;
    Alg1Result fin = run_alg1(sc_, asg_, power_, cfg_);
    if (fin.status == SolveStatus::Infeasible) {
        out.solution.status = SolveStatus::Infeasible;
        out.solution.status_detail = "rate floor unattainable for terminal " +
                                     std::to_string(fin.most_violated_terminal + 1);
        out.solution.scheme = scheme;
        return out;
    }
    out.solution = evaluate_solution(sc_, asg_, fin.power, cfg_.eval);
    out.solution.scheme = scheme;
    if (fin.status == SolveStatus::Warning) out.solution.status = SolveStatus::Warning;
    return out;
}

EjpbtResult run_ejpbt(const Scenario& scenario, const SolverConfig& cfg) {
    const auto groups = build_beam_groups(scenario);
    StageDriver driver(scenario, cfg);

    for (int t = 0; t < scenario.T; ++t) {
        const auto phi = default_penalty_factors(driver.residual_mbps());
        StageResult rel =
            solve_relaxed_stage(scenario, driver.residual_mbps(), driver.past_mbps(), phi, cfg);
        std::vector<uint8_t> row(scenario.num_beams(), 0);
        if (rel.status == SolveStatus::Ok) {
            // Group with the largest fractional illumination mass; ties to
            // the lowest group index.
            int best = 0;
            double best_score = -1.0;
            for (size_t j = 0; j < groups.size(); ++j) {
                double s = 0.0;
                for (int b : groups[j]) s += rel.alpha_bar[b];
                if (s > best_score + 1e-12) {
                    best_score = s;
                    best = static_cast<int>(j);
                }
            }
            for (int b : groups[best]) row[b] = 1;
        }
        driver.step(t, row);
    }
    return driver.finish("ejpbt");
}

EjpbtResult run_fixed_illumination(const Scenario& scenario, const Grid<uint8_t>& alpha,
                                   const SolverConfig& cfg, const std::string& scheme) {
    StageDriver driver(scenario, cfg);
    for (int t = 0; t < scenario.T; ++t) {
        std::vector<uint8_t> row(scenario.num_beams());
        for (int b = 0; b < scenario.num_beams(); ++b) row[b] = alpha(b, t);
        driver.step(t, row);
    }
    return driver.finish(scheme);
}

}  // namespace bhnoma
