// Scratch harness used while bringing the solver stack up; not registered
// with ctest.
#include <cmath>
#include <cstdio>

#include "bhnoma/linkmodel.hpp"
#include "bhnoma/power_solver.hpp"
#include "bhnoma/scenario.hpp"

using namespace bhnoma;

int main() {
    // Lone terminal fixed point: |h|^2=1, p=4, sigma^2=1 -> theta=2, f = W log2 5.
    Scenario sc;
    sc.T = 1;
    sc.B0 = 1;
    sc.K0 = 1;
    sc.P_beam_W = 10.0;
    BeamGeometry bg;
    bg.beam_id = 1;
    bg.contour_radius_km = 1;
    sc.beams.push_back(bg);
    Terminal t;
    t.terminal_id = 1;
    t.home_beam = 0;
    t.demand_bps = 100.0;
    t.min_rate_bps = 0.0;
    sc.terminals.push_back(t);
    sc.channel.bandwidth_Hz = 1.0;
    sc.channel.carrier_freq_Hz = 1.0;
    sc.channel.noise_power_W = 1.0;
    sc.channel.gains.assign(1, 1, 1.0);
    sc.finalize();

    Assignment asg(1, 1, 1);
    asg.alpha(0, 0) = 1;
    asg.beta(0, 0) = 1;
    PowerPlan pp(1, 1);
    pp.p(0, 0) = 4.0;

    SolverConfig cfg;
    TransformState th = update_theta(pp, sc, asg, cfg.eval);
    std::printf("theta = %.12f (want 2)\n", th.theta(0, 0));
    bool clamped = false;
    const double f = transformed_rate(th, pp, sc, asg, 0, 0, cfg, &clamped);
    std::printf("f = %.12f (want log2 5 = %.12f), clamped=%d\n", f, std::log2(5.0), clamped);

    // One-terminal-one-slot solve: demand far above capacity => p -> P.
    Alg1Result r = run_alg1(sc, asg, PowerPlan(), cfg);
    std::printf("alg1 status=%d p=%.9f obj=%.9f\n", static_cast<int>(r.status), r.power.p(0, 0),
                r.objective);
    for (const auto& row : r.trace)
        std::printf("  iter %d obj %.12f kkt %.3e\n", row.iter, row.objective,
                    row.max_kkt_residual);

    // Overserve then equalize: demand below single-slot full-power rate.
    sc.terminals[0].demand_bps = 1.0;  // 1 bps, W=1 => p* = (2^1 - 1)*1/1 = 1
    sc.finalize();
    Alg1Result r2 = run_alg1(sc, asg, PowerPlan(), cfg);
    std::printf("equalized p=%.12f (want 1.0), obj=%.3e status=%d\n", r2.power.p(0, 0),
                r2.objective, static_cast<int>(r2.status));

    // Two-beam interference test with generated scenario.
    GeneratorSpec gs;
    gs.B = 4;
    gs.terminals_per_beam = 2;
    gs.T = 4;
    gs.B0 = 2;
    gs.K0 = 2;
    Scenario sc2 = generate_scenario(gs, 42);
    std::printf("generated: B=%d K=%d gain(0,0)=%.3e noise=%.3e\n", sc2.num_beams(),
                sc2.num_terminals(), sc2.channel.gains(0, 0), sc2.channel.noise_power_W);
    Assignment a2(sc2.num_beams(), sc2.num_terminals(), sc2.T);
    for (int t2 = 0; t2 < sc2.T; ++t2) {
        const int b1 = t2 % 4, b2 = (t2 + 2) % 4;
        a2.alpha(b1, t2) = 1;
        a2.alpha(b2, t2) = 1;
        for (int kk : sc2.beam_terminals[b1]) a2.beta(kk, t2) = 1;
        for (int kk : sc2.beam_terminals[b2]) a2.beta(kk, t2) = 1;
    }
    Alg1Result r3 = run_alg1(sc2, a2, PowerPlan(), cfg);
    std::printf("alg1 on generated: status=%d obj=%.6f iters=%zu\n", static_cast<int>(r3.status),
                r3.objective, r3.trace.size());
    for (const auto& row : r3.trace) std::printf("  obj %.6f\n", row.objective);
    Solution sol = evaluate_solution(sc2, a2, r3.power, cfg.eval);
    auto rep = check_feasibility(sc2, a2, r3.power, sol.capacities_bps);
    std::printf("feasible=%d objective=%.6f worst_octr=%.4f unmet=%.3f power=%.2f\n",
                rep.feasible, sol.objective_mbps2, sol.aux.worst_octr, sol.aux.unmet_mbps,
                sol.aux.total_power_W);
    for (int k = 0; k < sc2.num_terminals(); ++k)
        std::printf("  k=%d D=%.1f R=%.1f\n", k, to_mbps(sc2.terminals[k].demand_bps),
                    to_mbps(sol.capacities_bps[k]));
    return 0;
}
