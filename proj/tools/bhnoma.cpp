// Experiment runner for the beam-hopping NOMA toolkit: scenario generation,
// solver dispatch, seeded sweeps with CSV output.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "bhnoma/benchmarks.hpp"
#include "bhnoma/bounding.hpp"
#include "bhnoma/io.hpp"
#include "bhnoma/linkmodel.hpp"
#include "bhnoma/scenario.hpp"
#include "bhnoma/schedulers.hpp"

namespace fs = std::filesystem;
using namespace bhnoma;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

int log_level() {
    const char* env = std::getenv("BHNOMA_LOG");
    if (!env) return 0;
    const std::string v = env;
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[bhnoma] %s\n", msg.c_str());
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_generate(const std::string& spec_path, const std::string& out_path, uint64_t seed,
                 bool seed_given) {
    GeneratorSpec spec;
    if (!spec_path.empty()) spec = generator_spec_from_json(slurp_file(spec_path));
    const uint64_t use_seed = seed_given ? seed : 1;
    Scenario sc = generate_scenario(spec, use_seed);
    save_scenario(sc, out_path);
    log_info("wrote " + out_path);
    return kExitOk;
}

struct RunOutcome {
    Solution solution;
    std::vector<Alg1TraceRow> alg1_trace;
    std::vector<SwapTraceRow> swap_trace;
    double lba_lower = -1.0;
    int lba_nodes = 0;
    std::string lba_status;
};

RunOutcome run_algo(const Scenario& sc, const std::string& algo, const SolverConfig& cfg) {
    RunOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    if (algo == "lba") {
        LbaResult lb = solve_lba(sc, cfg);
        out.lba_lower = lb.lower_bound_mbps2;
        out.lba_nodes = lb.nodes_explored;
        out.lba_status = status_name(lb.status);
        if (lb.has_incumbent)
            out.solution = lb.relaxed;
        else
            out.solution.status = lb.status;
        out.solution.scheme = "lba";
    } else if (algo == "uba") {
        MatchingState init = initial_solution(sc, cfg);
        UbaResult r = run_uba(sc, init, cfg);
        out.solution = std::move(r.solution);
        out.swap_trace = std::move(r.trace);
    } else {
        out.solution = run_scheme(sc, algo, cfg);
    }
    out.solution.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

int cmd_solve(const std::string& scenario_path, const std::string& algo,
              const std::string& config_path, const std::string& gains_path,
              const std::string& out_dir) {
    Scenario sc = load_scenario(scenario_path);
    if (!gains_path.empty()) apply_gain_table_csv(sc, gains_path);
    SolverConfig cfg;
    if (!config_path.empty()) cfg = solver_config_from_json(slurp_file(config_path));

    fs::create_directories(out_dir);
    RunOutcome out = run_algo(sc, algo, cfg);

    std::vector<std::pair<std::string, double>> extra;
    if (algo == "lba") {
        extra.push_back({"lower_bound_mbps2", out.lba_lower});
        extra.push_back({"nodes_explored", static_cast<double>(out.lba_nodes)});
    }
    write_metrics_csv(out.solution, out_dir + "/metrics.csv", extra);
    if (out.solution.status == SolveStatus::Infeasible) {
        log_info("infeasible: " + out.solution.status_detail);
        return kExitInfeasible;
    }
    write_solution_csv(sc, out.solution, cfg.eval, out_dir + "/solution.csv");
    if (!out.swap_trace.empty())
        write_swap_trace_csv(out.swap_trace, out_dir + "/trace.csv");
    else {
        // Power-solver trace of the final assignment for the record.
        Alg1Result tr = run_alg1(sc, out.solution.assignment, out.solution.power, cfg);
        write_alg1_trace_csv(tr.trace, out_dir + "/trace.csv");
    }
    log_info("wrote " + out_dir + "/{solution,metrics,trace}.csv");
    return kExitOk;
}

struct SweepRow {
    std::string scheme;
    std::string param;
    double value = 0.0;
    uint64_t seed = 0;
    Solution solution;
    std::string error;
};

int cmd_sweep(const std::string& spec_path, const std::string& out_dir, int jobs,
              int seeds_override) {
    const json spec = json::parse(slurp_file(spec_path));
    fs::create_directories(out_dir);

    const auto schemes = spec.at("schemes").get<std::vector<std::string>>();
    std::string param = "none";
    std::vector<double> grid{0.0};
    if (spec.contains("sweep")) {
        param = spec.at("sweep").at("param").get<std::string>();
        grid = spec.at("sweep").at("grid").get<std::vector<double>>();
    }
    if (grid.empty()) throw std::invalid_argument("sweep grid must be nonempty");
    int seed_count = spec.contains("seeds") ? spec.at("seeds").at("count").get<int>() : 1;
    if (seeds_override > 0) seed_count = seeds_override;
    const uint64_t base_seed =
        spec.contains("seeds") ? spec.at("seeds").at("base").get<uint64_t>() : 1;

    SolverConfig base_cfg;
    if (spec.contains("config")) base_cfg = solver_config_from_json(spec.at("config").dump());

    GeneratorSpec gen;
    std::string scenario_file;
    if (spec.contains("scenario")) {
        const auto& sj = spec.at("scenario");
        if (sj.contains("file"))
            scenario_file = sj.at("file").get<std::string>();
        else if (sj.contains("generator"))
            gen = generator_spec_from_json(sj.at("generator").dump());
    }

    // One work item per (scheme, grid point, seed).
    std::vector<SweepRow> rows;
    for (const auto& scheme : schemes)
        for (double value : grid)
            for (int i = 0; i < seed_count; ++i)
                rows.push_back({scheme, param, value, base_seed ^ static_cast<uint64_t>(i),
                                {}, {}});

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= rows.size()) return;
            SweepRow& row = rows[i];
            try {
                GeneratorSpec g = gen;
                SolverConfig cfg = base_cfg;
                if (row.param == "eta") cfg.eval.sic_error_ratio = row.value;
                if (row.param == "demand_mean") {
                    const double base_mean = 0.5 * (g.demand_min_bps + g.demand_max_bps);
                    const double f = row.value * 1e6 / base_mean;
                    g.demand_min_bps *= f;
                    g.demand_max_bps *= f;
                }
                if (row.param == "K0") g.K0 = static_cast<int>(row.value);
                if (row.param == "B0") g.B0 = static_cast<int>(row.value);
                Scenario sc;
                if (!scenario_file.empty()) {
                    sc = load_scenario(scenario_file);
                    if (row.param == "K0") sc.K0 = static_cast<int>(row.value);
                    if (row.param == "B0") sc.B0 = static_cast<int>(row.value);
                    if (row.param == "demand_mean") {
                        double mean = 0.0;
                        for (const auto& t : sc.terminals) mean += t.demand_bps;
                        mean /= sc.num_terminals();
                        for (auto& t : sc.terminals)
                            t.demand_bps *= row.value * 1e6 / mean;
                    }
                    sc.finalize();
                } else {
                    sc = generate_scenario(g, row.seed);
                }
                const auto t0 = std::chrono::steady_clock::now();
                row.solution = run_scheme(sc, row.scheme, cfg);
                row.solution.runtime_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const int nworkers = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int i = 0; i < nworkers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // Raw rows.
    std::ostringstream raw;
    raw.precision(17);
    raw << "scheme,param,value,seed,status,sum_sq_gap_Mbps2,worst_octr,unmet_Mbps,"
           "total_power_W,runtime_s\n";
    for (const auto& row : rows) {
        raw << row.scheme << ',' << row.param << ',' << row.value << ',' << row.seed << ',';
        if (!row.error.empty())
            raw << "error,,,,,\n";
        else
            raw << status_name(row.solution.status) << ',' << row.solution.objective_mbps2
                << ',' << row.solution.aux.worst_octr << ',' << row.solution.aux.unmet_mbps
                << ',' << row.solution.aux.total_power_W << ',' << row.solution.runtime_s
                << "\n";
    }
    std::ofstream(out_dir + "/sweep_raw.csv") << raw.str();

    // Mean / stderr aggregate per (scheme, point).
    std::ostringstream agg;
    agg.precision(17);
    agg << "scheme,param,value,n,mean_sum_sq_gap_Mbps2,stderr_sum_sq_gap_Mbps2,"
           "mean_unmet_Mbps,mean_worst_octr\n";
    for (const auto& scheme : schemes)
        for (double value : grid) {
            std::vector<const SweepRow*> group;
            for (const auto& row : rows)
                if (row.scheme == scheme && row.value == value && row.error.empty() &&
                    row.solution.status != SolveStatus::Infeasible)
                    group.push_back(&row);
            const int n = static_cast<int>(group.size());
            double mean = 0.0, var = 0.0, munmet = 0.0, moctr = 0.0;
            for (const auto* r : group) {
                mean += r->solution.objective_mbps2;
                munmet += r->solution.aux.unmet_mbps;
                moctr += r->solution.aux.worst_octr;
            }
            if (n > 0) {
                mean /= n;
                munmet /= n;
                moctr /= n;
                for (const auto* r : group)
                    var += (r->solution.objective_mbps2 - mean) *
                           (r->solution.objective_mbps2 - mean);
                var = n > 1 ? var / (n - 1) : 0.0;
            }
            agg << scheme << ',' << param << ',' << value << ',' << n << ',' << mean << ','
                << (n > 0 ? std::sqrt(var / std::max(n, 1)) : 0.0) << ',' << munmet << ','
                << moctr << "\n";
        }
    std::ofstream(out_dir + "/sweep_summary.csv") << agg.str();
    log_info("wrote " + out_dir + "/sweep_{raw,summary}.csv");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beam-hopping NOMA resource allocation toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_path = "scenario.json";
    uint64_t seed = 1;
    bool seed_given = false;
    auto* gen = app.add_subcommand("generate", "Synthesize a scenario file");
    gen->add_option("--spec", spec_path, "Generator spec JSON (defaults apply)");
    gen->add_option("--out", out_path, "Output scenario path");
    gen->add_option("--seed", seed, "Generator seed")->each([&](const std::string&) {
        seed_given = true;
    });

    std::string scenario_path, algo = "uba", config_path, gains_path, out_dir = "out";
    auto* solve = app.add_subcommand("solve", "Run one scheme on a scenario");
    solve->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    solve->add_option("--algo", algo,
                      "uba|ejpbt|lba|bh-oma|1c-noma|2c-noma|4c-noma|ra|maxsinr|mincci|"
                      "scheme1|scheme2");
    solve->add_option("--config", config_path, "Solver config JSON");
    solve->add_option("--gains", gains_path, "Gain table CSV overriding the channel");
    solve->add_option("--out", out_dir, "Output directory");

    std::string sweep_spec, sweep_out = "sweep";
    int jobs = 1, seeds_override = 0;
    auto* sweep = app.add_subcommand("sweep", "Seeded experiment sweep");
    sweep->add_option("--spec", sweep_spec, "Experiment spec JSON")->required();
    sweep->add_option("--out", sweep_out, "Output directory");
    sweep->add_option("--jobs", jobs, "Worker threads");
    sweep->add_option("--seeds", seeds_override, "Override seed count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(spec_path, out_path, seed, seed_given);
        if (solve->parsed())
            return cmd_solve(scenario_path, algo, config_path, gains_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(sweep_spec, sweep_out, jobs, seeds_override);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}
