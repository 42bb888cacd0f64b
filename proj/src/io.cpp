#include "bhnoma/io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace bhnoma {

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

/// at() with a field-path error message.
template <typename T>
T field(const json& j, const std::string& name, const std::string& ctx) {
    if (!j.contains(name))
        throw std::invalid_argument("missing field: " + ctx + name);
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("bad value for field: " + ctx + name);
    }
}

template <typename T>
T field_or(const json& j, const std::string& name, T fallback) {
    if (!j.contains(name)) return fallback;
    return j.at(name).get<T>();
}

}  // namespace

std::string scenario_to_json(const Scenario& sc) {
    json j;
    j["T"] = sc.T;
    j["B0"] = sc.B0;
    j["K0"] = sc.K0;
    j["P_beam_W"] = sc.P_beam_W;
    j["seed"] = sc.seed;
    j["beams"] = json::array();
    for (const auto& b : sc.beams)
        j["beams"].push_back({{"beam_id", b.beam_id},
                              {"boresight_lat_deg", b.boresight_lat_deg},
                              {"boresight_lon_deg", b.boresight_lon_deg},
                              {"contour_radius_km", b.contour_radius_km},
                              {"peak_tx_gain_dBi", b.peak_tx_gain_dBi}});
    j["terminals"] = json::array();
    for (const auto& t : sc.terminals)
        j["terminals"].push_back({{"terminal_id", t.terminal_id},
                                  {"home_beam", t.home_beam + 1},
                                  {"lat_deg", t.lat_deg},
                                  {"lon_deg", t.lon_deg},
                                  {"rx_gain_dBi", t.rx_gain_dBi},
                                  {"demand_bps", t.demand_bps},
                                  {"min_rate_bps", t.min_rate_bps}});
    json gains = json::array();
    for (int b = 0; b < sc.num_beams(); ++b) {
        json row = json::array();
        for (int k = 0; k < sc.num_terminals(); ++k) row.push_back(sc.channel.gains(b, k));
        gains.push_back(std::move(row));
    }
    j["channel"] = {{"bandwidth_Hz", sc.channel.bandwidth_Hz},
                    {"carrier_freq_Hz", sc.channel.carrier_freq_Hz},
                    {"noise_power_W", sc.channel.noise_power_W},
                    {"gains", std::move(gains)}};
    j["conflicts"] = json::array();
    for (const auto& pr : sc.conflict_set)
        j["conflicts"].push_back({pr.first + 1, pr.second + 1});
    return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scenario JSON parse error: ") + e.what());
    }
    Scenario sc;
    sc.T = field<int>(j, "T", "");
    sc.B0 = field<int>(j, "B0", "");
    sc.K0 = field<int>(j, "K0", "");
    sc.P_beam_W = field<double>(j, "P_beam_W", "");
    sc.seed = field_or<uint64_t>(j, "seed", 0);

    for (const auto& bj : field<json>(j, "beams", "")) {
        BeamGeometry b;
        b.beam_id = field<int>(bj, "beam_id", "beams[].");
        b.boresight_lat_deg = field<double>(bj, "boresight_lat_deg", "beams[].");
        b.boresight_lon_deg = field<double>(bj, "boresight_lon_deg", "beams[].");
        b.contour_radius_km = field<double>(bj, "contour_radius_km", "beams[].");
        b.peak_tx_gain_dBi = field<double>(bj, "peak_tx_gain_dBi", "beams[].");
        sc.beams.push_back(b);
    }
    std::sort(sc.beams.begin(), sc.beams.end(),
              [](const auto& a, const auto& b) { return a.beam_id < b.beam_id; });

    for (const auto& tj : field<json>(j, "terminals", "")) {
        Terminal t;
        t.terminal_id = field<int>(tj, "terminal_id", "terminals[].");
        t.home_beam = field<int>(tj, "home_beam", "terminals[].") - 1;
        t.lat_deg = field<double>(tj, "lat_deg", "terminals[].");
        t.lon_deg = field<double>(tj, "lon_deg", "terminals[].");
        t.rx_gain_dBi = field<double>(tj, "rx_gain_dBi", "terminals[].");
        t.demand_bps = field<double>(tj, "demand_bps", "terminals[].");
        t.min_rate_bps = field<double>(tj, "min_rate_bps", "terminals[].");
        sc.terminals.push_back(t);
    }

    const json cj = field<json>(j, "channel", "");
    sc.channel.bandwidth_Hz = field<double>(cj, "bandwidth_Hz", "channel.");
    sc.channel.carrier_freq_Hz = field<double>(cj, "carrier_freq_Hz", "channel.");
    sc.channel.noise_power_W = field<double>(cj, "noise_power_W", "channel.");

    const int B = sc.num_beams();
    const int K = sc.num_terminals();
    if (cj.contains("gains")) {
        const auto& gj = cj.at("gains");
        if (static_cast<int>(gj.size()) != B)
            throw std::invalid_argument("channel.gains must have one row per beam");
        sc.channel.gains.assign(B, K, 0.0);
        for (int b = 0; b < B; ++b) {
            if (static_cast<int>(gj[b].size()) != K)
                throw std::invalid_argument("channel.gains row length mismatch");
            for (int k = 0; k < K; ++k) sc.channel.gains(b, k) = gj[b][k].get<double>();
        }
        // Restore the SIC ordering invariant for externally supplied gains.
        std::vector<int> order(K);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
            const auto& ta = sc.terminals[a];
            const auto& tc = sc.terminals[c];
            if (ta.home_beam != tc.home_beam) return ta.home_beam < tc.home_beam;
            return sc.channel.gains(ta.home_beam, a) > sc.channel.gains(tc.home_beam, c);
        });
        std::vector<Terminal> terms(K);
        Grid<double> gg(B, K, 0.0);
        for (int k = 0; k < K; ++k) {
            terms[k] = sc.terminals[order[k]];
            terms[k].terminal_id = k + 1;
            for (int b = 0; b < B; ++b) gg(b, k) = sc.channel.gains(b, order[k]);
        }
        sc.terminals = std::move(terms);
        sc.channel.gains = std::move(gg);
    } else {
        RadioParams radio;
        radio.bandwidth_Hz = sc.channel.bandwidth_Hz;
        radio.carrier_freq_Hz = sc.channel.carrier_freq_Hz;
        radio.noise_power_W = sc.channel.noise_power_W;
        if (j.contains("radio")) {
            const auto& rj = j.at("radio");
            radio.satellite_lon_deg = field_or<double>(rj, "satellite_lon_deg", radio.satellite_lon_deg);
            radio.satellite_height_km =
                field_or<double>(rj, "satellite_height_km", radio.satellite_height_km);
            radio.noise_temperature_K =
                field_or<double>(rj, "noise_temperature_K", radio.noise_temperature_K);
        }
        sc.channel = build_channel_matrix(sc.beams, sc.terminals, radio);
        sc.channel.noise_power_W = radio.noise_power_W;
    }

    for (const auto& pj : field_or<json>(j, "conflicts", json::array()))
        sc.conflict_set.emplace_back(pj[0].get<int>() - 1, pj[1].get<int>() - 1);

    sc.finalize();
    return sc;
}

void save_scenario(const Scenario& scenario, const std::string& path) {
    spit(path, scenario_to_json(scenario));
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(slurp(path)); }

GeneratorSpec generator_spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("generator spec parse error: ") + e.what());
    }
    GeneratorSpec g;
    g.B = field_or(j, "B", g.B);
    g.terminals_per_beam = field_or(j, "terminals_per_beam", g.terminals_per_beam);
    g.T = field_or(j, "T", g.T);
    g.B0 = field_or(j, "B0", g.B0);
    g.K0 = field_or(j, "K0", g.K0);
    g.P_beam_W = field_or(j, "P_beam_W", g.P_beam_W);
    g.contour_radius_km = field_or(j, "contour_radius_km", g.contour_radius_km);
    g.beam_spacing_radii = field_or(j, "beam_spacing_radii", g.beam_spacing_radii);
    g.conflict_radius_km = field_or(j, "conflict_radius_km", g.conflict_radius_km);
    g.peak_tx_gain_dBi = field_or(j, "peak_tx_gain_dBi", g.peak_tx_gain_dBi);
    g.demand_min_bps = field_or(j, "demand_min_bps", g.demand_min_bps);
    g.demand_max_bps = field_or(j, "demand_max_bps", g.demand_max_bps);
    g.min_rate_bps = field_or(j, "min_rate_bps", g.min_rate_bps);
    g.center_lat_deg = field_or(j, "center_lat_deg", g.center_lat_deg);
    g.center_lon_deg = field_or(j, "center_lon_deg", g.center_lon_deg);
    g.radio.bandwidth_Hz = field_or(j, "bandwidth_Hz", g.radio.bandwidth_Hz);
    g.radio.carrier_freq_Hz = field_or(j, "carrier_freq_Hz", g.radio.carrier_freq_Hz);
    g.radio.rx_gain_dBi = field_or(j, "rx_gain_dBi", g.radio.rx_gain_dBi);
    g.radio.noise_power_W = field_or(j, "noise_power_W", g.radio.noise_power_W);
    g.radio.satellite_lon_deg = field_or(j, "satellite_lon_deg", g.radio.satellite_lon_deg);
    g.radio.satellite_height_km =
        field_or(j, "satellite_height_km", g.radio.satellite_height_km);
    return g;
}

std::string generator_spec_to_json(const GeneratorSpec& g) {
    json j;
    j["B"] = g.B;
    j["terminals_per_beam"] = g.terminals_per_beam;
    j["T"] = g.T;
    j["B0"] = g.B0;
    j["K0"] = g.K0;
    j["P_beam_W"] = g.P_beam_W;
    j["contour_radius_km"] = g.contour_radius_km;
    j["beam_spacing_radii"] = g.beam_spacing_radii;
    j["conflict_radius_km"] = g.conflict_radius_km;
    j["peak_tx_gain_dBi"] = g.peak_tx_gain_dBi;
    j["demand_min_bps"] = g.demand_min_bps;
    j["demand_max_bps"] = g.demand_max_bps;
    j["min_rate_bps"] = g.min_rate_bps;
    j["center_lat_deg"] = g.center_lat_deg;
    j["center_lon_deg"] = g.center_lon_deg;
    j["bandwidth_Hz"] = g.radio.bandwidth_Hz;
    j["carrier_freq_Hz"] = g.radio.carrier_freq_Hz;
    j["rx_gain_dBi"] = g.radio.rx_gain_dBi;
    j["noise_power_W"] = g.radio.noise_power_W;
    j["satellite_lon_deg"] = g.radio.satellite_lon_deg;
    j["satellite_height_km"] = g.radio.satellite_height_km;
    return j.dump(2) + "\n";
}

SolverConfig solver_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("solver config parse error: ") + e.what());
    }
    SolverConfig c;
    c.max_outer_iters = field_or(j, "max_outer_iters", c.max_outer_iters);
    c.convergence_tol = field_or(j, "convergence_tol", c.convergence_tol);
    c.inner_tol = field_or(j, "inner_tol", c.inner_tol);
    c.lm_tol = field_or(j, "lm_tol", c.lm_tol);
    c.lm_max_iters = field_or(j, "lm_max_iters", c.lm_max_iters);
    c.eps_log = field_or(j, "eps_log", c.eps_log);
    c.rmin_penalty = field_or(j, "rmin_penalty", c.rmin_penalty);
    c.feas_tol = field_or(j, "feas_tol", c.feas_tol);
    c.max_swap_iters = field_or(j, "max_swap_iters", c.max_swap_iters);
    c.bnb_node_budget = field_or(j, "bnb_node_budget", c.bnb_node_budget);
    c.max_newton_steps = field_or(j, "max_newton_steps", c.max_newton_steps);
    c.scoring_outer_iters = field_or(j, "scoring_outer_iters", c.scoring_outer_iters);
    c.scoring_tol = field_or(j, "scoring_tol", c.scoring_tol);
    c.scoring_gap = field_or(j, "scoring_gap", c.scoring_gap);
    c.seed = field_or<uint64_t>(j, "seed", c.seed);
    c.eval.sic_error_ratio = field_or(j, "eta", c.eval.sic_error_ratio);
    return c;
}

void apply_gain_table_csv(Scenario& scenario, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("beam_id,terminal_id,gain_linear", 0) != 0)
        throw std::invalid_argument("gain table must start with header "
                                    "beam_id,terminal_id,gain_linear");
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string sb, sk, sg;
        if (!std::getline(ss, sb, ',') || !std::getline(ss, sk, ',') || !std::getline(ss, sg))
            throw std::invalid_argument("gain table line " + std::to_string(lineno) +
                                        ": expected 3 columns");
        const int b = std::stoi(sb) - 1;
        const int k = std::stoi(sk) - 1;
        const double g = std::stod(sg);
        if (b < 0 || b >= scenario.num_beams() || k < 0 || k >= scenario.num_terminals())
            throw std::invalid_argument("gain table line " + std::to_string(lineno) +
                                        ": index out of range");
        scenario.channel.gains(b, k) = g;
    }
    // Reordering keeps the SIC invariant; round-trip through JSON reuses the
    // normalization there.
    Scenario fixed = scenario_from_json(scenario_to_json(scenario));
    scenario = std::move(fixed);
}

void write_solution_csv(const Scenario& scenario, const Solution& solution,
                        const EvalConfig& eval, const std::string& path) {
    std::ostringstream os;
    os << "slot,beam,terminal,power_W,sinr,rate_bps\n";
    os.precision(17);
    for (int t = 0; t < scenario.T; ++t)
        for (int k = 0; k < scenario.num_terminals(); ++k) {
            if (!solution.assignment.beta(k, t)) continue;
            const double sinr =
                compute_sinr(scenario, solution.assignment, solution.power, t, k, eval);
            os << t + 1 << ',' << scenario.terminals[k].home_beam + 1 << ',' << k + 1 << ','
               << solution.power.p(k, t) << ',' << sinr << ','
               << solution.per_slot_rates_bps(k, t) << "\n";
        }
    spit(path, os.str());
}

LoadedSolution read_solution_csv(const Scenario& scenario, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    LoadedSolution out;
    out.assignment = Assignment(scenario.num_beams(), scenario.num_terminals(), scenario.T);
    out.power = PowerPlan(scenario.num_terminals(), scenario.T);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string c[6];
        for (int i = 0; i < 6; ++i) std::getline(ss, c[i], ',');
        const int t = std::stoi(c[0]) - 1;
        const int b = std::stoi(c[1]) - 1;
        const int k = std::stoi(c[2]) - 1;
        out.assignment.alpha(b, t) = 1;
        out.assignment.beta(k, t) = 1;
        out.power.p(k, t) = std::stod(c[3]);
    }
    return out;
}

void write_metrics_csv(const Solution& solution, const std::string& path,
                       const std::vector<std::pair<std::string, double>>& extra) {
    std::ostringstream os;
    os.precision(17);
    os << "metric,value\n";
    os << "sum_squared_gap_mbps2," << solution.objective_mbps2 << "\n";
    os << "worst_octr," << solution.aux.worst_octr << "\n";
    os << "unmet_mbps," << solution.aux.unmet_mbps << "\n";
    os << "total_power_W," << solution.aux.total_power_W << "\n";
    os << "runtime_s," << solution.runtime_s << "\n";
    for (const auto& [name, value] : extra) os << name << ',' << value << "\n";
    spit(path, os.str());
}

void write_alg1_trace_csv(const std::vector<Alg1TraceRow>& trace, const std::string& path) {
    std::ostringstream os;
    os.precision(17);
    os << "iter,objective,max_kkt_residual,clamped_terms\n";
    for (const auto& r : trace)
        os << r.iter << ',' << r.objective << ',' << r.max_kkt_residual << ','
           << r.clamped_terms << "\n";
    spit(path, os.str());
}

void write_swap_trace_csv(const std::vector<SwapTraceRow>& trace, const std::string& path) {
    std::ostringstream os;
    os.precision(17);
    os << "iter,phase,move,objective_before,objective_after,accepted\n";
    for (const auto& r : trace)
        os << r.iter << ',' << r.phase << ',' << r.move << ',' << r.objective_before << ','
           << r.objective_after << ',' << (r.accepted ? 1 : 0) << "\n";
    spit(path, os.str());
}

}  // namespace bhnoma
