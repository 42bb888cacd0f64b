#include "bhnoma/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "bhnoma/rng.hpp"

namespace bhnoma {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = M_PI / 180.0;

struct Vec3 {
    double x, y, z;
};

Vec3 ecef_km(double lat_deg, double lon_deg, double radius_km) {
    const double lat = lat_deg * kDegToRad;
    const double lon = lon_deg * kDegToRad;
    return {radius_km * std::cos(lat) * std::cos(lon),
            radius_km * std::cos(lat) * std::sin(lon), radius_km * std::sin(lat)};
}

Vec3 sub(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

double angle_between(const Vec3& a, const Vec3& b) {
    const double c = (a.x * b.x + a.y * b.y + a.z * b.z) / (norm(a) * norm(b));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

Vec3 satellite_pos(const RadioParams& radio) {
    return ecef_km(0.0, radio.satellite_lon_deg, kEarthRadiusKm + radio.satellite_height_km);
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Off-boresight angle at the satellite between the beam center and a
/// ground point, and the contour half-angle of the beam.
void off_boresight(const BeamGeometry& beam, double lat_deg, double lon_deg,
                   const RadioParams& radio, double& theta, double& theta_contour) {
    const Vec3 sat = satellite_pos(radio);
    const Vec3 center = ecef_km(beam.boresight_lat_deg, beam.boresight_lon_deg, kEarthRadiusKm);
    const Vec3 point = ecef_km(lat_deg, lon_deg, kEarthRadiusKm);
    // Contour reference: a point contour_radius_km north of boresight.
    const double dlat = beam.contour_radius_km / 111.32;
    const Vec3 edge =
        ecef_km(beam.boresight_lat_deg + dlat, beam.boresight_lon_deg, kEarthRadiusKm);
    theta = angle_between(sub(center, sat), sub(point, sat));
    theta_contour = angle_between(sub(center, sat), sub(edge, sat));
}

}  // namespace

void Scenario::finalize() {
    const int B = num_beams();
    const int K = num_terminals();
    if (B == 0) throw std::invalid_argument("scenario: no beams");
    if (T <= 0 || B0 <= 0 || K0 <= 0) throw std::invalid_argument("scenario: T, B0, K0 must be positive");
    if (B0 > B) throw std::invalid_argument("scenario: B0 exceeds beam count");
    if (P_beam_W <= 0.0) throw std::invalid_argument("scenario: nonpositive power budget");
    if (channel.gains.rows() != B || channel.gains.cols() != K)
        throw std::invalid_argument("scenario: gain matrix shape mismatch");
    for (int b = 0; b < B; ++b)
        if (beams[b].beam_id != b + 1)
            throw std::invalid_argument("scenario: beam ids must be contiguous from 1");
    for (const auto& g : channel.gains.raw())
        if (!(g >= 0.0) || !std::isfinite(g))
            throw std::invalid_argument("scenario: gains must be finite and nonnegative");

    beam_terminals.assign(B, {});
    for (int k = 0; k < K; ++k) {
        const auto& t = terminals[k];
        if (t.home_beam < 0 || t.home_beam >= B)
            throw std::invalid_argument("scenario: terminal home beam out of range");
        if (t.min_rate_bps >= t.demand_bps)
            throw std::invalid_argument("scenario: min rate must be below demand");
        beam_terminals[t.home_beam].push_back(k);
    }
    // SIC order: indices within each beam ascend while own-beam gain descends.
    for (int b = 0; b < B; ++b) {
        const auto& ks = beam_terminals[b];
        for (size_t i = 0; i + 1 < ks.size(); ++i) {
            if (ks[i + 1] != ks[i] + 1)
                throw std::invalid_argument("scenario: terminals not beam-major ordered");
            if (channel.gains(b, ks[i]) < channel.gains(b, ks[i + 1]))
                throw std::invalid_argument("scenario: in-beam gains not descending");
        }
    }
    for (auto& pr : conflict_set) {
        if (pr.first > pr.second) std::swap(pr.first, pr.second);
        if (pr.first == pr.second) throw std::invalid_argument("scenario: self conflict pair");
        if (pr.first < 0 || pr.second >= B)
            throw std::invalid_argument("scenario: conflict pair out of range");
    }
    std::sort(conflict_set.begin(), conflict_set.end());
    conflict_set.erase(std::unique(conflict_set.begin(), conflict_set.end()),
                       conflict_set.end());
}

double channel_gain(double g_tx_linear, double g_rx_linear, const RadioParams& radio,
                    double distance_m) {
    if (!(distance_m > 0.0) || !(radio.carrier_freq_Hz > 0.0) || !(radio.bandwidth_Hz > 0.0) ||
        !(radio.noise_temperature_K > 0.0))
        throw std::invalid_argument("channel_gain: distances and frequencies must be positive");
    const double noise_norm = radio.boltzmann * radio.noise_temperature_K * radio.bandwidth_Hz;
    const double fspl_amp =
        radio.light_speed_mps / (4.0 * M_PI * distance_m * radio.carrier_freq_Hz);
    return g_tx_linear * g_rx_linear / noise_norm * fspl_amp * fspl_amp;
}

double synth_tx_gain(const BeamGeometry& beam, double terminal_lat_deg,
                     double terminal_lon_deg, const RadioParams& radio) {
    double theta = 0.0, theta_c = 0.0;
    off_boresight(beam, terminal_lat_deg, terminal_lon_deg, radio, theta, theta_c);
    const double ratio = theta / theta_c;
    // 4.3 dB below peak at the contour, quadratic rolloff in dB beyond it.
    const double peak = db_to_linear(beam.peak_tx_gain_dBi);
    return peak * std::exp(-std::log(std::pow(10.0, 0.43)) * ratio * ratio);
}

double slant_range_m(double lat_deg, double lon_deg, const RadioParams& radio) {
    const Vec3 sat = satellite_pos(radio);
    const Vec3 point = ecef_km(lat_deg, lon_deg, kEarthRadiusKm);
    return norm(sub(point, sat)) * 1000.0;
}

ChannelMatrix build_channel_matrix(const std::vector<BeamGeometry>& beams,
                                   std::vector<Terminal>& terminals,
                                   const RadioParams& radio) {
    const int B = static_cast<int>(beams.size());
    const int K = static_cast<int>(terminals.size());

    // Re-index: beam-major, descending own-beam gain within each beam.
    std::vector<double> own_gain(K);
    for (int k = 0; k < K; ++k) {
        const auto& t = terminals[k];
        const double gtx = synth_tx_gain(beams[t.home_beam], t.lat_deg, t.lon_deg, radio);
        own_gain[k] = gtx;
    }
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (terminals[a].home_beam != terminals[b].home_beam)
            return terminals[a].home_beam < terminals[b].home_beam;
        return own_gain[a] > own_gain[b];
    });
    std::vector<Terminal> reordered(K);
    for (int k = 0; k < K; ++k) {
        reordered[k] = terminals[order[k]];
        reordered[k].terminal_id = k + 1;
    }
    terminals = std::move(reordered);

    ChannelMatrix cm;
    cm.bandwidth_Hz = radio.bandwidth_Hz;
    cm.carrier_freq_Hz = radio.carrier_freq_Hz;
    cm.noise_power_W = radio.noise_power_W;
    cm.gains.assign(B, K, 0.0);
    for (int k = 0; k < K; ++k) {
        const auto& t = terminals[k];
        const double d = slant_range_m(t.lat_deg, t.lon_deg, radio);
        const double grx = db_to_linear(t.rx_gain_dBi);
        for (int b = 0; b < B; ++b) {
            const double gtx = synth_tx_gain(beams[b], t.lat_deg, t.lon_deg, radio);
            cm.gains(b, k) = channel_gain(gtx, grx, radio, d);
        }
    }
    return cm;
}

void assign_home_beams(const std::vector<BeamGeometry>& beams,
                       std::vector<Terminal>& terminals, const RadioParams& radio) {
    for (auto& t : terminals) {
        int best = -1;
        double best_gain = -1.0;
        for (size_t b = 0; b < beams.size(); ++b) {
            double theta = 0.0, theta_c = 0.0;
            off_boresight(beams[b], t.lat_deg, t.lon_deg, radio, theta, theta_c);
            if (theta > theta_c) continue;  // outside the contour
            const double g = synth_tx_gain(beams[b], t.lat_deg, t.lon_deg, radio);
            if (g > best_gain) {
                best_gain = g;
                best = static_cast<int>(b);
            }
        }
        if (best < 0) {
            // Slant-view anisotropy can push edge terminals just outside every
            // contour; the strongest gain decides then.
            for (size_t b = 0; b < beams.size(); ++b) {
                const double g = synth_tx_gain(beams[b], t.lat_deg, t.lon_deg, radio);
                if (g > best_gain) {
                    best_gain = g;
                    best = static_cast<int>(b);
                }
            }
        }
        t.home_beam = best;
    }
}

namespace {

/// Axial hex-lattice offsets (unit spacing), spiraling outward from the
/// center, enough for any reasonable beam count.
std::vector<std::pair<double, double>> hex_offsets(int count) {
    std::vector<std::pair<double, double>> pts;
    pts.emplace_back(0.0, 0.0);
    for (int ring = 1; static_cast<int>(pts.size()) < count; ++ring) {
        int q = ring, r = 0;
        const int dq[6] = {-1, -1, 0, 1, 1, 0};
        const int dr[6] = {1, 0, 1, 0, -1, -1};
        for (int side = 0; side < 6; ++side) {
            for (int step = 0; step < ring; ++step) {
                const double x = q + 0.5 * r;
                const double y = std::sqrt(3.0) / 2.0 * r;
                pts.emplace_back(x, y);
                q += dq[side];
                r += dr[side];
            }
        }
    }
    pts.resize(count);
    return pts;
}

}  // namespace

Scenario generate_scenario(const GeneratorSpec& spec, uint64_t seed) {
    if (spec.B < 2 || spec.terminals_per_beam < 1 || spec.T < 1)
        throw std::invalid_argument("generate_scenario: sizes must be positive");
    if (spec.B0 >= spec.B || spec.B0 < 1 || spec.K0 < 1)
        throw std::invalid_argument("generate_scenario: infeasible B0/K0");
    if (spec.demand_min_bps <= 0.0 || spec.demand_max_bps < spec.demand_min_bps)
        throw std::invalid_argument("generate_scenario: bad demand range");
    if (spec.min_rate_bps < 0.0 || spec.min_rate_bps >= spec.demand_min_bps)
        throw std::invalid_argument("generate_scenario: min rate must be below min demand");
    if (spec.contour_radius_km <= 0.0 || spec.P_beam_W <= 0.0 ||
        spec.radio.noise_power_W <= 0.0)
        throw std::invalid_argument("generate_scenario: nonpositive physical parameter");

    Rng rng(seed);
    Scenario sc;
    sc.T = spec.T;
    sc.B0 = spec.B0;
    sc.K0 = spec.K0;
    sc.P_beam_W = spec.P_beam_W;
    sc.seed = seed;

    const double spacing_km = spec.beam_spacing_radii * spec.contour_radius_km;
    const double cos_lat = std::cos(spec.center_lat_deg * kDegToRad);
    const auto offsets = hex_offsets(spec.B);
    for (int b = 0; b < spec.B; ++b) {
        BeamGeometry bg;
        bg.beam_id = b + 1;
        bg.boresight_lat_deg = spec.center_lat_deg + offsets[b].second * spacing_km / 111.32;
        bg.boresight_lon_deg =
            spec.center_lon_deg + offsets[b].first * spacing_km / (111.32 * cos_lat);
        bg.contour_radius_km = spec.contour_radius_km;
        bg.peak_tx_gain_dBi = spec.peak_tx_gain_dBi;
        sc.beams.push_back(bg);
    }

    std::vector<Terminal> terms;
    for (int b = 0; b < spec.B; ++b) {
        for (int i = 0; i < spec.terminals_per_beam; ++i) {
            Terminal t;
            double dx = 0.0, dy = 0.0;
            rng.in_disk(0.98 * spec.contour_radius_km, dx, dy);
            t.lat_deg = sc.beams[b].boresight_lat_deg + dy / 111.32;
            t.lon_deg = sc.beams[b].boresight_lon_deg + dx / (111.32 * cos_lat);
            t.rx_gain_dBi = spec.radio.rx_gain_dBi;
            t.demand_bps = rng.uniform(spec.demand_min_bps, spec.demand_max_bps);
            t.min_rate_bps = spec.min_rate_bps;
            t.home_beam = b;
            terms.push_back(t);
        }
    }
    assign_home_beams(sc.beams, terms, spec.radio);
    sc.channel = build_channel_matrix(sc.beams, terms, spec.radio);
    sc.terminals = std::move(terms);

    if (spec.conflict_radius_km > 0.0) {
        for (int a = 0; a < spec.B; ++a) {
            for (int b = a + 1; b < spec.B; ++b) {
                const Vec3 pa = ecef_km(sc.beams[a].boresight_lat_deg,
                                        sc.beams[a].boresight_lon_deg, kEarthRadiusKm);
                const Vec3 pb = ecef_km(sc.beams[b].boresight_lat_deg,
                                        sc.beams[b].boresight_lon_deg, kEarthRadiusKm);
                if (norm(sub(pa, pb)) < spec.conflict_radius_km)
                    sc.conflict_set.emplace_back(a, b);
            }
        }
    }

    sc.finalize();
    return sc;
}

std::vector<std::vector<int>> build_beam_groups(const Scenario& scenario) {
    const int B = scenario.num_beams();
    Grid<uint8_t> adj(B, B, 0);
    for (const auto& pr : scenario.conflict_set) {
        adj(pr.first, pr.second) = 1;
        adj(pr.second, pr.first) = 1;
    }

    // Maximal independent sets via Bron-Kerbosch on the complement graph.
    std::vector<std::vector<int>> mis;
    std::vector<int> all(B);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> cur;
    auto compatible = [&](int v, const std::vector<int>& set) {
        for (int u : set)
            if (adj(u, v)) return false;
        return true;
    };
    std::function<void(std::vector<int>, std::vector<int>)> expand =
        [&](std::vector<int> cand, std::vector<int> excluded) {
            if (cand.empty() && excluded.empty()) {
                mis.push_back(cur);
                return;
            }
            std::vector<int> cand_copy = cand;
            for (int v : cand_copy) {
                std::vector<int> next_cand, next_excl;
                for (int u : cand)
                    if (u != v && !adj(u, v)) next_cand.push_back(u);
                for (int u : excluded)
                    if (!adj(u, v)) next_excl.push_back(u);
                cur.push_back(v);
                expand(next_cand, next_excl);
                cur.pop_back();
                cand.erase(std::find(cand.begin(), cand.end(), v));
                excluded.push_back(v);
            }
        };
    expand(all, {});

    std::sort(mis.begin(), mis.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a < b;
    });
    for (auto& s : mis) std::sort(s.begin(), s.end());

    // Every B0-subset of a maximal independent set is a usable group; keep
    // them all while the count stays small, otherwise fall back to plain
    // truncation so dense instances stay bounded.
    constexpr size_t kGroupCap = 256;
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> groups;
    auto add = [&](std::vector<int> g) {
        if (seen.insert(g).second) groups.push_back(std::move(g));
    };
    size_t full_count = 0;
    for (const auto& s : mis) {
        const int n = static_cast<int>(s.size());
        const int r = std::min(n, scenario.B0);
        double comb = 1.0;
        for (int i = 0; i < r; ++i) comb = comb * (n - i) / (i + 1);
        full_count += static_cast<size_t>(comb);
    }
    if (full_count <= kGroupCap) {
        for (const auto& s : mis) {
            const int n = static_cast<int>(s.size());
            const int r = std::min(n, scenario.B0);
            std::vector<int> idx(r);
            std::iota(idx.begin(), idx.end(), 0);
            for (;;) {
                std::vector<int> g(r);
                for (int i = 0; i < r; ++i) g[i] = s[idx[i]];
                add(std::move(g));
                int i = r - 1;
                while (i >= 0 && idx[i] == n - r + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
            }
        }
        std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a < b;
        });
    } else {
        for (auto s : mis) {
            if (static_cast<int>(s.size()) > scenario.B0) s.resize(scenario.B0);
            add(std::move(s));
        }
    }
    // Truncation can drop a beam from every group; pad with groups built
    // from the orphans, preferring other orphans so coverage stays balanced.
    std::vector<char> covered(B, 0);
    for (const auto& g : groups)
        for (int b : g) covered[b] = 1;
    for (int b = 0; b < B; ++b) {
        if (covered[b]) continue;
        std::vector<int> g{b};
        covered[b] = 1;
        for (int pass = 0; pass < 2 && static_cast<int>(g.size()) < scenario.B0; ++pass)
            for (int u = 0; u < B && static_cast<int>(g.size()) < scenario.B0; ++u)
                if (u != b && covered[u] == pass && compatible(u, g)) {
                    g.push_back(u);
                    covered[u] = 1;
                }
        std::sort(g.begin(), g.end());
        if (seen.insert(g).second) groups.push_back(g);
    }
    return groups;
}

Scenario make_3dm_instance(const std::vector<MatchingTriple>& matching_triples, int B,
                           double eps) {
    if (B < 2 || B % 2 != 0) throw std::invalid_argument("make_3dm_instance: B must be even");
    const double eps_bound = std::pow(2.0, 1.0 / B) - 1.0;
    if (!(eps > 0.0) || eps > eps_bound * (1.0 + 1e-12))
        throw std::invalid_argument("make_3dm_instance: eps outside (0, 2^(1/B)-1]");
    const int half = B / 2;
    for (const auto& tr : matching_triples) {
        if (tr.slot < 0 || tr.slot >= half || tr.left < 0 || tr.left >= half ||
            tr.right < 0 || tr.right >= half)
            throw std::invalid_argument("make_3dm_instance: triple index out of range");
    }

    Scenario sc;
    sc.T = half;
    sc.B0 = 2;
    sc.K0 = 1;
    sc.P_beam_W = 1.0;
    sc.seed = 0;

    for (int b = 0; b < B; ++b) {
        BeamGeometry bg;
        bg.beam_id = b + 1;
        bg.boresight_lat_deg = 0.0;
        bg.boresight_lon_deg = static_cast<double>(b);
        bg.contour_radius_km = 1.0;
        bg.peak_tx_gain_dBi = 0.0;
        sc.beams.push_back(bg);

        Terminal t;
        t.terminal_id = b + 1;
        t.home_beam = b;
        t.lat_deg = 0.0;
        t.lon_deg = static_cast<double>(b);
        t.rx_gain_dBi = 0.0;
        t.demand_bps = 100.0;  // far above the unit rate floor
        t.min_rate_bps = 1.0;
        sc.terminals.push_back(t);
    }

    Grid<uint8_t> allowed(half, half, 0);  // cross pairs present in some triple
    for (const auto& tr : matching_triples) allowed(tr.left, tr.right) = 1;

    sc.channel.bandwidth_Hz = 1.0;
    sc.channel.carrier_freq_Hz = 1.0;
    sc.channel.noise_power_W = eps;
    sc.channel.gains.assign(B, B, 0.0);
    for (int tx = 0; tx < B; ++tx) {
        for (int rx = 0; rx < B; ++rx) {
            double g;
            if (tx == rx) {
                g = 1.0 + eps;
            } else if ((tx < half) == (rx < half)) {
                g = 1.0 + eps / 2.0;
            } else {
                const int l = tx < half ? tx : rx;
                const int r = (tx < half ? rx : tx) - half;
                // Cross pairs outside the triple set interfere like
                // same-subset pairs, which makes them rate-infeasible.
                g = allowed(l, r) ? eps : 1.0 + eps / 2.0;
            }
            sc.channel.gains(tx, rx) = g;
        }
    }

    sc.finalize();
    return sc;
}

}  // namespace bhnoma
