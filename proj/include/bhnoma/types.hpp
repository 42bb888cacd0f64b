#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bhnoma {

/// Dense row-major matrix of POD values. Small helper used for channel
/// gains, schedules and power plans; heavy numerics go through Eigen
/// inside the solvers.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    const T& operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    void assign(int rows, int cols, T fill = T{}) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(static_cast<size_t>(rows) * cols, fill);
    }

    const std::vector<T>& raw() const { return data_; }
    std::vector<T>& raw() { return data_; }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

struct BeamGeometry {
    int beam_id = 0;                 // 1-based public id
    double boresight_lat_deg = 0.0;
    double boresight_lon_deg = 0.0;
    double contour_radius_km = 0.0;  // 4.3 dB contour radius on ground
    double peak_tx_gain_dBi = 0.0;
};

struct Terminal {
    int terminal_id = 0;   // 1-based public id
    int home_beam = -1;    // 0-based beam index
    double lat_deg = 0.0;
    double lon_deg = 0.0;
    double rx_gain_dBi = 0.0;
    double demand_bps = 0.0;
    double min_rate_bps = 0.0;
};

struct ChannelMatrix {
    Grid<double> gains;          // B x K linear power gains
    double noise_power_W = 0.0;  // sigma^2
    double bandwidth_Hz = 0.0;   // W, single carrier per beam
    double carrier_freq_Hz = 0.0;
};

/// Immutable problem instance: geometry, channel, demands, scheduling limits.
/// Terminals are indexed beam-major and, within each beam, by descending
/// own-beam gain (the SIC decoding order).
struct Scenario {
    std::vector<BeamGeometry> beams;
    std::vector<Terminal> terminals;
    ChannelMatrix channel;
    int T = 0;            // timeslots in the hopping window
    int B0 = 0;           // max simultaneously illuminated beams
    int K0 = 0;           // max multiplexed terminals per beam-slot
    double P_beam_W = 0;  // per-beam power budget
    std::vector<std::pair<int, int>> conflict_set;  // forbidden beam pairs, 0-based, first<second
    uint64_t seed = 0;

    // Derived: per-beam terminal indices in SIC order (descending own gain).
    std::vector<std::vector<int>> beam_terminals;

    int num_beams() const { return static_cast<int>(beams.size()); }
    int num_terminals() const { return static_cast<int>(terminals.size()); }

    bool conflicts(int b1, int b2) const {
        if (b1 > b2) std::swap(b1, b2);
        for (const auto& p : conflict_set)
            if (p.first == b1 && p.second == b2) return true;
        return false;
    }

    /// Rebuild beam_terminals and check structural invariants. Throws
    /// std::invalid_argument on violations.
    void finalize();
};

/// Binary illumination / scheduling decision over the hopping window.
struct Assignment {
    Grid<uint8_t> alpha;  // B x T beam illumination
    Grid<uint8_t> beta;   // K x T terminal scheduling

    Assignment() = default;
    Assignment(int B, int K, int T) : alpha(B, T, 0), beta(K, T, 0) {}
};

struct PowerPlan {
    Grid<double> p;  // K x T transmit power, watts

    PowerPlan() = default;
    PowerPlan(int K, int T) : p(K, T, 0.0) {}
};

enum class Metric { SumSquaredGap, WorstOctr, Unmet };

Metric metric_from_string(const std::string& name);
std::string metric_name(Metric m);

enum class SolveStatus { Ok, Infeasible, Incomplete, Warning, Error };

std::string status_name(SolveStatus s);

struct AuxMetrics {
    double worst_octr = 0.0;
    double unmet_mbps = 0.0;
    double total_power_W = 0.0;
};

struct Solution {
    Assignment assignment;
    PowerPlan power;
    Grid<double> per_slot_rates_bps;      // K x T
    std::vector<double> capacities_bps;   // length K
    double objective_mbps2 = 0.0;         // sum of squared capacity-demand gaps
    AuxMetrics aux;
    SolveStatus status = SolveStatus::Ok;
    std::string status_detail;
    std::string scheme;
    double runtime_s = 0.0;
};

/// Evaluation regime: SIC imperfection and (for frequency-reuse baselines)
/// the color plan that zeroes interference between orthogonal colors.
struct ColorPlan {
    std::vector<int> color_of_beam;      // per beam
    int color_count = 1;
    double per_color_bandwidth_Hz = 0.0; // effective carrier bandwidth per beam
};

struct EvalConfig {
    double sic_error_ratio = 0.0;  // eta in [0,1]; 0 = perfect SIC
    bool has_colors = false;
    ColorPlan colors;
};

/// Tolerances and iteration caps shared by the solver stack.
struct SolverConfig {
    int max_outer_iters = 20;        // N: quadratic-transform outer iterations
    double convergence_tol = 1e-5;   // relative objective change stopping rule
    double inner_tol = 1e-8;         // barrier relative duality-gap target
    double lm_tol = 1e-9;            // Levenberg-Marquardt relative residual
    int lm_max_iters = 100;
    double eps_log = 1e-12;          // floor for the transformed-rate log argument
    double rmin_penalty = 1e6;       // exact-penalty weight on rate-floor slack (Mbps scale)
    double feas_tol = 1e-6;          // relative tolerance for rate-constraint checks
    int max_swap_iters = 100;        // N': swap-matching iteration cap
    int bnb_node_budget = 10000;
    int max_newton_steps = 400;      // per barrier stage chain
    int scoring_outer_iters = 3;     // reduced-effort power solves for swap scoring
    double scoring_tol = 1e-3;
    double scoring_gap = 1e-5;
    uint64_t seed = 0;
    EvalConfig eval;
};

constexpr double kBpsPerMbps = 1e6;

inline double to_mbps(double bps) { return bps / kBpsPerMbps; }
inline double to_bps(double mbps) { return mbps * kBpsPerMbps; }

}  // namespace bhnoma
