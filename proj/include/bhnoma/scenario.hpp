#pragma once

#include <cstdint>
#include <vector>

#include "bhnoma/types.hpp"

namespace bhnoma {

/// Link-budget primitives shared by the channel synthesis path.
struct RadioParams {
    double bandwidth_Hz = 500e6;
    double carrier_freq_Hz = 20e9;
    double rx_gain_dBi = 42.1;
    double noise_power_W = 2.0;  // sigma^2 on the Eq.-2 normalized scale
    double boltzmann = 1.380649e-23;
    double noise_temperature_K = 517.0;
    double light_speed_mps = 299792458.0;
    double satellite_height_km = 35786.0;
    double satellite_lon_deg = 13.0;
};

/// Knobs for the synthetic multi-beam world. Defaults are the desk-scale
/// configuration used by the bundled experiments; full-scale values are
/// accepted as well.
struct GeneratorSpec {
    int B = 6;
    int terminals_per_beam = 3;
    int T = 16;
    int B0 = 2;
    int K0 = 2;
    double P_beam_W = 100.0;  // 20 dBW
    double contour_radius_km = 150.0;
    double beam_spacing_radii = 1.8;   // boresight spacing / contour radius
    double conflict_radius_km = 0.0;   // 0 disables the conflict set
    double peak_tx_gain_dBi = 38.5;
    double demand_min_bps = 100e6;
    double demand_max_bps = 1.2e9;
    double min_rate_bps = 5e6;
    double center_lat_deg = 47.0;
    double center_lon_deg = 9.0;
    RadioParams radio;
};

/// Free-space channel gain with receiver noise normalization:
/// g = Gtx * Grx / (kappa * Tnoise * W) * (c / (4 pi d f))^2.
double channel_gain(double g_tx_linear, double g_rx_linear, const RadioParams& radio,
                    double distance_m);

/// Parametric transmit-gain rolloff: exactly 4.3 dB below peak at the
/// contour, Gaussian in the off-boresight angle beyond it.
double synth_tx_gain(const BeamGeometry& beam, double terminal_lat_deg,
                     double terminal_lon_deg, const RadioParams& radio);

/// Slant range from the GEO satellite to a ground point, meters.
double slant_range_m(double lat_deg, double lon_deg, const RadioParams& radio);

/// Computes the B x K gain matrix from geometry and re-indexes `terminals`
/// in place so terminal indices run beam-major with descending own-beam
/// gain (the SIC decoding order). Terminal ids are rewritten to match.
ChannelMatrix build_channel_matrix(const std::vector<BeamGeometry>& beams,
                                   std::vector<Terminal>& terminals,
                                   const RadioParams& radio);

/// Assigns each terminal to the beam whose contour contains it; when several
/// contours overlap the strongest synthesized gain wins.
void assign_home_beams(const std::vector<BeamGeometry>& beams,
                       std::vector<Terminal>& terminals, const RadioParams& radio);

/// Deterministic synthetic scenario: hexagonal beam lattice, uniform
/// terminal placement per contour, uniform demands, distance-rule conflicts.
Scenario generate_scenario(const GeneratorSpec& spec, uint64_t seed);

/// Enumerates beam groups: maximal independent sets of the conflict graph,
/// truncated to B0 members, deduplicated, with every beam covered.
std::vector<std::vector<int>> build_beam_groups(const Scenario& scenario);

/// One triple of a three-dimensional matching instance: (timeslot, beam in
/// the first half, beam in the second half). Beam indices are local to
/// their half, i.e. in [0, B/2).
struct MatchingTriple {
    int slot = 0;
    int left = 0;
    int right = 0;
};

/// Hardness-instance generator: one terminal per beam, two beam subsets,
/// gains arranged so that a slot pairing two beams is rate-feasible exactly
/// when the pair appears in some triple. With the complete triple set this
/// is the textbook two-subset construction.
Scenario make_3dm_instance(const std::vector<MatchingTriple>& matching_triples, int B,
                           double eps);

}  // namespace bhnoma
