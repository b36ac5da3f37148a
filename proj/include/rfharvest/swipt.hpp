#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rfharvest::swipt {

enum class RelayMode { AmplifyForward, DecodeForward };
enum class Protocol { TimeSwitching, PowerSplitting };

/// Where the power splitter sits relative to the dominant receiver noise.
enum class PsNoiseModel {
    /// Noise is added after splitting, so the information branch SNR scales with 1 - rho.
    SplitBeforeNoise,
    /// Antenna noise is split along with the signal; the SNR does not depend on rho.
    SplitAfterNoise,
};

/// Split parameters and frame length for one relaying frame.
struct SwiptConfig {
    double frame_duration_s = 1.0;
    double alpha = 0.0;
    double rho = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;

    void validate() const;
};

/// Power gains include path loss and fading.
struct LinkState {
    double h = 0.0;  // source -> relay
    double g = 0.0;  // relay -> destination
    double noise_power_w = 1e-9;
    double source_power_w = 1.0;
    double ambient_power_at_relay_w = 0.0;
    double ambient_power_at_source_w = 0.0;

    void validate() const;
};

struct RelayOptions {
    double efficiency = 0.5;
    RelayMode mode = RelayMode::DecodeForward;
    double frame_duration_s = 1.0;
    PsNoiseModel ps_noise = PsNoiseModel::SplitBeforeNoise;
};

/// DF: min of the hop SNRs. AF: g1 g2 / (g1 + g2 + 1).
double end_to_end_snr(double snr_first_hop, double snr_second_hop, RelayMode mode) noexcept;

/// Time switching: alpha T harvesting, the rest split equally between hops.
double ts_throughput(double alpha, const LinkState& link, const RelayOptions& options);

/// Power splitting: fraction rho of the received power is harvested.
double ps_throughput(double rho, const LinkState& link, const RelayOptions& options);

struct HybridResult {
    double throughput = 0.0;
    /// Ambient energy banked by the source while the relay forwards;
    /// available from the next frame on.
    double source_banked_energy_j = 0.0;
};

/// Time switching with alpha1 T of source energy delivery and alpha2 T of
/// ambient harvesting at the relay.
HybridResult hybrid_ts_throughput(double alpha1, double alpha2, const LinkState& link, const RelayOptions& options);

/// Power splitting with rho1 for source energy and rho2 for ambient energy.
HybridResult hybrid_ps_throughput(double rho1, double rho2, const LinkState& link, const RelayOptions& options);

struct SplitOptimum {
    double split = 0.0;
    double throughput = 0.0;
};

/// Golden-section search on [0, 1] to width `tol`, cross-checked against a
/// `coarse_points` uniform grid; the best candidate wins.
SplitOptimum optimize_split(Protocol protocol, const LinkState& link, const RelayOptions& options,
                            double tol = 1e-10, std::size_t coarse_points = 1001);

/// Maximizer of a function on [lo, hi] by golden-section search.
SplitOptimum golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol);

struct HybridOptimum {
    double first = 0.0;   // alpha1 or rho1
    double second = 0.0;  // alpha2 or rho2
    double throughput = 0.0;
};

/// Grid over the simplex first + second <= 1, then coordinate refinement.
HybridOptimum optimize_hybrid(Protocol protocol, const LinkState& link, const RelayOptions& options,
                              std::size_t grid_points = 101);

struct RangeSweep {
    std::vector<double> distances_m;
    std::vector<double> mean_throughput;
    /// Largest distance whose mean throughput meets the target (0 if none).
    double range_m = 0.0;
};

struct RangeQuery {
    LinkState reference_link;  // h is the mean gain at reference_distance_m
    double reference_distance_m = 1.0;
    double pathloss_exponent = 2.7;
    std::vector<double> distances_m;
    double target_throughput = 0.05;
    std::size_t fading_draws = 1000;
    std::uint64_t seed = 1;
};

/// Mean optimized throughput against source-relay distance under Rayleigh
/// fading on both hops, and the resulting transmission range.
RangeSweep transmission_range(Protocol protocol, const RangeQuery& query, const RelayOptions& options);

/// Mean optimized throughput over Rayleigh fading draws of both hops.
double mean_fading_throughput(Protocol protocol, const LinkState& mean_link, const RelayOptions& options,
                              std::size_t draws, std::uint64_t seed);

}  // namespace rfharvest::swipt
