#pragma once

#include "rfharvest/scheduling.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace rfharvest::collaboration {

struct NodeState {
    double battery_j = 0.0;
    double capacity_j = 1.0;
    scheduling::EnergyArrivalProcess arrivals = scheduling::DeterministicArrivals{};
    double channel_gain = 1.0;

    void validate() const;
};

struct QosSpec {
    std::size_t max_inter_delivery = 4;  // D, in frames
    std::size_t horizon = 100;           // frames

    void validate() const;
};

/// Packet and radio parameters shared by both nodes. A packet of
/// `packet_bits` per unit bandwidth sent in a subframe of length t decodes
/// when the SNR reaches 2^(packet_bits / t) - 1.
struct LinkSpec {
    double frame_duration_s = 1.0;
    double packet_bits = 2.0;
    double noise_power_w = 1.0;
    double max_power_w = std::numeric_limits<double>::infinity();
    /// Coherence of the joint transmission (1 = perfect phase alignment).
    double amplitude_efficiency = 1.0;

    void validate() const;
    /// Decoding SNR threshold for a subframe of length t.
    double snr_threshold(double duration_s) const;
};

enum class ScheduledNode { A, B, None };
enum class Preference { Richer, A, B };

struct FramePolicy {
    double xi = 0.5;
    bool allow_jt = true;
    /// Which node takes subframe 1 when both could.
    Preference prefer = Preference::Richer;
    /// Deliver early when any battery rises above this share of capacity.
    double overflow_fraction = 0.9;

    void validate() const;
};

struct CollabFrame {
    double xi = 0.0;
    ScheduledNode scheduled_node = ScheduledNode::None;
    bool jt_active = false;
    bool delivered = false;
    /// Frames since the last delivery, after this frame.
    std::size_t gap = 0;
    bool violation = false;
    std::array<double, 2> battery_j{};
};

struct CollabResult {
    std::vector<CollabFrame> frames;
    std::size_t violations = 0;
    std::size_t delivered_count = 0;
};

/// Coherent combining of two transmitters:
/// (pa ga + pb gb + 2 eff sqrt(pa ga pb gb)) / noise.
double jt_snr(double power_a_w, double power_b_w, double gain_a, double gain_b, double noise_w,
              double amplitude_efficiency = 1.0);

/// Frame-by-frame simulation of two energy-harvesting nodes reporting to a
/// sink. Arrival traces are drawn from derive_seed(seed, node).
CollabResult collab_schedule(const std::array<NodeState, 2>& nodes, const QosSpec& qos, const LinkSpec& link,
                             const FramePolicy& policy, std::uint64_t seed);

/// Same simulation on explicit arrival traces (one energy value per frame).
CollabResult collab_schedule_traces(const std::array<NodeState, 2>& nodes,
                                    const std::array<std::vector<double>, 2>& arrivals_j, const QosSpec& qos,
                                    const LinkSpec& link, const FramePolicy& policy);

struct SplitChoice {
    double xi = 0.0;
    double objective = 0.0;
    std::vector<double> objective_per_xi;
};

/// Grid search over xi of delivered - penalty x violations, using the same
/// arrival traces for every grid point. Ties go to the smaller xi. A
/// negative penalty selects the default (the horizon).
SplitChoice optimize_frame_split(const std::array<NodeState, 2>& nodes, const QosSpec& qos, const LinkSpec& link,
                                 const FramePolicy& base, std::vector<double> grid, std::uint64_t seed,
                                 double violation_penalty = -1.0, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Battery-overflow batching

enum class BatchDecision { Sense, TransmitBatch, Idle };

struct BatchOptions {
    double sensing_energy_j = 0.1;
    /// Energy kept back for sensing when a batch is sent.
    double reserve_j = 0.1;
    bool batching = true;
};

struct BatchTrace {
    std::vector<BatchDecision> decisions;
    std::vector<double> battery_j;  // after each slot
    double discarded_j = 0.0;
    std::size_t batches = 0;
    std::size_t sensed = 0;
};

/// Senses on event slots; sends a batch (spending everything above the
/// reserve) whenever the battery plus the expected next arrival would exceed
/// capacity - overflow_guard.
BatchTrace batch_policy(const NodeState& node, const std::vector<std::uint8_t>& event_slots, double overflow_guard_j,
                        const BatchOptions& options, std::uint64_t seed);

BatchTrace batch_policy_traces(const NodeState& node, const std::vector<double>& arrivals_j,
                               const std::vector<std::uint8_t>& event_slots, double overflow_guard_j,
                               const BatchOptions& options);

// ---------------------------------------------------------------------------
// Spatially correlated arrivals

inline constexpr double kDefaultCorrelationDistanceM = 80.0;

/// exp(-distance / correlation_distance).
double traffic_correlation_kernel(double distance_m, double correlation_distance_m = kDefaultCorrelationDistanceM);

/// Bernoulli arrival traces for two nodes `distance_m` apart, coupled by a
/// Gaussian copula whose latent correlation is the kernel value.
std::array<std::vector<double>, 2> correlated_bernoulli_arrivals(
    double distance_m, const std::array<scheduling::BernoulliArrivals, 2>& processes, std::size_t slots,
    std::uint64_t seed, double correlation_distance_m = kDefaultCorrelationDistanceM);

// ---------------------------------------------------------------------------
// Scenario CSV

struct CollabTrace {
    std::array<std::vector<double>, 2> arrivals_j;
    std::vector<std::uint8_t> events;
};

/// Reads `slot,arrival_a_j,arrival_b_j,event`.
CollabTrace read_trace_csv(std::istream& in);

/// Writes `frame,node,jt,delivered,gap`.
void write_frames_csv(std::ostream& out, const CollabResult& result);

}  // namespace rfharvest::collaboration
