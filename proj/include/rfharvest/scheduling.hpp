#pragma once

#include "rfharvest/swipt.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rfharvest::scheduling {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Energy arrival models

/// Energy `energy_j` with probability p, otherwise nothing.
struct BernoulliArrivals {
    double p = 0.5;
    double energy_j = 1.0;
};

/// 0, E or 2E with probability 1/3 each.
struct TriStateArrivals {
    double energy_j = 1.0;
};

/// Energy level per state of a finite Markov chain.
struct MarkovArrivals {
    std::vector<double> state_energy_j;
    std::vector<std::vector<double>> transition;
    std::size_t initial_state = 0;
};

/// Known trace; shorter traces are padded with zeros.
struct DeterministicArrivals {
    std::vector<double> trace_j;
};

using EnergyArrivalProcess =
    std::variant<BernoulliArrivals, TriStateArrivals, MarkovArrivals, DeterministicArrivals>;

void validate(const EnergyArrivalProcess& process);
void validate_transition_matrix(const std::vector<std::vector<double>>& matrix);

/// Stationary distribution of an irreducible transition matrix.
std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& matrix);

/// Long-run mean energy per slot.
double mean_arrival(const EnergyArrivalProcess& process);

std::vector<double> simulate_arrivals(const EnergyArrivalProcess& process, std::size_t slots, std::uint64_t seed);

/// State path of a Markov arrival chain (the energy trace is state_energy_j of each entry).
std::vector<std::size_t> simulate_markov_states(const MarkovArrivals& process, std::size_t slots,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Two-hop offline scheduling

struct SlotGains {
    double h = 1.0;  // source -> relay
    double g = 1.0;  // relay -> destination
};

/// Source-relay-destination problem over K slots. Energy arriving in slot k
/// is usable from slot k on; overflow above capacity is discarded.
struct ScheduleProblem {
    double slot_duration_s = 1.0;
    std::vector<double> source_arrivals_j;
    std::vector<double> relay_arrivals_j;
    std::vector<SlotGains> gains;
    double noise_power_w = 1.0;
    double battery_capacity_source_j = kUnbounded;
    double battery_capacity_relay_j = kUnbounded;
    double initial_battery_source_j = 0.0;
    double initial_battery_relay_j = 0.0;
    /// Energy the relay spends in a slot where it receives.
    double rx_energy_cost_j = 0.0;
    /// Relay must forward in the slot right after receiving; leftovers are dropped.
    bool delay_constrained = false;
    /// Top of the power grid; 0 picks the largest power any node could sustain for a slot.
    double max_power_w = 0.0;

    std::size_t slots() const noexcept { return source_arrivals_j.size(); }
    void validate() const;
};

/// Uniform power grid 0 .. max power with `levels` entries.
std::vector<double> power_levels(const ScheduleProblem& problem, std::size_t levels);

/// Bits per slot on a link: log2(1 + P gain / noise).
double slot_bits(double power_w, double gain, double noise_w) noexcept;

struct Schedule {
    std::vector<double> source_power_w;
    std::vector<double> relay_power_w;
    std::vector<std::uint8_t> source_active;  // d_s(k)
    std::vector<std::uint8_t> relay_active;   // d_r(k)
    /// Bits reaching the destination in each slot.
    std::vector<double> delivered_bits;
    double delivered_total_bits = 0.0;
    std::size_t relay_slots = 0;
    double energy_used_j = 0.0;
    /// Bits for throughput problems, relay slots for minimum-time problems.
    double objective = 0.0;
    /// False when the solver fell back to bucketed (approximate) states.
    bool exact = true;
};

struct ScheduleCheck {
    bool ok = true;
    std::string reason;
    double delivered_bits = 0.0;
};

/// Independent feasibility check of energy causality, battery bounds,
/// half-duplex operation, information causality and the delay constraint.
ScheduleCheck validate_schedule(const ScheduleProblem& problem, const Schedule& schedule, double tolerance = 1e-9);

struct DpOptions {
    /// Upper bound on stored DP states in any stage.
    std::size_t max_states = 2'000'000;
    /// Bucket states instead of failing when the bound is exceeded.
    bool allow_bucketing = false;
    std::size_t battery_buckets = 64;
    std::size_t bit_buckets = 64;
};

/// Throughput-optimal schedule over the quantized power grid. Ties go to
/// lower total energy, then to the schedule that transmits earlier.
Schedule offline_optimal(const ScheduleProblem& problem, std::size_t power_levels, const DpOptions& options = {});

/// Fewest relay transmission slots delivering at least `demand_bits`.
/// Throws Infeasible (carrying the best achievable bits) otherwise.
Schedule min_relay_time(const ScheduleProblem& problem, double demand_bits, std::size_t power_levels,
                        const DpOptions& options = {});

/// Exhaustive enumeration of every quantized schedule; levels^(2K) <= 1e8.
Schedule brute_force_oracle(const ScheduleProblem& problem, std::size_t power_levels);
Schedule brute_force_min_relay_time(const ScheduleProblem& problem, double demand_bits, std::size_t power_levels);

// ---------------------------------------------------------------------------
// Single-hop continuous power allocation

/// Throughput-optimal powers for one link with energy flowing only forward
/// in time and a finite battery.
std::vector<double> directional_water_fill(std::span<const double> arrivals_j, std::span<const double> gains,
                                           double noise_w, double capacity_j = kUnbounded,
                                           double slot_duration_s = 1.0, double initial_battery_j = 0.0);

/// Spend each slot's energy in that slot.
std::vector<double> greedy_powers(std::span<const double> arrivals_j, double capacity_j = kUnbounded,
                                  double slot_duration_s = 1.0, double initial_battery_j = 0.0);

double single_hop_bits(std::span<const double> powers_w, std::span<const double> gains, double noise_w);

/// Water level P + noise/gain of each slot.
std::vector<double> water_levels(std::span<const double> powers_w, std::span<const double> gains, double noise_w);

// ---------------------------------------------------------------------------
// Combined SWIPT / ambient operation

enum class HarvestMode { Swipt, NonSwipt, Idle };

struct ModeTrace {
    std::vector<HarvestMode> modes;
    std::vector<double> throughput;
    double total_throughput = 0.0;
};

/// Per slot: forward on banked ambient energy when bank + arrival reaches
/// `activation_threshold_j` (spending exactly that much), otherwise fall
/// back to time-switching SWIPT with the optimal split.
ModeTrace combined_mode_controller(std::span<const double> ambient_trace_j, const swipt::LinkState& link,
                                   double activation_threshold_j, const swipt::RelayOptions& options);

/// Same rule with SWIPT disabled.
ModeTrace ambient_only_controller(std::span<const double> ambient_trace_j, const swipt::LinkState& link,
                                  double activation_threshold_j, const swipt::RelayOptions& options);

}  // namespace rfharvest::scheduling
