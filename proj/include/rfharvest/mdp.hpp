#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfharvest::scheduling {

/// Single-node transmission MDP with a quantized battery, a Markov energy
/// source and an optional Markov channel.
///
/// State (b, e, c): battery quanta b in [0, B), energy state e, channel
/// state c. Action a spends a quanta (power a q / slot), a <= b and a below
/// the power level count. The energy harvested in state e arrives at the end
/// of the slot; overflow above the top bucket is lost.
struct MdpModel {
    std::vector<double> energy_state_j;  // energy harvested per slot in each state
    std::vector<std::vector<double>> energy_transition;
    std::vector<double> channel_gain{1.0};
    std::vector<std::vector<double>> channel_transition{{1.0}};
    double battery_capacity_j = 1.0;
    std::size_t battery_buckets = 16;
    std::size_t power_levels = 8;
    double slot_duration_s = 1.0;
    double noise_power_w = 1.0;
    double reward_scale = 1.0;

    void validate() const;
    std::size_t state_count() const noexcept;
    std::size_t state_index(std::size_t battery, std::size_t energy, std::size_t channel) const noexcept;
    /// Energy of one battery bucket.
    double quantum_j() const noexcept;
    std::size_t harvest_quanta(std::size_t energy_state) const noexcept;
    std::size_t max_action(std::size_t battery) const noexcept;
    double action_power_w(std::size_t action) const noexcept;
    double reward(std::size_t channel, std::size_t action) const noexcept;
};

struct StateLabel {
    std::size_t battery = 0;
    std::size_t energy = 0;
    std::size_t channel = 0;
};

StateLabel state_label(const MdpModel& model, std::size_t index);

struct Policy {
    /// Action (quanta spent) per state index.
    std::vector<std::size_t> action;
    /// Long-run average reward (bits per slot).
    double gain = 0.0;
    /// Relative values with the all-empty state pinned to 0.
    std::vector<double> bias;
    std::size_t iterations = 0;
};

/// Howard policy iteration for the average-reward criterion. Throws
/// DegenerateModel when an evaluated policy is not unichain.
Policy mdp_policy_iteration(const MdpModel& model);

struct ValueIterationResult {
    std::vector<std::size_t> action;
    double gain = 0.0;
    double span = 0.0;
    std::size_t iterations = 0;
};

/// Relative value iteration on the aperiodicity-transformed model, stopped
/// when the span of successive differences falls below `span_tolerance`.
ValueIterationResult relative_value_iteration(const MdpModel& model, double span_tolerance = 1e-9,
                                              std::size_t max_iterations = 10'000'000);

/// Spend min(level, battery) quanta whenever the battery holds at least
/// `theta_j`; otherwise stay silent. `level` 0 spends the long-run mean
/// harvest per slot, rounded to whole quanta (at least one).
Policy threshold_policy(const MdpModel& model, double theta_j, std::size_t level = 0);

/// Never transmit.
Policy silent_policy(const MdpModel& model);

/// Exact long-run average reward of a stationary policy from the empty
/// battery, found from the stationary equations of the induced chain.
double evaluate_policy_exact(const MdpModel& model, const Policy& policy);

/// Monte-Carlo average reward over `horizon` slots, starting empty in energy
/// and channel state 0.
double evaluate_policy(const MdpModel& model, const Policy& policy, std::size_t horizon, std::uint64_t seed);

/// Two-state desk harvesting model used by the defaults and tests.
MdpModel default_desk_model();

/// CSV `battery_j,energy_state,channel_state,action,power_w`.
void write_policy_csv(std::ostream& out, const MdpModel& model, const Policy& policy);

}  // namespace rfharvest::scheduling
