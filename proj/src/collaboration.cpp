#include "rfharvest/collaboration.hpp"

#include "rfharvest/csv.hpp"
#include "rfharvest/error.hpp"
#include "rfharvest/parallel.hpp"
#include "rfharvest/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

namespace rfharvest::collaboration {

void NodeState::validate() const
{
    if (!(capacity_j > 0.0) || !std::isfinite(capacity_j)) {
        throw InvalidParameter("node capacity must be positive and finite");
    }
    if (!(battery_j >= 0.0) || battery_j > capacity_j) {
        throw InvalidParameter("node battery must lie in [0, capacity]");
    }
    if (!(channel_gain >= 0.0) || !std::isfinite(channel_gain)) {
        throw InvalidParameter("channel gain must be finite and non-negative");
    }
    scheduling::validate(arrivals);
}

void QosSpec::validate() const
{
    if (max_inter_delivery < 1) {
        throw InvalidParameter("maximum inter-delivery time must be at least one frame");
    }
}

void LinkSpec::validate() const
{
    if (!(frame_duration_s > 0.0) || !(packet_bits > 0.0) || !(noise_power_w > 0.0)) {
        throw InvalidParameter("frame duration, packet size and noise must be positive");
    }
    if (!(max_power_w > 0.0)) {
        throw InvalidParameter("power cap must be positive");
    }
    if (!(amplitude_efficiency >= 0.0 && amplitude_efficiency <= 1.0)) {
        throw InvalidParameter("amplitude efficiency must lie in [0, 1]");
    }
}

double LinkSpec::snr_threshold(double duration_s) const
{
    if (!(duration_s > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return std::exp2(packet_bits / duration_s) - 1.0;
}

void FramePolicy::validate() const
{
    if (!(xi >= 0.0 && xi <= 1.0)) {
        throw InvalidParameter("frame split xi must lie in [0, 1]");
    }
    if (!(overflow_fraction > 0.0)) {
        throw InvalidParameter("overflow fraction must be positive");
    }
}

double jt_snr(double power_a_w, double power_b_w, double gain_a, double gain_b, double noise_w,
              double amplitude_efficiency)
{
    if (!(noise_w > 0.0)) {
        throw InvalidParameter("noise power must be positive");
    }
    if (!(power_a_w >= 0.0) || !(power_b_w >= 0.0) || !(gain_a >= 0.0) || !(gain_b >= 0.0)) {
        throw InvalidParameter("powers and gains must be non-negative");
    }
    const double sa = power_a_w * gain_a;
    const double sb = power_b_w * gain_b;
    return (sa + sb + 2.0 * amplitude_efficiency * std::sqrt(sa * sb)) / noise_w;
}

namespace {

bool affordable(double energy, double battery) { return energy <= battery + 1e-12 * std::max(1.0, battery); }

/// Energies each node spends on a joint transmission meeting `gamma` in
/// `duration`, steering amplitudes along the channel gains.
std::optional<std::array<double, 2>> jt_energies(const std::array<double, 2>& battery,
                                                 const std::array<double, 2>& gain, double gamma, double duration,
                                                 const LinkSpec& link)
{
    if (!(duration > 0.0) || gain[0] + gain[1] <= 0.0) {
        return std::nullopt;
    }
    const double target = gamma * link.noise_power_w;
    const double e = link.amplitude_efficiency;
    const auto combined = [e](double xa, double xb) { return xa * xa + xb * xb + 2.0 * e * xa * xb; };
    std::array<double, 2> x_max{};
    for (int i = 0; i < 2; ++i) {
        x_max[i] = std::sqrt(std::min(link.max_power_w, battery[i] / duration) * gain[i]);
    }
    if (combined(x_max[0], x_max[1]) < target * (1.0 - 1e-12)) {
        return std::nullopt;
    }
    const double s = std::sqrt(target / combined(gain[0], gain[1]));
    std::array<double, 2> x{s * gain[0], s * gain[1]};
    // Solve the other amplitude when one node hits its budget.
    const auto partner = [&](double fixed) {
        return -e * fixed + std::sqrt(std::max(0.0, (e * e - 1.0) * fixed * fixed + target));
    };
    if (x[0] > x_max[0]) {
        x[0] = x_max[0];
        x[1] = partner(x[0]);
    } else if (x[1] > x_max[1]) {
        x[1] = x_max[1];
        x[0] = partner(x[1]);
    }
    std::array<double, 2> energy{};
    for (int i = 0; i < 2; ++i) {
        energy[i] = gain[i] > 0.0 ? x[i] * x[i] / gain[i] * duration : 0.0;
        if (!affordable(energy[i], battery[i])) {
            return std::nullopt;
        }
        energy[i] = std::min(energy[i], battery[i]);
    }
    return energy;
}

}  // namespace

CollabResult collab_schedule_traces(const std::array<NodeState, 2>& nodes,
                                    const std::array<std::vector<double>, 2>& arrivals_j, const QosSpec& qos,
                                    const LinkSpec& link, const FramePolicy& policy)
{
    for (const auto& n : nodes) {
        n.validate();
    }
    qos.validate();
    link.validate();
    policy.validate();

    const double t1 = policy.xi * link.frame_duration_s;
    const double t2 = (1.0 - policy.xi) * link.frame_duration_s;
    const double gamma1 = link.snr_threshold(t1);
    const double gamma2 = link.snr_threshold(t2);
    const std::array<double, 2> gain{nodes[0].channel_gain, nodes[1].channel_gain};

    std::array<double, 2> battery{nodes[0].battery_j, nodes[1].battery_j};
    CollabResult out;
    std::size_t gap = 0;
    for (std::size_t f = 0; f < qos.horizon; ++f) {
        for (int i = 0; i < 2; ++i) {
            const auto& trace = arrivals_j[static_cast<std::size_t>(i)];
            const double arrival = f < trace.size() ? trace[f] : 0.0;
            if (!(arrival >= 0.0)) {
                throw InvalidParameter("arrival energy must be non-negative");
            }
            battery[i] = std::min(nodes[i].capacity_j, battery[i] + arrival);
        }
        CollabFrame frame;
        frame.xi = policy.xi;
        const bool urgent = gap + 1 >= qos.max_inter_delivery
            || battery[0] > policy.overflow_fraction * nodes[0].capacity_j
            || battery[1] > policy.overflow_fraction * nodes[1].capacity_j;
        if (urgent && t1 > 0.0) {
            std::array<bool, 2> able{};
            std::array<double, 2> cost{};
            for (int i = 0; i < 2; ++i) {
                if (gain[i] > 0.0) {
                    const double power = gamma1 * link.noise_power_w / gain[i];
                    cost[i] = power * t1;
                    able[i] = power <= link.max_power_w && affordable(cost[i], battery[i]);
                }
            }
            int pick = -1;
            if (able[0] && able[1]) {
                switch (policy.prefer) {
                case Preference::A: pick = 0; break;
                case Preference::B: pick = 1; break;
                case Preference::Richer: pick = battery[1] > battery[0] ? 1 : 0; break;
                }
            } else if (able[0] || able[1]) {
                pick = able[0] ? 0 : 1;
            }
            if (pick >= 0) {
                battery[pick] = std::max(0.0, battery[pick] - cost[pick]);
                frame.scheduled_node = pick == 0 ? ScheduledNode::A : ScheduledNode::B;
                frame.delivered = true;
            }
        }
        if (urgent && !frame.delivered && policy.allow_jt) {
            if (const auto spend = jt_energies(battery, gain, gamma2, t2, link)) {
                for (int i = 0; i < 2; ++i) {
                    battery[i] = std::max(0.0, battery[i] - (*spend)[i]);
                }
                frame.jt_active = true;
                frame.delivered = true;
            }
        }
        if (frame.delivered) {
            gap = 0;
            ++out.delivered_count;
        } else if (++gap >= qos.max_inter_delivery) {
            frame.violation = true;
            ++out.violations;
            gap = 0;
        }
        frame.gap = gap;
        frame.battery_j = battery;
        out.frames.push_back(frame);
    }
    return out;
}

namespace {

std::array<std::vector<double>, 2> draw_traces(const std::array<NodeState, 2>& nodes, std::size_t frames,
                                               std::uint64_t seed)
{
    return {scheduling::simulate_arrivals(nodes[0].arrivals, frames, derive_seed(seed, 0)),
            scheduling::simulate_arrivals(nodes[1].arrivals, frames, derive_seed(seed, 1))};
}

}  // namespace

CollabResult collab_schedule(const std::array<NodeState, 2>& nodes, const QosSpec& qos, const LinkSpec& link,
                             const FramePolicy& policy, std::uint64_t seed)
{
    return collab_schedule_traces(nodes, draw_traces(nodes, qos.horizon, seed), qos, link, policy);
}

SplitChoice optimize_frame_split(const std::array<NodeState, 2>& nodes, const QosSpec& qos, const LinkSpec& link,
                                 const FramePolicy& base, std::vector<double> grid, std::uint64_t seed,
                                 double violation_penalty, std::size_t threads)
{
    if (grid.empty()) {
        throw InvalidParameter("frame split grid is empty");
    }
    std::sort(grid.begin(), grid.end());
    for (double xi : grid) {
        if (!(xi >= 0.0 && xi <= 1.0)) {
            throw InvalidParameter("frame split xi must lie in [0, 1]");
        }
    }
    const double penalty = violation_penalty < 0.0 ? static_cast<double>(qos.horizon) : violation_penalty;
    const auto traces = draw_traces(nodes, qos.horizon, seed);
    SplitChoice out;
    out.objective_per_xi.resize(grid.size());
    parallel_for(grid.size(), static_cast<unsigned>(threads), [&](std::size_t i) {
        FramePolicy policy = base;
        policy.xi = grid[i];
        const auto r = collab_schedule_traces(nodes, traces, qos, link, policy);
        out.objective_per_xi[i] = static_cast<double>(r.delivered_count) - penalty * static_cast<double>(r.violations);
    });
    out.xi = grid.front();
    out.objective = out.objective_per_xi.front();
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (out.objective_per_xi[i] > out.objective) {
            out.xi = grid[i];
            out.objective = out.objective_per_xi[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batching

namespace {

/// `projected(k)` is the arrival the node expects in slot k + 1.
template <typename Projection>
BatchTrace run_batching(const NodeState& node, const std::vector<double>& arrivals_j,
                        const std::vector<std::uint8_t>& event_slots, double overflow_guard_j,
                        const BatchOptions& options, Projection projected)
{
    node.validate();
    if (!(overflow_guard_j >= 0.0) || !(overflow_guard_j < node.capacity_j)) {
        throw InvalidParameter("overflow guard must lie in [0, capacity)");
    }
    if (!(options.sensing_energy_j >= 0.0) || !(options.reserve_j >= 0.0) || options.reserve_j > node.capacity_j) {
        throw InvalidParameter("sensing energy and reserve must be non-negative, reserve within capacity");
    }
    BatchTrace out;
    double battery = node.battery_j;
    for (std::size_t k = 0; k < event_slots.size(); ++k) {
        const double arrival = k < arrivals_j.size() ? arrivals_j[k] : 0.0;
        if (!(arrival >= 0.0)) {
            throw InvalidParameter("arrival energy must be non-negative");
        }
        battery += arrival;
        if (battery > node.capacity_j) {
            out.discarded_j += battery - node.capacity_j;
            battery = node.capacity_j;
        }
        BatchDecision decision = BatchDecision::Idle;
        if (event_slots[k] != 0 && battery >= options.sensing_energy_j) {
            battery -= options.sensing_energy_j;
            decision = BatchDecision::Sense;
            ++out.sensed;
        } else if (options.batching && battery + projected(k) > node.capacity_j - overflow_guard_j
                   && battery > options.reserve_j) {
            battery = options.reserve_j;
            decision = BatchDecision::TransmitBatch;
            ++out.batches;
        }
        out.decisions.push_back(decision);
        out.battery_j.push_back(battery);
    }
    return out;
}

}  // namespace

BatchTrace batch_policy_traces(const NodeState& node, const std::vector<double>& arrivals_j,
                               const std::vector<std::uint8_t>& event_slots, double overflow_guard_j,
                               const BatchOptions& options)
{
    return run_batching(node, arrivals_j, event_slots, overflow_guard_j, options,
                        [&](std::size_t k) { return k + 1 < arrivals_j.size() ? arrivals_j[k + 1] : 0.0; });
}

BatchTrace batch_policy(const NodeState& node, const std::vector<std::uint8_t>& event_slots, double overflow_guard_j,
                        const BatchOptions& options, std::uint64_t seed)
{
    node.validate();
    const auto arrivals = scheduling::simulate_arrivals(node.arrivals, event_slots.size(), seed);
    if (std::holds_alternative<scheduling::DeterministicArrivals>(node.arrivals)) {
        return batch_policy_traces(node, arrivals, event_slots, overflow_guard_j, options);
    }
    // Future arrivals of a random process are unknown: project with the mean.
    const double expected = scheduling::mean_arrival(node.arrivals);
    return run_batching(node, arrivals, event_slots, overflow_guard_j, options, [expected](std::size_t) { return expected; });
}

// ---------------------------------------------------------------------------
// Correlation

double traffic_correlation_kernel(double distance_m, double correlation_distance_m)
{
    if (!(distance_m >= 0.0) || !(correlation_distance_m > 0.0)) {
        throw InvalidParameter("distance must be non-negative and correlation distance positive");
    }
    return std::exp(-distance_m / correlation_distance_m);
}

std::array<std::vector<double>, 2> correlated_bernoulli_arrivals(
    double distance_m, const std::array<scheduling::BernoulliArrivals, 2>& processes, std::size_t slots,
    std::uint64_t seed, double correlation_distance_m)
{
    const double rho = traffic_correlation_kernel(distance_m, correlation_distance_m);
    for (const auto& p : processes) {
        scheduling::validate(scheduling::EnergyArrivalProcess{p});
    }
    const double mix = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    Rng rng(seed);
    std::array<std::vector<double>, 2> out{std::vector<double>(slots), std::vector<double>(slots)};
    for (std::size_t k = 0; k < slots; ++k) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double za = z1;
        const double zb = rho * z1 + mix * z2;
        out[0][k] = phi(za) < processes[0].p ? processes[0].energy_j : 0.0;
        out[1][k] = phi(zb) < processes[1].p ? processes[1].energy_j : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

CollabTrace read_trace_csv(std::istream& in)
{
    const auto table = csv::read(in);
    const std::vector<std::string> expected{"slot", "arrival_a_j", "arrival_b_j", "event"};
    if (table.header != expected) {
        throw IngestionError("expected header slot,arrival_a_j,arrival_b_j,event", {1});
    }
    CollabTrace out;
    std::vector<std::size_t> bad;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        double slot = 0.0;
        double a = 0.0;
        double b = 0.0;
        double event = 0.0;
        const bool ok = row.size() == 4 && csv::parse_double(row[0], slot) && csv::parse_double(row[1], a)
            && csv::parse_double(row[2], b) && csv::parse_double(row[3], event)
            && slot == static_cast<double>(r) && a >= 0.0 && b >= 0.0 && (event == 0.0 || event == 1.0);
        if (!ok) {
            bad.push_back(table.line_numbers[r]);
            continue;
        }
        out.arrivals_j[0].push_back(a);
        out.arrivals_j[1].push_back(b);
        out.events.push_back(event == 1.0 ? 1 : 0);
    }
    if (!bad.empty()) {
        throw IngestionError("malformed trace rows (slots must count up from 0, energies >= 0, events 0/1)",
                             std::move(bad));
    }
    return out;
}

void write_frames_csv(std::ostream& out, const CollabResult& result)
{
    csv::write_row(out, {"frame", "node", "jt", "delivered", "gap"});
    for (std::size_t f = 0; f < result.frames.size(); ++f) {
        const auto& fr = result.frames[f];
        const char* node = fr.scheduled_node == ScheduledNode::A ? "A" : fr.scheduled_node == ScheduledNode::B ? "B" : "none";
        csv::write_row(out, {std::to_string(f), node, fr.jt_active ? "1" : "0", fr.delivered ? "1" : "0",
                             std::to_string(fr.gap)});
    }
}

}  // namespace rfharvest::collaboration
