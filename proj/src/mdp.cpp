#include "rfharvest/mdp.hpp"

#include "rfharvest/csv.hpp"
#include "rfharvest/error.hpp"
#include "rfharvest/rng.hpp"
#include "rfharvest/scheduling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace rfharvest::scheduling {

void MdpModel::validate() const
{
    validate_transition_matrix(energy_transition);
    validate_transition_matrix(channel_transition);
    if (energy_state_j.size() != energy_transition.size()) {
        throw InvalidParameter("one harvested energy per energy state is required");
    }
    if (channel_gain.size() != channel_transition.size()) {
        throw InvalidParameter("one gain per channel state is required");
    }
    for (double e : energy_state_j) {
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw InvalidParameter("harvested energy must be finite and non-negative");
        }
    }
    for (double g : channel_gain) {
        if (!(g >= 0.0) || !std::isfinite(g)) {
            throw InvalidParameter("channel gains must be finite and non-negative");
        }
    }
    if (battery_buckets < 2 || power_levels < 1) {
        throw InvalidParameter("need at least two battery buckets and one power level");
    }
    if (!(battery_capacity_j > 0.0) || !std::isfinite(battery_capacity_j) || !(slot_duration_s > 0.0)
        || !(noise_power_w > 0.0) || !(reward_scale > 0.0)) {
        throw InvalidParameter("capacity, slot duration, noise and reward scale must be positive");
    }
}

std::size_t MdpModel::state_count() const noexcept
{
    return battery_buckets * energy_state_j.size() * channel_gain.size();
}

std::size_t MdpModel::state_index(std::size_t battery, std::size_t energy, std::size_t channel) const noexcept
{
    return (battery * energy_state_j.size() + energy) * channel_gain.size() + channel;
}

double MdpModel::quantum_j() const noexcept
{
    return battery_capacity_j / static_cast<double>(battery_buckets - 1);
}

std::size_t MdpModel::harvest_quanta(std::size_t energy_state) const noexcept
{
    return static_cast<std::size_t>(std::llround(energy_state_j[energy_state] / quantum_j()));
}

std::size_t MdpModel::max_action(std::size_t battery) const noexcept
{
    return std::min(battery, power_levels - 1);
}

double MdpModel::action_power_w(std::size_t action) const noexcept
{
    return static_cast<double>(action) * quantum_j() / slot_duration_s;
}

double MdpModel::reward(std::size_t channel, std::size_t action) const noexcept
{
    return reward_scale * std::log2(1.0 + action_power_w(action) * channel_gain[channel] / noise_power_w);
}

StateLabel state_label(const MdpModel& model, std::size_t index)
{
    const std::size_t nc = model.channel_gain.size();
    const std::size_t ne = model.energy_state_j.size();
    return {index / (nc * ne), (index / nc) % ne, index % nc};
}

namespace {

struct Transition {
    std::size_t to;
    double p;
};

/// Successors of state s under action a.
std::vector<Transition> successors(const MdpModel& m, std::size_t s, std::size_t a)
{
    const auto [b, e, c] = state_label(m, s);
    const std::size_t next_b = std::min(m.battery_buckets - 1, b - a + m.harvest_quanta(e));
    std::vector<Transition> out;
    for (std::size_t e2 = 0; e2 < m.energy_state_j.size(); ++e2) {
        const double pe = m.energy_transition[e][e2];
        if (pe == 0.0) {
            continue;
        }
        for (std::size_t c2 = 0; c2 < m.channel_gain.size(); ++c2) {
            const double pc = m.channel_transition[c][c2];
            if (pc > 0.0) {
                out.push_back({m.state_index(next_b, e2, c2), pe * pc});
            }
        }
    }
    return out;
}

double action_value(const MdpModel& m, std::size_t s, std::size_t a, const Eigen::VectorXd& h)
{
    double v = m.reward(state_label(m, s).channel, a);
    for (const auto& t : successors(m, s, a)) {
        v += t.p * h(static_cast<Eigen::Index>(t.to));
    }
    return v;
}

double reward_magnitude(const MdpModel& m)
{
    double top = 0.0;
    for (std::size_t c = 0; c < m.channel_gain.size(); ++c) {
        top = std::max(top, m.reward(c, m.power_levels - 1));
    }
    return std::max(top, m.reward_scale);
}

/// Solves g + h(s) = r(s) + sum_s' P(s, s') h(s') with h(0) = 0.
void evaluate(const MdpModel& m, const std::vector<std::size_t>& action, double& gain, Eigen::VectorXd& bias)
{
    const auto n = static_cast<Eigen::Index>(m.state_count());
    // Unknowns: gain in column 0, h(1..n-1) in columns 1..n-1.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const auto su = static_cast<std::size_t>(s);
        r(s) = m.reward(state_label(m, su).channel, action[su]);
        a(s, 0) = 1.0;
        if (s != 0) {
            a(s, s) += 1.0;
        }
        for (const auto& t : successors(m, su, action[su])) {
            if (t.to != 0) {
                a(s, static_cast<Eigen::Index>(t.to)) -= t.p;
            }
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
        throw DegenerateModel("policy induces a chain with more than one recurrent class");
    }
    const Eigen::VectorXd x = lu.solve(r);
    gain = x(0);
    bias = x;
    bias(0) = 0.0;
}

void check_policy(const MdpModel& m, const Policy& policy)
{
    m.validate();
    if (policy.action.size() != m.state_count()) {
        throw InvalidParameter("policy size does not match the model");
    }
    for (std::size_t s = 0; s < policy.action.size(); ++s) {
        if (policy.action[s] > m.max_action(state_label(m, s).battery)) {
            throw InvalidParameter("policy spends more energy than the battery holds");
        }
    }
}

}  // namespace

Policy mdp_policy_iteration(const MdpModel& model)
{
    model.validate();
    const std::size_t n = model.state_count();
    const double eps = 1e-11 * reward_magnitude(model);
    Policy policy;
    policy.action.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        policy.action[s] = model.max_action(state_label(model, s).battery);
    }
    Eigen::VectorXd bias;
    for (std::size_t iter = 1;; ++iter) {
        evaluate(model, policy.action, policy.gain, bias);
        bool changed = false;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t current = policy.action[s];
            double best_value = action_value(model, s, current, bias);
            std::size_t best = current;
            for (std::size_t a = 0; a <= model.max_action(state_label(model, s).battery); ++a) {
                const double v = action_value(model, s, a, bias);
                if (v > best_value + eps) {
                    best_value = v;
                    best = a;
                }
            }
            if (best != current) {
                policy.action[s] = best;
                changed = true;
            }
        }
        policy.iterations = iter;
        if (!changed || iter > 10'000) {
            break;
        }
    }
    policy.bias.assign(bias.data(), bias.data() + bias.size());
    return policy;
}

ValueIterationResult relative_value_iteration(const MdpModel& model, double span_tolerance,
                                              std::size_t max_iterations)
{
    model.validate();
    if (!(span_tolerance > 0.0)) {
        throw InvalidParameter("span tolerance must be positive");
    }
    const std::size_t n = model.state_count();
    constexpr double kStay = 0.5;  // self-loop weight of the aperiodicity transform

    // Cache rewards and successor lists.
    std::vector<std::vector<double>> rewards(n);
    std::vector<std::vector<std::vector<Transition>>> next(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto label = state_label(model, s);
        for (std::size_t a = 0; a <= model.max_action(label.battery); ++a) {
            rewards[s].push_back(model.reward(label.channel, a));
            next[s].push_back(successors(model, s, a));
        }
    }

    ValueIterationResult out;
    out.action.assign(n, 0);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd updated(h.size());
    for (std::size_t iter = 1; iter <= max_iterations; ++iter) {
        for (std::size_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < rewards[s].size(); ++a) {
                double v = rewards[s][a];
                for (const auto& t : next[s][a]) {
                    v += t.p * h(static_cast<Eigen::Index>(t.to));
                }
                v = (1.0 - kStay) * v + kStay * h(static_cast<Eigen::Index>(s));
                if (v > best) {
                    best = v;
                    out.action[s] = a;
                }
            }
            updated(static_cast<Eigen::Index>(s)) = best;
        }
        const Eigen::VectorXd diff = updated - h;
        const double lo = diff.minCoeff();
        const double hi = diff.maxCoeff();
        out.span = hi - lo;
        out.gain = (lo + hi) / 2.0 / (1.0 - kStay);
        out.iterations = iter;
        h = updated.array() - updated(0);
        if (out.span < span_tolerance) {
            break;
        }
    }
    return out;
}

Policy threshold_policy(const MdpModel& model, double theta_j, std::size_t level)
{
    model.validate();
    if (!(theta_j >= 0.0)) {
        throw InvalidParameter("threshold must be non-negative");
    }
    if (level >= model.power_levels) {
        throw InvalidParameter("power level out of range");
    }
    std::size_t spend = level;
    if (spend == 0) {
        const auto pi = stationary_distribution(model.energy_transition);
        double mean = 0.0;
        for (std::size_t e = 0; e < pi.size(); ++e) {
            mean += pi[e] * static_cast<double>(model.harvest_quanta(e));
        }
        spend = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(mean)), 1, model.power_levels - 1);
    }
    Policy policy;
    policy.action.resize(model.state_count());
    const double q = model.quantum_j();
    for (std::size_t s = 0; s < policy.action.size(); ++s) {
        const std::size_t b = state_label(model, s).battery;
        const double stored = static_cast<double>(b) * q;
        // Relative slack keeps thresholds that sit on a bucket edge inclusive.
        const bool fire = b > 0 && stored >= theta_j * (1.0 - 1e-12);
        policy.action[s] = fire ? std::min(spend, b) : 0;
    }
    return policy;
}

Policy silent_policy(const MdpModel& model)
{
    model.validate();
    Policy policy;
    policy.action.assign(model.state_count(), 0);
    return policy;
}

double evaluate_policy_exact(const MdpModel& model, const Policy& policy)
{
    check_policy(model, policy);
    // Only the states reachable from the empty start matter for its gain.
    const std::size_t n = model.state_count();
    std::vector<std::size_t> order{0};
    std::vector<long> local(n, -1);
    local[0] = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (const auto& t : successors(model, order[i], policy.action[order[i]])) {
            if (local[t.to] < 0) {
                local[t.to] = static_cast<long>(order.size());
                order.push_back(t.to);
            }
        }
    }
    const auto m = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t s = order[static_cast<std::size_t>(i)];
        r(i) = model.reward(state_label(model, s).channel, policy.action[s]);
        for (const auto& t : successors(model, s, policy.action[s])) {
            p(i, local[t.to]) += t.p;
        }
    }
    // Stationary equations pi (P - I) = 0, sum(pi) = 1.
    Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(m, m);
    a.row(m - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    b(m - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
        return lu.solve(b).dot(r);
    }
    // Several closed classes are reachable: the limiting distribution of the
    // lazy chain from the start state weights them correctly.
    const Eigen::MatrixXd lazy = 0.5 * (p + Eigen::MatrixXd::Identity(m, m));
    Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(m);
    dist(0) = 1.0;
    for (int iter = 0; iter < 10'000'000; ++iter) {
        const Eigen::RowVectorXd next = dist * lazy;
        const double change = (next - dist).lpNorm<1>();
        dist = next;
        if (change < 1e-15) {
            break;
        }
    }
    return dist.dot(r);
}

double evaluate_policy(const MdpModel& model, const Policy& policy, std::size_t horizon, std::uint64_t seed)
{
    check_policy(model, policy);
    if (horizon == 0) {
        throw InvalidParameter("horizon must be at least one slot");
    }
    Rng rng(seed);
    const auto draw = [&](const std::vector<double>& row) {
        if (row.size() == 1) {
            return std::size_t{0};
        }
        const double u = rng.uniform();
        double cumulative = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            cumulative += row[j];
            if (u < cumulative) {
                return j;
            }
        }
        return row.size() - 1;
    };
    std::size_t b = 0;
    std::size_t e = 0;
    std::size_t c = 0;
    double total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        const std::size_t a = policy.action[model.state_index(b, e, c)];
        total += model.reward(c, a);
        b = std::min(model.battery_buckets - 1, b - a + model.harvest_quanta(e));
        e = draw(model.energy_transition[e]);
        c = draw(model.channel_transition[c]);
    }
    return total / static_cast<double>(horizon);
}

MdpModel default_desk_model()
{
    MdpModel m;
    // Quiet and busy office hours; 0.1 mJ battery quanta, 10 dB SNR per quantum.
    m.energy_state_j = {0.0, 2e-4};
    m.energy_transition = {{0.9, 0.1}, {0.2, 0.8}};
    m.channel_gain = {1e-4};
    m.channel_transition = {{1.0}};
    m.battery_capacity_j = 1.5e-3;
    m.battery_buckets = 16;
    m.power_levels = 8;
    m.slot_duration_s = 1.0;
    m.noise_power_w = 1e-9;
    return m;
}

void write_policy_csv(std::ostream& out, const MdpModel& model, const Policy& policy)
{
    check_policy(model, policy);
    csv::write_row(out, {"battery_j", "energy_state", "channel_state", "action", "power_w"});
    for (std::size_t s = 0; s < policy.action.size(); ++s) {
        const auto label = state_label(model, s);
        csv::write_row(out, {csv::format(static_cast<double>(label.battery) * model.quantum_j()),
                             std::to_string(label.energy), std::to_string(label.channel),
                             std::to_string(policy.action[s]), csv::format(model.action_power_w(policy.action[s]))});
    }
}

}  // namespace rfharvest::scheduling
