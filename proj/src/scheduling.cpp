#include "rfharvest/scheduling.hpp"

#include "rfharvest/error.hpp"
#include "rfharvest/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

namespace rfharvest::scheduling {

// ---------------------------------------------------------------------------
// Arrival processes

void validate_transition_matrix(const std::vector<std::vector<double>>& matrix)
{
    if (matrix.empty()) {
        throw InvalidParameter("transition matrix is empty");
    }
    for (const auto& row : matrix) {
        if (row.size() != matrix.size()) {
            throw InvalidParameter("transition matrix must be square");
        }
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0) || p > 1.0) {
                throw InvalidParameter("transition probabilities must lie in [0, 1]");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InvalidParameter("transition matrix rows must sum to 1");
        }
    }
}

void validate(const EnergyArrivalProcess& process)
{
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliArrivals>) {
                if (!(p.p >= 0.0 && p.p <= 1.0) || !(p.energy_j >= 0.0)) {
                    throw InvalidParameter("Bernoulli arrivals need p in [0, 1] and non-negative energy");
                }
            } else if constexpr (std::is_same_v<T, TriStateArrivals>) {
                if (!(p.energy_j >= 0.0)) {
                    throw InvalidParameter("arrival energy must be non-negative");
                }
            } else if constexpr (std::is_same_v<T, MarkovArrivals>) {
                validate_transition_matrix(p.transition);
                if (p.state_energy_j.size() != p.transition.size()) {
                    throw InvalidParameter("one energy level per Markov state is required");
                }
                if (p.initial_state >= p.transition.size()) {
                    throw InvalidParameter("initial Markov state out of range");
                }
                for (double e : p.state_energy_j) {
                    if (!(e >= 0.0)) {
                        throw InvalidParameter("arrival energy must be non-negative");
                    }
                }
            } else {
                for (double e : p.trace_j) {
                    if (!(e >= 0.0)) {
                        throw InvalidParameter("arrival energy must be non-negative");
                    }
                }
            }
        },
        process);
}

std::vector<double> stationary_distribution(const std::vector<std::vector<double>>& matrix)
{
    validate_transition_matrix(matrix);
    const auto n = static_cast<Eigen::Index>(matrix.size());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            a(i, j) = matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] - (i == j ? 1.0 : 0.0);
        }
    }
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
        throw DegenerateModel("transition matrix has no unique stationary distribution");
    }
    const Eigen::VectorXd pi = lu.solve(b);
    std::vector<double> out(matrix.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
    }
    return out;
}

double mean_arrival(const EnergyArrivalProcess& process)
{
    validate(process);
    return std::visit(
        [](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliArrivals>) {
                return p.p * p.energy_j;
            } else if constexpr (std::is_same_v<T, TriStateArrivals>) {
                return p.energy_j;
            } else if constexpr (std::is_same_v<T, MarkovArrivals>) {
                const auto pi = stationary_distribution(p.transition);
                return std::inner_product(pi.begin(), pi.end(), p.state_energy_j.begin(), 0.0);
            } else {
                if (p.trace_j.empty()) {
                    return 0.0;
                }
                return std::accumulate(p.trace_j.begin(), p.trace_j.end(), 0.0) / static_cast<double>(p.trace_j.size());
            }
        },
        process);
}

namespace {

std::size_t next_state(Rng& rng, const std::vector<double>& row)
{
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        cumulative += row[j];
        if (u < cumulative) {
            return j;
        }
    }
    // Rounding left u above the final cumulative sum: take the last state with mass.
    for (std::size_t j = row.size(); j-- > 0;) {
        if (row[j] > 0.0) {
            return j;
        }
    }
    return row.size() - 1;
}

}  // namespace

std::vector<std::size_t> simulate_markov_states(const MarkovArrivals& process, std::size_t slots, std::uint64_t seed)
{
    validate(EnergyArrivalProcess{process});
    Rng rng(seed);
    std::vector<std::size_t> states(slots);
    std::size_t s = process.initial_state;
    for (std::size_t k = 0; k < slots; ++k) {
        states[k] = s;
        s = next_state(rng, process.transition[s]);
    }
    return states;
}

std::vector<double> simulate_arrivals(const EnergyArrivalProcess& process, std::size_t slots, std::uint64_t seed)
{
    validate(process);
    std::vector<double> out(slots, 0.0);
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliArrivals>) {
                Rng rng(seed);
                for (auto& e : out) {
                    e = rng.bernoulli(p.p) ? p.energy_j : 0.0;
                }
            } else if constexpr (std::is_same_v<T, TriStateArrivals>) {
                Rng rng(seed);
                for (auto& e : out) {
                    e = static_cast<double>(rng.uniform_index(3)) * p.energy_j;
                }
            } else if constexpr (std::is_same_v<T, MarkovArrivals>) {
                const auto states = simulate_markov_states(p, slots, seed);
                for (std::size_t k = 0; k < slots; ++k) {
                    out[k] = p.state_energy_j[states[k]];
                }
            } else {
                std::copy_n(p.trace_j.begin(), std::min(slots, p.trace_j.size()), out.begin());
            }
        },
        process);
    return out;
}

// ---------------------------------------------------------------------------
// Problem definition

void ScheduleProblem::validate() const
{
    const std::size_t k = slots();
    if (k == 0) {
        throw InvalidParameter("schedule needs at least one slot");
    }
    if (relay_arrivals_j.size() != k || gains.size() != k) {
        throw InvalidParameter("arrival and gain traces must have one entry per slot");
    }
    if (!(slot_duration_s > 0.0) || !(noise_power_w > 0.0)) {
        throw InvalidParameter("slot duration and noise power must be positive");
    }
    if (!(battery_capacity_source_j > 0.0) || !(battery_capacity_relay_j > 0.0)) {
        throw InvalidParameter("battery capacities must be positive");
    }
    if (!(initial_battery_source_j >= 0.0) || !(initial_battery_relay_j >= 0.0)
        || initial_battery_source_j > battery_capacity_source_j || initial_battery_relay_j > battery_capacity_relay_j) {
        throw InvalidParameter("initial battery levels must lie within capacity");
    }
    if (!(rx_energy_cost_j >= 0.0) || !(max_power_w >= 0.0) || !std::isfinite(max_power_w)) {
        throw InvalidParameter("receive cost and power ceiling must be finite and non-negative");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (!(source_arrivals_j[i] >= 0.0) || !(relay_arrivals_j[i] >= 0.0) || !std::isfinite(source_arrivals_j[i])
            || !std::isfinite(relay_arrivals_j[i])) {
            throw InvalidParameter("energy arrivals must be finite and non-negative");
        }
        if (!(gains[i].h >= 0.0) || !(gains[i].g >= 0.0)) {
            throw InvalidParameter("channel gains must be non-negative");
        }
    }
}

std::vector<double> power_levels(const ScheduleProblem& problem, std::size_t levels)
{
    problem.validate();
    if (levels < 2) {
        throw InvalidParameter("at least two power levels are required");
    }
    double top = problem.max_power_w;
    if (top == 0.0) {
        const auto reachable = [](double initial, const std::vector<double>& arrivals, double capacity) {
            return std::min(capacity, initial + std::accumulate(arrivals.begin(), arrivals.end(), 0.0));
        };
        top = std::max(reachable(problem.initial_battery_source_j, problem.source_arrivals_j,
                                 problem.battery_capacity_source_j),
                       reachable(problem.initial_battery_relay_j, problem.relay_arrivals_j,
                                 problem.battery_capacity_relay_j))
            / problem.slot_duration_s;
    }
    std::vector<double> out(levels);
    for (std::size_t j = 0; j < levels; ++j) {
        out[j] = top * static_cast<double>(j) / static_cast<double>(levels - 1);
    }
    return out;
}

double slot_bits(double power_w, double gain, double noise_w) noexcept
{
    return std::log2(1.0 + power_w * gain / noise_w);
}

// ---------------------------------------------------------------------------
// Offline solvers

namespace {

enum class Objective { MaxThroughput, MinRelayTime };

using ActionCode = std::uint16_t;

struct Node {
    double bs = 0.0;
    double br = 0.0;
    double buffer = 0.0;
    double bits = 0.0;
    double energy = 0.0;
    std::uint32_t relay_slots = 0;
    std::vector<ActionCode> history;
};

Node start_node(const ScheduleProblem& p)
{
    Node n;
    n.bs = p.initial_battery_source_j;
    n.br = p.initial_battery_relay_j;
    return n;
}

struct Context {
    const ScheduleProblem& problem;
    std::vector<double> levels;
    std::size_t level_count;
    double tolerance;

    Context(const ScheduleProblem& p, std::size_t count)
        : problem(p), levels(power_levels(p, count)), level_count(count),
          tolerance(1e-9 * levels.back() * p.slot_duration_s)
    {
        if (count * count > 65535) {
            throw ProblemTooLarge("too many power levels");
        }
        // Without energy every level is 0 W; only the idle action remains.
        if (levels.back() == 0.0) {
            levels.resize(1);
            level_count = 1;
        }
    }

    std::size_t source_level(ActionCode c) const { return c / level_count; }
    std::size_t relay_level(ActionCode c) const { return c % level_count; }
};

bool near(double a, double b)
{
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// "Earlier" history: the larger action code at the first slot where they differ.
bool earlier(const std::vector<ActionCode>& a, const std::vector<ActionCode>& b)
{
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

/// Final preference between two complete schedules.
bool preferred(const Node& a, const Node& b, Objective objective)
{
    if (objective == Objective::MinRelayTime && a.relay_slots != b.relay_slots) {
        return a.relay_slots < b.relay_slots;
    }
    if (!near(a.bits, b.bits) && objective == Objective::MaxThroughput) {
        return a.bits > b.bits;
    }
    if (!near(a.energy, b.energy)) {
        return a.energy < b.energy;
    }
    return earlier(a.history, b.history);
}

/// Advances one slot. Returns false when the action is not allowed.
bool advance(const Context& ctx, std::size_t k, const Node& in, ActionCode code, Node& out)
{
    const auto& p = ctx.problem;
    const std::size_t i = ctx.source_level(code);
    const std::size_t j = ctx.relay_level(code);
    if (i > 0 && j > 0) {
        return false;
    }
    if (p.delay_constrained) {
        const bool received_last = k > 0 && ctx.source_level(in.history.back()) > 0;
        if ((j > 0) != received_last) {
            return false;
        }
        if (i > 0 && k + 1 == p.slots()) {
            return false;
        }
    }
    const double tau = p.slot_duration_s;
    const double bs = std::min(p.battery_capacity_source_j, in.bs + p.source_arrivals_j[k]);
    const double br = std::min(p.battery_capacity_relay_j, in.br + p.relay_arrivals_j[k]);
    const double es = ctx.levels[i] * tau;
    const double er = ctx.levels[j] * tau + (i > 0 ? p.rx_energy_cost_j : 0.0);
    if (es > bs + ctx.tolerance || er > br + ctx.tolerance) {
        return false;
    }
    const double forwarded = j > 0 ? std::min(slot_bits(ctx.levels[j], p.gains[k].g, p.noise_power_w), in.buffer) : 0.0;
    const double received = i > 0 ? slot_bits(ctx.levels[i], p.gains[k].h, p.noise_power_w) : 0.0;
    out.bs = std::max(0.0, bs - es);
    out.br = std::max(0.0, br - er);
    out.buffer = p.delay_constrained ? received : in.buffer - forwarded + received;
    out.bits = in.bits + forwarded;
    out.energy = in.energy + es + er;
    out.relay_slots = in.relay_slots + (j > 0 ? 1U : 0U);
    out.history = in.history;
    out.history.push_back(code);
    return true;
}

/// a is at least as good as b in every component that matters for the future.
bool covers(const Node& a, const Node& b, Objective objective)
{
    if (a.buffer < b.buffer || a.bits < b.bits || a.energy > b.energy) {
        return false;
    }
    if (objective == Objective::MinRelayTime && a.relay_slots > b.relay_slots) {
        return false;
    }
    return true;
}

bool same_values(const Node& a, const Node& b, Objective objective)
{
    return a.buffer == b.buffer && a.bits == b.bits && a.energy == b.energy
        && (objective == Objective::MaxThroughput || a.relay_slots == b.relay_slots);
}

/// Adds `node` to a Pareto front of states sharing both battery levels.
/// Returns the change in front size.
long insert_front(std::vector<Node>& front, Node&& node, Objective objective)
{
    for (const auto& other : front) {
        if (covers(other, node, objective)
            && (!same_values(other, node, objective) || !earlier(node.history, other.history))) {
            return 0;
        }
    }
    const auto before = static_cast<long>(front.size());
    std::erase_if(front, [&](const Node& other) { return covers(node, other, objective); });
    front.push_back(std::move(node));
    return static_cast<long>(front.size()) - before;
}

struct DpOutcome {
    std::vector<Node> terminal;
    bool exact = true;
};

DpOutcome run_exact(const Context& ctx, Objective objective, std::size_t max_states)
{
    std::vector<Node> stage{start_node(ctx.problem)};
    const std::size_t codes = ctx.level_count * ctx.level_count;
    for (std::size_t k = 0; k < ctx.problem.slots(); ++k) {
        std::map<std::pair<double, double>, std::vector<Node>> groups;
        long count = 0;
        for (const auto& node : stage) {
            for (std::size_t c = 0; c < codes; ++c) {
                Node next;
                if (!advance(ctx, k, node, static_cast<ActionCode>(c), next)) {
                    continue;
                }
                count += insert_front(groups[{next.bs, next.br}], std::move(next), objective);
                if (static_cast<std::size_t>(count) > max_states) {
                    throw ProblemTooLarge("schedule state space exceeds " + std::to_string(max_states) + " states");
                }
            }
        }
        stage.clear();
        for (auto& [key, front] : groups) {
            for (auto& n : front) {
                stage.push_back(std::move(n));
            }
        }
    }
    return {std::move(stage), true};
}

DpOutcome run_bucketed(const Context& ctx, Objective objective, const DpOptions& options)
{
    const auto& p = ctx.problem;
    const auto span = [](double initial, const std::vector<double>& a, double cap) {
        return std::max(1e-300, std::min(cap, initial + std::accumulate(a.begin(), a.end(), 0.0)));
    };
    const double span_s = span(p.initial_battery_source_j, p.source_arrivals_j, p.battery_capacity_source_j);
    const double span_r = span(p.initial_battery_relay_j, p.relay_arrivals_j, p.battery_capacity_relay_j);
    double span_bits = 1e-300;
    for (const auto& gk : p.gains) {
        span_bits += slot_bits(ctx.levels.back(), gk.h, p.noise_power_w);
    }
    const auto bucket = [](double v, double range, std::size_t n) {
        return std::min<std::size_t>(n - 1, static_cast<std::size_t>(v / range * static_cast<double>(n)));
    };
    const auto rank = [&](const Node& a, const Node& b) {
        // Keep the representative with more delivered bits, then more stored resources.
        if (!near(a.bits, b.bits)) {
            return a.bits > b.bits;
        }
        const double ra = a.bs / span_s + a.br / span_r + a.buffer / span_bits;
        const double rb = b.bs / span_s + b.br / span_r + b.buffer / span_bits;
        if (ra != rb) {
            return ra > rb;
        }
        return preferred(a, b, Objective::MaxThroughput);
    };

    std::vector<Node> stage{start_node(p)};
    const std::size_t codes = ctx.level_count * ctx.level_count;
    for (std::size_t k = 0; k < p.slots(); ++k) {
        std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::uint32_t>, Node> cells;
        for (const auto& node : stage) {
            for (std::size_t c = 0; c < codes; ++c) {
                Node next;
                if (!advance(ctx, k, node, static_cast<ActionCode>(c), next)) {
                    continue;
                }
                const auto key = std::make_tuple(bucket(next.bs, span_s, options.battery_buckets),
                                                 bucket(next.br, span_r, options.battery_buckets),
                                                 bucket(next.buffer, span_bits, options.bit_buckets),
                                                 objective == Objective::MinRelayTime ? next.relay_slots : 0U);
                auto it = cells.find(key);
                if (it == cells.end()) {
                    cells.emplace(key, std::move(next));
                } else if (rank(next, it->second)) {
                    it->second = std::move(next);
                }
            }
        }
        stage.clear();
        for (auto& [key, node] : cells) {
            stage.push_back(std::move(node));
        }
    }
    return {std::move(stage), false};
}

DpOutcome run_dp(const Context& ctx, Objective objective, const DpOptions& options)
{
    try {
        return run_exact(ctx, objective, options.max_states);
    } catch (const ProblemTooLarge&) {
        if (!options.allow_bucketing) {
            throw;
        }
    }
    if (options.battery_buckets == 0 || options.bit_buckets == 0) {
        throw InvalidParameter("bucket counts must be positive");
    }
    return run_bucketed(ctx, objective, options);
}

Schedule build_schedule(const Context& ctx, const std::vector<ActionCode>& history, bool exact)
{
    const auto& p = ctx.problem;
    Schedule s;
    s.exact = exact;
    Node node = start_node(p);
    for (std::size_t k = 0; k < history.size(); ++k) {
        Node next;
        if (!advance(ctx, k, node, history[k], next)) {
            throw Error("internal error: reconstructed schedule is infeasible");
        }
        const double ps = ctx.levels[ctx.source_level(history[k])];
        const double pr = ctx.levels[ctx.relay_level(history[k])];
        s.source_power_w.push_back(ps);
        s.relay_power_w.push_back(pr);
        s.source_active.push_back(ps > 0.0 ? 1 : 0);
        s.relay_active.push_back(pr > 0.0 ? 1 : 0);
        s.delivered_bits.push_back(next.bits - node.bits);
        node = std::move(next);
    }
    s.delivered_total_bits = node.bits;
    s.relay_slots = node.relay_slots;
    s.energy_used_j = node.energy;
    s.objective = node.bits;
    return s;
}

const Node& best_of(const std::vector<Node>& nodes, Objective objective)
{
    const Node* best = &nodes.front();
    for (const auto& n : nodes) {
        if (preferred(n, *best, objective)) {
            best = &n;
        }
    }
    return *best;
}

double demand_slack(double demand) { return 1e-9 * std::max(1.0, std::abs(demand)); }

}  // namespace

Schedule offline_optimal(const ScheduleProblem& problem, std::size_t levels, const DpOptions& options)
{
    const Context ctx(problem, levels);
    const auto outcome = run_dp(ctx, Objective::MaxThroughput, options);
    return build_schedule(ctx, best_of(outcome.terminal, Objective::MaxThroughput).history, outcome.exact);
}

Schedule min_relay_time(const ScheduleProblem& problem, double demand_bits, std::size_t levels,
                        const DpOptions& options)
{
    if (!(demand_bits >= 0.0) || !std::isfinite(demand_bits)) {
        throw InvalidParameter("demand must be finite and non-negative");
    }
    const Context ctx(problem, levels);
    auto outcome = run_dp(ctx, Objective::MinRelayTime, options);
    double max_bits = 0.0;
    for (const auto& n : outcome.terminal) {
        max_bits = std::max(max_bits, n.bits);
    }
    std::erase_if(outcome.terminal, [&](const Node& n) { return n.bits < demand_bits - demand_slack(demand_bits); });
    if (outcome.terminal.empty()) {
        throw Infeasible("demand of " + std::to_string(demand_bits) + " bits cannot be delivered", max_bits);
    }
    auto s = build_schedule(ctx, best_of(outcome.terminal, Objective::MinRelayTime).history, outcome.exact);
    s.objective = static_cast<double>(s.relay_slots);
    return s;
}

namespace {

/// Depth-first enumeration of every feasible action sequence.
struct Enumerator {
    const Context& ctx;
    Objective objective;
    double demand;
    std::optional<Node> best;
    double max_bits = 0.0;

    void visit(std::size_t k, const Node& node)
    {
        if (k == ctx.problem.slots()) {
            max_bits = std::max(max_bits, node.bits);
            if (objective == Objective::MinRelayTime && node.bits < demand - demand_slack(demand)) {
                return;
            }
            if (!best || preferred(node, *best, objective)) {
                best = node;
            }
            return;
        }
        const std::size_t codes = ctx.level_count * ctx.level_count;
        for (std::size_t c = 0; c < codes; ++c) {
            Node next;
            if (advance(ctx, k, node, static_cast<ActionCode>(c), next)) {
                visit(k + 1, next);
            }
        }
    }
};

Enumerator enumerate(const Context& ctx, Objective objective, double demand)
{
    const double combos = std::pow(static_cast<double>(ctx.level_count), 2.0 * static_cast<double>(ctx.problem.slots()));
    if (combos > 1e8) {
        throw ProblemTooLarge("brute force limited to 1e8 action sequences");
    }
    Enumerator e{ctx, objective, demand, std::nullopt};
    e.visit(0, start_node(ctx.problem));
    return e;
}

}  // namespace

Schedule brute_force_oracle(const ScheduleProblem& problem, std::size_t levels)
{
    const Context ctx(problem, levels);
    const auto e = enumerate(ctx, Objective::MaxThroughput, 0.0);
    return build_schedule(ctx, e.best->history, true);
}

Schedule brute_force_min_relay_time(const ScheduleProblem& problem, double demand_bits, std::size_t levels)
{
    if (!(demand_bits >= 0.0) || !std::isfinite(demand_bits)) {
        throw InvalidParameter("demand must be finite and non-negative");
    }
    const Context ctx(problem, levels);
    const auto e = enumerate(ctx, Objective::MinRelayTime, demand_bits);
    if (!e.best) {
        throw Infeasible("demand of " + std::to_string(demand_bits) + " bits cannot be delivered", e.max_bits);
    }
    auto s = build_schedule(ctx, e.best->history, true);
    s.objective = static_cast<double>(s.relay_slots);
    return s;
}

ScheduleCheck validate_schedule(const ScheduleProblem& problem, const Schedule& schedule, double tolerance)
{
    problem.validate();
    const std::size_t k_max = problem.slots();
    ScheduleCheck out;
    const auto fail = [&](std::size_t k, const std::string& why) {
        out.ok = false;
        out.reason = "slot " + std::to_string(k) + ": " + why;
        return out;
    };
    if (schedule.source_power_w.size() != k_max || schedule.relay_power_w.size() != k_max
        || schedule.source_active.size() != k_max || schedule.relay_active.size() != k_max
        || schedule.delivered_bits.size() != k_max) {
        out.ok = false;
        out.reason = "schedule length does not match the problem";
        return out;
    }
    const double tau = problem.slot_duration_s;
    double bs = problem.initial_battery_source_j;
    double br = problem.initial_battery_relay_j;
    double received_total = 0.0;  // through the previous slot
    double delivered_total = 0.0;
    double received_last = 0.0;
    for (std::size_t k = 0; k < k_max; ++k) {
        const double ps = schedule.source_power_w[k];
        const double pr = schedule.relay_power_w[k];
        const bool ds = schedule.source_active[k] != 0;
        const bool dr = schedule.relay_active[k] != 0;
        if (!(ps >= 0.0) || !(pr >= 0.0) || !std::isfinite(ps) || !std::isfinite(pr)) {
            return fail(k, "powers must be finite and non-negative");
        }
        if (ds != (ps > 0.0) || dr != (pr > 0.0)) {
            return fail(k, "activity flags disagree with powers");
        }
        if (ds && dr) {
            return fail(k, "source and relay transmit together");
        }
        if (problem.delay_constrained) {
            const bool prev = k > 0 && schedule.source_active[k - 1] != 0;
            if (dr != prev) {
                return fail(k, "relay must forward exactly in the slot after reception");
            }
            if (ds && k + 1 == k_max) {
                return fail(k, "data received in the final slot cannot be forwarded");
            }
        }

        bs = std::min(problem.battery_capacity_source_j, bs + problem.source_arrivals_j[k]);
        br = std::min(problem.battery_capacity_relay_j, br + problem.relay_arrivals_j[k]);
        const double es = ps * tau;
        const double er = pr * tau + (ds ? problem.rx_energy_cost_j : 0.0);
        if (es > bs + tolerance * std::max(1.0, bs)) {
            return fail(k, "source spends more energy than it has");
        }
        if (er > br + tolerance * std::max(1.0, br)) {
            return fail(k, "relay spends more energy than it has");
        }
        bs = std::max(0.0, bs - es);
        br = std::max(0.0, br - er);

        const double d = schedule.delivered_bits[k];
        const double link_cap = std::log2(1.0 + pr * problem.gains[k].g / problem.noise_power_w);
        if (d < -tolerance || d > link_cap + tolerance * std::max(1.0, link_cap)) {
            return fail(k, "delivered bits exceed the relay link capacity");
        }
        delivered_total += d;
        if (delivered_total > received_total + tolerance * std::max(1.0, received_total)) {
            return fail(k, "relay forwards data it has not received");
        }
        if (problem.delay_constrained && d > received_last + tolerance * std::max(1.0, received_last)) {
            return fail(k, "relay forwards data older than one slot");
        }
        const double r = ds ? std::log2(1.0 + ps * problem.gains[k].h / problem.noise_power_w) : 0.0;
        received_total += r;
        received_last = r;
    }
    if (std::abs(delivered_total - schedule.delivered_total_bits) > tolerance * std::max(1.0, delivered_total)) {
        out.ok = false;
        out.reason = "total delivered bits do not match the per-slot values";
        return out;
    }
    out.delivered_bits = delivered_total;
    return out;
}

// ---------------------------------------------------------------------------
// Single-hop allocation

std::vector<double> water_levels(std::span<const double> powers_w, std::span<const double> gains, double noise_w)
{
    std::vector<double> out(powers_w.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = gains[i] > 0.0 ? powers_w[i] + noise_w / gains[i] : std::numeric_limits<double>::infinity();
    }
    return out;
}

double single_hop_bits(std::span<const double> powers_w, std::span<const double> gains, double noise_w)
{
    if (powers_w.size() != gains.size()) {
        throw InvalidParameter("powers and gains must have equal length");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < powers_w.size(); ++i) {
        sum += slot_bits(powers_w[i], gains[i], noise_w);
    }
    return sum;
}

namespace {

void check_single_hop(std::span<const double> arrivals, double capacity, double tau, double initial)
{
    if (!(capacity > 0.0) || !(tau > 0.0) || !(initial >= 0.0) || initial > capacity) {
        throw InvalidParameter("capacity and slot duration must be positive, initial energy within capacity");
    }
    for (double a : arrivals) {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw InvalidParameter("energy arrivals must be finite and non-negative");
        }
    }
}

}  // namespace

std::vector<double> greedy_powers(std::span<const double> arrivals_j, double capacity_j, double slot_duration_s,
                                  double initial_battery_j)
{
    check_single_hop(arrivals_j, capacity_j, slot_duration_s, initial_battery_j);
    std::vector<double> out(arrivals_j.size());
    double battery = initial_battery_j;
    for (std::size_t k = 0; k < arrivals_j.size(); ++k) {
        battery = std::min(capacity_j, battery + arrivals_j[k]);
        out[k] = battery / slot_duration_s;
        battery = 0.0;
    }
    return out;
}

std::vector<double> directional_water_fill(std::span<const double> arrivals_j, std::span<const double> gains,
                                           double noise_w, double capacity_j, double slot_duration_s,
                                           double initial_battery_j)
{
    check_single_hop(arrivals_j, capacity_j, slot_duration_s, initial_battery_j);
    if (gains.size() != arrivals_j.size()) {
        throw InvalidParameter("arrivals and gains must have equal length");
    }
    if (!(noise_w > 0.0)) {
        throw InvalidParameter("noise power must be positive");
    }
    const std::size_t n = arrivals_j.size();
    const double tau = slot_duration_s;
    if (n == 0) {
        return {};
    }
    // Energy spent per slot, starting from "spend on arrival", and the
    // energy carried from slot m into m + 1.
    std::vector<double> arrived(n);
    for (std::size_t k = 0; k < n; ++k) {
        arrived[k] = std::min(capacity_j, arrivals_j[k] + (k == 0 ? initial_battery_j : 0.0));
    }
    std::vector<double> spend = arrived;
    std::vector<double> carry(n, 0.0);
    const double total = std::accumulate(spend.begin(), spend.end(), 0.0);
    if (total == 0.0) {
        return std::vector<double>(n, 0.0);
    }
    const double stop = 1e-14 * total;
    const auto level = [&](std::size_t k) {
        return gains[k] > 0.0 ? spend[k] / tau + noise_w / gains[k] : std::numeric_limits<double>::infinity();
    };
    for (int sweep = 0; sweep < 200000; ++sweep) {
        double moved = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double wi = level(i);
                const double wj = level(j);
                if (std::isinf(wi) && std::isinf(wj)) {
                    continue;
                }
                double delta = 0.0;
                if (wi > wj) {
                    // Push energy forward: limited by free space in the battery.
                    delta = std::isinf(wi) ? spend[i] : std::min(spend[i], (wi - wj) * tau / 2.0);
                    for (std::size_t m = i; m < j && delta > 0.0; ++m) {
                        delta = std::min(delta, capacity_j - arrived[m + 1] - carry[m]);
                    }
                    if (delta <= 0.0) {
                        continue;
                    }
                    spend[i] -= delta;
                    spend[j] += delta;
                    for (std::size_t m = i; m < j; ++m) {
                        carry[m] += delta;
                    }
                } else if (wj > wi) {
                    // Pull previously carried energy back.
                    delta = std::isinf(wj) ? spend[j] : std::min(spend[j], (wj - wi) * tau / 2.0);
                    for (std::size_t m = i; m < j && delta > 0.0; ++m) {
                        delta = std::min(delta, carry[m]);
                    }
                    if (delta <= 0.0) {
                        continue;
                    }
                    spend[j] -= delta;
                    spend[i] += delta;
                    for (std::size_t m = i; m < j; ++m) {
                        carry[m] -= delta;
                    }
                }
                moved = std::max(moved, delta);
            }
        }
        if (moved <= stop) {
            break;
        }
    }
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = std::max(0.0, spend[k]) / tau;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Combined operation

namespace {

ModeTrace run_controller(std::span<const double> ambient, const swipt::LinkState& link, double threshold,
                         const swipt::RelayOptions& options, bool swipt_fallback)
{
    link.validate();
    if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
        throw InvalidParameter("activation threshold must be finite and non-negative");
    }
    const double half = options.frame_duration_s / 2.0;
    const double snr1 = link.source_power_w * link.h / link.noise_power_w;
    const double snr2 = threshold / half * link.g / link.noise_power_w;
    const double ambient_rate = 0.5 * std::log2(1.0 + swipt::end_to_end_snr(snr1, snr2, options.mode));
    const double swipt_rate =
        swipt_fallback ? swipt::optimize_split(swipt::Protocol::TimeSwitching, link, options).throughput : 0.0;

    ModeTrace out;
    double bank = 0.0;
    for (double e : ambient) {
        if (!(e >= 0.0)) {
            throw InvalidParameter("ambient energy must be non-negative");
        }
        bank += e;
        if (bank >= threshold) {
            bank -= threshold;
            out.modes.push_back(HarvestMode::NonSwipt);
            out.throughput.push_back(ambient_rate);
        } else {
            out.modes.push_back(swipt_fallback ? HarvestMode::Swipt : HarvestMode::Idle);
            out.throughput.push_back(swipt_rate);
        }
        out.total_throughput += out.throughput.back();
    }
    return out;
}

}  // namespace

ModeTrace combined_mode_controller(std::span<const double> ambient_trace_j, const swipt::LinkState& link,
                                   double activation_threshold_j, const swipt::RelayOptions& options)
{
    return run_controller(ambient_trace_j, link, activation_threshold_j, options, true);
}

ModeTrace ambient_only_controller(std::span<const double> ambient_trace_j, const swipt::LinkState& link,
                                  double activation_threshold_j, const swipt::RelayOptions& options)
{
    return run_controller(ambient_trace_j, link, activation_threshold_j, options, false);
}

}  // namespace rfharvest::scheduling
