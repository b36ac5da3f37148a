#include "rfharvest/error.hpp"
#include "rfharvest/rng.hpp"
#include "rfharvest/scheduling.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace rfharvest;
using namespace rfharvest::scheduling;

namespace {

ScheduleProblem random_problem(Rng& rng, std::size_t slots)
{
    ScheduleProblem p;
    p.noise_power_w = 1e-9;
    for (std::size_t k = 0; k < slots; ++k) {
        p.source_arrivals_j.push_back(rng.bernoulli(0.6) ? rng.uniform(0.0, 2e-4) : 0.0);
        p.relay_arrivals_j.push_back(rng.bernoulli(0.6) ? rng.uniform(0.0, 2e-4) : 0.0);
        p.gains.push_back({std::pow(10.0, rng.uniform(-6.0, -4.0)), std::pow(10.0, rng.uniform(-6.0, -4.0))});
    }
    if (rng.bernoulli(0.3)) {
        p.battery_capacity_source_j = rng.uniform(1e-4, 3e-4);
        p.battery_capacity_relay_j = rng.uniform(1e-4, 3e-4);
    }
    if (rng.bernoulli(0.3)) {
        p.rx_energy_cost_j = rng.uniform(0.0, 3e-5);
    }
    p.delay_constrained = rng.bernoulli(0.3);
    return p;
}

double relative_gap(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

double bits(double power, double gain, double noise) { return std::log2(1.0 + power * gain / noise); }

}  // namespace

TEST_CASE("arrival processes")
{
    const auto all = simulate_arrivals(BernoulliArrivals{1.0, 2.5}, 100, 1);
    CHECK(std::all_of(all.begin(), all.end(), [](double e) { return e == 2.5; }));

    const auto tri = simulate_arrivals(TriStateArrivals{3.0}, 1'000'000, 2);
    const double mean = std::accumulate(tri.begin(), tri.end(), 0.0) / tri.size();
    CHECK(mean == doctest::Approx(3.0).epsilon(0.01));
    CHECK(mean_arrival(TriStateArrivals{3.0}) == doctest::Approx(3.0));

    const auto det = simulate_arrivals(DeterministicArrivals{{1.0, 2.0}}, 4, 3);
    CHECK(det == std::vector<double>{1.0, 2.0, 0.0, 0.0});

    CHECK_THROWS_AS(validate(EnergyArrivalProcess{BernoulliArrivals{1.5, 1.0}}), InvalidParameter);
}

TEST_CASE("Markov arrivals visit states at the stationary frequencies")
{
    const MarkovArrivals m{{0.0, 1.0}, {{0.9, 0.1}, {0.3, 0.7}}, 0};
    const auto pi = stationary_distribution(m.transition);
    // Two-state chain: pi_1 = p01 / (p01 + p10).
    CHECK(pi[1] == doctest::Approx(0.1 / 0.4).epsilon(1e-12));
    const auto states = simulate_markov_states(m, 1'000'000, 4);
    const double freq1 = static_cast<double>(std::count(states.begin(), states.end(), 1)) / states.size();
    CHECK(freq1 == doctest::Approx(pi[1]).epsilon(0.01));
    CHECK(mean_arrival(m) == doctest::Approx(0.25));

    CHECK_THROWS_AS(validate_transition_matrix({{0.5, 0.4}, {0.5, 0.5}}), InvalidParameter);
    CHECK_THROWS_AS(stationary_distribution({{1.0, 0.0}, {0.0, 1.0}}), DegenerateModel);
}

TEST_CASE("zero arrivals give an idle schedule")
{
    ScheduleProblem p;
    p.source_arrivals_j = {0.0, 0.0, 0.0};
    p.relay_arrivals_j = {0.0, 0.0, 0.0};
    p.gains.assign(3, {1.0, 1.0});
    p.max_power_w = 1.0;
    const Schedule s = offline_optimal(p, 4);
    CHECK(s.objective == 0.0);
    CHECK(std::all_of(s.source_power_w.begin(), s.source_power_w.end(), [](double x) { return x == 0.0; }));
    CHECK(std::all_of(s.relay_power_w.begin(), s.relay_power_w.end(), [](double x) { return x == 0.0; }));
    CHECK(brute_force_oracle(p, 4).objective == 0.0);

    p.max_power_w = 0.0;
    p.delay_constrained = true;
    const Schedule idle = min_relay_time(p, 0.0, 8);
    CHECK(idle.relay_slots == 0);
    CHECK(brute_force_min_relay_time(p, 0.0, 8).relay_slots == 0);
}

TEST_CASE("information causality blocks single-slot delivery")
{
    ScheduleProblem p;
    p.source_arrivals_j = {1.0};
    p.relay_arrivals_j = {1.0};
    p.gains = {{1.0, 1.0}};
    CHECK(offline_optimal(p, 8).objective == 0.0);

    ScheduleProblem relay_only;
    relay_only.source_arrivals_j = {0.0, 0.0};
    relay_only.relay_arrivals_j = {1.0, 1.0};
    relay_only.gains.assign(2, {1.0, 1.0});
    CHECK(brute_force_oracle(relay_only, 8).objective == 0.0);
    CHECK(offline_optimal(relay_only, 8).objective == 0.0);
}

TEST_CASE("two-slot problem solved by hand")
{
    ScheduleProblem p;
    p.source_arrivals_j = {3.0, 0.0};
    p.relay_arrivals_j = {0.0, 3.0};
    p.gains = {{1.0, 1.0}, {1.0, 1.0}};
    p.max_power_w = 3.0;
    const Schedule s = offline_optimal(p, 4);
    // Source sends at 3 W in slot 0, relay forwards min(log2 4, log2 4) bits.
    CHECK(s.objective == doctest::Approx(2.0));
    CHECK(s.source_power_w[0] == doctest::Approx(3.0));
    CHECK(s.relay_power_w[1] == doctest::Approx(3.0));
    CHECK(s.relay_slots == 1);
    CHECK(validate_schedule(p, s).ok);
}

TEST_CASE("validator rejects infeasible schedules")
{
    ScheduleProblem p;
    p.source_arrivals_j = {1.0, 0.0};
    p.relay_arrivals_j = {0.0, 1.0};
    p.gains = {{1.0, 1.0}, {1.0, 1.0}};
    p.max_power_w = 1.0;
    Schedule s = offline_optimal(p, 2);
    REQUIRE(validate_schedule(p, s).ok);

    Schedule overspend = s;
    overspend.source_power_w[0] = 2.0;
    CHECK_FALSE(validate_schedule(p, overspend).ok);

    Schedule duplex = s;
    duplex.source_power_w[1] = 0.0;
    duplex.source_active[1] = 1;
    duplex.relay_active[0] = 1;
    duplex.relay_power_w[0] = 0.0;
    CHECK_FALSE(validate_schedule(p, duplex).ok);

    Schedule inflated = s;
    inflated.delivered_total_bits += 1.0;
    inflated.objective += 1.0;
    CHECK_FALSE(validate_schedule(p, inflated).ok);
}

TEST_CASE("dynamic program matches brute force on random instances")
{
    Rng rng(41);
    for (int i = 0; i < 30; ++i) {
        const std::size_t slots = 1 + static_cast<std::size_t>(i % 3);
        const ScheduleProblem p = random_problem(rng, slots);
        const std::size_t levels = slots == 3 ? 6 : 8;
        const Schedule dp = offline_optimal(p, levels);
        const Schedule bf = brute_force_oracle(p, levels);
        CHECK(relative_gap(dp.objective, bf.objective) < 1e-3);
        CHECK(validate_schedule(p, dp).ok);
        CHECK(validate_schedule(p, bf).ok);
        CHECK(dp.exact);

        const double demand = 0.5 * bf.objective;
        const Schedule mt = min_relay_time(p, demand, levels);
        const Schedule mtb = brute_force_min_relay_time(p, demand, levels);
        CHECK(mt.objective == mtb.objective);
        CHECK(mt.delivered_total_bits >= demand - 1e-9);
        CHECK(validate_schedule(p, mt).ok);
    }
}

TEST_CASE("throughput grows with energy and drops under the delay constraint")
{
    Rng rng(42);
    for (int i = 0; i < 20; ++i) {
        ScheduleProblem p = random_problem(rng, 4);
        p.delay_constrained = false;
        p.max_power_w = 4e-4;
        const double base = offline_optimal(p, 6).objective;

        ScheduleProblem richer = p;
        for (double& e : richer.source_arrivals_j) {
            e *= 1.5;
        }
        for (double& e : richer.relay_arrivals_j) {
            e *= 1.5;
        }
        CHECK(offline_optimal(richer, 6).objective >= base - 1e-12);

        ScheduleProblem delayed = p;
        delayed.delay_constrained = true;
        CHECK(offline_optimal(delayed, 6).objective <= base + 1e-12);

        ScheduleProblem costly = p;
        costly.rx_energy_cost_j = 5e-5;
        CHECK(offline_optimal(costly, 6).objective <= base + 1e-12);
    }
}

TEST_CASE("minimum relay time")
{
    Rng rng(43);
    const ScheduleProblem p = random_problem(rng, 4);
    const Schedule zero = min_relay_time(p, 0.0, 6);
    CHECK(zero.relay_slots == 0);
    CHECK(zero.objective == 0.0);

    const Schedule best = offline_optimal(p, 6);
    if (best.objective > 0.0) {
        const Schedule full = min_relay_time(p, best.objective * (1.0 - 1e-9), 6);
        CHECK(full.delivered_total_bits == doctest::Approx(best.objective).epsilon(1e-6));
    }
    try {
        min_relay_time(p, best.objective + 1.0, 6);
        FAIL("expected Infeasible");
    } catch (const Infeasible& e) {
        CHECK(e.max_achievable() == doctest::Approx(best.objective).epsilon(1e-9));
    }
}

TEST_CASE("state bound guards the dynamic program")
{
    Rng rng(44);
    ScheduleProblem p = random_problem(rng, 6);
    p.delay_constrained = false;
    DpOptions tight;
    tight.max_states = 10;
    CHECK_THROWS_AS(offline_optimal(p, 8, tight), ProblemTooLarge);
    tight.allow_bucketing = true;
    const Schedule approx = offline_optimal(p, 8, tight);
    CHECK_FALSE(approx.exact);
    CHECK(validate_schedule(p, approx).ok);
    CHECK(approx.objective <= offline_optimal(p, 8).objective + 1e-9);
}

TEST_CASE("brute force refuses huge searches")
{
    Rng rng(45);
    const ScheduleProblem p = random_problem(rng, 6);
    CHECK_THROWS(brute_force_oracle(p, 8));
}

TEST_CASE("directional water filling")
{
    const std::vector<double> one{2.0};
    const std::vector<double> g1{1.0};
    const auto single = directional_water_fill(one, g1, 1.0, kUnbounded, 0.5);
    CHECK(single[0] == doctest::Approx(4.0));

    const std::vector<double> front{2.0, 0.0};
    const std::vector<double> equal{1.0, 1.0};
    const auto split = directional_water_fill(front, equal, 1.0);
    CHECK(split[0] == doctest::Approx(1.0));
    CHECK(split[1] == doctest::Approx(1.0));

    // Energy cannot flow backwards: the late arrival stays in the late slot.
    const std::vector<double> back{0.0, 2.0};
    const auto late = directional_water_fill(back, equal, 1.0);
    CHECK(late[0] == doctest::Approx(0.0));
    CHECK(late[1] == doctest::Approx(2.0));

    // A 1 J battery must be emptied before the second arrival or it overflows.
    const std::vector<double> three{1.0, 1.0, 0.0};
    const std::vector<double> flat{1.0, 1.0, 1.0};
    const auto capped = directional_water_fill(three, flat, 1.0, 1.0);
    CHECK(capped[0] == doctest::Approx(1.0));
    CHECK(capped[1] == doctest::Approx(0.5));
    CHECK(capped[2] == doctest::Approx(0.5));
}

TEST_CASE("water filling beats greedy and matches a grid search")
{
    Rng rng(46);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(5);
        std::vector<double> g(5);
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = rng.bernoulli(0.6) ? rng.uniform(0.0, 2.0) : 0.0;
            g[k] = rng.uniform(0.1, 2.0);
        }
        const double cap = rng.bernoulli(0.5) ? kUnbounded : rng.uniform(1.0, 3.0);
        const auto wf = directional_water_fill(a, g, 1.0, cap);
        const auto gr = greedy_powers(a, cap);
        CHECK(single_hop_bits(wf, g, 1.0) >= single_hop_bits(gr, g, 1.0) - 1e-12);

        // Energy causality and battery bounds.
        double battery = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            battery = std::min(cap, battery + a[k]);
            battery -= wf[k];
            CHECK(battery >= -1e-9);
        }
    }

    for (int i = 0; i < 20; ++i) {
        const double a0 = rng.uniform(0.0, 2.0);
        const double a1 = rng.uniform(0.0, 2.0);
        const double a2 = rng.uniform(0.0, 2.0);
        const std::vector<double> a{a0, a1, a2};
        const std::vector<double> g{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
        const double wf = single_hop_bits(directional_water_fill(a, g, 1.0), g, 1.0);
        double best = 0.0;
        const int n = 300;
        for (int x = 0; x <= n; ++x) {
            const double p0 = a0 * x / n;
            for (int y = 0; y <= n; ++y) {
                const double p1 = (a0 + a1 - p0) * y / n;
                const double p2 = a0 + a1 + a2 - p0 - p1;
                best = std::max(best, bits(p0, g[0], 1.0) + bits(p1, g[1], 1.0) + bits(p2, g[2], 1.0));
            }
        }
        CHECK(wf >= best - 1e-9);
        CHECK(wf <= best * (1.0 + 1e-3));
    }
}

TEST_CASE("combined mode controller")
{
    const swipt::LinkState link{1e-3, 1e-3, 1e-9, 1.0, 0.0, 0.0};
    const swipt::RelayOptions opts;

    const std::vector<double> rich(10, 1.0);
    const ModeTrace r = combined_mode_controller(rich, link, 0.5, opts);
    CHECK(std::none_of(r.modes.begin(), r.modes.end(), [](HarvestMode m) { return m == HarvestMode::Swipt; }));

    const std::vector<double> none(10, 0.0);
    const ModeTrace n = combined_mode_controller(none, link, 0.5, opts);
    CHECK(std::all_of(n.modes.begin(), n.modes.end(), [](HarvestMode m) { return m == HarvestMode::Swipt; }));
    CHECK(n.total_throughput == doctest::Approx(10.0 * swipt::optimize_split(swipt::Protocol::TimeSwitching, link, opts).throughput));

    std::vector<double> outage(30, 1e-3);
    std::fill(outage.begin() + 10, outage.begin() + 20, 0.0);
    const ModeTrace mixed = combined_mode_controller(outage, link, 1e-3, opts);
    const ModeTrace baseline = ambient_only_controller(outage, link, 1e-3, opts);
    CHECK(mixed.total_throughput >= baseline.total_throughput);
    CHECK(mixed.total_throughput > baseline.total_throughput);
}
