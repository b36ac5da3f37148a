#include "rfharvest/error.hpp"
#include "rfharvest/propagation.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace rfharvest;
using namespace rfharvest::propagation;

TEST_CASE("reference distance gives the reference loss")
{
    PathlossModel m;
    m.kind = SingleSlope{3.0};
    m.reference_distance_m = 10.0;
    m.reference_loss_db = 55.0;
    CHECK(pathloss_db(m, 10.0) == doctest::Approx(55.0));
    CHECK(pathloss_db(m, 100.0) == doctest::Approx(85.0));
    CHECK_THROWS_AS(pathloss_db(m, 5.0), OutOfRange);
}

TEST_CASE("dual slope is continuous at the breakpoint")
{
    PathlossModel m;
    m.kind = DualSlope{2.0, 4.0, 100.0};
    m.reference_loss_db = 40.0;
    const double at = pathloss_db(m, 100.0);
    const double los_branch = 40.0 + 20.0 * std::log10(100.0);
    CHECK(std::abs(at - los_branch) < 1e-9);
    const double just_above = pathloss_db(m, 100.0 * (1.0 + 1e-12));
    CHECK(std::abs(just_above - at) < 1e-9);
    CHECK(pathloss_db(m, 1000.0) == doctest::Approx(los_branch + 40.0));

    PathlossModel bad = m;
    bad.kind = DualSlope{4.0, 2.0, 100.0};
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
    bad.kind = SingleSlope{1.5};
    CHECK_THROWS_AS(bad.validate(), InvalidParameter);
}

TEST_CASE("free-space TV example")
{
    const double f = 600e6;
    const PathlossModel m = free_space(f, 2.0, 1.0);
    const double d = 20e3;
    const double lambda = 299792458.0 / f;
    const double expected = 150e3 * std::pow(lambda / (4.0 * std::numbers::pi * d), 2.0);
    const ReceivedPower rx = received_power(150e3, 8e6, m, d, 0.0, 0.0);
    CHECK(rx.power_w == doctest::Approx(expected).epsilon(1e-9));
    CHECK(rx.power_w == doctest::Approx(5.93e-7).epsilon(0.01));
}

TEST_CASE("received power formula")
{
    PathlossModel m;
    m.reference_loss_db = 38.0;
    const ReceivedPower rx = received_power(40.0, 20e6, m, 1.0, 0.0, 0.0);
    CHECK(rx.power_w == doctest::Approx(40.0 * std::pow(10.0, -3.8)).epsilon(1e-12));
    CHECK(rx.power_w == doctest::Approx(6.34e-3).epsilon(0.001));
    CHECK(rx.density_w_per_hz == doctest::Approx(3.17e-10).epsilon(0.001));

    const ReceivedPower zero = received_power(0.0, 20e6, m, 50.0, 3.0, 0.0);
    CHECK(zero.power_w == 0.0);
    CHECK(zero.density_w_per_hz == 0.0);

    const double p1 = received_power(3.0, 1e6, m, 123.0, 4.2, 1.0).power_w;
    const double p2 = received_power(6.0, 1e6, m, 123.0, 4.2, 1.0).power_w;
    CHECK(p2 == 2.0 * p1);

    const double shadowed = received_power(1.0, 1e6, m, 10.0, 10.0, 0.0).power_w;
    const double clear = received_power(1.0, 1e6, m, 10.0, 0.0, 0.0).power_w;
    CHECK(shadowed == doctest::Approx(clear / 10.0));

    CHECK_THROWS_AS(received_power(-1.0, 1e6, m, 10.0, 0.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(received_power(1.0, 0.0, m, 10.0, 0.0, 0.0), InvalidParameter);
}

TEST_CASE("WINNER-style model")
{
    const PathlossModel m = winner_style({43.0, 25.0, 20.0}, 5e9);
    CHECK(pathloss_db(m, 1.0) == doctest::Approx(25.0));
    CHECK(pathloss_db(m, 100.0) == doctest::Approx(25.0 + 86.0));
    CHECK(winner_extrapolated(600e6));
    CHECK_FALSE(winner_extrapolated(2.4e9));
}

TEST_CASE("shadowing draw moments")
{
    const ShadowingSpec off{8.0, false};
    Rng rng(4);
    CHECK(off.draw(rng) == 0.0);
    const ShadowingSpec on{8.0, true};
    double sum = 0.0;
    double sum_sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = on.draw(rng);
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.1);
    CHECK(std::sqrt(sum_sq / n) == doctest::Approx(8.0).epsilon(0.02));
}
