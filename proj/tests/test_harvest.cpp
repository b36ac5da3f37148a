#include "rfharvest/error.hpp"
#include "rfharvest/harvest.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace rfharvest;
using namespace rfharvest::harvest;

namespace {

const geometry::Region kRegion60 = geometry::Region::toroidal(7745.966692414834, 7745.966692414834);

RatProfile macro_profile()
{
    RatProfile r;
    r.name = "macro";
    r.bandwidth_hz = 20e6;
    r.transmit_power_w = 40.0;
    r.density = {0.3, 5.0};
    r.carrier_frequency_hz = 2.1e9;
    return r;
}

RatProfile tv_profile()
{
    RatProfile r;
    r.name = "tv";
    r.bandwidth_hz = 100e6;
    r.transmit_power_w = 1e6;
    r.density = {0.01, 0.2};
    r.carrier_frequency_hz = 600e6;
    r.transmit_gain_db = -10.0;
    return r;
}

// Exact density of the sum of three U(0,1) variables.
double irwin_hall3(double x)
{
    if (x < 0.0 || x > 3.0) {
        return 0.0;
    }
    if (x < 1.0) {
        return 0.5 * x * x;
    }
    if (x < 2.0) {
        return 0.5 * (-2.0 * x * x + 6.0 * x - 3.0);
    }
    return 0.5 * (3.0 - x) * (3.0 - x);
}

}  // namespace

TEST_CASE("aggregate power edge cases")
{
    const auto model = propagation::free_space(2.1e9);
    geometry::Deployment empty;
    empty.region = kRegion60;
    const auto none = aggregate_power({0.0, 0.0}, empty, macro_profile(), model, FullBuffer{}, {}, 1);
    CHECK(none.total_power_w == 0.0);
    CHECK(none.nearest_fraction == 0.0);

    geometry::Deployment one = empty;
    one.points = {{100.0, 0.0}};
    const auto single = aggregate_power({0.0, 0.0}, one, macro_profile(), model, FullBuffer{}, {}, 1);
    CHECK(single.nearest_fraction == 1.0);
    const double expected = propagation::received_power(40.0, 20e6, model, 100.0, 0.0, 0.0).power_w;
    CHECK(single.total_power_w == doctest::Approx(expected).epsilon(1e-12));

    one.points.push_back({0.0, 200.0});
    const std::vector<double> util{1.0, 0.5};
    const std::vector<double> shadow{0.0, 0.0};
    const auto two = aggregate_power({0.0, 0.0}, one, macro_profile(), model, util, shadow);
    const double second = 0.5 * propagation::received_power(40.0, 20e6, model, 200.0, 0.0, 0.0).power_w;
    CHECK(two.total_power_w == doctest::Approx(expected + second).epsilon(1e-12));
    CHECK(two.nearest_fraction == doctest::Approx(expected / (expected + second)).epsilon(1e-12));
    CHECK(two.power_density_w_per_hz == doctest::Approx(two.total_power_w / 20e6).epsilon(1e-12));

    const std::vector<double> short_util{1.0};
    CHECK_THROWS_AS(aggregate_power({0.0, 0.0}, one, macro_profile(), model, short_util, shadow), InvalidParameter);
}

TEST_CASE("sensitivity floor zeroes weak contributions")
{
    const auto model = propagation::free_space(2.1e9);
    geometry::Deployment d;
    d.region = kRegion60;
    d.points = {{10.0, 0.0}, {3000.0, 0.0}};
    HarvestOptions opts;
    opts.apply_sensitivity = true;
    opts.sensitivity_dbm = -30.0;
    const auto r = aggregate_power({0.0, 0.0}, d, macro_profile(), model, FullBuffer{}, {}, 1, opts);
    CHECK(r.per_transmitter_w[0] > 1e-6);
    CHECK(r.per_transmitter_w[1] == 0.0);
}

TEST_CASE("single-trial sweep equals a direct aggregate_power call")
{
    const RatProfile rat = macro_profile();
    const auto model = propagation::free_space(rat.carrier_frequency_hz);
    SweepOptions opts;
    opts.trials = 1;
    opts.seed = 77;
    opts.averaging = Averaging::Linear;
    const std::vector<double> grid{5.0};
    const auto curve = upper_bound_sweep(rat, grid, model, kRegion60, opts);
    const TrialDraw draw = trial_draw(rat, 5.0, kRegion60, opts.seed, 0, 0);
    const auto direct = aggregate_power(draw.probe, draw.deployment, rat, model, FullBuffer{}, opts.shadowing,
                                        draw.draw_seed);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].mean_power_w == doctest::Approx(direct.total_power_w).epsilon(1e-12));
    CHECK(curve[0].mean_density_w_per_hz == doctest::Approx(direct.power_density_w_per_hz).epsilon(1e-12));
}

TEST_CASE("sweep argument checks")
{
    const auto model = propagation::free_space(2.1e9);
    SweepOptions opts;
    CHECK_THROWS_AS(upper_bound_sweep(macro_profile(), std::vector<double>{}, model, kRegion60, opts),
                    InvalidParameter);
    opts.trials = 0;
    CHECK_THROWS_AS(upper_bound_sweep(macro_profile(), std::vector<double>{1.0}, model, kRegion60, opts),
                    InvalidParameter);
}

TEST_CASE("doubling transmit power doubles every sweep point exactly")
{
    RatProfile rat = macro_profile();
    const auto model = propagation::winner_style({43.0, 25.0, 20.0}, rat.carrier_frequency_hz);
    SweepOptions opts;
    opts.trials = 50;
    opts.seed = 5;
    opts.shadowing = {8.0, true};
    opts.efficiency = 0.5;
    const auto grid = log_spaced(0.3, 5.0, 4);
    const auto base = upper_bound_sweep(rat, grid, model, kRegion60, opts);
    rat.transmit_power_w *= 2.0;
    const auto doubled = upper_bound_sweep(rat, grid, model, kRegion60, opts);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(doubled[i].mean_power_w == 2.0 * base[i].mean_power_w);
        CHECK(doubled[i].linear_mean_w == 2.0 * base[i].linear_mean_w);
        CHECK(doubled[i].mean_density_w_per_hz == 2.0 * base[i].mean_density_w_per_hz);
    }
}

TEST_CASE("sweep is independent of the thread count")
{
    const RatProfile rat = macro_profile();
    const auto model = propagation::free_space(rat.carrier_frequency_hz);
    SweepOptions opts;
    opts.trials = 40;
    const auto grid = log_spaced(0.3, 5.0, 3);
    const auto one = upper_bound_sweep(rat, grid, model, kRegion60, opts);
    opts.threads = 4;
    const auto four = upper_bound_sweep(rat, grid, model, kRegion60, opts);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(one[i].mean_power_w == four[i].mean_power_w);
        CHECK(one[i].stddev_w == four[i].stddev_w);
    }
}

TEST_CASE("scaling exponent fits")
{
    const std::vector<double> lambda{1.0, 2.0, 5.0, 10.0, 20.0};
    std::vector<double> p;
    for (double l : lambda) {
        p.push_back(3.0 * l * l);
    }
    CHECK(std::abs(scaling_exponent(lambda, p) - 2.0) < 1e-9);
    const std::vector<double> few{1.0, 5.0, 10.0};
    CHECK_THROWS_AS(scaling_exponent(few, std::vector<double>{1.0, 2.0, 3.0}), FitFailure);
    const std::vector<double> narrow{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(scaling_exponent(narrow, narrow), FitFailure);

    const auto grid = log_spaced(0.5, 50.0, 5);
    CHECK(grid.front() == doctest::Approx(0.5));
    CHECK(grid.back() == doctest::Approx(50.0));
    CHECK(grid[1] / grid[0] == doctest::Approx(grid[4] / grid[3]));
}

TEST_CASE("NLoS sweep slope near a/2")
{
    const RatProfile rat = macro_profile();
    const auto model = propagation::winner_style({43.0, 25.0, 20.0}, rat.carrier_frequency_hz);
    SweepOptions opts;
    opts.trials = 300;
    opts.seed = 8;
    const auto curve = upper_bound_sweep(rat, log_spaced(0.5, 5.0, 4), model, kRegion60, opts);
    const double slope = scaling_exponent(curve);
    MESSAGE("a=4.3 slope " << slope);
    CHECK(slope == doctest::Approx(2.15).epsilon(0.2 / 2.15));
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].mean_power_w > curve[i - 1].mean_power_w);
    }
}

TEST_CASE("TV peak power is within a factor of ten of the reported value")
{
    const RatProfile rat = tv_profile();
    const auto model = propagation::free_space(rat.carrier_frequency_hz);
    SweepOptions opts;
    opts.trials = 300;
    opts.efficiency = 0.5;
    const auto curve = upper_bound_sweep(rat, std::vector<double>{0.2}, model, kRegion60, opts);
    MESSAGE("TV peak " << curve[0].mean_power_w);
    CHECK(curve[0].mean_power_w > 151e-6 / 10.0);
    CHECK(curve[0].mean_power_w < 151e-6 * 10.0);
}

TEST_CASE("traffic load sampling")
{
    Rng rng(9);
    CHECK(sample_utilization(FullBuffer{}, rng) == 1.0);
    CHECK(sample_utilization(TwoState{0.0}, rng) == 0.0);
    CHECK(sample_utilization(TwoState{1.0}, rng) == 1.0);
    const TrafficLoadModel uniform = EmpiricalPdf::uniform(0.01);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = sample_utilization(uniform, rng);
        REQUIRE(u >= 0.0);
        REQUIRE(u <= 1.0);
        sum += u;
    }
    CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.02));
    CHECK_THROWS_AS(validate(TrafficLoadModel{TwoState{1.5}}), InvalidParameter);
}

TEST_CASE("convolution of load densities")
{
    const EmpiricalPdf u = EmpiricalPdf::uniform(1e-3);
    const std::vector<EmpiricalPdf> one{u};
    const EmpiricalPdf same = convolve_load_pdfs(one, 1e-3);
    for (double x = 0.0; x <= 1.0; x += 0.01) {
        CHECK(same.at(x) == doctest::Approx(u.at(x)).epsilon(1e-9));
    }

    const std::vector<EmpiricalPdf> two{u, u};
    const EmpiricalPdf tri = convolve_load_pdfs(two, 1e-3);
    CHECK(tri.support_end() == doctest::Approx(2.0));
    CHECK(tri.integral() == doctest::Approx(1.0).epsilon(1e-4));
    double max_err = 0.0;
    for (std::size_t i = 0; i <= 2000; ++i) {
        const double x = i * 1e-3;
        max_err = std::max(max_err, std::abs(tri.at(x) - (x <= 1.0 ? x : 2.0 - x)));
    }
    CHECK(max_err < 1e-3);
    CHECK(tri.at(1.0) == doctest::Approx(1.0).epsilon(1e-3));

    const std::vector<EmpiricalPdf> three{u, u, u};
    const EmpiricalPdf sum3 = convolve_load_pdfs(three, 1e-3);
    double max_err3 = 0.0;
    for (double x = 0.0; x <= 3.0; x += 0.005) {
        max_err3 = std::max(max_err3, std::abs(sum3.at(x) - irwin_hall3(x)));
    }
    CHECK(max_err3 < 1e-3);

    const std::vector<EmpiricalPdf> mismatched{u, EmpiricalPdf::uniform(1e-2)};
    CHECK_THROWS_AS(convolve_load_pdfs(mismatched, 1e-3), InvalidParameter);
}

TEST_CASE("three-fold convolution matches a Monte-Carlo histogram")
{
    const EmpiricalPdf u = EmpiricalPdf::uniform(1e-3);
    const std::vector<EmpiricalPdf> three{u, u, u};
    const EmpiricalPdf pdf = convolve_load_pdfs(three, 1e-3);

    const double width = 0.02;
    const std::size_t bins = 150;
    std::vector<double> hist(bins, 0.0);
    std::mt19937_64 engine(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t n = 1'000'000;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = unif(engine) + unif(engine) + unif(engine);
        hist[std::min(bins - 1, static_cast<std::size_t>(s / width))] += 1.0 / n;
    }
    double tv = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        // Simpson's rule over the bin.
        const double lo = b * width;
        const double mass = width / 6.0 * (pdf.at(lo) + 4.0 * pdf.at(lo + width / 2.0) + pdf.at(lo + width));
        tv += 0.5 * std::abs(mass - hist[b]);
    }
    MESSAGE("total variation " << tv);
    CHECK(tv < 0.01);
}
