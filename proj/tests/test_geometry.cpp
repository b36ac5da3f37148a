#include "rfharvest/error.hpp"
#include "rfharvest/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace rfharvest;
using namespace rfharvest::geometry;

namespace {

const Region kRegion60 = Region::toroidal(7745.966692414834, 7745.966692414834);

double rayleigh_cdf(double r, double density_per_m2)
{
    return 1.0 - std::exp(-density_per_m2 * std::numbers::pi * r * r);
}

double rayleigh_pdf(double r, double scale)
{
    return r / (scale * scale) * std::exp(-r * r / (2.0 * scale * scale));
}

}  // namespace

TEST_CASE("region validation and toroidal distance")
{
    CHECK_THROWS_AS(Region::toroidal(0.0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(Region::guard_zone(10.0, 10.0, 6.0), InvalidParameter);
    const Region r = Region::toroidal(100.0, 100.0);
    CHECK(r.distance({1.0, 1.0}, {99.0, 1.0}) == doctest::Approx(2.0));
    CHECK(r.distance({1.0, 1.0}, {99.0, 99.0}) == doctest::Approx(std::sqrt(8.0)));
    const Region g = Region::guard_zone(100.0, 100.0, 10.0);
    CHECK(g.distance({1.0, 1.0}, {99.0, 1.0}) == doctest::Approx(98.0));
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const Point p = g.sample_probe(rng);
        CHECK(p.x >= 10.0);
        CHECK(p.x <= 90.0);
        CHECK(p.y >= 10.0);
        CHECK(p.y <= 90.0);
    }
}

TEST_CASE("zero density gives an empty deployment")
{
    CHECK(sample_ppp(0.0, kRegion60, 1).empty());
    CHECK_THROWS_AS(sample_ppp(-1.0, kRegion60, 1), InvalidParameter);
}

TEST_CASE("PPP mean count matches density times area")
{
    double total = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const Deployment d = sample_ppp(5.0, kRegion60, derive_seed(11, 0, t));
        total += static_cast<double>(d.size());
        if (t == 0) {
            for (const Point& p : d.points) {
                REQUIRE(kRegion60.contains(p));
            }
        }
    }
    CHECK(total / trials == doctest::Approx(300.0).epsilon(0.02));
}

TEST_CASE("clustered mean count matches the compound Poisson mean")
{
    const Region region = Region::toroidal(2000.0, 2000.0);
    const ClusteredProcess spec{20.0, 10.0, 50.0};
    double total = 0.0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        total += static_cast<double>(sample_clustered(spec, region, derive_seed(12, 0, t)).size());
    }
    CHECK(total / trials == doctest::Approx(20.0 * 10.0 * 4.0).epsilon(0.02));
    CHECK_THROWS_AS(sample_clustered(ClusteredProcess{0.0, 10.0, 50.0}, region, 1), InvalidParameter);
}

TEST_CASE("nth nearest pdf values and normalization")
{
    CHECK(nth_nearest_distance_pdf(1.0, 1, 1.0 / std::numbers::pi) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(nth_nearest_distance_pdf(1.0, 0, 1.0), InvalidParameter);
    CHECK_THROWS_AS(nth_nearest_distance_pdf(1.0, 1, 0.0), InvalidParameter);

    for (int n : {1, 2, 5}) {
        for (double density : {5e-6, 1e-4}) {
            // Simpson's rule far into the tail.
            const double upper = 12.0 * std::sqrt(static_cast<double>(n) / (density * std::numbers::pi));
            const int steps = 200000;
            const double h = upper / steps;
            double sum = nth_nearest_distance_pdf(0.0, n, density) + nth_nearest_distance_pdf(upper, n, density);
            for (int i = 1; i < steps; ++i) {
                sum += (i % 2 ? 4.0 : 2.0) * nth_nearest_distance_pdf(i * h, n, density);
            }
            CHECK(sum * h / 3.0 == doctest::Approx(1.0).epsilon(1e-6));
        }
    }

    const double density = 5e-6;
    const double scale = 1.0 / std::sqrt(2.0 * density * std::numbers::pi);
    for (double r = 0.0; r < 2000.0; r += 37.0) {
        CHECK(std::abs(nth_nearest_distance_pdf(r, 1, density) - rayleigh_pdf(r, scale)) < 1e-12);
    }
}

TEST_CASE("nearest_distances basics")
{
    const Region region = Region::toroidal(100.0, 100.0);
    Deployment d;
    d.region = region;
    d.points = {{10.0, 10.0}};
    const auto one = nearest_distances(d, {13.0, 14.0}, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(5.0));
    CHECK(nearest_distances(d, {10.0, 10.0}, 1)[0] == 0.0);
    CHECK_THROWS_AS(nearest_distances(d, {0.0, 0.0}, 2), InsufficientPoints);

    d.points = {{95.0, 50.0}, {50.0, 50.0}, {20.0, 50.0}};
    const auto sorted = nearest_distances(d, {5.0, 50.0}, 3);
    CHECK(sorted[0] == doctest::Approx(10.0));
    CHECK(sorted[1] == doctest::Approx(15.0));
    CHECK(sorted[2] == doctest::Approx(45.0));
}

TEST_CASE("PPP nearest distance follows the Rayleigh law")
{
    const double density = 5e-6;
    std::vector<double> samples;
    const std::size_t probes = 100000;
    samples.reserve(probes);
    for (std::size_t t = 0; t < probes; ++t) {
        const Deployment d = sample_ppp(5.0, kRegion60, derive_seed(13, 0, t));
        if (d.empty()) {
            continue;
        }
        samples.push_back(nearest_distances(d, kRegion60.center(), 1)[0]);
    }
    const double ks = ks_statistic(samples, [&](double r) { return rayleigh_cdf(r, density); });
    MESSAGE("KS vs Rayleigh: " << ks);
    CHECK(ks < 0.02);
}

TEST_CASE("fits recover generating parameters")
{
    std::mt19937_64 engine(99);
    const double s = 250.0;
    std::vector<double> rayleigh;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 100000; ++i) {
        rayleigh.push_back(s * std::sqrt(-2.0 * std::log(1.0 - unif(engine))));
    }
    const DistanceFit fr = fit_nearest_distance(rayleigh, DistanceFamily::Rayleigh);
    CHECK(fr.scale == doctest::Approx(s).epsilon(0.02));
    CHECK(fr.ks_statistic < 0.01);

    std::gamma_distribution<double> gamma(2.0, 100.0);
    std::vector<double> g;
    for (int i = 0; i < 100000; ++i) {
        g.push_back(gamma(engine));
    }
    const DistanceFit fg = fit_nearest_distance(g, DistanceFamily::Gamma);
    CHECK(fg.shape == doctest::Approx(2.0).epsilon(0.05));
    CHECK(fg.scale == doctest::Approx(100.0).epsilon(0.05));

    CHECK_THROWS_AS(fit_nearest_distance(std::vector<double>(500, 3.0), DistanceFamily::Gamma), FitFailure);
    CHECK_THROWS_AS(fit_nearest_distance(std::vector<double>(500, 0.0), DistanceFamily::Rayleigh), FitFailure);
    CHECK_THROWS_AS(fit_nearest_distance(std::vector<double>(50, 1.0), DistanceFamily::Rayleigh), FitFailure);
}

TEST_CASE("clustered nearest distances: Gamma beats Rayleigh, huge spread looks Poisson")
{
    const Region region = Region::toroidal(3000.0, 3000.0);
    auto nearest_samples = [&](const ClusteredProcess& spec, std::uint64_t seed) {
        std::vector<double> out;
        Rng probe_rng(seed);
        for (int t = 0; t < 400; ++t) {
            const Deployment d = sample_clustered(spec, region, derive_seed(seed, 1, t));
            if (d.empty()) {
                continue;
            }
            for (int k = 0; k < 10; ++k) {
                out.push_back(nearest_distances(d, region.sample_probe(probe_rng), 1)[0]);
            }
        }
        return out;
    };

    const auto clustered = nearest_samples({20.0, 10.0, 50.0}, 21);
    const double ks_gamma = fit_nearest_distance(clustered, DistanceFamily::Gamma).ks_statistic;
    const double ks_rayleigh = fit_nearest_distance(clustered, DistanceFamily::Rayleigh).ks_statistic;
    MESSAGE("clustered KS gamma " << ks_gamma << " rayleigh " << ks_rayleigh);
    CHECK(ks_gamma < ks_rayleigh);

    const auto spread = nearest_samples({20.0, 10.0, 1e6}, 22);
    const double density = 200e-6;
    const double ks_ppp = ks_statistic(spread, [&](double r) { return rayleigh_cdf(r, density); });
    MESSAGE("wide-spread KS vs PPP law " << ks_ppp);
    CHECK(ks_ppp < 0.03);
}

TEST_CASE("sample_at_density rescales clusters")
{
    const Region region = Region::toroidal(3000.0, 3000.0);
    const SpatialProcessSpec spec = ClusteredProcess{1.5, 10.0, 50.0};
    double total = 0.0;
    for (int t = 0; t < 2000; ++t) {
        total += static_cast<double>(sample_at_density(spec, 100.0, region, derive_seed(23, 0, t)).size());
    }
    CHECK(total / 2000.0 == doctest::Approx(900.0).epsilon(0.02));
}

TEST_CASE("deployment json round trip")
{
    const Deployment d = sample_ppp(5.0, kRegion60, 3);
    const Deployment back = deployment_from_json(to_json(d));
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.points[i].x == d.points[i].x);
        CHECK(back.points[i].y == d.points[i].y);
    }
    CHECK(back.seed == d.seed);
    CHECK(back.region.width() == d.region.width());
    CHECK_THROWS_AS(deployment_from_json("{"), InvalidParameter);
}
