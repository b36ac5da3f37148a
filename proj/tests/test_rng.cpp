#include "rfharvest/parallel.hpp"
#include "rfharvest/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

using rfharvest::Rng;
using rfharvest::derive_seed;

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

template <class Draw>
Moments moments(std::size_t n, Draw draw)
{
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = draw();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / static_cast<double>(n);
    return {mean, sum_sq / static_cast<double>(n) - mean * mean};
}

}  // namespace

TEST_CASE("same seed gives the same stream")
{
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("derived seeds differ across streams and indices")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 10; ++s) {
        for (std::uint64_t i = 0; i < 100; ++i) {
            seen.insert(derive_seed(7, s, i));
        }
    }
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(7, 1, 2) == derive_seed(7, 1, 2));
}

TEST_CASE("uniform draws stay in range with the right moments")
{
    Rng rng(1);
    const auto m = moments(200000, [&] {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        return u;
    });
    CHECK(m.mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(m.variance == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("uniform_index covers every bucket evenly")
{
    Rng rng(2);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        ++counts[rng.uniform_index(7)];
    }
    for (int c : counts) {
        CHECK(c == doctest::Approx(10000).epsilon(0.05));
    }
}

TEST_CASE("normal, exponential, gamma and poisson moments")
{
    Rng rng(3);
    const auto n = moments(200000, [&] { return rng.normal(2.0, 3.0); });
    CHECK(n.mean == doctest::Approx(2.0).epsilon(0.01));
    CHECK(n.variance == doctest::Approx(9.0).epsilon(0.02));

    const auto e = moments(200000, [&] { return rng.exponential(4.0); });
    CHECK(e.mean == doctest::Approx(0.25).epsilon(0.01));

    for (double shape : {0.5, 2.0, 7.5}) {
        const auto g = moments(200000, [&] { return rng.gamma(shape, 3.0); });
        CHECK(g.mean == doctest::Approx(shape * 3.0).epsilon(0.02));
        CHECK(g.variance == doctest::Approx(shape * 9.0).epsilon(0.04));
    }

    for (double mean : {0.3, 12.0, 300.0}) {
        const auto p = moments(100000, [&] { return static_cast<double>(rng.poisson(mean)); });
        CHECK(p.mean == doctest::Approx(mean).epsilon(0.02));
        CHECK(p.variance == doctest::Approx(mean).epsilon(0.05));
    }
    CHECK(rng.poisson(0.0) == 0);
}

TEST_CASE("parallel_for visits each index once and rethrows")
{
    std::vector<int> hits(1000, 0);
    rfharvest::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) {
        CHECK(h == 1);
    }
    CHECK_THROWS(rfharvest::parallel_for(10, 3, [](std::size_t i) {
        if (i == 5) {
            throw std::runtime_error("boom");
        }
    }));
}
