#include "rfharvest/geometry.hpp"

#include "rfharvest/csv.hpp"
#include "rfharvest/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace rfharvest::geometry {

using std::numbers::pi;

Region::Region(double w, double h, BoundaryMode mode, double margin)
    : width_(w), height_(h), mode_(mode), margin_(margin)
{
    if (!(w > 0.0) || !(h > 0.0)) {
        throw InvalidParameter("region width and height must be positive");
    }
    if (mode == BoundaryMode::GuardZone && !(margin >= 0.0 && margin < std::min(w, h) / 2.0)) {
        throw InvalidParameter("guard margin must lie in [0, min(width, height)/2)");
    }
}

Region Region::toroidal(double width_m, double height_m)
{
    return Region(width_m, height_m, BoundaryMode::ToroidalWrap, 0.0);
}

Region Region::guard_zone(double width_m, double height_m, double margin_m)
{
    return Region(width_m, height_m, BoundaryMode::GuardZone, margin_m);
}

bool Region::contains(Point p) const noexcept
{
    return p.x >= 0.0 && p.x < width_ && p.y >= 0.0 && p.y < height_;
}

double Region::distance_squared(Point a, Point b) const noexcept
{
    double dx = std::fabs(a.x - b.x);
    double dy = std::fabs(a.y - b.y);
    if (mode_ == BoundaryMode::ToroidalWrap) {
        dx = std::min(dx, width_ - dx);
        dy = std::min(dy, height_ - dy);
    }
    return dx * dx + dy * dy;
}

double Region::distance(Point a, Point b) const noexcept
{
    return std::sqrt(distance_squared(a, b));
}

Point Region::wrap(Point p) const noexcept
{
    p.x -= width_ * std::floor(p.x / width_);
    p.y -= height_ * std::floor(p.y / height_);
    // floor() can leave exactly `width_` after rounding.
    if (p.x >= width_) {
        p.x = 0.0;
    }
    if (p.y >= height_) {
        p.y = 0.0;
    }
    return p;
}

Point Region::sample_probe(Rng& rng) const
{
    if (mode_ == BoundaryMode::GuardZone) {
        return {rng.uniform(margin_, width_ - margin_), rng.uniform(margin_, height_ - margin_)};
    }
    return {rng.uniform(0.0, width_), rng.uniform(0.0, height_)};
}

void validate(const SpatialProcessSpec& spec)
{
    if (const auto* c = std::get_if<ClusteredProcess>(&spec)) {
        if (!(c->parent_density_km2 > 0.0) || !(c->mean_offspring > 0.0) || !(c->spread_m > 0.0)) {
            throw InvalidParameter("clustered process needs positive parent density, offspring and spread");
        }
    }
}

std::string describe(const SpatialProcessSpec& spec)
{
    if (const auto* c = std::get_if<ClusteredProcess>(&spec)) {
        return "clustered(parents=" + csv::format(c->parent_density_km2)
            + "/km2, offspring=" + csv::format(c->mean_offspring)
            + ", spread=" + csv::format(c->spread_m) + "m)";
    }
    return "ppp";
}

Deployment sample_ppp(double density_km2, const Region& region, std::uint64_t seed)
{
    if (!(density_km2 >= 0.0)) {
        throw InvalidParameter("density must be non-negative");
    }
    Rng rng(seed);
    Deployment d{region, PoissonProcess{}, seed, density_km2, {}};
    const auto count = rng.poisson(density_km2 * region.area_km2());
    d.points.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        d.points.push_back({rng.uniform(0.0, region.width()), rng.uniform(0.0, region.height())});
    }
    return d;
}

Deployment sample_clustered(const ClusteredProcess& spec, const Region& region, std::uint64_t seed)
{
    validate(spec);
    Rng rng(seed);
    Deployment d{region, spec, seed, spec.density_km2(), {}};
    const auto parents = rng.poisson(spec.parent_density_km2 * region.area_km2());
    for (std::uint64_t p = 0; p < parents; ++p) {
        const Point parent{rng.uniform(0.0, region.width()), rng.uniform(0.0, region.height())};
        const auto children = rng.poisson(spec.mean_offspring);
        for (std::uint64_t c = 0; c < children; ++c) {
            Point child{parent.x + spec.spread_m * rng.normal(), parent.y + spec.spread_m * rng.normal()};
            if (region.mode() == BoundaryMode::ToroidalWrap) {
                d.points.push_back(region.wrap(child));
            } else if (region.contains(child)) {
                d.points.push_back(child);
            }
        }
    }
    return d;
}

Deployment sample_at_density(const SpatialProcessSpec& spec, double density_km2,
                             const Region& region, std::uint64_t seed)
{
    if (const auto* c = std::get_if<ClusteredProcess>(&spec)) {
        if (!(density_km2 > 0.0)) {
            Deployment empty{region, spec, seed, 0.0, {}};
            return empty;
        }
        ClusteredProcess scaled = *c;
        scaled.parent_density_km2 = density_km2 / c->mean_offspring;
        return sample_clustered(scaled, region, seed);
    }
    return sample_ppp(density_km2, region, seed);
}

double nth_nearest_distance_pdf(double r_m, int n, double density_per_m2)
{
    if (n < 1 || !(density_per_m2 > 0.0)) {
        throw InvalidParameter("n must be >= 1 and density > 0");
    }
    if (!(r_m >= 0.0)) {
        throw InvalidParameter("distance must be non-negative");
    }
    if (r_m == 0.0) {
        return 0.0;
    }
    const double lp = density_per_m2 * pi;
    const double log_f = std::log(2.0) + n * std::log(lp) + (2.0 * n - 1.0) * std::log(r_m)
        - lp * r_m * r_m - std::lgamma(static_cast<double>(n));
    return std::exp(log_f);
}

double nth_nearest_distance_cdf(double r_m, int n, double density_per_m2)
{
    if (n < 1 || !(density_per_m2 > 0.0)) {
        throw InvalidParameter("n must be >= 1 and density > 0");
    }
    if (r_m <= 0.0) {
        return 0.0;
    }
    return boost::math::gamma_p(static_cast<double>(n), density_per_m2 * pi * r_m * r_m);
}

std::vector<double> nearest_distances(const Deployment& deployment, Point probe, std::size_t count)
{
    if (count > deployment.points.size()) {
        throw InsufficientPoints("requested " + std::to_string(count) + " nearest points but deployment has "
                                 + std::to_string(deployment.points.size()));
    }
    std::vector<double> d2;
    d2.reserve(deployment.points.size());
    for (const auto& p : deployment.points) {
        d2.push_back(deployment.region.distance_squared(probe, p));
    }
    std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(count), d2.end());
    d2.resize(count);
    for (auto& v : d2) {
        v = std::sqrt(v);
    }
    return d2;
}

double DistanceFit::cdf(double r) const
{
    if (r <= 0.0) {
        return 0.0;
    }
    if (family == DistanceFamily::Rayleigh) {
        return -std::expm1(-r * r / (2.0 * scale * scale));
    }
    return boost::math::gamma_p(shape, r / scale);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf)
{
    if (samples.empty()) {
        throw InvalidParameter("KS statistic needs samples");
    }
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

namespace {

double fit_gamma_shape(std::span<const double> samples, double mean)
{
    double log_sum = 0.0;
    double var = 0.0;
    for (double x : samples) {
        log_sum += std::log(x);
        var += (x - mean) * (x - mean);
    }
    const double n = static_cast<double>(samples.size());
    var /= n;
    const double s = std::log(mean) - log_sum / n;
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw FitFailure("gamma fit: degenerate log-moment");
    }
    // Method-of-moments start, then Newton on log(k) - digamma(k) = s.
    double k = mean * mean / var;
    for (int iter = 0; iter < 200; ++iter) {
        const double g = std::log(k) - boost::math::digamma(k) - s;
        if (std::fabs(g) < 1e-9) {
            return k;
        }
        const double dg = 1.0 / k - boost::math::trigamma(k);
        double next = k - g / dg;
        if (!(next > 0.0)) {
            next = k / 2.0;
        }
        k = next;
    }
    throw FitFailure("gamma fit: Newton iteration did not converge");
}

}  // namespace

DistanceFit fit_nearest_distance(std::span<const double> samples, DistanceFamily family)
{
    if (samples.size() < 100) {
        throw FitFailure("need at least 100 samples, got " + std::to_string(samples.size()));
    }
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo < 0.0) {
        throw FitFailure("negative distance sample");
    }
    if (*lo == *hi) {
        throw FitFailure("constant samples");
    }

    DistanceFit fit;
    fit.family = family;
    const double n = static_cast<double>(samples.size());
    if (family == DistanceFamily::Rayleigh) {
        double sq = 0.0;
        for (double x : samples) {
            sq += x * x;
        }
        fit.scale = std::sqrt(sq / (2.0 * n));
    } else {
        if (*lo <= 0.0) {
            throw FitFailure("gamma fit needs strictly positive samples");
        }
        const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
        fit.shape = fit_gamma_shape(samples, mean);
        fit.scale = mean / fit.shape;
    }
    fit.ks_statistic = ks_statistic(std::vector<double>(samples.begin(), samples.end()),
                                    [&fit](double r) { return fit.cdf(r); });
    return fit;
}

void write_locations_csv(const Deployment& deployment, const std::string& path)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    csv::write_row(out, {"x_m", "y_m"});
    for (const auto& p : deployment.points) {
        csv::write_row(out, {csv::format(p.x), csv::format(p.y)});
    }
}

std::string to_json(const Deployment& deployment)
{
    using nlohmann::ordered_json;
    ordered_json j;
    const auto& r = deployment.region;
    j["region"] = {{"width_m", r.width()},
                   {"height_m", r.height()},
                   {"boundary", r.mode() == BoundaryMode::ToroidalWrap ? "toroidal_wrap" : "guard_zone"},
                   {"margin_m", r.margin()}};
    if (!deployment.process) {
        j["process"] = nullptr;
    } else if (const auto* c = std::get_if<ClusteredProcess>(&*deployment.process)) {
        j["process"] = {{"kind", "clustered"},
                        {"parent_density_per_km2", c->parent_density_km2},
                        {"mean_offspring", c->mean_offspring},
                        {"spread_m", c->spread_m}};
    } else {
        j["process"] = {{"kind", "ppp"}};
    }
    j["seed"] = deployment.seed;
    j["density_per_km2"] = deployment.density_km2;
    auto pts = ordered_json::array();
    for (const auto& p : deployment.points) {
        pts.push_back({p.x, p.y});
    }
    j["points"] = std::move(pts);
    return j.dump(2) + "\n";
}

Deployment deployment_from_json(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        const auto& jr = j.at("region");
        const std::string boundary = jr.at("boundary");
        Region region = boundary == "guard_zone"
            ? Region::guard_zone(jr.at("width_m"), jr.at("height_m"), jr.at("margin_m"))
            : Region::toroidal(jr.at("width_m"), jr.at("height_m"));
        Deployment d{region, std::nullopt, j.at("seed").get<std::uint64_t>(),
                     j.at("density_per_km2").get<double>(), {}};
        const auto& jp = j.at("process");
        if (!jp.is_null()) {
            if (jp.at("kind") == "clustered") {
                d.process = ClusteredProcess{jp.at("parent_density_per_km2"), jp.at("mean_offspring"),
                                             jp.at("spread_m")};
            } else {
                d.process = PoissonProcess{};
            }
        }
        for (const auto& p : j.at("points")) {
            d.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter(std::string("deployment document: ") + e.what());
    }
}

}  // namespace rfharvest::geometry
