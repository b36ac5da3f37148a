#pragma once

#include "rfharvest/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rfharvest::geometry {

struct Point {
    double x = 0.0;  // meters
    double y = 0.0;  // meters
};

enum class BoundaryMode { ToroidalWrap, GuardZone };

/// Rectangular study area [0, width) x [0, height).
///
/// With toroidal wrapping, distances are measured on the torus so that the
/// distance statistics seen from any probe are stationary. With a guard
/// zone, distances are Euclidean and probes are only placed at least
/// `margin` meters away from the boundary.
class Region {
public:
    static Region toroidal(double width_m, double height_m);
    static Region guard_zone(double width_m, double height_m, double margin_m);

    double width() const noexcept { return width_; }
    double height() const noexcept { return height_; }
    BoundaryMode mode() const noexcept { return mode_; }
    double margin() const noexcept { return margin_; }
    double area_m2() const noexcept { return width_ * height_; }
    double area_km2() const noexcept { return width_ * height_ * 1e-6; }

    bool contains(Point p) const noexcept;
    double distance(Point a, Point b) const noexcept;
    double distance_squared(Point a, Point b) const noexcept;
    /// Maps a point back into the region (toroidal mode only).
    Point wrap(Point p) const noexcept;
    /// Uniform probe location; inside the inner area for guard zones.
    Point sample_probe(Rng& rng) const;
    Point center() const noexcept { return {width_ / 2.0, height_ / 2.0}; }

private:
    Region(double w, double h, BoundaryMode mode, double margin);

    double width_;
    double height_;
    BoundaryMode mode_;
    double margin_;
};

struct PoissonProcess {};

/// Thomas cluster process: PPP parents, Poisson(mean_offspring) children
/// displaced by an isotropic Gaussian of standard deviation `spread_m`.
struct ClusteredProcess {
    double parent_density_km2 = 0.0;
    double mean_offspring = 0.0;
    double spread_m = 0.0;

    double density_km2() const noexcept { return parent_density_km2 * mean_offspring; }
};

using SpatialProcessSpec = std::variant<PoissonProcess, ClusteredProcess>;

void validate(const SpatialProcessSpec& spec);
std::string describe(const SpatialProcessSpec& spec);

struct Deployment {
    Region region = Region::toroidal(1.0, 1.0);
    /// Empty for deployments loaded from location files.
    std::optional<SpatialProcessSpec> process;
    std::uint64_t seed = 0;
    double density_km2 = 0.0;
    std::vector<Point> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
};

Deployment sample_ppp(double density_km2, const Region& region, std::uint64_t seed);
Deployment sample_clustered(const ClusteredProcess& spec, const Region& region, std::uint64_t seed);

/// Draws from `spec` rescaled to an overall density of `density_km2`.
/// A clustered process keeps its offspring count and spread and rescales
/// its parent density.
Deployment sample_at_density(const SpatialProcessSpec& spec, double density_km2,
                             const Region& region, std::uint64_t seed);

/// Density of the distance from an arbitrary location to the n-th nearest
/// point of a planar PPP: 2 (density pi)^n r^(2n-1) exp(-density pi r^2) / (n-1)!
double nth_nearest_distance_pdf(double r_m, int n, double density_per_m2);
double nth_nearest_distance_cdf(double r_m, int n, double density_per_m2);

/// Ascending distances from `probe` to its `count` nearest points.
std::vector<double> nearest_distances(const Deployment& deployment, Point probe, std::size_t count);

enum class DistanceFamily { Rayleigh, Gamma };

struct DistanceFit {
    DistanceFamily family = DistanceFamily::Rayleigh;
    double shape = 1.0;  // Gamma only
    double scale = 1.0;
    double ks_statistic = 1.0;

    double cdf(double r) const;
};

/// Maximum-likelihood fit plus the KS distance to the fitted cdf.
DistanceFit fit_nearest_distance(std::span<const double> samples, DistanceFamily family);

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

void write_locations_csv(const Deployment& deployment, const std::string& path);
std::string to_json(const Deployment& deployment);
Deployment deployment_from_json(const std::string& text);

}  // namespace rfharvest::geometry
