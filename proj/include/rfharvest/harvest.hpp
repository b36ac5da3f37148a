#pragma once

#include "rfharvest/geometry.hpp"
#include "rfharvest/propagation.hpp"
#include "rfharvest/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rfharvest::harvest {

struct DensityRange {
    double min_km2 = 0.0;
    double max_km2 = 0.0;
};

/// Radio parameters of one radio-access technology.
struct RatProfile {
    std::string name;
    double bandwidth_hz = 0.0;
    double transmit_power_w = 0.0;
    DensityRange density;
    geometry::SpatialProcessSpec process = geometry::PoissonProcess{};
    double carrier_frequency_hz = 0.0;
    /// Transmit antenna gain toward the harvester.
    double transmit_gain_db = 0.0;

    void validate() const;
};

/// Piecewise-linear density tabulated at origin + i * step.
struct EmpiricalPdf {
    double step = 0.0;
    double origin = 0.0;
    std::vector<double> values;

    double support_end() const noexcept
    {
        return values.empty() ? origin : origin + step * static_cast<double>(values.size() - 1);
    }
    /// Trapezoid-rule integral of the tabulated density.
    double integral() const;
    /// Linear interpolation; zero outside the support.
    double at(double x) const;
    /// Builds from (load, density) pairs on a uniform grid.
    static EmpiricalPdf from_grid(std::span<const std::pair<double, double>> grid);
    /// Uniform density on [0, 1] sampled every `step`.
    static EmpiricalPdf uniform(double step);
};

struct FullBuffer {};
struct TwoState {
    double on_prob = 1.0;
};

using TrafficLoadModel = std::variant<FullBuffer, EmpiricalPdf, TwoState>;

/// Checks a traffic model: probabilities in range, loads on [0, 1], unit mass.
void validate(const TrafficLoadModel& model);

/// One spectrum-utilization draw in [0, 1].
double sample_utilization(const TrafficLoadModel& model, Rng& rng);

/// Density of a sum of independent loads by trapezoid-rule convolution.
EmpiricalPdf convolve_load_pdfs(std::span<const EmpiricalPdf> pdfs, double grid_step);

struct HarvestOptions {
    /// Zero contributions below `sensitivity_dbm` when enabled.
    bool apply_sensitivity = false;
    double sensitivity_dbm = -60.0;
};

/// Incident RF power at one probe.
struct HarvestReport {
    double total_power_w = 0.0;
    double power_density_w_per_hz = 0.0;
    std::vector<double> per_transmitter_w;
    /// Largest single contribution over the total (0 when nothing is received).
    double nearest_fraction = 0.0;
};

/// Sums the contributions of every transmitter in `deployment`. Distances
/// below the model's reference distance are evaluated at the reference
/// distance. `utilization` and `shadowing_db` hold one draw per transmitter.
HarvestReport aggregate_power(geometry::Point probe, const geometry::Deployment& deployment,
                              const RatProfile& rat, const propagation::PathlossModel& model,
                              std::span<const double> utilization, std::span<const double> shadowing_db,
                              const HarvestOptions& options = {});

/// Same, drawing utilizations and then shadowing from `seed`.
HarvestReport aggregate_power(geometry::Point probe, const geometry::Deployment& deployment,
                              const RatProfile& rat, const propagation::PathlossModel& model,
                              const TrafficLoadModel& traffic, const propagation::ShadowingSpec& shadowing,
                              std::uint64_t seed, const HarvestOptions& options = {});

enum class Averaging {
    /// exp(mean(log P)): the typical harvested power.
    Log,
    Linear,
};

struct SweepOptions {
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    propagation::ShadowingSpec shadowing;
    Averaging averaging = Averaging::Log;
    /// RF-to-DC conversion efficiency applied to reported powers.
    double efficiency = 1.0;
    unsigned threads = 1;
    HarvestOptions harvest;
};

struct SweepPoint {
    double density_km2 = 0.0;
    /// The statistic selected by SweepOptions::averaging.
    double mean_power_w = 0.0;
    double mean_density_w_per_hz = 0.0;
    double stddev_w = 0.0;
    double linear_mean_w = 0.0;
    double log_mean_w = 0.0;
    double mean_nearest_fraction = 0.0;
    /// Trials whose window held no transmitter; excluded from the log mean.
    double empty_fraction = 0.0;
};

/// The deployment, probe and draws used by trial `trial` at grid index
/// `grid_index`. Exposed so single trials can be replayed.
struct TrialDraw {
    geometry::Deployment deployment;
    geometry::Point probe;
    std::uint64_t draw_seed = 0;
};
TrialDraw trial_draw(const RatProfile& rat, double density_km2, const geometry::Region& region,
                     std::uint64_t seed, std::size_t grid_index, std::size_t trial);

/// Full-buffer Monte-Carlo sweep over transmitter density.
std::vector<SweepPoint> upper_bound_sweep(const RatProfile& rat, std::span<const double> density_grid_km2,
                                          const propagation::PathlossModel& model,
                                          const geometry::Region& region, const SweepOptions& options);

/// Least-squares slope of log power against log density.
double scaling_exponent(std::span<const double> density_km2, std::span<const double> power_w);
double scaling_exponent(std::span<const SweepPoint> curve);

/// `count` log-spaced densities covering [lo, hi].
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

}  // namespace rfharvest::harvest
