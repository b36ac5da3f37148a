#include "rfharvest/harvest.hpp"

#include "rfharvest/error.hpp"
#include "rfharvest/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace rfharvest::harvest {

void RatProfile::validate() const
{
    if (!(bandwidth_hz > 0.0)) {
        throw InvalidParameter(name + ": bandwidth must be positive");
    }
    if (!(transmit_power_w > 0.0)) {
        throw InvalidParameter(name + ": transmit power must be positive");
    }
    if (!(density.min_km2 > 0.0) || !(density.max_km2 >= density.min_km2)) {
        throw InvalidParameter(name + ": density range must be positive and ordered");
    }
    if (!(carrier_frequency_hz > 0.0)) {
        throw InvalidParameter(name + ": carrier frequency must be positive");
    }
    geometry::validate(process);
}

double EmpiricalPdf::integral() const
{
    if (values.size() < 2) {
        return 0.0;
    }
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        sum += values[i];
    }
    return sum * step;
}

double EmpiricalPdf::at(double x) const
{
    if (values.empty() || x < origin || x > support_end()) {
        return 0.0;
    }
    const double pos = (x - origin) / step;
    const auto i = std::min(static_cast<std::size_t>(pos), values.size() - 1);
    if (i + 1 >= values.size()) {
        return values.back();
    }
    const double t = pos - static_cast<double>(i);
    return values[i] * (1.0 - t) + values[i + 1] * t;
}

EmpiricalPdf EmpiricalPdf::from_grid(std::span<const std::pair<double, double>> grid)
{
    if (grid.size() < 2) {
        throw InvalidParameter("empirical pdf needs at least two grid points");
    }
    EmpiricalPdf pdf;
    pdf.origin = grid.front().first;
    pdf.step = grid[1].first - grid[0].first;
    if (!(pdf.step > 0.0)) {
        throw InvalidParameter("empirical pdf grid must be increasing");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double expected = pdf.origin + pdf.step * static_cast<double>(i);
        if (std::fabs(grid[i].first - expected) > 1e-9 * std::max(1.0, std::fabs(expected))) {
            throw InvalidParameter("empirical pdf grid must be uniform");
        }
        pdf.values.push_back(grid[i].second);
    }
    return pdf;
}

EmpiricalPdf EmpiricalPdf::uniform(double step)
{
    const double cells = std::round(1.0 / step);
    if (!(step > 0.0) || std::fabs(cells * step - 1.0) > 1e-9) {
        throw InvalidParameter("grid step must divide 1 evenly");
    }
    EmpiricalPdf pdf;
    pdf.step = 1.0 / cells;
    pdf.values.assign(static_cast<std::size_t>(cells) + 1, 1.0);
    return pdf;
}

void validate(const TrafficLoadModel& model)
{
    if (const auto* t = std::get_if<TwoState>(&model)) {
        if (!(t->on_prob >= 0.0 && t->on_prob <= 1.0)) {
            throw InvalidParameter("on probability must lie in [0, 1]");
        }
    } else if (const auto* e = std::get_if<EmpiricalPdf>(&model)) {
        if (e->values.size() < 2 || !(e->step > 0.0)) {
            throw InvalidParameter("empirical pdf needs a positive step and two or more points");
        }
        if (e->origin < -1e-12 || e->support_end() > 1.0 + 1e-9) {
            throw InvalidParameter("loads must be confined to [0, 1]");
        }
        for (double v : e->values) {
            if (!(v >= 0.0)) {
                throw InvalidParameter("pdf values must be non-negative");
            }
        }
        if (std::fabs(e->integral() - 1.0) > 1e-6) {
            throw InvalidParameter("pdf must integrate to 1");
        }
    }
}

double sample_utilization(const TrafficLoadModel& model, Rng& rng)
{
    if (std::holds_alternative<FullBuffer>(model)) {
        return 1.0;
    }
    if (const auto* t = std::get_if<TwoState>(&model)) {
        return rng.uniform() < t->on_prob ? 1.0 : 0.0;
    }
    const auto& pdf = std::get<EmpiricalPdf>(model);
    // Inverse cdf of the piecewise-linear density.
    double target = rng.uniform() * pdf.integral();
    const double h = pdf.step;
    for (std::size_t i = 0; i + 1 < pdf.values.size(); ++i) {
        const double a = pdf.values[i];
        const double b = pdf.values[i + 1];
        const double cell = 0.5 * (a + b) * h;
        if (target <= cell || i + 2 == pdf.values.size()) {
            target = std::min(target, cell);
            const double slope = (b - a) / h;
            double t = 0.0;
            if (std::fabs(slope) < 1e-12 * std::max(a, b) || slope == 0.0) {
                t = a > 0.0 ? target / a : 0.0;
            } else {
                t = (-a + std::sqrt(std::max(0.0, a * a + 2.0 * slope * target))) / slope;
            }
            return std::clamp(pdf.origin + static_cast<double>(i) * h + std::clamp(t, 0.0, h), 0.0, 1.0);
        }
        target -= cell;
    }
    return std::clamp(pdf.support_end(), 0.0, 1.0);
}

namespace {

EmpiricalPdf convolve_pair(const EmpiricalPdf& f, const EmpiricalPdf& g, double h)
{
    const std::size_t n = f.values.size();
    const std::size_t m = g.values.size();
    EmpiricalPdf out;
    out.step = h;
    out.origin = f.origin + g.origin;
    out.values.assign(n + m - 1, 0.0);
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const std::size_t lo = k >= m - 1 ? k - (m - 1) : 0;
        const std::size_t hi = std::min(k, n - 1);
        if (hi <= lo) {
            continue;
        }
        double sum = 0.5 * (f.values[lo] * g.values[k - lo] + f.values[hi] * g.values[k - hi]);
        for (std::size_t i = lo + 1; i < hi; ++i) {
            sum += f.values[i] * g.values[k - i];
        }
        out.values[k] = sum * h;
    }
    return out;
}

}  // namespace

EmpiricalPdf convolve_load_pdfs(std::span<const EmpiricalPdf> pdfs, double grid_step)
{
    if (pdfs.empty()) {
        throw InvalidParameter("nothing to convolve");
    }
    const double cells = std::round(1.0 / grid_step);
    if (!(grid_step > 0.0) || std::fabs(cells * grid_step - 1.0) > 1e-9) {
        throw InvalidParameter("grid step must divide 1 evenly");
    }
    for (const auto& p : pdfs) {
        if (std::fabs(p.step - grid_step) > 1e-12 || std::fabs(p.origin) > 1e-12
            || p.values.size() != static_cast<std::size_t>(cells) + 1) {
            throw InvalidParameter("all pdfs must share the [0, 1] grid with the requested step");
        }
    }
    EmpiricalPdf acc = pdfs.front();
    for (std::size_t i = 1; i < pdfs.size(); ++i) {
        acc = convolve_pair(acc, pdfs[i], grid_step);
    }
    const double mass = acc.integral();
    if (!(mass > 0.0)) {
        throw InvalidParameter("convolution has zero mass");
    }
    for (auto& v : acc.values) {
        v /= mass;
    }
    return acc;
}

HarvestReport aggregate_power(geometry::Point probe, const geometry::Deployment& deployment,
                              const RatProfile& rat, const propagation::PathlossModel& model,
                              std::span<const double> utilization, std::span<const double> shadowing_db,
                              const HarvestOptions& options)
{
    const std::size_t n = deployment.points.size();
    if (utilization.size() != n || shadowing_db.size() != n) {
        throw InvalidParameter("need one utilization and one shadowing draw per transmitter");
    }
    HarvestReport report;
    report.per_transmitter_w.reserve(n);
    const double floor_w = std::pow(10.0, (options.sensitivity_dbm - 30.0) / 10.0);
    double largest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::max(deployment.region.distance(probe, deployment.points[i]),
                                  model.reference_distance_m);
        double p = propagation::received_power(rat.transmit_power_w, rat.bandwidth_hz, model, d,
                                               shadowing_db[i], rat.transmit_gain_db)
                       .power_w
            * utilization[i];
        if (options.apply_sensitivity && p < floor_w) {
            p = 0.0;
        }
        report.per_transmitter_w.push_back(p);
        report.total_power_w += p;
        largest = std::max(largest, p);
    }
    report.power_density_w_per_hz = report.total_power_w / rat.bandwidth_hz;
    report.nearest_fraction = report.total_power_w > 0.0 ? largest / report.total_power_w : 0.0;
    return report;
}

HarvestReport aggregate_power(geometry::Point probe, const geometry::Deployment& deployment,
                              const RatProfile& rat, const propagation::PathlossModel& model,
                              const TrafficLoadModel& traffic, const propagation::ShadowingSpec& shadowing,
                              std::uint64_t seed, const HarvestOptions& options)
{
    Rng rng(seed);
    const std::size_t n = deployment.points.size();
    std::vector<double> util(n);
    std::vector<double> shadow(n);
    for (auto& u : util) {
        u = sample_utilization(traffic, rng);
    }
    for (auto& s : shadow) {
        s = shadowing.draw(rng);
    }
    return aggregate_power(probe, deployment, rat, model, util, shadow, options);
}

TrialDraw trial_draw(const RatProfile& rat, double density_km2, const geometry::Region& region,
                     std::uint64_t seed, std::size_t grid_index, std::size_t trial)
{
    Rng rng(derive_seed(seed, grid_index, trial));
    const std::uint64_t deployment_seed = rng.next_u64();
    const geometry::Point probe = region.sample_probe(rng);
    const std::uint64_t draw_seed = rng.next_u64();
    return {geometry::sample_at_density(rat.process, density_km2, region, deployment_seed), probe, draw_seed};
}

namespace {

struct TrialResult {
    double unit_power = 0.0;  // total for a 1 W transmitter
    double nearest_fraction = 0.0;
    bool empty = true;
};

}  // namespace

std::vector<SweepPoint> upper_bound_sweep(const RatProfile& rat, std::span<const double> density_grid_km2,
                                          const propagation::PathlossModel& model,
                                          const geometry::Region& region, const SweepOptions& options)
{
    if (density_grid_km2.empty()) {
        throw InvalidParameter("density grid is empty");
    }
    if (options.trials < 1) {
        throw InvalidParameter("need at least one trial");
    }
    rat.validate();
    model.validate();

    // Trials run at unit transmit power; the power scale is applied once at
    // the end so results are exactly linear in transmit power.
    RatProfile unit = rat;
    unit.transmit_power_w = 1.0;
    const double scale = rat.transmit_power_w * options.efficiency;

    std::vector<SweepPoint> curve;
    for (std::size_t g = 0; g < density_grid_km2.size(); ++g) {
        const double density = density_grid_km2[g];
        std::vector<TrialResult> results(options.trials);
        parallel_for(options.trials, options.threads, [&](std::size_t t) {
            const auto draw = trial_draw(unit, density, region, options.seed, g, t);
            const auto report = aggregate_power(draw.probe, draw.deployment, unit, model, FullBuffer{},
                                                options.shadowing, draw.draw_seed, options.harvest);
            results[t] = {report.total_power_w, report.nearest_fraction, report.total_power_w <= 0.0};
        });

        // Fixed-order reduction keeps the output independent of thread count.
        double sum = 0.0;
        double log_sum = 0.0;
        double frac_sum = 0.0;
        std::size_t non_empty = 0;
        for (const auto& r : results) {
            sum += r.unit_power;
            if (!r.empty) {
                log_sum += std::log(r.unit_power);
                frac_sum += r.nearest_fraction;
                ++non_empty;
            }
        }
        const double n = static_cast<double>(results.size());
        const double mean_unit = sum / n;
        double var = 0.0;
        for (const auto& r : results) {
            var += (r.unit_power - mean_unit) * (r.unit_power - mean_unit);
        }
        SweepPoint pt;
        pt.density_km2 = density;
        pt.linear_mean_w = scale * mean_unit;
        pt.log_mean_w = non_empty > 0 ? scale * std::exp(log_sum / static_cast<double>(non_empty)) : 0.0;
        pt.stddev_w = scale * std::sqrt(results.size() > 1 ? var / (n - 1.0) : 0.0);
        pt.mean_nearest_fraction = non_empty > 0 ? frac_sum / static_cast<double>(non_empty) : 0.0;
        pt.empty_fraction = 1.0 - static_cast<double>(non_empty) / n;
        pt.mean_power_w = options.averaging == Averaging::Log ? pt.log_mean_w : pt.linear_mean_w;
        pt.mean_density_w_per_hz = pt.mean_power_w / rat.bandwidth_hz;
        curve.push_back(pt);
    }
    return curve;
}

double scaling_exponent(std::span<const double> density_km2, std::span<const double> power_w)
{
    if (density_km2.size() != power_w.size() || density_km2.size() < 4) {
        throw FitFailure("scaling fit needs at least four points");
    }
    const auto [lo, hi] = std::minmax_element(density_km2.begin(), density_km2.end());
    if (!(*lo > 0.0) || *hi / *lo < 10.0 * (1.0 - 1e-9)) {
        throw FitFailure("density grid must span at least one decade");
    }
    const double n = static_cast<double>(density_km2.size());
    double sx = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < density_km2.size(); ++i) {
        if (!(power_w[i] > 0.0)) {
            throw FitFailure("scaling fit needs positive powers");
        }
        sx += std::log(density_km2[i]);
        sy += std::log(power_w[i]);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < density_km2.size(); ++i) {
        const double dx = std::log(density_km2[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(power_w[i]) - my);
    }
    return sxy / sxx;
}

double scaling_exponent(std::span<const SweepPoint> curve)
{
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& p : curve) {
        x.push_back(p.density_km2);
        y.push_back(p.mean_power_w);
    }
    return scaling_exponent(x, y);
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count)
{
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) {
        throw InvalidParameter("log_spaced needs 0 < lo <= hi and count >= 1");
    }
    std::vector<double> out;
    if (count == 1) {
        out.push_back(lo);
        return out;
    }
    const double ratio = std::log(hi / lo);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(i + 1 == count ? hi : lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(count - 1)));
    }
    return out;
}

}  // namespace rfharvest::harvest
