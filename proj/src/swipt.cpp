#include "rfharvest/swipt.hpp"

#include "rfharvest/error.hpp"
#include "rfharvest/rng.hpp"

#include <algorithm>
#include <cmath>

namespace rfharvest::swipt {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_pair(double a, double b, const char* what)
{
    if (!(a >= 0.0) || !(b >= 0.0) || !(a + b <= 1.0 + 1e-12)) {
        throw InvalidParameter(std::string(what) + " must be non-negative with sum <= 1");
    }
}

}  // namespace

void SwiptConfig::validate() const
{
    if (!(frame_duration_s > 0.0)) {
        throw InvalidParameter("frame duration must be positive");
    }
    if (!in_unit(alpha) || !in_unit(rho)) {
        throw InvalidParameter("alpha and rho must lie in [0, 1]");
    }
    check_pair(alpha1, alpha2, "alpha1/alpha2");
    check_pair(rho1, rho2, "rho1/rho2");
}

void LinkState::validate() const
{
    if (!(h >= 0.0) || !(g >= 0.0) || !(noise_power_w > 0.0) || !(source_power_w >= 0.0)
        || !(ambient_power_at_relay_w >= 0.0) || !(ambient_power_at_source_w >= 0.0)) {
        throw InvalidParameter("link gains and powers must be non-negative, noise positive");
    }
}

double end_to_end_snr(double snr_first_hop, double snr_second_hop, RelayMode mode) noexcept
{
    if (mode == RelayMode::DecodeForward) {
        return std::min(snr_first_hop, snr_second_hop);
    }
    return snr_first_hop * snr_second_hop / (snr_first_hop + snr_second_hop + 1.0);
}

HybridResult hybrid_ts_throughput(double alpha1, double alpha2, const LinkState& link, const RelayOptions& options)
{
    check_pair(alpha1, alpha2, "alpha1/alpha2");
    link.validate();
    const double T = options.frame_duration_s;
    const double info = 1.0 - alpha1 - alpha2;
    HybridResult out;
    if (info <= 0.0) {
        return out;
    }
    const double hop_time = info * T / 2.0;
    out.source_banked_energy_j = options.efficiency * link.ambient_power_at_source_w * hop_time;
    const double harvested = options.efficiency
        * (alpha1 * T * link.source_power_w * link.h + alpha2 * T * link.ambient_power_at_relay_w);
    const double relay_power = harvested / hop_time;
    const double snr1 = link.source_power_w * link.h / link.noise_power_w;
    const double snr2 = relay_power * link.g / link.noise_power_w;
    out.throughput = info / 2.0 * std::log2(1.0 + end_to_end_snr(snr1, snr2, options.mode));
    return out;
}

double ts_throughput(double alpha, const LinkState& link, const RelayOptions& options)
{
    if (!in_unit(alpha)) {
        throw InvalidParameter("alpha must lie in [0, 1]");
    }
    LinkState plain = link;
    plain.ambient_power_at_relay_w = 0.0;
    plain.ambient_power_at_source_w = 0.0;
    return hybrid_ts_throughput(alpha, 0.0, plain, options).throughput;
}

HybridResult hybrid_ps_throughput(double rho1, double rho2, const LinkState& link, const RelayOptions& options)
{
    check_pair(rho1, rho2, "rho1/rho2");
    link.validate();
    const double T = options.frame_duration_s;
    const double info = 1.0 - rho1 - rho2;
    HybridResult out;
    if (info <= 0.0) {
        return out;
    }
    const double received = link.source_power_w * link.h;
    const double harvested = options.efficiency * (rho1 * received + rho2 * link.ambient_power_at_relay_w) * (T / 2.0);
    const double relay_power = harvested / (T / 2.0);
    const double snr1 = options.ps_noise == PsNoiseModel::SplitBeforeNoise
        ? info * received / link.noise_power_w
        : received / link.noise_power_w;
    const double snr2 = relay_power * link.g / link.noise_power_w;
    out.throughput = 0.5 * std::log2(1.0 + end_to_end_snr(snr1, snr2, options.mode));
    return out;
}

double ps_throughput(double rho, const LinkState& link, const RelayOptions& options)
{
    if (!in_unit(rho)) {
        throw InvalidParameter("rho must lie in [0, 1]");
    }
    LinkState plain = link;
    plain.ambient_power_at_relay_w = 0.0;
    plain.ambient_power_at_source_w = 0.0;
    return hybrid_ps_throughput(rho, 0.0, plain, options).throughput;
}

SplitOptimum golden_section_max(const std::function<double(double)>& f, double lo, double hi, double tol)
{
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    SplitOptimum best{c, fc};
    for (double x : {a, b, d}) {
        const double v = f(x);
        if (v > best.throughput) {
            best = {x, v};
        }
    }
    return best;
}

SplitOptimum optimize_split(Protocol protocol, const LinkState& link, const RelayOptions& options, double tol,
                            std::size_t coarse_points)
{
    if (!(tol > 0.0)) {
        throw InvalidParameter("tolerance must be positive");
    }
    coarse_points = std::max<std::size_t>(coarse_points, 3);
    const auto f = [&](double x) {
        return protocol == Protocol::TimeSwitching ? ts_throughput(x, link, options) : ps_throughput(x, link, options);
    };

    SplitOptimum best{0.0, f(0.0)};
    std::size_t best_index = 0;
    const double step = 1.0 / static_cast<double>(coarse_points - 1);
    for (std::size_t i = 1; i < coarse_points; ++i) {
        const double x = static_cast<double>(i) * step;
        const double v = f(x);
        if (v > best.throughput) {
            best = {x, v};
            best_index = i;
        }
    }
    const double lo = best_index == 0 ? 0.0 : static_cast<double>(best_index - 1) * step;
    const double hi = std::min(1.0, static_cast<double>(best_index + 1) * step);
    for (const auto& candidate : {golden_section_max(f, lo, hi, tol), golden_section_max(f, 0.0, 1.0, tol)}) {
        if (candidate.throughput > best.throughput) {
            best = candidate;
        }
    }
    return best;
}

HybridOptimum optimize_hybrid(Protocol protocol, const LinkState& link, const RelayOptions& options,
                              std::size_t grid_points)
{
    grid_points = std::max<std::size_t>(grid_points, 3);
    const auto f = [&](double a, double b) {
        if (a < 0.0 || b < 0.0 || a + b > 1.0) {
            return -1.0;
        }
        return protocol == Protocol::TimeSwitching ? hybrid_ts_throughput(a, b, link, options).throughput
                                                   : hybrid_ps_throughput(a, b, link, options).throughput;
    };
    const double step = 1.0 / static_cast<double>(grid_points - 1);
    HybridOptimum best{0.0, 0.0, f(0.0, 0.0)};
    for (std::size_t i = 0; i < grid_points; ++i) {
        for (std::size_t j = 0; i + j < grid_points; ++j) {
            const double a = static_cast<double>(i) * step;
            const double b = static_cast<double>(j) * step;
            const double v = f(a, b);
            if (v > best.throughput) {
                best = {a, b, v};
            }
        }
    }
    // Alternate one-dimensional refinements inside the neighbouring cells.
    double width = step;
    for (int round = 0; round < 8; ++round) {
        const double b_fixed = best.second;
        const auto along_first = golden_section_max(
            [&](double a) { return f(a, b_fixed); }, std::max(0.0, best.first - width),
            std::min(1.0 - b_fixed, best.first + width), 1e-12);
        if (along_first.throughput > best.throughput) {
            best.first = along_first.split;
            best.throughput = along_first.throughput;
        }
        const double a_fixed = best.first;
        const auto along_second = golden_section_max(
            [&](double b) { return f(a_fixed, b); }, std::max(0.0, best.second - width),
            std::min(1.0 - a_fixed, best.second + width), 1e-12);
        if (along_second.throughput > best.throughput) {
            best.second = along_second.split;
            best.throughput = along_second.throughput;
        }
        width /= 2.0;
    }
    return best;
}

double mean_fading_throughput(Protocol protocol, const LinkState& mean_link, const RelayOptions& options,
                              std::size_t draws, std::uint64_t seed)
{
    if (draws == 0) {
        throw InvalidParameter("need at least one fading draw");
    }
    Rng rng(seed);
    double sum = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        LinkState faded = mean_link;
        faded.h = mean_link.h * rng.exponential(1.0);
        faded.g = mean_link.g * rng.exponential(1.0);
        sum += optimize_split(protocol, faded, options, 1e-9, 201).throughput;
    }
    return sum / static_cast<double>(draws);
}

RangeSweep transmission_range(Protocol protocol, const RangeQuery& query, const RelayOptions& options)
{
    RangeSweep out;
    out.distances_m = query.distances_m;
    std::sort(out.distances_m.begin(), out.distances_m.end());
    for (double d : out.distances_m) {
        if (!(d > 0.0)) {
            throw InvalidParameter("distances must be positive");
        }
        LinkState link = query.reference_link;
        link.h = query.reference_link.h * std::pow(d / query.reference_distance_m, -query.pathloss_exponent);
        // Same seed at every distance and for both protocols: common random numbers.
        const double mean = mean_fading_throughput(protocol, link, options, query.fading_draws, query.seed);
        out.mean_throughput.push_back(mean);
        if (mean >= query.target_throughput) {
            out.range_m = d;
        }
    }
    return out;
}

}  // namespace rfharvest::swipt
