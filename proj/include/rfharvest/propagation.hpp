#pragma once

#include "rfharvest/rng.hpp"

#include <variant>

namespace rfharvest::propagation {

inline constexpr double kSpeedOfLight = 299792458.0;

struct SingleSlope {
    double exponent = 2.0;
};

/// Exponent `los_exponent` up to the breakpoint, `nlos_exponent` beyond it,
/// joined continuously.
struct DualSlope {
    double los_exponent = 2.0;
    double nlos_exponent = 4.0;
    double breakpoint_m = 100.0;
};

struct PathlossModel {
    std::variant<SingleSlope, DualSlope> kind = SingleSlope{};
    double reference_distance_m = 1.0;
    double reference_loss_db = 0.0;
    double carrier_frequency_hz = 2e9;

    void validate() const;
};

/// Free-space loss 20 log10(4 pi d f / c).
double friis_loss_db(double frequency_hz, double distance_m);

/// Log-distance model anchored at the Friis loss at `reference_distance_m`.
PathlossModel free_space(double frequency_hz, double exponent = 2.0, double reference_distance_m = 1.0);

/// Coefficients of loss = A log10(d) + B + C log10(f / 5 GHz), d in meters.
struct WinnerCoefficients {
    double a_db_per_decade = 43.0;
    double b_db = 25.0;
    double c_db = 20.0;
};

/// WINNER-style single-slope model (exponent A/10) realized at one carrier.
PathlossModel winner_style(const WinnerCoefficients& coeffs, double frequency_hz);

/// True when the carrier lies outside the 2-6 GHz band the WINNER fits cover.
bool winner_extrapolated(double frequency_hz) noexcept;

/// Mean path loss at distance d; throws OutOfRange below the reference distance.
double pathloss_db(const PathlossModel& model, double distance_m);

struct ShadowingSpec {
    double sigma_db = 0.0;
    bool enabled = false;

    /// One lognormal shadowing draw in dB (0 when disabled).
    double draw(Rng& rng) const { return enabled ? sigma_db * rng.normal() : 0.0; }
};

struct ReceivedPower {
    double power_w = 0.0;
    double density_w_per_hz = 0.0;
};

/// Received power for a transmitter spreading `tx_power_w` uniformly over
/// `bandwidth_hz`. `shadowing_db` is an extra loss draw.
ReceivedPower received_power(double tx_power_w, double bandwidth_hz, const PathlossModel& model,
                             double distance_m, double shadowing_db, double antenna_gain_db);

}  // namespace rfharvest::propagation
