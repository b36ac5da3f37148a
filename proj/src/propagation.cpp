#include "rfharvest/propagation.hpp"

#include "rfharvest/error.hpp"

#include <cmath>
#include <numbers>

namespace rfharvest::propagation {

void PathlossModel::validate() const
{
    if (!(reference_distance_m > 0.0)) {
        throw InvalidParameter("reference distance must be positive");
    }
    if (!(carrier_frequency_hz > 0.0)) {
        throw InvalidParameter("carrier frequency must be positive");
    }
    if (const auto* s = std::get_if<SingleSlope>(&kind)) {
        if (!(s->exponent >= 2.0)) {
            throw InvalidParameter("path-loss exponent must be >= 2");
        }
    } else {
        const auto& d = std::get<DualSlope>(kind);
        if (!(d.los_exponent >= 2.0) || !(d.nlos_exponent >= d.los_exponent)) {
            throw InvalidParameter("dual-slope exponents need 2 <= los <= nlos");
        }
        if (!(d.breakpoint_m > reference_distance_m)) {
            throw InvalidParameter("breakpoint must exceed the reference distance");
        }
    }
}

double friis_loss_db(double frequency_hz, double distance_m)
{
    return 20.0 * std::log10(4.0 * std::numbers::pi * distance_m * frequency_hz / kSpeedOfLight);
}

PathlossModel free_space(double frequency_hz, double exponent, double reference_distance_m)
{
    PathlossModel m;
    m.kind = SingleSlope{exponent};
    m.reference_distance_m = reference_distance_m;
    m.reference_loss_db = friis_loss_db(frequency_hz, reference_distance_m);
    m.carrier_frequency_hz = frequency_hz;
    m.validate();
    return m;
}

PathlossModel winner_style(const WinnerCoefficients& coeffs, double frequency_hz)
{
    PathlossModel m;
    m.kind = SingleSlope{coeffs.a_db_per_decade / 10.0};
    m.reference_distance_m = 1.0;
    m.reference_loss_db = coeffs.b_db + coeffs.c_db * std::log10(frequency_hz / 5e9);
    m.carrier_frequency_hz = frequency_hz;
    m.validate();
    return m;
}

bool winner_extrapolated(double frequency_hz) noexcept
{
    return frequency_hz < 2e9 || frequency_hz > 6e9;
}

double pathloss_db(const PathlossModel& model, double distance_m)
{
    if (!(distance_m >= model.reference_distance_m)) {
        throw OutOfRange("distance below the reference distance");
    }
    const double d0 = model.reference_distance_m;
    if (const auto* s = std::get_if<SingleSlope>(&model.kind)) {
        return model.reference_loss_db + 10.0 * s->exponent * std::log10(distance_m / d0);
    }
    const auto& d = std::get<DualSlope>(model.kind);
    if (distance_m <= d.breakpoint_m) {
        return model.reference_loss_db + 10.0 * d.los_exponent * std::log10(distance_m / d0);
    }
    return model.reference_loss_db + 10.0 * d.los_exponent * std::log10(d.breakpoint_m / d0)
        + 10.0 * d.nlos_exponent * std::log10(distance_m / d.breakpoint_m);
}

ReceivedPower received_power(double tx_power_w, double bandwidth_hz, const PathlossModel& model,
                             double distance_m, double shadowing_db, double antenna_gain_db)
{
    if (!(tx_power_w >= 0.0)) {
        throw InvalidParameter("transmit power must be non-negative");
    }
    if (!(bandwidth_hz > 0.0)) {
        throw InvalidParameter("bandwidth must be positive");
    }
    const double loss = pathloss_db(model, distance_m);
    const double power = tx_power_w * std::pow(10.0, (antenna_gain_db - loss - shadowing_db) / 10.0);
    return {power, power / bandwidth_hz};
}

}  // namespace rfharvest::propagation
