#pragma once

#include "rfharvest/collaboration.hpp"
#include "rfharvest/geometry.hpp"
#include "rfharvest/harvest.hpp"
#include "rfharvest/mdp.hpp"
#include "rfharvest/propagation.hpp"
#include "rfharvest/scheduling.hpp"
#include "rfharvest/swipt.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rfharvest::scenario {

struct RegionConfig {
    double width_m = 7745.966692414834;  // 60 km^2 square
    double height_m = 7745.966692414834;
    geometry::BoundaryMode boundary = geometry::BoundaryMode::ToroidalWrap;
    double guard_margin_m = 0.0;

    geometry::Region build() const;
};

struct HarvesterConfig {
    double efficiency = 0.5;
    harvest::Averaging averaging = harvest::Averaging::Log;
    std::size_t sweep_points = 6;
    bool apply_sensitivity = false;
    double sensitivity_dbm = -60.0;
};

struct PathlossConfig {
    /// Line of sight: Friis-anchored log-distance model.
    double los_exponent = 2.0;
    double los_reference_distance_m = 1.0;
    /// Non line of sight: WINNER-style fit with lognormal shadowing.
    propagation::WinnerCoefficients nlos;
    propagation::ShadowingSpec nlos_shadowing{8.0, true};

    propagation::PathlossModel los(double frequency_hz) const;
    propagation::PathlossModel nlos_model(double frequency_hz) const;
};

struct RangeConfig {
    double reference_distance_m = 1.0;
    double pathloss_exponent = 2.7;
    std::vector<double> distances_m{1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0};
    double target_throughput = 0.05;
    std::size_t fading_draws = 1000;
};

struct SwiptScenario {
    swipt::LinkState link{1e-3, 1e-3, 1e-9, 1.0, 0.0, 0.0};
    swipt::RelayOptions relay;
    swipt::SwiptConfig split;
    RangeConfig range;
};

struct SchedulingScenario {
    std::size_t slots = 6;
    std::size_t power_levels = 8;
    double slot_duration_s = 1.0;
    double noise_power_w = 1e-9;
    double h = 1e-5;
    double g = 1e-5;
    scheduling::EnergyArrivalProcess source_arrivals = scheduling::BernoulliArrivals{0.5, 1e-4};
    scheduling::EnergyArrivalProcess relay_arrivals = scheduling::BernoulliArrivals{0.5, 1e-4};
    double battery_capacity_source_j = scheduling::kUnbounded;
    double battery_capacity_relay_j = scheduling::kUnbounded;
    double rx_energy_cost_j = 0.0;
    bool delay_constrained = false;
    std::size_t max_states = 2'000'000;
    scheduling::MdpModel mdp = scheduling::default_desk_model();
    std::size_t theta_points = 20;
    std::size_t evaluation_horizon = 100'000;
};

struct CollabScenario {
    std::array<collaboration::NodeState, 2> nodes{
        collaboration::NodeState{0.0, 10.0, scheduling::BernoulliArrivals{0.3, 4.0}, 1.0},
        collaboration::NodeState{0.0, 10.0, scheduling::BernoulliArrivals{0.3, 4.0}, 1.0}};
    collaboration::QosSpec qos{4, 200};
    collaboration::LinkSpec link;
    collaboration::FramePolicy policy;
    std::vector<double> xi_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct ScenarioConfig {
    std::string name = "london";
    std::uint64_t seed = 2017;
    std::size_t trials = 500;
    RegionConfig region;
    HarvesterConfig harvester;
    PathlossConfig pathloss;
    std::vector<harvest::RatProfile> rats;
    SwiptScenario swipt;
    SchedulingScenario scheduling;
    CollabScenario collaboration;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    const harvest::RatProfile& rat(const std::string& name) const;
};

/// Central-London case study: macro, femto, Wi-Fi and TV transmitters.
ScenarioConfig default_config();

/// JSON with `//` and `/* */` comments allowed. Unknown keys are rejected.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string dump_config(const ScenarioConfig& config);
void save_config(const ScenarioConfig& config, const std::string& path);

/// FNV-1a hash of the canonical config text, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

struct IngestResult {
    geometry::Deployment deployment;
    /// Lines holding points outside the region (dropped).
    std::vector<std::size_t> rejected_lines;
};

/// Reads `x_m,y_m` locations for a RAT of the config; density is count over area.
IngestResult ingest_locations_csv(const std::string& path, const ScenarioConfig& config, const std::string& rat_name);
IngestResult ingest_locations(std::istream& in, const geometry::Region& region);

struct RatResult {
    std::string name;
    std::vector<harvest::SweepPoint> los_curve;
    std::vector<harvest::SweepPoint> nlos_curve;
    double los_peak_power_w = 0.0;
    double los_peak_density_w_per_hz = 0.0;
    double nlos_peak_power_w = 0.0;
    double nlos_peak_density_w_per_hz = 0.0;
    double los_exponent = 0.0;
    double nlos_exponent = 0.0;
};

struct CaseStudyReport {
    std::string config_name;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::vector<RatResult> rats;
    /// Wall-clock time; shown on the console, never written to report files.
    double runtime_s = 0.0;
};

CaseStudyReport run_case_study(const ScenarioConfig& config, unsigned threads = 1);

enum class ReportFormat { Csv, Json };

/// File name -> contents. Deterministic for a fixed report.
std::map<std::string, std::string> render_report(const CaseStudyReport& report, ReportFormat format);

/// Writes the rendered files into `directory`; returns the paths written.
std::vector<std::string> emit_report(const CaseStudyReport& report, ReportFormat format, const std::string& directory);

enum class SweepTarget { Harvest, SwiptSplit, ScheduleTheta, CollabXi };

SweepTarget parse_sweep_target(const std::string& name);

struct SweepRequest {
    SweepTarget target = SweepTarget::Harvest;
    std::vector<double> grid;
    /// Harvest: RAT name (default first) and model ("los" or "nlos").
    std::string rat;
    std::string model = "los";
    /// SWIPT: "ts" or "ps".
    std::string protocol = "ts";
    unsigned threads = 1;
};

struct SweepOutput {
    std::string csv;
    std::string summary;
};

SweepOutput run_sweep(const ScenarioConfig& config, const SweepRequest& request);

}  // namespace rfharvest::scenario
