// Command-line front end for the rfharvest simulator.

#include "rfharvest/collaboration.hpp"
#include "rfharvest/csv.hpp"
#include "rfharvest/error.hpp"
#include "rfharvest/geometry.hpp"
#include "rfharvest/harvest.hpp"
#include "rfharvest/mdp.hpp"
#include "rfharvest/propagation.hpp"
#include "rfharvest/rng.hpp"
#include "rfharvest/scenario.hpp"
#include "rfharvest/scheduling.hpp"
#include "rfharvest/swipt.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace rfharvest;

enum ExitCode : int { kOk = 0, kConfigError = 2, kInfeasible = 3, kRuntimeError = 4 };

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::optional<std::size_t> trials;
    unsigned threads = 1;
};

scenario::ScenarioConfig load(const Globals& g)
{
    auto config = g.config_path.empty() ? scenario::default_config() : scenario::load_config(g.config_path);
    if (g.seed) {
        config.seed = *g.seed;
    }
    if (g.trials) {
        config.trials = *g.trials;
    }
    config.validate();
    return config;
}

std::string write_output(const Globals& g, const std::string& name, const std::string& contents)
{
    std::filesystem::create_directories(g.out_dir);
    const auto path = (std::filesystem::path(g.out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    out << contents;
    if (!out) {
        throw IoError("failed writing " + path);
    }
    return path;
}

propagation::PathlossModel pick_model(const scenario::ScenarioConfig& c, const harvest::RatProfile& rat,
                                      const std::string& model)
{
    if (model == "los") {
        return c.pathloss.los(rat.carrier_frequency_hz);
    }
    if (model == "nlos") {
        return c.pathloss.nlos_model(rat.carrier_frequency_hz);
    }
    throw ConfigError("model", "expected los or nlos");
}

const harvest::RatProfile& pick_rat(const scenario::ScenarioConfig& c, const std::string& name)
{
    return name.empty() ? c.rats.front() : c.rat(name);
}

scheduling::ScheduleProblem schedule_problem(const scenario::ScenarioConfig& c)
{
    const auto& s = c.scheduling;
    scheduling::ScheduleProblem p;
    p.slot_duration_s = s.slot_duration_s;
    p.source_arrivals_j = scheduling::simulate_arrivals(s.source_arrivals, s.slots, derive_seed(c.seed, 0));
    p.relay_arrivals_j = scheduling::simulate_arrivals(s.relay_arrivals, s.slots, derive_seed(c.seed, 1));
    p.gains.assign(s.slots, {s.h, s.g});
    p.noise_power_w = s.noise_power_w;
    p.battery_capacity_source_j = s.battery_capacity_source_j;
    p.battery_capacity_relay_j = s.battery_capacity_relay_j;
    p.rx_energy_cost_j = s.rx_energy_cost_j;
    p.delay_constrained = s.delay_constrained;
    return p;
}

std::string schedule_csv(const scheduling::Schedule& s)
{
    std::ostringstream out;
    csv::write_row(out, {"slot", "P_s", "P_r", "d_s", "d_r", "bits"});
    for (std::size_t k = 0; k < s.source_power_w.size(); ++k) {
        csv::write_row(out, {std::to_string(k), csv::format(s.source_power_w[k]), csv::format(s.relay_power_w[k]),
                             std::to_string(s.source_active[k]), std::to_string(s.relay_active[k]),
                             csv::format(s.delivered_bits[k])});
    }
    return out.str();
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!csv::parse_double(item, v)) {
            throw ConfigError("grid", "not a number: '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Ambient RF harvesting, SWIPT relaying and energy-aware scheduling simulator"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Scenario config (JSON, comments allowed)");
    app.add_option("--seed", g.seed, "Override the config seed");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--trials", g.trials, "Override Monte-Carlo trials per point");
    app.add_option("--threads", g.threads, "Worker threads (results do not depend on this)");

    std::function<void()> action;

    // config
    auto* config_cmd = app.add_subcommand("config", "Write the effective config as canonical JSON");
    config_cmd->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto path = write_output(g, c.name + ".json", scenario::dump_config(c));
            std::cout << "config " << scenario::config_hash(c) << " -> " << path << "\n";
        };
    });

    // deploy
    auto* deploy = app.add_subcommand("deploy", "Sample transmitter locations for a RAT");
    std::string deploy_rat;
    std::optional<double> deploy_density;
    deploy->add_option("--rat", deploy_rat, "RAT name (default: first)");
    deploy->add_option("--density", deploy_density, "Density per km^2 (default: top of the RAT's range)");
    deploy->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto& rat = pick_rat(c, deploy_rat);
            const double density = deploy_density.value_or(rat.density.max_km2);
            const auto d = geometry::sample_at_density(rat.process, density, c.region.build(), c.seed);
            std::ostringstream csv_text;
            csv::write_row(csv_text, {"x_m", "y_m"});
            for (const auto& p : d.points) {
                csv::write_row(csv_text, {csv::format(p.x), csv::format(p.y)});
            }
            const auto csv_path = write_output(g, rat.name + "_locations.csv", csv_text.str());
            const auto json_path = write_output(g, rat.name + "_deployment.json", geometry::to_json(d) + "\n");
            std::cout << rat.name << ": " << d.size() << " transmitters (" << csv::format(density)
                      << "/km^2) -> " << csv_path << ", " << json_path << "\n";
        };
    });

    // pathloss
    auto* pathloss = app.add_subcommand("pathloss", "Tabulate path loss against distance");
    std::string pl_rat;
    std::string pl_model = "los";
    std::string pl_distances = "1,10,100,1000";
    pathloss->add_option("--rat", pl_rat, "RAT whose carrier is used");
    pathloss->add_option("--model", pl_model, "los or nlos");
    pathloss->add_option("--distances", pl_distances, "Comma-separated distances in meters");
    pathloss->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto& rat = pick_rat(c, pl_rat);
            const auto model = pick_model(c, rat, pl_model);
            std::ostringstream out;
            csv::write_row(out, {"d_m", "loss_db"});
            for (double d : parse_list(pl_distances)) {
                csv::write_row(out, {csv::format(d), csv::format(propagation::pathloss_db(model, d))});
            }
            std::cout << out.str();
            write_output(g, "pathloss.csv", out.str());
        };
    });

    // harvest
    auto* harvest_cmd = app.add_subcommand("harvest", "Harvested power at one random probe");
    std::string hv_rat;
    std::string hv_model = "los";
    std::optional<double> hv_density;
    std::string hv_locations;
    harvest_cmd->add_option("--rat", hv_rat, "RAT name");
    harvest_cmd->add_option("--model", hv_model, "los or nlos");
    harvest_cmd->add_option("--density", hv_density, "Density per km^2 (default: top of range)");
    harvest_cmd->add_option("--locations", hv_locations, "Use x_m,y_m locations from a CSV file");
    harvest_cmd->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto& rat = pick_rat(c, hv_rat);
            const auto model = pick_model(c, rat, hv_model);
            const auto region = c.region.build();
            geometry::Deployment d;
            if (!hv_locations.empty()) {
                auto ingested = scenario::ingest_locations_csv(hv_locations, c, rat.name);
                for (auto line : ingested.rejected_lines) {
                    std::cerr << "line " << line << ": outside the region, skipped\n";
                }
                d = std::move(ingested.deployment);
            } else {
                d = geometry::sample_at_density(rat.process, hv_density.value_or(rat.density.max_km2), region,
                                                derive_seed(c.seed, 0));
            }
            Rng rng(derive_seed(c.seed, 1));
            const auto probe = region.sample_probe(rng);
            const auto shadow = hv_model == "nlos" ? c.pathloss.nlos_shadowing : propagation::ShadowingSpec{};
            const auto report = harvest::aggregate_power(probe, d, rat, model, harvest::FullBuffer{}, shadow,
                                                         derive_seed(c.seed, 2));
            const double eta = c.harvester.efficiency;
            std::ostringstream out;
            csv::write_row(out, {"rat", "transmitters", "probe_x_m", "probe_y_m", "harvested_power_w",
                                 "harvested_density_w_per_hz", "nearest_fraction"});
            csv::write_row(out, {rat.name, std::to_string(d.size()), csv::format(probe.x), csv::format(probe.y),
                                 csv::format(eta * report.total_power_w),
                                 csv::format(eta * report.power_density_w_per_hz),
                                 csv::format(report.nearest_fraction)});
            std::cout << out.str();
            write_output(g, "harvest.csv", out.str());
        };
    });

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Parameter sweep: harvest, swipt_split, schedule_theta, collab_xi");
    std::string sw_target;
    std::string sw_grid;
    scenario::SweepRequest sw_request;
    sweep->add_option("target", sw_target, "Sweep target")->required();
    sweep->add_option("--grid", sw_grid, "Comma-separated grid (default depends on target)");
    sweep->add_option("--rat", sw_request.rat, "RAT for harvest sweeps");
    sweep->add_option("--model", sw_request.model, "los or nlos for harvest sweeps");
    sweep->add_option("--protocol", sw_request.protocol, "ts or ps for swipt_split sweeps");
    sweep->callback([&] {
        action = [&] {
            const auto c = load(g);
            sw_request.target = scenario::parse_sweep_target(sw_target);
            sw_request.grid = sw_grid.empty() ? std::vector<double>{} : parse_list(sw_grid);
            sw_request.threads = g.threads;
            const auto result = scenario::run_sweep(c, sw_request);
            const auto path = write_output(g, "sweep_" + sw_target + ".csv", result.csv);
            std::cout << result.summary << "\n" << path << "\n";
        };
    });

    // swipt
    auto* swipt_cmd = app.add_subcommand("swipt", "Relay throughput against the split factor");
    std::string sp_protocol = "ts";
    std::string sp_mode;
    swipt_cmd->add_option("--protocol", sp_protocol, "ts or ps");
    swipt_cmd->add_option("--mode", sp_mode, "af or df (default from config)");
    swipt_cmd->callback([&] {
        action = [&] {
            const auto c = load(g);
            auto relay = c.swipt.relay;
            if (sp_mode == "af") {
                relay.mode = swipt::RelayMode::AmplifyForward;
            } else if (sp_mode == "df") {
                relay.mode = swipt::RelayMode::DecodeForward;
            } else if (!sp_mode.empty()) {
                throw ConfigError("mode", "expected af or df");
            }
            if (sp_protocol != "ts" && sp_protocol != "ps") {
                throw ConfigError("protocol", "expected ts or ps");
            }
            const auto protocol = sp_protocol == "ts" ? swipt::Protocol::TimeSwitching : swipt::Protocol::PowerSplitting;
            std::ostringstream out;
            csv::write_row(out, {"split", "throughput_bps_hz"});
            for (int i = 0; i <= 100; ++i) {
                const double x = i / 100.0;
                const double v = protocol == swipt::Protocol::TimeSwitching ? swipt::ts_throughput(x, c.swipt.link, relay)
                                                                            : swipt::ps_throughput(x, c.swipt.link, relay);
                csv::write_row(out, {csv::format(x), csv::format(v)});
            }
            const auto best = swipt::optimize_split(protocol, c.swipt.link, relay);
            const auto path = write_output(g, "swipt_" + sp_protocol + ".csv", out.str());
            std::cout << "optimal split " << csv::format(best.split) << ", throughput " << csv::format(best.throughput)
                      << " bit/s/Hz\n" << path << "\n";
        };
    });

    // schedule
    auto* schedule = app.add_subcommand("schedule", "Energy-harvesting relay scheduling");
    schedule->require_subcommand(1);
    auto* solve = schedule->add_subcommand("solve", "Offline optimal schedule for simulated arrivals");
    std::optional<double> demand;
    std::optional<std::size_t> levels;
    solve->add_option("--demand", demand, "Minimize relay time subject to this many bits");
    solve->add_option("--levels", levels, "Power levels (default from config)");
    solve->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto problem = schedule_problem(c);
            scheduling::DpOptions dp;
            dp.max_states = c.scheduling.max_states;
            const std::size_t l = levels.value_or(c.scheduling.power_levels);
            const auto s = demand ? scheduling::min_relay_time(problem, *demand, l, dp)
                                  : scheduling::offline_optimal(problem, l, dp);
            const auto check = scheduling::validate_schedule(problem, s);
            const auto path = write_output(g, "schedule.csv", schedule_csv(s));
            std::cout << "delivered " << csv::format(s.delivered_total_bits) << " bits, relay slots " << s.relay_slots
                      << ", energy " << csv::format(s.energy_used_j) << " J"
                      << (check.ok ? "" : " (validator: " + check.reason + ")") << "\n" << path << "\n";
        };
    });
    auto* mdp_cmd = schedule->add_subcommand("mdp", "Optimal transmission policy by policy iteration");
    mdp_cmd->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto policy = scheduling::mdp_policy_iteration(c.scheduling.mdp);
            std::ostringstream out;
            scheduling::write_policy_csv(out, c.scheduling.mdp, policy);
            const auto path = write_output(g, "policy.csv", out.str());
            std::cout << "gain " << csv::format(policy.gain) << " bits/slot after " << policy.iterations
                      << " iterations\n" << path << "\n";
        };
    });
    auto* evaluate = schedule->add_subcommand("evaluate", "Evaluate a threshold policy");
    double theta = 0.0;
    std::optional<std::size_t> horizon;
    std::size_t level = 0;
    evaluate->add_option("--theta", theta, "Battery threshold in joules");
    evaluate->add_option("--level", level, "Fixed power level (default: mean harvest rate)");
    evaluate->add_option("--horizon", horizon, "Monte-Carlo horizon in slots");
    evaluate->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto& m = c.scheduling.mdp;
            const auto policy = scheduling::threshold_policy(m, theta, level);
            const double exact = scheduling::evaluate_policy_exact(m, policy);
            const double mc =
                scheduling::evaluate_policy(m, policy, horizon.value_or(c.scheduling.evaluation_horizon), c.seed);
            std::ostringstream out;
            scheduling::write_policy_csv(out, m, policy);
            const auto path = write_output(g, "threshold_policy.csv", out.str());
            std::cout << "theta " << csv::format(theta) << " J: exact gain " << csv::format(exact)
                      << " bits/slot, Monte-Carlo " << csv::format(mc) << "\n" << path << "\n";
        };
    });

    // collab
    auto* collab = app.add_subcommand("collab", "Two-node collaborative delivery under a deadline");
    std::string trace_path;
    bool no_jt = false;
    std::optional<double> xi;
    collab->add_option("--trace", trace_path, "Arrival trace CSV (slot,arrival_a_j,arrival_b_j,event)");
    collab->add_flag("--no-jt", no_jt, "Forbid joint transmission");
    collab->add_option("--xi", xi, "Frame split (default from config)");
    collab->callback([&] {
        action = [&] {
            const auto c = load(g);
            const auto& co = c.collaboration;
            auto policy = co.policy;
            policy.allow_jt = policy.allow_jt && !no_jt;
            if (xi) {
                policy.xi = *xi;
            }
            collaboration::CollabResult result;
            if (!trace_path.empty()) {
                std::ifstream in(trace_path);
                if (!in) {
                    throw IoError("cannot open " + trace_path);
                }
                const auto trace = collaboration::read_trace_csv(in);
                result = collaboration::collab_schedule_traces(co.nodes, trace.arrivals_j, co.qos, co.link, policy);
            } else {
                result = collaboration::collab_schedule(co.nodes, co.qos, co.link, policy, c.seed);
            }
            std::ostringstream out;
            collaboration::write_frames_csv(out, result);
            const auto path = write_output(g, "collab.csv", out.str());
            std::cout << "delivered " << result.delivered_count << ", violations " << result.violations << "\n"
                      << path << "\n";
        };
    });

    // casestudy
    auto* casestudy = app.add_subcommand("casestudy", "Run the multi-RAT harvesting case study");
    std::string format = "both";
    casestudy->add_option("--format", format, "csv, json or both");
    casestudy->callback([&] {
        action = [&] {
            const auto c = load(g);
            if (format != "csv" && format != "json" && format != "both") {
                throw ConfigError("format", "expected csv, json or both");
            }
            const auto report = scenario::run_case_study(c, g.threads);
            std::vector<std::string> written;
            if (format != "json") {
                for (auto& p : scenario::emit_report(report, scenario::ReportFormat::Csv, g.out_dir)) {
                    written.push_back(p);
                }
            }
            if (format != "csv") {
                for (auto& p : scenario::emit_report(report, scenario::ReportFormat::Json, g.out_dir)) {
                    written.push_back(p);
                }
            }
            std::cout << "rat,peak_power_w,peak_density_w_per_hz,los_exponent,nlos_exponent\n";
            for (const auto& r : report.rats) {
                std::cout << r.name << "," << csv::format(r.los_peak_power_w) << ","
                          << csv::format(r.los_peak_density_w_per_hz) << "," << csv::format(r.los_exponent) << ","
                          << csv::format(r.nlos_exponent) << "\n";
            }
            std::cout << "config " << report.config_hash << ", seed " << report.seed << ", runtime "
                      << csv::format(report.runtime_s) << " s\n";
            for (const auto& p : written) {
                std::cout << p << "\n";
            }
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        action();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << " (max achievable " << csv::format(e.max_achievable()) << ")\n";
        return kInfeasible;
    } catch (const IngestionError& e) {
        std::cerr << "ingestion error: " << e.what() << " at lines";
        for (auto l : e.lines()) {
            std::cerr << " " << l;
        }
        std::cerr << "\n";
        return kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
