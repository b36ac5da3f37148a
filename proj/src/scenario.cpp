#include "rfharvest/scenario.hpp"

#include "rfharvest/csv.hpp"
#include "rfharvest/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace rfharvest::scenario {

using json = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Strict JSON reading with field paths

class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object()) {
            throw ConfigError(path_, "expected an object");
        }
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key)
    {
        used_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    double number(const std::string& key, double fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_number()) {
            throw ConfigError(at(key), "expected a number");
        }
        return v->get<double>();
    }

    /// Number, or null for an unbounded value.
    double bound(const std::string& key, double fallback)
    {
        const json* v = find(key);
        if (v != nullptr && v->is_null()) {
            return kInf;
        }
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_number()) {
            throw ConfigError(at(key), "expected a number or null");
        }
        return v->get<double>();
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_number_unsigned()) {
            throw ConfigError(at(key), "expected a non-negative integer");
        }
        return v->get<std::uint64_t>();
    }

    std::size_t count(const std::string& key, std::size_t fallback)
    {
        return static_cast<std::size_t>(unsigned_integer(key, fallback));
    }

    bool flag(const std::string& key, bool fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_boolean()) {
            throw ConfigError(at(key), "expected true or false");
        }
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_string()) {
            throw ConfigError(at(key), "expected a string");
        }
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        return number_list(*v, at(key));
    }

    std::vector<std::vector<double>> matrix(const std::string& key, const std::vector<std::vector<double>>& fallback)
    {
        const json* v = find(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_array()) {
            throw ConfigError(at(key), "expected an array of arrays");
        }
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            out.push_back(number_list((*v)[i], at(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    static std::vector<double> number_list(const json& v, const std::string& path)
    {
        if (!v.is_array()) {
            throw ConfigError(path, "expected an array of numbers");
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    /// Rejects keys that were never looked up.
    void finish() const
    {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.contains(key)) {
                throw ConfigError(at(key), "unknown key");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename Enum>
Enum choose(const std::string& value, const std::vector<std::pair<std::string, Enum>>& options, const std::string& path)
{
    std::string allowed;
    for (const auto& [name, e] : options) {
        if (name == value) {
            return e;
        }
        allowed += (allowed.empty() ? "" : ", ") + name;
    }
    throw ConfigError(path, "expected one of: " + allowed);
}

template <typename Enum>
std::string name_of(Enum e, const std::vector<std::pair<std::string, Enum>>& options)
{
    for (const auto& [name, v] : options) {
        if (v == e) {
            return name;
        }
    }
    return options.front().first;
}

const std::vector<std::pair<std::string, geometry::BoundaryMode>> kBoundaries{
    {"toroidal", geometry::BoundaryMode::ToroidalWrap}, {"guard_zone", geometry::BoundaryMode::GuardZone}};
const std::vector<std::pair<std::string, harvest::Averaging>> kAveraging{{"log", harvest::Averaging::Log},
                                                                         {"linear", harvest::Averaging::Linear}};
const std::vector<std::pair<std::string, swipt::RelayMode>> kRelayModes{
    {"df", swipt::RelayMode::DecodeForward}, {"af", swipt::RelayMode::AmplifyForward}};
const std::vector<std::pair<std::string, swipt::PsNoiseModel>> kPsNoise{
    {"split_before_noise", swipt::PsNoiseModel::SplitBeforeNoise},
    {"split_after_noise", swipt::PsNoiseModel::SplitAfterNoise}};
const std::vector<std::pair<std::string, collaboration::Preference>> kPreferences{
    {"richer", collaboration::Preference::Richer},
    {"a", collaboration::Preference::A},
    {"b", collaboration::Preference::B}};

json bound_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

json matrix_json(const std::vector<std::vector<double>>& m)
{
    json out = json::array();
    for (const auto& row : m) {
        out.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sub-document conversions

json process_json(const geometry::SpatialProcessSpec& spec)
{
    if (const auto* c = std::get_if<geometry::ClusteredProcess>(&spec)) {
        return json{{"kind", "clustered"},
                    {"parent_density_km2", c->parent_density_km2},
                    {"mean_offspring", c->mean_offspring},
                    {"spread_m", c->spread_m}};
    }
    return json{{"kind", "poisson"}};
}

geometry::SpatialProcessSpec read_process(const json& node, const std::string& path)
{
    Reader r(node, path);
    const std::string kind = r.text("kind", "poisson");
    geometry::SpatialProcessSpec out = geometry::PoissonProcess{};
    if (kind == "clustered") {
        geometry::ClusteredProcess c;
        c.parent_density_km2 = r.number("parent_density_km2", 1.0);
        c.mean_offspring = r.number("mean_offspring", 1.0);
        c.spread_m = r.number("spread_m", 1.0);
        out = c;
    } else if (kind != "poisson") {
        throw ConfigError(r.at("kind"), "expected poisson or clustered");
    }
    r.finish();
    return out;
}

json arrivals_json(const scheduling::EnergyArrivalProcess& process)
{
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, scheduling::BernoulliArrivals>) {
                return json{{"kind", "bernoulli"}, {"p", p.p}, {"energy_j", p.energy_j}};
            } else if constexpr (std::is_same_v<T, scheduling::TriStateArrivals>) {
                return json{{"kind", "tristate"}, {"energy_j", p.energy_j}};
            } else if constexpr (std::is_same_v<T, scheduling::MarkovArrivals>) {
                return json{{"kind", "markov"},
                            {"state_energy_j", p.state_energy_j},
                            {"transition", matrix_json(p.transition)},
                            {"initial_state", p.initial_state}};
            } else {
                return json{{"kind", "deterministic"}, {"trace_j", p.trace_j}};
            }
        },
        process);
}

scheduling::EnergyArrivalProcess read_arrivals(const json& node, const std::string& path)
{
    Reader r(node, path);
    const std::string kind = r.text("kind", "bernoulli");
    scheduling::EnergyArrivalProcess out;
    if (kind == "bernoulli") {
        out = scheduling::BernoulliArrivals{r.number("p", 0.5), r.number("energy_j", 1.0)};
    } else if (kind == "tristate") {
        out = scheduling::TriStateArrivals{r.number("energy_j", 1.0)};
    } else if (kind == "markov") {
        scheduling::MarkovArrivals m;
        m.state_energy_j = r.numbers("state_energy_j", {});
        m.transition = r.matrix("transition", {});
        m.initial_state = r.count("initial_state", 0);
        out = m;
    } else if (kind == "deterministic") {
        out = scheduling::DeterministicArrivals{r.numbers("trace_j", {})};
    } else {
        throw ConfigError(r.at("kind"), "expected bernoulli, tristate, markov or deterministic");
    }
    r.finish();
    try {
        scheduling::validate(out);
    } catch (const InvalidParameter& e) {
        throw ConfigError(path, e.what());
    }
    return out;
}

json rat_json(const harvest::RatProfile& rat)
{
    return json{{"name", rat.name},
                {"bandwidth_hz", rat.bandwidth_hz},
                {"transmit_power_w", rat.transmit_power_w},
                {"density_min_km2", rat.density.min_km2},
                {"density_max_km2", rat.density.max_km2},
                {"carrier_frequency_hz", rat.carrier_frequency_hz},
                {"transmit_gain_db", rat.transmit_gain_db},
                {"process", process_json(rat.process)}};
}

harvest::RatProfile read_rat(const json& node, const std::string& path)
{
    Reader r(node, path);
    harvest::RatProfile rat;
    rat.name = r.text("name", "");
    rat.bandwidth_hz = r.number("bandwidth_hz", 0.0);
    rat.transmit_power_w = r.number("transmit_power_w", 0.0);
    rat.density.min_km2 = r.number("density_min_km2", 0.0);
    rat.density.max_km2 = r.number("density_max_km2", 0.0);
    rat.carrier_frequency_hz = r.number("carrier_frequency_hz", 0.0);
    rat.transmit_gain_db = r.number("transmit_gain_db", 0.0);
    if (const json* p = r.find("process")) {
        rat.process = read_process(*p, r.at("process"));
    }
    r.finish();
    return rat;
}

json mdp_json(const scheduling::MdpModel& m)
{
    return json{{"energy_state_j", m.energy_state_j},
                {"energy_transition", matrix_json(m.energy_transition)},
                {"channel_gain", m.channel_gain},
                {"channel_transition", matrix_json(m.channel_transition)},
                {"battery_capacity_j", m.battery_capacity_j},
                {"battery_buckets", m.battery_buckets},
                {"power_levels", m.power_levels},
                {"slot_duration_s", m.slot_duration_s},
                {"noise_power_w", m.noise_power_w}};
}

scheduling::MdpModel read_mdp(const json& node, const std::string& path)
{
    Reader r(node, path);
    scheduling::MdpModel m = scheduling::default_desk_model();
    m.energy_state_j = r.numbers("energy_state_j", m.energy_state_j);
    m.energy_transition = r.matrix("energy_transition", m.energy_transition);
    m.channel_gain = r.numbers("channel_gain", m.channel_gain);
    m.channel_transition = r.matrix("channel_transition", m.channel_transition);
    m.battery_capacity_j = r.number("battery_capacity_j", m.battery_capacity_j);
    m.battery_buckets = r.count("battery_buckets", m.battery_buckets);
    m.power_levels = r.count("power_levels", m.power_levels);
    m.slot_duration_s = r.number("slot_duration_s", m.slot_duration_s);
    m.noise_power_w = r.number("noise_power_w", m.noise_power_w);
    r.finish();
    return m;
}

json node_json(const collaboration::NodeState& n)
{
    return json{{"battery_j", n.battery_j},
                {"capacity_j", n.capacity_j},
                {"channel_gain", n.channel_gain},
                {"arrivals", arrivals_json(n.arrivals)}};
}

collaboration::NodeState read_node(const json& node, const std::string& path, collaboration::NodeState n)
{
    Reader r(node, path);
    n.battery_j = r.number("battery_j", n.battery_j);
    n.capacity_j = r.number("capacity_j", n.capacity_j);
    n.channel_gain = r.number("channel_gain", n.channel_gain);
    if (const json* a = r.find("arrivals")) {
        n.arrivals = read_arrivals(*a, r.at("arrivals"));
    }
    r.finish();
    return n;
}

template <typename F>
void check(const std::string& path, F&& f)
{
    try {
        f();
    } catch (const InvalidParameter& e) {
        throw ConfigError(path, e.what());
    }
}

void require(bool ok, const std::string& path, const std::string& what)
{
    if (!ok) {
        throw ConfigError(path, what);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

geometry::Region RegionConfig::build() const
{
    return boundary == geometry::BoundaryMode::ToroidalWrap ? geometry::Region::toroidal(width_m, height_m)
                                                            : geometry::Region::guard_zone(width_m, height_m,
                                                                                           guard_margin_m);
}

propagation::PathlossModel PathlossConfig::los(double frequency_hz) const
{
    return propagation::free_space(frequency_hz, los_exponent, los_reference_distance_m);
}

propagation::PathlossModel PathlossConfig::nlos_model(double frequency_hz) const
{
    return propagation::winner_style(nlos, frequency_hz);
}

const harvest::RatProfile& ScenarioConfig::rat(const std::string& rat_name) const
{
    for (const auto& r : rats) {
        if (r.name == rat_name) {
            return r;
        }
    }
    throw ConfigError("rats", "no RAT named '" + rat_name + "'");
}

void ScenarioConfig::validate() const
{
    require(trials >= 1, "trials", "at least one trial is required");
    check("region", [&] { region.build(); });
    require(harvester.efficiency > 0.0 && harvester.efficiency <= 1.0, "harvester.efficiency",
            "must lie in (0, 1]");
    require(harvester.sweep_points >= 2, "harvester.sweep_points", "at least two points are required");
    check("pathloss.los", [&] { pathloss.los(1e9).validate(); });
    check("pathloss.nlos", [&] { pathloss.nlos_model(5e9).validate(); });
    require(pathloss.nlos_shadowing.sigma_db >= 0.0, "pathloss.nlos.shadowing_sigma_db", "must be non-negative");
    require(!rats.empty(), "rats", "at least one RAT is required");
    std::set<std::string> names;
    for (std::size_t i = 0; i < rats.size(); ++i) {
        const std::string path = "rats[" + std::to_string(i) + "]";
        require(!rats[i].name.empty(), path + ".name", "must not be empty");
        require(names.insert(rats[i].name).second, path + ".name", "duplicate RAT name");
        check(path, [&] { rats[i].validate(); });
    }

    check("swipt", [&] { swipt.link.validate(); });
    require(swipt.relay.efficiency > 0.0 && swipt.relay.efficiency <= 1.0, "swipt.efficiency", "must lie in (0, 1]");
    require(swipt.relay.frame_duration_s > 0.0, "swipt.frame_duration_s", "must be positive");
    require(swipt.split.alpha1 >= 0.0 && swipt.split.alpha2 >= 0.0, "swipt.alpha1", "must be non-negative");
    require(swipt.split.alpha1 + swipt.split.alpha2 <= 1.0, "swipt.alpha1", "alpha1 + alpha2 must not exceed 1");
    require(swipt.split.rho1 >= 0.0 && swipt.split.rho2 >= 0.0, "swipt.rho1", "must be non-negative");
    require(swipt.split.rho1 + swipt.split.rho2 <= 1.0, "swipt.rho1", "rho1 + rho2 must not exceed 1");
    require(swipt.range.reference_distance_m > 0.0, "swipt.range.reference_distance_m", "must be positive");
    require(swipt.range.fading_draws >= 1, "swipt.range.fading_draws", "must be at least 1");
    for (double d : swipt.range.distances_m) {
        require(d > 0.0, "swipt.range.distances_m", "distances must be positive");
    }

    const auto& s = scheduling;
    require(s.slots >= 1, "scheduling.slots", "at least one slot is required");
    require(s.power_levels >= 2, "scheduling.power_levels", "at least two power levels are required");
    require(s.slot_duration_s > 0.0, "scheduling.slot_duration_s", "must be positive");
    require(s.noise_power_w > 0.0, "scheduling.noise_power_w", "must be positive");
    require(s.h >= 0.0 && s.g >= 0.0, "scheduling.h", "gains must be non-negative");
    require(s.battery_capacity_source_j > 0.0, "scheduling.battery_capacity_source_j", "must be positive");
    require(s.battery_capacity_relay_j > 0.0, "scheduling.battery_capacity_relay_j", "must be positive");
    require(s.rx_energy_cost_j >= 0.0, "scheduling.rx_energy_cost_j", "must be non-negative");
    check("scheduling.source_arrivals", [&] { scheduling::validate(s.source_arrivals); });
    check("scheduling.relay_arrivals", [&] { scheduling::validate(s.relay_arrivals); });
    check("scheduling.mdp", [&] { s.mdp.validate(); });
    require(s.theta_points >= 1, "scheduling.theta_points", "must be at least 1");
    require(s.evaluation_horizon >= 1, "scheduling.evaluation_horizon", "must be at least 1");

    const auto& c = collaboration;
    for (std::size_t i = 0; i < 2; ++i) {
        check("collaboration.nodes[" + std::to_string(i) + "]", [&] { c.nodes[i].validate(); });
    }
    check("collaboration.max_inter_delivery", [&] { c.qos.validate(); });
    check("collaboration", [&] { c.link.validate(); });
    check("collaboration.xi", [&] { c.policy.validate(); });
    require(!c.xi_grid.empty(), "collaboration.xi_grid", "must not be empty");
    for (double xi : c.xi_grid) {
        require(xi >= 0.0 && xi <= 1.0, "collaboration.xi_grid", "values must lie in [0, 1]");
    }
}

ScenarioConfig default_config()
{
    ScenarioConfig c;
    harvest::RatProfile macro;
    macro.name = "macro";
    macro.bandwidth_hz = 20e6;
    macro.transmit_power_w = 40.0;
    macro.density = {0.3, 5.0};
    macro.carrier_frequency_hz = 2.1e9;

    harvest::RatProfile femto;
    femto.name = "femto";
    femto.bandwidth_hz = 20e6;
    femto.transmit_power_w = 1.0;
    femto.density = {15.0, 200.0};
    femto.carrier_frequency_hz = 2.1e9;
    // Small cells gather around hotspots: about 10 per cluster within ~50 m.
    femto.process = geometry::ClusteredProcess{1.5, 10.0, 50.0};

    harvest::RatProfile wifi;
    wifi.name = "wifi";
    wifi.bandwidth_hz = 60e6;
    wifi.transmit_power_w = 0.1;
    wifi.density = {50.0, 1000.0};
    wifi.carrier_frequency_hz = 2.4e9;

    harvest::RatProfile tv;
    tv.name = "tv";
    tv.bandwidth_hz = 100e6;
    tv.transmit_power_w = 1e6;
    tv.density = {0.01, 0.2};
    tv.carrier_frequency_hz = 600e6;
    // Elevated broadcast antennas radiate little toward street level.
    tv.transmit_gain_db = -10.0;

    c.rats = {macro, femto, wifi, tv};
    return c;
}

std::string dump_config(const ScenarioConfig& c)
{
    json rats = json::array();
    for (const auto& r : c.rats) {
        rats.push_back(rat_json(r));
    }
    const auto& s = c.swipt;
    const auto& sc = c.scheduling;
    const auto& co = c.collaboration;
    json doc{
        {"name", c.name},
        {"seed", c.seed},
        {"trials", c.trials},
        {"region",
         {{"width_m", c.region.width_m},
          {"height_m", c.region.height_m},
          {"boundary", name_of(c.region.boundary, kBoundaries)},
          {"guard_margin_m", c.region.guard_margin_m}}},
        {"harvester",
         {{"efficiency", c.harvester.efficiency},
          {"averaging", name_of(c.harvester.averaging, kAveraging)},
          {"sweep_points", c.harvester.sweep_points},
          {"apply_sensitivity", c.harvester.apply_sensitivity},
          {"sensitivity_dbm", c.harvester.sensitivity_dbm}}},
        {"pathloss",
         {{"los", {{"exponent", c.pathloss.los_exponent}, {"reference_distance_m", c.pathloss.los_reference_distance_m}}},
          {"nlos",
           {{"a_db_per_decade", c.pathloss.nlos.a_db_per_decade},
            {"b_db", c.pathloss.nlos.b_db},
            {"c_db", c.pathloss.nlos.c_db},
            {"shadowing", c.pathloss.nlos_shadowing.enabled},
            {"shadowing_sigma_db", c.pathloss.nlos_shadowing.sigma_db}}}}},
        {"rats", rats},
        {"swipt",
         {{"h", s.link.h},
          {"g", s.link.g},
          {"noise_power_w", s.link.noise_power_w},
          {"source_power_w", s.link.source_power_w},
          {"ambient_power_at_relay_w", s.link.ambient_power_at_relay_w},
          {"ambient_power_at_source_w", s.link.ambient_power_at_source_w},
          {"efficiency", s.relay.efficiency},
          {"mode", name_of(s.relay.mode, kRelayModes)},
          {"ps_noise", name_of(s.relay.ps_noise, kPsNoise)},
          {"frame_duration_s", s.relay.frame_duration_s},
          {"alpha1", s.split.alpha1},
          {"alpha2", s.split.alpha2},
          {"rho1", s.split.rho1},
          {"rho2", s.split.rho2},
          {"range",
           {{"reference_distance_m", s.range.reference_distance_m},
            {"pathloss_exponent", s.range.pathloss_exponent},
            {"distances_m", s.range.distances_m},
            {"target_throughput", s.range.target_throughput},
            {"fading_draws", s.range.fading_draws}}}}},
        {"scheduling",
         {{"slots", sc.slots},
          {"power_levels", sc.power_levels},
          {"slot_duration_s", sc.slot_duration_s},
          {"noise_power_w", sc.noise_power_w},
          {"h", sc.h},
          {"g", sc.g},
          {"source_arrivals", arrivals_json(sc.source_arrivals)},
          {"relay_arrivals", arrivals_json(sc.relay_arrivals)},
          {"battery_capacity_source_j", bound_json(sc.battery_capacity_source_j)},
          {"battery_capacity_relay_j", bound_json(sc.battery_capacity_relay_j)},
          {"rx_energy_cost_j", sc.rx_energy_cost_j},
          {"delay_constrained", sc.delay_constrained},
          {"max_states", sc.max_states},
          {"mdp", mdp_json(sc.mdp)},
          {"theta_points", sc.theta_points},
          {"evaluation_horizon", sc.evaluation_horizon}}},
        {"collaboration",
         {{"nodes", json::array({node_json(co.nodes[0]), node_json(co.nodes[1])})},
          {"max_inter_delivery", co.qos.max_inter_delivery},
          {"horizon", co.qos.horizon},
          {"frame_duration_s", co.link.frame_duration_s},
          {"packet_bits", co.link.packet_bits},
          {"noise_power_w", co.link.noise_power_w},
          {"max_power_w", bound_json(co.link.max_power_w)},
          {"amplitude_efficiency", co.link.amplitude_efficiency},
          {"xi", co.policy.xi},
          {"allow_jt", co.policy.allow_jt},
          {"prefer", name_of(co.policy.prefer, kPreferences)},
          {"overflow_fraction", co.policy.overflow_fraction},
          {"xi_grid", co.xi_grid}}},
    };
    return doc.dump(2) + "\n";
}

ScenarioConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("parse error: ") + e.what());
    }
    ScenarioConfig c = default_config();
    Reader root(doc, "");
    c.name = root.text("name", c.name);
    require(root.has("seed"), "seed", "an explicit seed is required");
    c.seed = root.unsigned_integer("seed", c.seed);
    c.trials = root.count("trials", c.trials);

    if (const json* n = root.find("region")) {
        Reader r(*n, "region");
        c.region.width_m = r.number("width_m", c.region.width_m);
        c.region.height_m = r.number("height_m", c.region.height_m);
        c.region.boundary = choose(r.text("boundary", name_of(c.region.boundary, kBoundaries)), kBoundaries,
                                   r.at("boundary"));
        c.region.guard_margin_m = r.number("guard_margin_m", c.region.guard_margin_m);
        r.finish();
    }
    if (const json* n = root.find("harvester")) {
        Reader r(*n, "harvester");
        c.harvester.efficiency = r.number("efficiency", c.harvester.efficiency);
        c.harvester.averaging = choose(r.text("averaging", name_of(c.harvester.averaging, kAveraging)), kAveraging,
                                       r.at("averaging"));
        c.harvester.sweep_points = r.count("sweep_points", c.harvester.sweep_points);
        c.harvester.apply_sensitivity = r.flag("apply_sensitivity", c.harvester.apply_sensitivity);
        c.harvester.sensitivity_dbm = r.number("sensitivity_dbm", c.harvester.sensitivity_dbm);
        r.finish();
    }
    if (const json* n = root.find("pathloss")) {
        Reader r(*n, "pathloss");
        if (const json* los = r.find("los")) {
            Reader l(*los, "pathloss.los");
            c.pathloss.los_exponent = l.number("exponent", c.pathloss.los_exponent);
            c.pathloss.los_reference_distance_m = l.number("reference_distance_m", c.pathloss.los_reference_distance_m);
            l.finish();
        }
        if (const json* nlos = r.find("nlos")) {
            Reader l(*nlos, "pathloss.nlos");
            c.pathloss.nlos.a_db_per_decade = l.number("a_db_per_decade", c.pathloss.nlos.a_db_per_decade);
            c.pathloss.nlos.b_db = l.number("b_db", c.pathloss.nlos.b_db);
            c.pathloss.nlos.c_db = l.number("c_db", c.pathloss.nlos.c_db);
            c.pathloss.nlos_shadowing.enabled = l.flag("shadowing", c.pathloss.nlos_shadowing.enabled);
            c.pathloss.nlos_shadowing.sigma_db = l.number("shadowing_sigma_db", c.pathloss.nlos_shadowing.sigma_db);
            l.finish();
        }
        r.finish();
    }
    if (const json* n = root.find("rats")) {
        if (!n->is_array()) {
            throw ConfigError("rats", "expected an array");
        }
        c.rats.clear();
        for (std::size_t i = 0; i < n->size(); ++i) {
            c.rats.push_back(read_rat((*n)[i], "rats[" + std::to_string(i) + "]"));
        }
    }
    if (const json* n = root.find("swipt")) {
        Reader r(*n, "swipt");
        auto& s = c.swipt;
        s.link.h = r.number("h", s.link.h);
        s.link.g = r.number("g", s.link.g);
        s.link.noise_power_w = r.number("noise_power_w", s.link.noise_power_w);
        s.link.source_power_w = r.number("source_power_w", s.link.source_power_w);
        s.link.ambient_power_at_relay_w = r.number("ambient_power_at_relay_w", s.link.ambient_power_at_relay_w);
        s.link.ambient_power_at_source_w = r.number("ambient_power_at_source_w", s.link.ambient_power_at_source_w);
        s.relay.efficiency = r.number("efficiency", s.relay.efficiency);
        s.relay.mode = choose(r.text("mode", name_of(s.relay.mode, kRelayModes)), kRelayModes, r.at("mode"));
        s.relay.ps_noise = choose(r.text("ps_noise", name_of(s.relay.ps_noise, kPsNoise)), kPsNoise, r.at("ps_noise"));
        s.relay.frame_duration_s = r.number("frame_duration_s", s.relay.frame_duration_s);
        s.split.frame_duration_s = s.relay.frame_duration_s;
        s.split.alpha1 = r.number("alpha1", s.split.alpha1);
        s.split.alpha2 = r.number("alpha2", s.split.alpha2);
        s.split.rho1 = r.number("rho1", s.split.rho1);
        s.split.rho2 = r.number("rho2", s.split.rho2);
        if (const json* rg = r.find("range")) {
            Reader q(*rg, "swipt.range");
            s.range.reference_distance_m = q.number("reference_distance_m", s.range.reference_distance_m);
            s.range.pathloss_exponent = q.number("pathloss_exponent", s.range.pathloss_exponent);
            s.range.distances_m = q.numbers("distances_m", s.range.distances_m);
            s.range.target_throughput = q.number("target_throughput", s.range.target_throughput);
            s.range.fading_draws = q.count("fading_draws", s.range.fading_draws);
            q.finish();
        }
        r.finish();
    }
    if (const json* n = root.find("scheduling")) {
        Reader r(*n, "scheduling");
        auto& s = c.scheduling;
        s.slots = r.count("slots", s.slots);
        s.power_levels = r.count("power_levels", s.power_levels);
        s.slot_duration_s = r.number("slot_duration_s", s.slot_duration_s);
        s.noise_power_w = r.number("noise_power_w", s.noise_power_w);
        s.h = r.number("h", s.h);
        s.g = r.number("g", s.g);
        if (const json* a = r.find("source_arrivals")) {
            s.source_arrivals = read_arrivals(*a, "scheduling.source_arrivals");
        }
        if (const json* a = r.find("relay_arrivals")) {
            s.relay_arrivals = read_arrivals(*a, "scheduling.relay_arrivals");
        }
        s.battery_capacity_source_j = r.bound("battery_capacity_source_j", s.battery_capacity_source_j);
        s.battery_capacity_relay_j = r.bound("battery_capacity_relay_j", s.battery_capacity_relay_j);
        s.rx_energy_cost_j = r.number("rx_energy_cost_j", s.rx_energy_cost_j);
        s.delay_constrained = r.flag("delay_constrained", s.delay_constrained);
        s.max_states = r.count("max_states", s.max_states);
        if (const json* m = r.find("mdp")) {
            s.mdp = read_mdp(*m, "scheduling.mdp");
        }
        s.theta_points = r.count("theta_points", s.theta_points);
        s.evaluation_horizon = r.count("evaluation_horizon", s.evaluation_horizon);
        r.finish();
    }
    if (const json* n = root.find("collaboration")) {
        Reader r(*n, "collaboration");
        auto& co = c.collaboration;
        if (const json* nodes = r.find("nodes")) {
            if (!nodes->is_array() || nodes->size() != 2) {
                throw ConfigError("collaboration.nodes", "expected exactly two nodes");
            }
            for (std::size_t i = 0; i < 2; ++i) {
                co.nodes[i] = read_node((*nodes)[i], "collaboration.nodes[" + std::to_string(i) + "]", co.nodes[i]);
            }
        }
        co.qos.max_inter_delivery = r.count("max_inter_delivery", co.qos.max_inter_delivery);
        co.qos.horizon = r.count("horizon", co.qos.horizon);
        co.link.frame_duration_s = r.number("frame_duration_s", co.link.frame_duration_s);
        co.link.packet_bits = r.number("packet_bits", co.link.packet_bits);
        co.link.noise_power_w = r.number("noise_power_w", co.link.noise_power_w);
        co.link.max_power_w = r.bound("max_power_w", co.link.max_power_w);
        co.link.amplitude_efficiency = r.number("amplitude_efficiency", co.link.amplitude_efficiency);
        co.policy.xi = r.number("xi", co.policy.xi);
        co.policy.allow_jt = r.flag("allow_jt", co.policy.allow_jt);
        co.policy.prefer = choose(r.text("prefer", name_of(co.policy.prefer, kPreferences)), kPreferences,
                                  r.at("prefer"));
        co.policy.overflow_fraction = r.number("overflow_fraction", co.policy.overflow_fraction);
        co.xi_grid = r.numbers("xi_grid", co.xi_grid);
        r.finish();
    }
    root.finish();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", "cannot open config file " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void save_config(const ScenarioConfig& config, const std::string& path)
{
    config.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    out << dump_config(config);
    if (!out) {
        throw IoError("failed writing " + path);
    }
}

std::string config_hash(const ScenarioConfig& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

// ---------------------------------------------------------------------------
// Location ingestion

IngestResult ingest_locations(std::istream& in, const geometry::Region& region)
{
    csv::Table table;
    try {
        table = csv::read(in);
    } catch (const Error& e) {
        throw IngestionError(e.what(), {1});
    }
    if (table.header != std::vector<std::string>{"x_m", "y_m"}) {
        throw IngestionError("expected header x_m,y_m", {1});
    }
    IngestResult out;
    out.deployment.region = region;
    std::vector<std::size_t> malformed;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        geometry::Point p;
        if (row.size() != 2 || !csv::parse_double(row[0], p.x) || !csv::parse_double(row[1], p.y)
            || !std::isfinite(p.x) || !std::isfinite(p.y)) {
            malformed.push_back(table.line_numbers[r]);
            continue;
        }
        if (!region.contains(p)) {
            out.rejected_lines.push_back(table.line_numbers[r]);
            continue;
        }
        out.deployment.points.push_back(p);
    }
    if (!malformed.empty()) {
        throw IngestionError("malformed location rows", std::move(malformed));
    }
    out.deployment.density_km2 = static_cast<double>(out.deployment.points.size()) / region.area_km2();
    return out;
}

IngestResult ingest_locations_csv(const std::string& path, const ScenarioConfig& config, const std::string& rat_name)
{
    (void)config.rat(rat_name);
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return ingest_locations(in, config.region.build());
}

// ---------------------------------------------------------------------------
// Case study

namespace {

harvest::SweepOptions sweep_options(const ScenarioConfig& config, std::uint64_t seed, unsigned threads, bool nlos)
{
    harvest::SweepOptions o;
    o.trials = config.trials;
    o.seed = seed;
    o.shadowing = nlos ? config.pathloss.nlos_shadowing : propagation::ShadowingSpec{};
    o.averaging = config.harvester.averaging;
    o.efficiency = config.harvester.efficiency;
    o.threads = threads;
    o.harvest.apply_sensitivity = config.harvester.apply_sensitivity;
    o.harvest.sensitivity_dbm = config.harvester.sensitivity_dbm;
    return o;
}

double fitted_exponent(const std::vector<harvest::SweepPoint>& curve)
{
    try {
        return harvest::scaling_exponent(curve);
    } catch (const FitFailure&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void peak(const std::vector<harvest::SweepPoint>& curve, double& power, double& density)
{
    power = 0.0;
    density = 0.0;
    for (const auto& p : curve) {
        power = std::max(power, p.mean_power_w);
        density = std::max(density, p.mean_density_w_per_hz);
    }
}

}  // namespace

CaseStudyReport run_case_study(const ScenarioConfig& config, unsigned threads)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    CaseStudyReport report;
    report.config_name = config.name;
    report.config_hash = config_hash(config);
    report.seed = config.seed;
    report.trials = config.trials;
    const auto region = config.region.build();
    for (std::size_t i = 0; i < config.rats.size(); ++i) {
        const auto& rat = config.rats[i];
        const auto grid = harvest::log_spaced(rat.density.min_km2, rat.density.max_km2, config.harvester.sweep_points);
        RatResult r;
        r.name = rat.name;
        r.los_curve = harvest::upper_bound_sweep(rat, grid, config.pathloss.los(rat.carrier_frequency_hz), region,
                                                 sweep_options(config, derive_seed(config.seed, i, 0), threads, false));
        r.nlos_curve =
            harvest::upper_bound_sweep(rat, grid, config.pathloss.nlos_model(rat.carrier_frequency_hz), region,
                                       sweep_options(config, derive_seed(config.seed, i, 1), threads, true));
        peak(r.los_curve, r.los_peak_power_w, r.los_peak_density_w_per_hz);
        peak(r.nlos_curve, r.nlos_peak_power_w, r.nlos_peak_density_w_per_hz);
        r.los_exponent = fitted_exponent(r.los_curve);
        r.nlos_exponent = fitted_exponent(r.nlos_curve);
        report.rats.push_back(std::move(r));
    }
    report.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

namespace {

std::string number_text(double v) { return std::isfinite(v) ? csv::format(v) : "nan"; }

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json curve_json(const std::vector<harvest::SweepPoint>& curve)
{
    json out = json::array();
    for (const auto& p : curve) {
        out.push_back({{"lambda_per_km2", p.density_km2},
                       {"mean_power_w", p.mean_power_w},
                       {"mean_density_w_per_hz", p.mean_density_w_per_hz},
                       {"stddev_w", p.stddev_w},
                       {"linear_mean_w", p.linear_mean_w},
                       {"mean_nearest_fraction", p.mean_nearest_fraction},
                       {"empty_fraction", p.empty_fraction}});
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> render_report(const CaseStudyReport& report, ReportFormat format)
{
    std::map<std::string, std::string> files;
    if (format == ReportFormat::Json) {
        json rats = json::array();
        for (const auto& r : report.rats) {
            rats.push_back({{"name", r.name},
                            {"peak_power_w", r.los_peak_power_w},
                            {"peak_density_w_per_hz", r.los_peak_density_w_per_hz},
                            {"los", {{"exponent", number_json(r.los_exponent)}, {"curve", curve_json(r.los_curve)}}},
                            {"nlos",
                             {{"peak_power_w", r.nlos_peak_power_w},
                              {"peak_density_w_per_hz", r.nlos_peak_density_w_per_hz},
                              {"exponent", number_json(r.nlos_exponent)},
                              {"curve", curve_json(r.nlos_curve)}}}});
        }
        const json doc{{"config", report.config_name},
                       {"config_hash", report.config_hash},
                       {"seed", report.seed},
                       {"trials", report.trials},
                       {"rats", rats}};
        files["report.json"] = doc.dump(2) + "\n";
        return files;
    }

    std::ostringstream table;
    csv::write_row(table, {"rat", "peak_power_w", "peak_density_w_per_hz"});
    std::ostringstream sweeps;
    csv::write_row(sweeps, {"rat", "model", "lambda_per_km2", "mean_power_w", "mean_density_w_per_hz", "stddev_w"});
    std::ostringstream exponents;
    csv::write_row(exponents, {"rat", "model", "exponent"});
    for (const auto& r : report.rats) {
        csv::write_row(table, {r.name, csv::format(r.los_peak_power_w), csv::format(r.los_peak_density_w_per_hz)});
        for (const auto& [model, curve] : {std::pair{"los", &r.los_curve}, std::pair{"nlos", &r.nlos_curve}}) {
            for (const auto& p : *curve) {
                csv::write_row(sweeps, {r.name, model, csv::format(p.density_km2), csv::format(p.mean_power_w),
                                        csv::format(p.mean_density_w_per_hz), csv::format(p.stddev_w)});
            }
        }
        csv::write_row(exponents, {r.name, "los", number_text(r.los_exponent)});
        csv::write_row(exponents, {r.name, "nlos", number_text(r.nlos_exponent)});
    }
    std::ostringstream meta;
    csv::write_row(meta, {"key", "value"});
    csv::write_row(meta, {"config", report.config_name});
    csv::write_row(meta, {"config_hash", report.config_hash});
    csv::write_row(meta, {"seed", std::to_string(report.seed)});
    csv::write_row(meta, {"trials", std::to_string(report.trials)});
    files["table1.csv"] = table.str();
    files["sweeps.csv"] = sweeps.str();
    files["exponents.csv"] = exponents.str();
    files["metadata.csv"] = meta.str();
    return files;
}

std::vector<std::string> emit_report(const CaseStudyReport& report, ReportFormat format, const std::string& directory)
{
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) {
        throw IoError("cannot create " + directory + ": " + ec.message());
    }
    std::vector<std::string> written;
    for (const auto& [name, contents] : render_report(report, format)) {
        const auto path = (std::filesystem::path(directory) / name).string();
        std::ofstream out(path, std::ios::binary);
        out << contents;
        if (!out) {
            throw IoError("failed writing " + path);
        }
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepTarget parse_sweep_target(const std::string& name)
{
    static const std::vector<std::pair<std::string, SweepTarget>> targets{
        {"harvest", SweepTarget::Harvest},
        {"swipt_split", SweepTarget::SwiptSplit},
        {"schedule_theta", SweepTarget::ScheduleTheta},
        {"collab_xi", SweepTarget::CollabXi}};
    for (const auto& [n, t] : targets) {
        if (n == name) {
            return t;
        }
    }
    throw ConfigError("target", "unknown sweep target '" + name + "'");
}

SweepOutput run_sweep(const ScenarioConfig& config, const SweepRequest& request)
{
    config.validate();
    SweepOutput out;
    std::ostringstream csv_out;
    std::ostringstream summary;
    switch (request.target) {
    case SweepTarget::Harvest: {
        const auto& rat = request.rat.empty() ? config.rats.front() : config.rat(request.rat);
        if (request.model != "los" && request.model != "nlos") {
            throw InvalidParameter("model must be los or nlos");
        }
        const bool nlos = request.model == "nlos";
        const auto grid = request.grid.empty()
            ? harvest::log_spaced(rat.density.min_km2, rat.density.max_km2, config.harvester.sweep_points)
            : request.grid;
        const auto model = nlos ? config.pathloss.nlos_model(rat.carrier_frequency_hz)
                                : config.pathloss.los(rat.carrier_frequency_hz);
        const auto curve = harvest::upper_bound_sweep(rat, grid, model, config.region.build(),
                                                      sweep_options(config, config.seed, request.threads, nlos));
        csv::write_row(csv_out, {"lambda_per_km2", "mean_power_w", "mean_density_w_per_hz", "stddev_w"});
        for (const auto& p : curve) {
            csv::write_row(csv_out, {csv::format(p.density_km2), csv::format(p.mean_power_w),
                                     csv::format(p.mean_density_w_per_hz), csv::format(p.stddev_w)});
        }
        summary << rat.name << " " << request.model << ": " << curve.size() << " points, peak "
                << csv::format(curve.back().mean_power_w) << " W";
        const double slope = fitted_exponent(curve);
        if (std::isfinite(slope)) {
            summary << ", exponent " << csv::format(slope);
        }
        break;
    }
    case SweepTarget::SwiptSplit: {
        if (request.protocol != "ts" && request.protocol != "ps") {
            throw InvalidParameter("protocol must be ts or ps");
        }
        const bool ts = request.protocol == "ts";
        std::vector<double> grid = request.grid;
        if (grid.empty()) {
            for (int i = 0; i <= 20; ++i) {
                grid.push_back(i / 20.0);
            }
        }
        csv::write_row(csv_out, {"split", "throughput_bps_hz"});
        double best_split = grid.front();
        double best = -1.0;
        for (double x : grid) {
            const double v = ts ? swipt::ts_throughput(x, config.swipt.link, config.swipt.relay)
                                : swipt::ps_throughput(x, config.swipt.link, config.swipt.relay);
            csv::write_row(csv_out, {csv::format(x), csv::format(v)});
            if (v > best) {
                best = v;
                best_split = x;
            }
        }
        summary << request.protocol << ": best split " << csv::format(best_split) << ", throughput "
                << csv::format(best) << " bit/s/Hz";
        break;
    }
    case SweepTarget::ScheduleTheta: {
        const auto& mdp = config.scheduling.mdp;
        std::vector<double> grid = request.grid;
        if (grid.empty()) {
            const std::size_t n = config.scheduling.theta_points;
            for (std::size_t i = 0; i < n; ++i) {
                grid.push_back(n == 1 ? 0.0 : mdp.battery_capacity_j * static_cast<double>(i) / static_cast<double>(n - 1));
            }
        }
        const auto optimal = scheduling::mdp_policy_iteration(mdp);
        csv::write_row(csv_out, {"theta_j", "gain_bits_per_slot"});
        double best = 0.0;
        for (double theta : grid) {
            const double v = scheduling::evaluate_policy_exact(mdp, scheduling::threshold_policy(mdp, theta));
            csv::write_row(csv_out, {csv::format(theta), csv::format(v)});
            best = std::max(best, v);
        }
        summary << "MDP gain " << csv::format(optimal.gain) << " bits/slot, best threshold gain " << csv::format(best)
                << " (ratio " << csv::format(optimal.gain > 0.0 ? best / optimal.gain : 0.0) << ")";
        break;
    }
    case SweepTarget::CollabXi: {
        const auto& co = config.collaboration;
        const auto grid = request.grid.empty() ? co.xi_grid : request.grid;
        const auto choice = collaboration::optimize_frame_split(co.nodes, co.qos, co.link, co.policy, grid,
                                                                config.seed, -1.0, request.threads);
        std::vector<double> sorted = grid;
        std::sort(sorted.begin(), sorted.end());
        csv::write_row(csv_out, {"xi", "objective"});
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            csv::write_row(csv_out, {csv::format(sorted[i]), csv::format(choice.objective_per_xi[i])});
        }
        summary << "best xi " << csv::format(choice.xi) << ", objective " << csv::format(choice.objective);
        break;
    }
    }
    out.csv = csv_out.str();
    out.summary = summary.str();
    return out;
}

}  // namespace rfharvest::scenario
