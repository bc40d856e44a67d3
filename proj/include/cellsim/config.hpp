#pragma once

// Scenario configuration: JSON with sections radio / topology / mobility /
// learner / engine. Every key is optional; unknown keys are rejected with
// their full path.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cellsim/agent.hpp"
#include "cellsim/core.hpp"
#include "cellsim/mobility.hpp"
#include "cellsim/radio.hpp"
#include "cellsim/signaling.hpp"
#include "cellsim/topology.hpp"

namespace cellsim {

using json = nlohmann::json;

enum class PolicyKind { clb, dlb, max_sinr, wcs };

inline const char* to_string(PolicyKind p)
{
    switch (p) {
    case PolicyKind::clb: return "clb";
    case PolicyKind::dlb: return "dlb";
    case PolicyKind::max_sinr: return "maxsinr";
    case PolicyKind::wcs: return "wcs";
    }
    return "?";
}

inline std::optional<PolicyKind> parse_policy(const std::string& s)
{
    if (s == "clb") return PolicyKind::clb;
    if (s == "dlb") return PolicyKind::dlb;
    if (s == "maxsinr") return PolicyKind::max_sinr;
    if (s == "wcs") return PolicyKind::wcs;
    return std::nullopt;
}

/// When the serving association follows the learner: once per measurement
/// block (best-to-date) or after every learning step.
enum class TargetUpdate { per_block, per_step };

struct EngineParams {
    PolicyKind policy = PolicyKind::clb;
    std::uint64_t seed = 1;
    std::size_t steps = 500;         // learning steps
    std::size_t steps_per_block = 6; // T
    std::size_t moving_steps = 0;    // > 0 ends a mobile run after this many moving steps
    TargetUpdate target_update = TargetUpdate::per_block;
    std::size_t wcs_rounds = 3;      // rate-table refreshes per start for the wcs baseline
    std::size_t wcs_restarts = 4;    // extra random starts per block for the wcs baseline
    std::size_t convergence_window = 20;
    double convergence_tolerance = 0.01;
    BitWidths bits;
    bool dump_q = false;

    void validate() const
    {
        if (steps < 1)
            throw ConfigError("engine.steps must be >= 1");
        if (steps_per_block < 1)
            throw ConfigError("engine.steps_per_block must be >= 1");
        if (wcs_rounds < 1)
            throw ConfigError("engine.wcs_rounds must be >= 1");
        if (convergence_window < 2)
            throw ConfigError("engine.convergence_window must be >= 2");
        if (!(convergence_tolerance > 0.0))
            throw ConfigError("engine.convergence_tolerance must be > 0");
        bits.validate();
    }
};

struct ScenarioConfig {
    std::string name = "network1";
    radio::RadioParams radio;
    TopologyConfig topology;
    mobility::SpeedProfile speed = mobility::SpeedProfile::static_;
    mobility::MobilityParams mobility;
    agent::LearnerParams learner;
    EngineParams engine;

    bool is_mobile() const { return speed != mobility::SpeedProfile::static_ && mobility.moving_fraction > 0.0; }

    void validate() const
    {
        radio.validate();
        if (!(topology.area_m > 0.0))
            throw ConfigError("topology.area_m must be > 0");
        if (topology.sites.empty())
            throw ConfigError("topology.sites must list at least one base station");
        if (topology.ue_count < 1)
            throw ConfigError("topology.ue_count must be >= 1");
        const int bs_antennas_macro = radio.macro.bs_antennas();
        const int bs_antennas_small = radio.small.bs_antennas();
        for (std::size_t i = 0; i < topology.sites.size(); ++i) {
            const auto& s = topology.sites[i];
            const std::string at = "topology.sites[" + std::to_string(i) + "]";
            const int m = s.tier == Tier::macro ? bs_antennas_macro : bs_antennas_small;
            if (s.quota < 1 || s.quota > m)
                throw ConfigError(at + ".quota must satisfy 1 <= quota <= BS antennas");
            if (s.position.x < 0.0 || s.position.y < 0.0 || s.position.x > topology.area_m ||
                s.position.y > topology.area_m)
                throw ConfigError(at + " lies outside the area");
        }
        const StreamDemand d = topology.effective_demand();
        if (d.macro < 1 || d.small < 1)
            throw ConfigError("topology.demand: stream demands must be >= 1");
        if (d.macro > radio.macro.ue_antennas || d.small > radio.small.ue_antennas)
            throw ConfigError("topology.demand: stream demand exceeds the UE antenna count");
        if (topology.uniform_demand < 0)
            throw ConfigError("topology.uniform_demand must be >= 0");
        mobility.validate();
        learner.validate();
        engine.validate();
    }
};

// ---------------------------------------------------------------------------
// Presets

inline TopologyConfig network1_topology()
{
    TopologyConfig t;
    t.area_m = 500.0;
    t.ue_count = 18;
    t.sites = {
        {Tier::macro, {250.0, 250.0}, 18},
        {Tier::small, {125.0, 125.0}, 6},
        {Tier::small, {375.0, 125.0}, 6},
        {Tier::small, {250.0, 400.0}, 6},
    };
    return t;
}

inline TopologyConfig network23_topology(std::size_t k, int macro_quota, int small_quota)
{
    TopologyConfig t;
    t.area_m = 500.0;
    t.ue_count = k;
    t.sites = {
        {Tier::macro, {167.0, 250.0}, macro_quota}, {Tier::macro, {333.0, 250.0}, macro_quota},
        {Tier::small, {125.0, 125.0}, small_quota}, {Tier::small, {375.0, 125.0}, small_quota},
        {Tier::small, {125.0, 375.0}, small_quota}, {Tier::small, {375.0, 375.0}, small_quota},
    };
    return t;
}

inline std::optional<ScenarioConfig> builtin_preset(const std::string& name)
{
    ScenarioConfig c;
    c.name = name;
    if (name == "network1")
        c.topology = network1_topology();
    else if (name == "network2")
        c.topology = network23_topology(30, 18, 6);
    else if (name == "network3")
        c.topology = network23_topology(60, 36, 12);
    else
        return std::nullopt;
    c.topology.uniform_demand = 2;
    return c;
}

// ---------------------------------------------------------------------------
// JSON reading

namespace detail {

/// Reads keys from one JSON object, remembering which ones were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path)
        : j_(j)
        , path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(where() + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        const auto it = j_.find(key);
        seen_.insert(key);
        if (it == j_.end())
            return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(child(key) + " has the wrong type (found " + it->type_name() + ")");
        }
    }

    template <typename T>
    void get_count(const char* key, T& out)
    {
        const auto it = j_.find(key);
        seen_.insert(key);
        if (it == j_.end())
            return;
        if (!it->is_number_integer() || it->template get<long long>() < 0)
            throw ConfigError(child(key) + " must be a nonnegative integer");
        out = static_cast<T>(it->template get<long long>());
    }

    const json* sub(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key " + child(it.key()));
    }

private:
    std::string where() const { return path_.empty() ? "configuration" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline Tier parse_tier(const json& v, const std::string& path)
{
    if (v == "macro")
        return Tier::macro;
    if (v == "small")
        return Tier::small;
    throw ConfigError(path + " must be \"macro\" or \"small\"");
}

inline void read_path_loss(const json& j, const std::string& path, radio::PathLossCoefficients& c)
{
    ObjectReader r(j, path);
    r.get("intercept_db", c.intercept_db);
    r.get("distance_slope_db", c.distance_slope_db);
    r.get("frequency_slope_db", c.frequency_slope_db);
    r.finish();
}

inline void read_tier(const json& j, const std::string& path, radio::TierRadio& t)
{
    ObjectReader r(j, path);
    r.get("carrier_hz", t.carrier_hz);
    r.get("bandwidth_hz", t.bandwidth_hz);
    r.get("tx_power_dbm", t.tx_power_dbm);
    if (const json* s = r.sub("los"))
        read_path_loss(*s, r.child("los"), t.los);
    if (const json* s = r.sub("nlos"))
        read_path_loss(*s, r.child("nlos"), t.nlos);
    r.get("los_breakpoint_m", t.los_breakpoint_m);
    r.get("los_decay_m", t.los_decay_m);
    r.get_count("ue_antennas", t.ue_antennas);
    r.get_count("bs_rows", t.bs_rows);
    r.get_count("bs_cols", t.bs_cols);
    r.get("bs_height_m", t.bs_height_m);
    r.finish();
}

inline void read_radio(const json& j, radio::RadioParams& p)
{
    ObjectReader r(j, "radio");
    if (const json* s = r.sub("macro"))
        read_tier(*s, "radio.macro", p.macro);
    if (const json* s = r.sub("small"))
        read_tier(*s, "radio.small", p.small);
    r.get("noise_psd_dbm_hz", p.noise_psd_dbm_hz);
    r.get("ue_height_m", p.ue_height_m);
    r.get("clusters", p.clusters);
    r.get("rays_per_cluster", p.rays_per_cluster);
    r.get("cluster_decay_db", p.cluster_decay_db);
    r.get("angular_spread_deg", p.angular_spread_deg);
    r.get("sector_half_width_deg", p.sector_half_width_deg);
    r.finish();
}

inline void read_topology(const json& j, TopologyConfig& t)
{
    ObjectReader r(j, "topology");
    r.get("area_m", t.area_m);
    r.get_count("ue_count", t.ue_count);
    if (const json* sites = r.sub("sites")) {
        if (!sites->is_array())
            throw ConfigError("topology.sites must be an array");
        t.sites.clear();
        for (std::size_t i = 0; i < sites->size(); ++i) {
            const std::string path = "topology.sites[" + std::to_string(i) + "]";
            ObjectReader s((*sites)[i], path);
            BsSite site;
            if (const json* tier = s.sub("tier"))
                site.tier = parse_tier(*tier, path + ".tier");
            s.get("x", site.position.x);
            s.get("y", site.position.y);
            s.get("quota", site.quota);
            s.finish();
            t.sites.push_back(site);
        }
    }
    if (const json* d = r.sub("demand")) {
        ObjectReader dr(*d, "topology.demand");
        dr.get("macro", t.demand.macro);
        dr.get("small", t.demand.small);
        dr.finish();
    }
    r.get("uniform_demand", t.uniform_demand);
    r.finish();
}

inline void read_mobility(const json& j, ScenarioConfig& c)
{
    ObjectReader r(j, "mobility");
    if (const json* s = r.sub("speed")) {
        const auto p = s->is_string() ? mobility::parse_speed(s->get<std::string>()) : std::nullopt;
        if (!p)
            throw ConfigError("mobility.speed must be one of static, walk, bike, drive");
        c.speed = *p;
        if (c.speed != mobility::SpeedProfile::static_)
            c.mobility.v_min = c.mobility.v_max = mobility::profile_speed(c.speed);
    }
    r.get("v_min_mps", c.mobility.v_min);
    r.get("v_max_mps", c.mobility.v_max);
    r.get("intensity", c.mobility.intensity);
    r.get("pause_min_s", c.mobility.pause_min_s);
    r.get("pause_max_s", c.mobility.pause_max_s);
    r.get("block_s", c.mobility.block_s);
    r.get("moving_fraction", c.mobility.moving_fraction);
    r.finish();
}

inline void read_learner(const json& j, agent::LearnerParams& p)
{
    ObjectReader r(j, "learner");
    r.get("alpha", p.alpha);
    r.get("gamma", p.gamma);
    r.get("exploration", p.exploration);
    r.get("cost_soft", p.cost_soft);
    r.get("cost_hard", p.cost_hard);
    r.get("sojourn_scale_s", p.sojourn_scale_s);
    r.get("reward_scale", p.reward_scale);
    r.get("reward_spectral", p.reward_spectral);
    r.get("q_init_max", p.q_init_max);
    if (const json* q = r.sub("quantizer")) {
        ObjectReader qr(*q, "learner.quantizer");
        qr.get("serving_levels", p.quantizer.serving_levels);
        qr.get("sinr_min_db", p.quantizer.sinr_min_db);
        qr.get("sinr_max_db", p.quantizer.sinr_max_db);
        qr.get("binary_threshold_db", p.quantizer.binary_threshold_db);
        qr.finish();
    }
    r.finish();
}

inline void read_engine(const json& j, EngineParams& e)
{
    ObjectReader r(j, "engine");
    if (const json* p = r.sub("policy")) {
        const auto k = p->is_string() ? parse_policy(p->get<std::string>()) : std::nullopt;
        if (!k)
            throw ConfigError("engine.policy must be one of clb, dlb, maxsinr, wcs");
        e.policy = *k;
    }
    r.get_count("seed", e.seed);
    r.get_count("steps", e.steps);
    r.get_count("steps_per_block", e.steps_per_block);
    r.get_count("moving_steps", e.moving_steps);
    if (const json* t = r.sub("target_update")) {
        if (*t == "per_block")
            e.target_update = TargetUpdate::per_block;
        else if (*t == "per_step")
            e.target_update = TargetUpdate::per_step;
        else
            throw ConfigError("engine.target_update must be \"per_block\" or \"per_step\"");
    }
    r.get_count("wcs_rounds", e.wcs_rounds);
    r.get_count("wcs_restarts", e.wcs_restarts);
    r.get_count("convergence_window", e.convergence_window);
    r.get("convergence_tolerance", e.convergence_tolerance);
    if (const json* b = r.sub("bits")) {
        ObjectReader br(*b, "engine.bits");
        br.get_count("q_value", e.bits.q_value);
        br.get_count("assoc", e.bits.assoc);
        br.get_count("rate", e.bits.rate);
        br.get_count("channel_coef", e.bits.channel_coef);
        br.finish();
    }
    r.get("dump_q", e.dump_q);
    r.finish();
}

} // namespace detail

/// Overlays `j` on `base`, validates, and returns the result.
inline ScenarioConfig apply_config_json(const json& j, ScenarioConfig base)
{
    if (j.is_null()) {
        base.validate();
        return base;
    }
    detail::ObjectReader r(j, "");
    if (const json* preset = r.sub("preset")) {
        const auto p = preset->is_string() ? builtin_preset(preset->get<std::string>()) : std::nullopt;
        if (!p)
            throw ConfigError("preset must name network1, network2 or network3");
        base = *p;
    }
    r.get("name", base.name);
    if (const json* s = r.sub("radio"))
        detail::read_radio(*s, base.radio);
    if (const json* s = r.sub("topology"))
        detail::read_topology(*s, base.topology);
    if (const json* s = r.sub("mobility"))
        detail::read_mobility(*s, base);
    if (const json* s = r.sub("learner"))
        detail::read_learner(*s, base.learner);
    if (const json* s = r.sub("engine"))
        detail::read_engine(*s, base.engine);
    r.finish();
    base.mobility.area_m = base.topology.area_m;
    base.validate();
    return base;
}

inline ScenarioConfig parse_config_text(const std::string& text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return apply_config_json(json(), *builtin_preset("network1"));
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    return apply_config_json(j, *builtin_preset("network1"));
}

inline ScenarioConfig parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open configuration file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// A preset name (network1..3) or a path to a JSON file.
inline ScenarioConfig load_scenario(const std::string& path_or_preset)
{
    if (auto p = builtin_preset(path_or_preset)) {
        p->validate();
        return *p;
    }
    return parse_config(path_or_preset);
}

// ---------------------------------------------------------------------------
// JSON writing

inline json to_json(const radio::PathLossCoefficients& c)
{
    return {{"intercept_db", c.intercept_db}, {"distance_slope_db", c.distance_slope_db},
            {"frequency_slope_db", c.frequency_slope_db}};
}

inline json to_json(const radio::TierRadio& t)
{
    return {{"carrier_hz", t.carrier_hz},
            {"bandwidth_hz", t.bandwidth_hz},
            {"tx_power_dbm", t.tx_power_dbm},
            {"los", to_json(t.los)},
            {"nlos", to_json(t.nlos)},
            {"los_breakpoint_m", t.los_breakpoint_m},
            {"los_decay_m", t.los_decay_m},
            {"ue_antennas", t.ue_antennas},
            {"bs_rows", t.bs_rows},
            {"bs_cols", t.bs_cols},
            {"bs_height_m", t.bs_height_m}};
}

inline json to_json(const ScenarioConfig& c)
{
    json sites = json::array();
    for (const auto& s : c.topology.sites)
        sites.push_back({{"tier", to_string(s.tier)}, {"x", s.position.x}, {"y", s.position.y}, {"quota", s.quota}});
    const auto& r = c.radio;
    const auto& l = c.learner;
    const auto& e = c.engine;
    return {
        {"name", c.name},
        {"radio",
         {{"macro", to_json(r.macro)},
          {"small", to_json(r.small)},
          {"noise_psd_dbm_hz", r.noise_psd_dbm_hz},
          {"ue_height_m", r.ue_height_m},
          {"clusters", r.clusters},
          {"rays_per_cluster", r.rays_per_cluster},
          {"cluster_decay_db", r.cluster_decay_db},
          {"angular_spread_deg", r.angular_spread_deg},
          {"sector_half_width_deg", r.sector_half_width_deg}}},
        {"topology",
         {{"area_m", c.topology.area_m},
          {"ue_count", c.topology.ue_count},
          {"sites", sites},
          {"demand", {{"macro", c.topology.demand.macro}, {"small", c.topology.demand.small}}},
          {"uniform_demand", c.topology.uniform_demand}}},
        {"mobility",
         {{"speed", mobility::to_string(c.speed)},
          {"v_min_mps", c.mobility.v_min},
          {"v_max_mps", c.mobility.v_max},
          {"intensity", c.mobility.intensity},
          {"pause_min_s", c.mobility.pause_min_s},
          {"pause_max_s", c.mobility.pause_max_s},
          {"block_s", c.mobility.block_s},
          {"moving_fraction", c.mobility.moving_fraction}}},
        {"learner",
         {{"alpha", l.alpha},
          {"gamma", l.gamma},
          {"exploration", l.exploration},
          {"cost_soft", l.cost_soft},
          {"cost_hard", l.cost_hard},
          {"sojourn_scale_s", l.sojourn_scale_s},
          {"reward_scale", l.reward_scale},
          {"reward_spectral", l.reward_spectral},
          {"q_init_max", l.q_init_max},
          {"quantizer",
           {{"serving_levels", l.quantizer.serving_levels},
            {"sinr_min_db", l.quantizer.sinr_min_db},
            {"sinr_max_db", l.quantizer.sinr_max_db},
            {"binary_threshold_db", l.quantizer.binary_threshold_db}}}}},
        {"engine",
         {{"policy", to_string(e.policy)},
          {"seed", e.seed},
          {"steps", e.steps},
          {"steps_per_block", e.steps_per_block},
          {"moving_steps", e.moving_steps},
          {"target_update", e.target_update == TargetUpdate::per_block ? "per_block" : "per_step"},
          {"wcs_rounds", e.wcs_rounds},
          {"wcs_restarts", e.wcs_restarts},
          {"convergence_window", e.convergence_window},
          {"convergence_tolerance", e.convergence_tolerance},
          {"bits",
           {{"q_value", e.bits.q_value},
            {"assoc", e.bits.assoc},
            {"rate", e.bits.rate},
            {"channel_coef", e.bits.channel_coef}}},
          {"dump_q", e.dump_q}}},
    };
}

/// FNV-1a over the canonical JSON dump.
inline std::uint64_t config_hash(const ScenarioConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace cellsim
