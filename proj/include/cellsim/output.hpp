#pragma once

// CSV / JSON artifacts of a run and the reproducibility manifest.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cellsim/config.hpp"
#include "cellsim/engine.hpp"

namespace cellsim::output {

namespace fs = std::filesystem;

inline std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string fmt_bs(BsIndex j) { return j == kUnassociated ? "-1" : std::to_string(j); }

inline std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw Error("cannot write " + p.string());
    return out;
}

inline void write_steps_csv(const engine::Simulation& sim, const fs::path& p)
{
    auto out = open_out(p);
    out << "t,b,n,r_learn,r_best,bits_signaled";
    for (BsIndex j = 0; j < sim.load_spec().bs_count(); ++j)
        out << ",load_" << j;
    out << ",q_total\n";
    for (const auto& r : sim.steps()) {
        out << r.t << ',' << r.block << ',' << r.moving_step << ',' << fmt(r.r_learn) << ',' << fmt(r.r_best) << ','
            << r.bits;
        for (int l : r.loads)
            out << ',' << l;
        out << ',' << fmt(r.q_total) << '\n';
    }
}

inline void write_blocks_csv(const engine::Simulation& sim, const fs::path& p)
{
    auto out = open_out(p);
    out << "b,handovers,throughput\n";
    for (const auto& b : sim.blocks())
        out << b.block << ',' << b.handovers << ',' << fmt(b.throughput) << '\n';
}

inline void write_trajectory_csv(const engine::Simulation& sim, const fs::path& p)
{
    auto out = open_out(p);
    out << "step,ue,x,y,serving\n";
    for (const auto& r : sim.trajectory())
        out << r.step << ',' << r.ue << ',' << fmt(r.position.x) << ',' << fmt(r.position.y) << ','
            << fmt_bs(r.serving) << '\n';
}

/// Every agent's Q-table (and visit counts where the agent owns them).
inline void write_q_dump(const engine::Simulation& sim, const fs::path& p)
{
    auto out = open_out(p);
    out << "ue,state,action,q,n\n";
    const bool central = sim.config().engine.policy == PolicyKind::clb;
    const auto& agents = sim.agents();
    for (UeIndex k = 0; k < agents.size(); ++k) {
        const auto& q = agents[k].q;
        const auto& n = central ? sim.clb_records().n(k) : agents[k].n;
        for (std::size_t s = 0; s < q.rows(); ++s)
            for (std::size_t a = 0; a < q.cols(); ++a)
                if (n(s, a) > 0 || q(s, a) != 0.0)
                    out << k << ',' << s << ',' << a << ',' << fmt(q(s, a)) << ',' << n(s, a) << '\n';
    }
}

inline json summary_json(const engine::Simulation& sim)
{
    const auto s = sim.summary();
    const auto& cfg = sim.config();
    json j = {
        {"scenario", cfg.name},
        {"policy", to_string(cfg.engine.policy)},
        {"speed", mobility::to_string(cfg.speed)},
        {"seed", cfg.engine.seed},
        {"config_hash", hex64(config_hash(cfg))},
        {"steps", s.steps},
        {"blocks", s.blocks},
        {"moving_steps", s.moving_steps},
        {"mean_r_learn", s.mean_r_learn},
        {"mean_r_best", s.mean_r_best},
        {"mean_throughput", s.mean_throughput},
        {"tail_throughput", s.tail_throughput},
        {"handovers", s.handovers},
        {"handover_rate", s.handover_rate},
        {"bits_signaled", s.bits},
        {"mean_unassociated", s.mean_unassociated},
        {"invariant_violations", s.invariant_violations},
    };
    j["convergence_step"] = s.convergence_step ? json(*s.convergence_step) : json(nullptr);
    return j;
}

inline json manifest_json(const ScenarioConfig& cfg)
{
    return {{"config", to_json(cfg)}, {"config_hash", hex64(config_hash(cfg))}, {"seed", cfg.engine.seed}};
}

/// Config recorded in a manifest; refuses a manifest whose hash does not match.
inline ScenarioConfig config_from_manifest(const json& m)
{
    if (!m.is_object() || !m.contains("config"))
        throw ConfigError("manifest: missing config");
    ScenarioConfig cfg = apply_config_json(m.at("config"), *builtin_preset("network1"));
    if (m.contains("config_hash") && m.at("config_hash") != hex64(config_hash(cfg)))
        throw ConfigError("manifest: config hash mismatch");
    return cfg;
}

inline void write_json(const json& j, const fs::path& p)
{
    auto out = open_out(p);
    out << j.dump(2) << '\n';
}

inline void write_run(const engine::Simulation& sim, const fs::path& dir)
{
    fs::create_directories(dir);
    write_steps_csv(sim, dir / "steps.csv");
    write_blocks_csv(sim, dir / "blocks.csv");
    write_trajectory_csv(sim, dir / "trajectory.csv");
    write_json(summary_json(sim), dir / "summary.json");
    write_json(manifest_json(sim.config()), dir / "manifest.json");
    if (sim.config().engine.dump_q)
        write_q_dump(sim, dir / "qtables.csv");
}

/// Mean and sample standard deviation of each numeric summary field.
inline json aggregate_summaries(const std::vector<json>& runs)
{
    json agg = json::object();
    if (runs.empty())
        return agg;
    for (const char* key : {"mean_r_learn", "mean_r_best", "mean_throughput", "tail_throughput", "handovers",
                            "handover_rate", "bits_signaled", "mean_unassociated", "invariant_violations"}) {
        double sum = 0.0;
        for (const auto& r : runs)
            sum += r.at(key).get<double>();
        const double mean = sum / static_cast<double>(runs.size());
        double var = 0.0;
        for (const auto& r : runs) {
            const double d = r.at(key).get<double>() - mean;
            var += d * d;
        }
        const double sd = runs.size() > 1 ? std::sqrt(var / static_cast<double>(runs.size() - 1)) : 0.0;
        agg[key] = {{"mean", mean}, {"stddev", sd}};
    }
    return agg;
}

/// Runs one scenario to completion.
inline engine::Simulation run_scenario(const ScenarioConfig& cfg)
{
    engine::Simulation sim(cfg);
    sim.run();
    return sim;
}

} // namespace cellsim::output
