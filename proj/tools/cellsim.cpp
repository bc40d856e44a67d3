#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "cellsim/cellsim.hpp"

namespace {

using namespace cellsim;

struct SeedRange {
    std::uint64_t first = 0;
    std::uint64_t last = 0;
};

SeedRange parse_seed_range(const std::string& s)
{
    static const std::regex re(R"((\d+)\.\.(\d+))");
    std::smatch m;
    if (!std::regex_match(s, m, re))
        throw CLI::ValidationError("--seeds", "expected N..M, got '" + s + "'");
    SeedRange r{std::stoull(m[1]), std::stoull(m[2])};
    if (r.last < r.first)
        throw CLI::ValidationError("--seeds", "range end precedes its start");
    return r;
}

std::filesystem::path output_dir(const std::string& flag)
{
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("CELLSIM_OUT"); env && *env)
        return env;
    return "cellsim_out";
}

json run_one(const ScenarioConfig& cfg, const std::filesystem::path& dir)
{
    auto sim = output::run_scenario(cfg);
    output::write_run(sim, dir);
    const auto s = output::summary_json(sim);
    std::cout << "seed " << cfg.engine.seed << ": " << s.at("steps") << " steps, mean throughput "
              << output::fmt(s.at("mean_throughput").get<double>() / 1e6) << " Mbit/s, " << s.at("handovers")
              << " handovers -> " << dir.string() << '\n';
    if (s.at("invariant_violations").get<std::size_t>() != 0)
        throw InternalError("load-balance invariant violated during the run");
    return s;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-agent Q-learning user association and handover simulator"};
    std::string scenario = "network1";
    std::string policy;
    std::optional<std::uint64_t> seed;
    std::string seeds;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> moving_steps;
    std::string out;
    std::string speed;
    std::string manifest;
    bool dump_q = false;
    bool print_config = false;

    app.add_option("--scenario", scenario, "Preset name (network1..3) or JSON config path");
    app.add_option("--policy", policy, "Association policy")->check(CLI::IsMember({"clb", "dlb", "maxsinr", "wcs"}));
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--seeds", seeds, "Seed range N..M (one run per seed plus an aggregate)");
    app.add_option("--steps", steps, "Learning steps")->check(CLI::PositiveNumber);
    app.add_option("--moving-steps", moving_steps, "Stop a mobile run after this many moving steps");
    app.add_option("--out", out, "Output directory (default: $CELLSIM_OUT, else ./cellsim_out)");
    app.add_option("--speed", speed, "Mobility profile")->check(CLI::IsMember({"static", "walk", "bike", "drive"}));
    app.add_option("--manifest", manifest, "Re-run the configuration recorded in a manifest.json");
    app.add_flag("--dump-q", dump_q, "Write every agent's Q-table to qtables.csv");
    app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");
    app.get_option("--seed")->excludes(app.get_option("--seeds"));

    CLI11_PARSE(app, argc, argv);

    try {
        ScenarioConfig cfg;
        if (!manifest.empty()) {
            std::ifstream in(manifest);
            if (!in)
                throw ConfigError("cannot open manifest " + manifest);
            json m;
            try {
                m = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("malformed manifest: ") + e.what());
            }
            cfg = output::config_from_manifest(m);
        } else {
            cfg = load_scenario(scenario);
        }

        if (!policy.empty())
            cfg.engine.policy = *parse_policy(policy);
        if (seed)
            cfg.engine.seed = *seed;
        if (steps)
            cfg.engine.steps = *steps;
        if (moving_steps)
            cfg.engine.moving_steps = *moving_steps;
        if (!speed.empty()) {
            cfg.speed = *mobility::parse_speed(speed);
            if (cfg.speed != mobility::SpeedProfile::static_)
                cfg.mobility.v_min = cfg.mobility.v_max = mobility::profile_speed(cfg.speed);
        }
        if (dump_q)
            cfg.engine.dump_q = true;
        cfg.validate();

        if (print_config) {
            std::cout << to_json(cfg).dump(2) << '\n';
            return 0;
        }

        const auto dir = output_dir(out);
        if (seeds.empty()) {
            run_one(cfg, dir);
            return 0;
        }
        const auto range = parse_seed_range(seeds);
        std::vector<json> runs;
        for (std::uint64_t s = range.first; s <= range.last; ++s) {
            cfg.engine.seed = s;
            runs.push_back(run_one(cfg, dir / ("seed_" + std::to_string(s))));
        }
        json agg = {{"scenario", cfg.name},
                    {"policy", to_string(cfg.engine.policy)},
                    {"seeds", {range.first, range.last}},
                    {"metrics", output::aggregate_summaries(runs)}};
        std::filesystem::create_directories(dir);
        output::write_json(agg, dir / "aggregate.json");
        return 0;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "cellsim: " << e.what() << '\n';
        return 1;
    }
}
