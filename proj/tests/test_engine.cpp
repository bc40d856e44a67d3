#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cellsim/cellsim.hpp"

using namespace cellsim;
using namespace cellsim::engine;

namespace {

ScenarioConfig small_run(PolicyKind p, std::size_t steps = 60, std::uint64_t seed = 3)
{
    auto c = *builtin_preset("network1");
    c.engine.policy = p;
    c.engine.steps = steps;
    c.engine.seed = seed;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Amf, StrictImprovementOnly)
{
    AmfState amf{{0, 1}, 5.0, {0.0, 0.0}};
    EXPECT_FALSE(amf_update_best(amf, 5.0, {1, 0}));
    EXPECT_EQ(amf.best, (AssociationVector{0, 1}));
    EXPECT_TRUE(amf_update_best(amf, 6.0, {1, 0}));
    EXPECT_EQ(amf.best, (AssociationVector{1, 0}));
    EXPECT_DOUBLE_EQ(amf.best_rate, 6.0);
}

TEST(Handovers, CountAndSojourn)
{
    const AssociationVector prev{0, 1, kUnassociated, 2};
    const AssociationVector next{0, 2, 1, 2};
    std::vector<double> tau{1.0, 2.0, 3.0, 4.0};
    EXPECT_EQ(execute_handovers(prev, next, tau, 0.5), 2u);
    EXPECT_EQ(tau, (std::vector<double>{1.5, 0.0, 0.0, 4.5}));
    EXPECT_THROW(execute_handovers(prev, AssociationVector{0}, tau, 0.5), InvalidInput);
}

TEST(Plateau, FirstFlatWindow)
{
    const std::vector<double> v{1.0, 5.0, 10.0, 10.05, 10.02, 10.01};
    EXPECT_EQ(plateau_step(v, 3, 0.01), 5u);
    EXPECT_FALSE(plateau_step(std::vector<double>{1.0, 2.0, 3.0}, 2, 0.01).has_value());
    EXPECT_THROW(plateau_step(v, 1, 0.01), InvalidInput);
}

TEST(Simulation, EveryPolicyKeepsQuotasEveryStep)
{
    for (auto p : {PolicyKind::clb, PolicyKind::dlb, PolicyKind::max_sinr, PolicyKind::wcs}) {
        Simulation sim(small_run(p, 36));
        std::size_t seen = 0;
        sim.set_observer([&](const StepView& v) {
            ++seen;
            const auto& spec = v.sim.load_spec();
            EXPECT_TRUE(is_load_balanced(v.eta, spec));
            EXPECT_TRUE(is_load_balanced(v.sim.serving(), spec));
            for (BsIndex j = 0; j < spec.bs_count(); ++j)
                EXPECT_LE(v.record.loads[j], spec.quota(j));
        });
        sim.run();
        EXPECT_EQ(seen, 36u) << to_string(p);
        EXPECT_EQ(sim.invariant_violations(), 0u) << to_string(p);
        EXPECT_EQ(sim.blocks().size(), 6u);
    }
}

TEST(Simulation, ClbMirrorsAgentTables)
{
    Simulation sim(small_run(PolicyKind::clb));
    sim.run();
    for (UeIndex k = 0; k < sim.agents().size(); ++k)
        EXPECT_EQ(sim.clb_records().q(k), sim.agents()[k].q) << "ue " << k;
    std::uint64_t visits = 0;
    for (UeIndex k = 0; k < sim.agents().size(); ++k)
        for (auto n : sim.clb_records().n(k).data())
            visits += n;
    EXPECT_EQ(visits, sim.agents().size() * sim.steps().size());
}

TEST(Simulation, DlbCountsLocally)
{
    Simulation sim(small_run(PolicyKind::dlb));
    sim.run();
    std::uint64_t visits = 0;
    for (const auto& a : sim.agents())
        for (auto n : a.n.data())
            visits += n;
    EXPECT_EQ(visits, sim.agents().size() * sim.steps().size());
    EXPECT_EQ(sim.bs_tables().size(), sim.load_spec().bs_count());
}

TEST(Simulation, SignalingPerStep)
{
    for (auto p : {PolicyKind::clb, PolicyKind::dlb}) {
        Simulation sim(small_run(p, 12));
        sim.run();
        const std::uint64_t k = 18, j = 4;
        const BitWidths x;
        const auto kind = p == PolicyKind::clb ? SignalingKind::clb : SignalingKind::dlb;
        const auto expected = signaling_step_cost(kind, k, j, x) + signaling_step_cost(SignalingKind::amf, k, j, x);
        for (const auto& r : sim.steps())
            EXPECT_EQ(r.bits, expected);
    }
}

TEST(Simulation, SameSeedSameRun)
{
    for (auto p : {PolicyKind::clb, PolicyKind::dlb, PolicyKind::wcs}) {
        Simulation a(small_run(p, 30, 9)), b(small_run(p, 30, 9));
        a.run();
        b.run();
        ASSERT_EQ(a.steps().size(), b.steps().size());
        for (std::size_t i = 0; i < a.steps().size(); ++i) {
            EXPECT_EQ(a.steps()[i].r_learn, b.steps()[i].r_learn);
            EXPECT_EQ(a.steps()[i].q_total, b.steps()[i].q_total);
        }
        EXPECT_EQ(a.serving(), b.serving());
    }
}

TEST(Simulation, SeedChangesTheRun)
{
    Simulation a(small_run(PolicyKind::clb, 12, 1)), b(small_run(PolicyKind::clb, 12, 2));
    a.run();
    b.run();
    EXPECT_NE(a.summary().mean_r_learn, b.summary().mean_r_learn);
}

TEST(Simulation, ServingOnlyChangesAtBlockEnd)
{
    Simulation sim(small_run(PolicyKind::clb, 30));
    AssociationVector last;
    sim.set_observer([&](const StepView& v) {
        const auto t = v.record.t;
        if (t > 1 && (t - 1) % 6 != 0) {
            EXPECT_EQ(v.sim.serving(), last) << "t " << t;
        }
        last = v.sim.serving();
    });
    sim.run();
}

TEST(Simulation, ServingIsBestOfBlock)
{
    Simulation sim(small_run(PolicyKind::clb, 6));
    double best = 0.0;
    sim.set_observer([&](const StepView& v) { best = std::max(best, v.record.r_learn); });
    sim.run();
    EXPECT_GE(sim.amf().best_rate, best);
}

TEST(Simulation, PerStepTargetHandsOverMore)
{
    std::size_t per_block = 0, per_step = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto c = small_run(PolicyKind::clb, 120, seed);
        per_block += output::run_scenario(c).summary().handovers;
        c.engine.target_update = TargetUpdate::per_step;
        per_step += output::run_scenario(c).summary().handovers;
    }
    EXPECT_GT(per_step, per_block);
}

TEST(Simulation, SingleCellSingleUeStaysPut)
{
    auto c = *builtin_preset("network1");
    c.topology.sites = {{Tier::macro, {250.0, 250.0}, 2}};
    c.topology.ue_count = 1;
    c.engine.steps = 60;
    Simulation sim(c);
    sim.run();
    EXPECT_EQ(sim.serving(), (AssociationVector{0}));
    EXPECT_EQ(sim.summary().handovers, 0u);
}

TEST(Simulation, MobileRunStopsAfterMovingSteps)
{
    auto c = small_run(PolicyKind::clb, 100000);
    c.speed = mobility::SpeedProfile::drive;
    c.mobility.v_min = c.mobility.v_max = mobility::profile_speed(c.speed);
    c.engine.moving_steps = 3;
    Simulation sim(c);
    sim.run();
    EXPECT_EQ(sim.clock().moving_step, 3u);
    EXPECT_EQ(sim.steps().size() % 6, 0u);
    EXPECT_EQ(sim.invariant_violations(), 0u);
    bool moved = false;
    for (UeIndex k = 0; k < sim.layout().ues.size(); ++k)
        moved = moved || !(sim.positions()[k] == sim.layout().ues[k].position);
    EXPECT_TRUE(moved);
}

TEST(Output, WritesFilesAndManifestReproduces)
{
    const auto dir = std::filesystem::temp_directory_path() / "cellsim_engine_test";
    std::filesystem::remove_all(dir);
    auto c = small_run(PolicyKind::dlb, 24);
    c.engine.dump_q = true;
    const auto first = output::run_scenario(c);
    output::write_run(first, dir / "a");
    for (const char* f : {"steps.csv", "blocks.csv", "trajectory.csv", "summary.json", "manifest.json", "qtables.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;

    const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
    const auto again = output::run_scenario(output::config_from_manifest(manifest));
    output::write_run(again, dir / "b");
    for (const char* f : {"steps.csv", "blocks.csv", "trajectory.csv", "summary.json", "qtables.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;

    auto tampered = manifest;
    tampered["config"]["engine"]["seed"] = 999;
    EXPECT_THROW(output::config_from_manifest(tampered), ConfigError);
    std::filesystem::remove_all(dir);
}
