// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <future>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cellsim/cellsim.hpp"
#include "oracles/oracles.hpp"

using namespace cellsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

ScenarioConfig scenario(const std::string& preset, PolicyKind p, std::uint64_t seed, std::size_t steps,
                        mobility::SpeedProfile speed = mobility::SpeedProfile::static_)
{
    auto c = *builtin_preset(preset);
    c.engine.policy = p;
    c.engine.seed = seed;
    c.engine.steps = steps;
    c.speed = speed;
    if (speed != mobility::SpeedProfile::static_)
        c.mobility.v_min = c.mobility.v_max = mobility::profile_speed(speed);
    return c;
}

std::string join(const std::vector<double>& v, int precision = 3)
{
    std::ostringstream s;
    s.precision(precision);
    s << '[';
    for (std::size_t i = 0; i < v.size(); ++i)
        s << (i ? ", " : "") << v[i];
    s << ']';
    return s.str();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

/// Runs every config on its own thread; results keep the input order.
std::vector<engine::RunSummary> run_all(const std::vector<ScenarioConfig>& cfgs)
{
    std::vector<std::future<engine::RunSummary>> jobs;
    for (const auto& c : cfgs)
        jobs.push_back(std::async(std::launch::async, [c] { return output::run_scenario(c).summary(); }));
    std::vector<engine::RunSummary> out;
    for (auto& j : jobs)
        out.push_back(j.get());
    return out;
}

bool near_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300); }

// ---------------------------------------------------------------------------

std::vector<std::size_t> to_oracle(std::span<const BsIndex> a)
{
    std::vector<std::size_t> out;
    for (BsIndex b : a)
        out.push_back(b == kUnassociated ? oracle::kNone : b);
    return out;
}

std::vector<std::vector<int>> demand_rows(const LoadSpec& s)
{
    std::vector<std::vector<int>> d(s.ue_count(), std::vector<int>(s.bs_count()));
    for (UeIndex k = 0; k < s.ue_count(); ++k)
        for (BsIndex j = 0; j < s.bs_count(); ++j)
            d[k][j] = s.demand(k, j);
    return d;
}

/// Independent recount of an association: right length, known BSs, quotas held.
bool association_ok(std::span<const BsIndex> a, const LoadSpec& spec)
{
    if (a.size() != spec.ue_count())
        return false;
    for (BsIndex b : a)
        if (b != kUnassociated && b >= spec.bs_count())
            return false;
    const auto loads = oracle::recount_loads(to_oracle(a), demand_rows(spec), spec.bs_count());
    for (BsIndex j = 0; j < spec.bs_count(); ++j)
        if (loads[j] > spec.quota(j))
            return false;
    return true;
}

Outcome criterion1()
{
    struct Tally {
        std::size_t checks = 0;
        std::size_t bad = 0;
    };
    std::vector<std::future<Tally>> jobs;
    for (const char* net : {"network1", "network2", "network3"})
        for (auto p : {PolicyKind::clb, PolicyKind::dlb})
            for (auto speed : {mobility::SpeedProfile::static_, mobility::SpeedProfile::walk})
                for (auto seed : kSeeds)
                    jobs.push_back(std::async(std::launch::async, [=] {
                        engine::Simulation sim(scenario(net, p, seed, 500, speed));
                        Tally t;
                        std::size_t blocks_seen = 0;
                        sim.set_observer([&](const engine::StepView& v) {
                            t.checks += 2;
                            t.bad += !association_ok(v.eta, v.sim.load_spec());
                            t.bad += !association_ok(v.sim.serving(), v.sim.load_spec());
                            if (v.sim.blocks().size() != blocks_seen) {
                                blocks_seen = v.sim.blocks().size();
                                ++t.checks;
                            }
                        });
                        sim.run();
                        // serving associations logged at every block boundary
                        const auto& traj = sim.trajectory();
                        const std::size_t k = sim.load_spec().ue_count();
                        for (std::size_t i = 0; i + k <= traj.size(); i += k) {
                            std::vector<BsIndex> a(k);
                            for (std::size_t u = 0; u < k; ++u)
                                a[u] = traj[i + u].serving;
                            ++t.checks;
                            t.bad += !association_ok(a, sim.load_spec());
                        }
                        t.bad += sim.invariant_violations();
                        return t;
                    }));
    Tally total;
    for (auto& j : jobs) {
        const auto t = j.get();
        total.checks += t.checks;
        total.bad += t.bad;
    }
    return {total.bad == 0, std::to_string(jobs.size()) + " runs, " + std::to_string(total.checks) +
                                " association checks, " + std::to_string(total.bad) + " violations"};
}

Outcome criterion2()
{
    Rng rng(2024);
    std::size_t good = 0, monotone = 0, capped = 0;
    const std::size_t instances = 100;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t k = 2 + i % 5; // 2..6
        const std::size_t j = 2 + i % 3;
        std::uniform_real_distribution<double> u(0.0, 20.0);
        // two streams per UE everywhere, as in the preset networks
        std::uniform_int_distribution<int> quota(1, 6);
        std::vector<int> q(j);
        for (auto& x : q)
            x = quota(rng);
        const auto spec = LoadSpec::uniform(q, k, 2);
        clb::ValueTable values(k, j);
        oracle::Instance ref{std::vector<std::vector<double>>(k, std::vector<double>(j)), q, demand_rows(spec)};
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < j; ++b)
                values(a, b) = ref.value[a][b] = u(rng);
        Rng start_rng(i);
        const auto res = clb::wcs_clb(values, spec, initial_feasible_association(spec, start_rng));
        bool mono = is_load_balanced(res.assoc, spec);
        for (std::size_t t = 1; t < res.best_trace.size(); ++t)
            mono = mono && res.best_trace[t] >= res.best_trace[t - 1];
        monotone += mono;
        capped += res.hit_cap;
        const double best = oracle::exhaustive_best_assignment(ref).value;
        good += res.objective >= 0.9 * best;
    }
    return {monotone == instances && good >= 95 && capped == 0,
            std::to_string(good) + "/100 within 90% of optimum, " + std::to_string(monotone) +
                "/100 monotone and feasible, iteration cap hit " + std::to_string(capped) + "x"};
}

Outcome criterion3()
{
    Rng rng(77);
    std::size_t stable = 0;
    const std::size_t instances = 200;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t k = 2 + i % 7; // 2..8
        const std::size_t j = 1 + i % 3; // 1..3
        std::vector<int> q(j);
        for (auto& x : q)
            x = std::uniform_int_distribution<int>(1, 4)(rng);
        const auto spec = LoadSpec::uniform(q, k, 1);
        std::vector<dlb::PreferenceList> ue(k), bs(j);
        // preferences from random U-values, as the learners would produce them
        for (auto& p : ue) {
            std::vector<double> v(j);
            for (auto& x : v)
                x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            p = dlb::sort_descending(v);
        }
        for (auto& p : bs) {
            std::vector<double> v(k);
            for (auto& x : v)
                x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            p = dlb::sort_descending(v);
        }
        const auto res = dlb::da_match(ue, bs, spec);
        const std::vector<std::vector<int>> demand(k, std::vector<int>(j, 1));
        stable += res.waitlists_within_quota && is_load_balanced(res.assoc, spec) &&
                  oracle::blocking_pair_scan(to_oracle(res.assoc), ue, bs, q, demand).empty();
    }
    return {stable == instances, std::to_string(stable) + "/200 stable"};
}

Outcome criterion4()
{
    std::vector<ScenarioConfig> cfgs;
    for (auto seed : kSeeds) {
        auto c = scenario("network1", PolicyKind::clb, seed, 300);
        c.engine.steps_per_block = 100; // CSI held over the horizon being measured
        cfgs.push_back(c);
    }
    const auto runs = run_all(cfgs);
    std::size_t within = 0;
    std::vector<double> at;
    for (const auto& r : runs) {
        at.push_back(r.convergence_step ? static_cast<double>(*r.convergence_step) : -1.0);
        within += r.convergence_step && *r.convergence_step <= 150;
    }
    return {within >= 4, "plateau step per seed " + join(at) + " (-1 = none), " + std::to_string(within) +
                             "/5 within 150"};
}

Outcome criterion5()
{
    std::vector<ScenarioConfig> cfgs;
    for (auto p : {PolicyKind::clb, PolicyKind::wcs, PolicyKind::max_sinr})
        for (auto seed : kSeeds)
            cfgs.push_back(scenario("network2", p, seed, 600));
    const auto runs = run_all(cfgs);
    std::vector<double> ql, wcs, ms, ratio;
    bool ordered = true;
    for (std::size_t s = 0; s < 5; ++s) {
        ql.push_back(runs[s].tail_throughput / 1e9);
        wcs.push_back(runs[5 + s].tail_throughput / 1e9);
        ms.push_back(runs[10 + s].tail_throughput / 1e9);
        ratio.push_back(ql.back() / ms.back());
        ordered = ordered && wcs.back() >= ql.back() && ql.back() >= ms.back();
    }
    const double r = mean(ratio);
    return {ordered && r >= 1.2, "Gbit/s wcs " + join(wcs, 4) + ", clb " + join(ql, 4) + ", max-sinr " + join(ms, 4) +
                                     "; mean clb/max-sinr " + std::to_string(r)};
}

struct MobilityRuns {
    std::vector<engine::RunSummary> ql, max_sinr, ql_static;
};

MobilityRuns mobility_runs()
{
    std::vector<ScenarioConfig> dyn;
    for (auto p : {PolicyKind::clb, PolicyKind::max_sinr})
        for (auto seed : kSeeds) {
            auto c = scenario("network2", p, seed, 1000000, mobility::SpeedProfile::walk);
            c.mobility.moving_fraction = 0.3;
            c.engine.moving_steps = 10;
            dyn.push_back(c);
        }
    const auto d = run_all(dyn);
    MobilityRuns m;
    m.ql.assign(d.begin(), d.begin() + 5);
    m.max_sinr.assign(d.begin() + 5, d.end());
    std::vector<ScenarioConfig> st;
    for (std::size_t s = 0; s < 5; ++s)
        st.push_back(scenario("network2", PolicyKind::clb, kSeeds[s], m.ql[s].steps));
    m.ql_static = run_all(st);
    return m;
}

Outcome criterion6(const MobilityRuns& m)
{
    std::vector<double> ql, ms;
    for (std::size_t s = 0; s < 5; ++s) {
        ql.push_back(m.ql[s].handover_rate);
        ms.push_back(m.max_sinr[s].handover_rate);
    }
    const double ratio = mean(ql) / mean(ms);
    return {ratio <= 1.0 / 3.0, "handovers/UE/block clb " + join(ql) + ", max-sinr " + join(ms) + "; ratio " +
                                    std::to_string(ratio)};
}

Outcome criterion7(const MobilityRuns& m)
{
    std::vector<double> ratio;
    for (std::size_t s = 0; s < 5; ++s)
        ratio.push_back(m.ql[s].tail_throughput / m.ql_static[s].tail_throughput);
    const double r = mean(ratio);
    return {r >= 0.85, "walk/static tail throughput per seed " + join(ratio) + "; mean " + std::to_string(r)};
}

Outcome criterion8()
{
    std::vector<std::string> failed;
    auto check = [&](const char* what, double got, double want) {
        if (!near_rel(got, want, 1e-12))
            failed.push_back(what);
    };
    agent::QTable q(2, 2);
    q(0, 0) = 2.0;
    q(1, 1) = 3.0;
    check("q_update", agent::q_update(q, 0, 0, 4.0, 1, 0.5, 0.2), 3.3);
    agent::QTable r(1, 1);
    r(0, 0) = 7.0;
    check("q_update alpha=1", agent::q_update(r, 0, 0, 4.0, 0, 1.0, 0.0), 4.0);
    check("ucb c=0", agent::ucb_value(1.5, 3, 10, 0.0), 1.5);
    check("ucb", agent::ucb_value(1.0, 4, 55, 2.0), 1.0 + 2.0 * std::sqrt(std::log(55.0) / 4.0));
    check("ucb untried", agent::ucb_value(0.0, 0, 7, 2.0), agent::kUntriedUcb);
    check("handover stay", agent::handover_reward(10.0, 1, 1, 0.0, 0.3, 0.1), 10.0);
    check("handover tau=0", agent::handover_reward(10.0, 1, 2, 0.0, 0.3, 0.1), 6.0);
    check("handover long tau", agent::handover_reward(10.0, 1, 2, 1e6, 0.3, 0.1), 9.0);
    check("block_count 1.0", static_cast<double>(mobility::block_count(1.0, 0.48)), 3.0);
    check("block_count 0.96", static_cast<double>(mobility::block_count(0.96, 0.48)), 2.0);
    const BitWidths x;
    check("signaling clb", static_cast<double>(signaling_step_cost(SignalingKind::clb, 30, 6, x)), 960.0);
    check("signaling dlb", static_cast<double>(signaling_step_cost(SignalingKind::dlb, 30, 6, x)), 1080.0);
    std::string detail = failed.empty() ? "12 examples reproduced" : "mismatch:";
    for (const auto& f : failed)
        detail += " " + f;
    return {failed.empty(), detail};
}

Outcome criterion9()
{
    Rng rng(9001);
    std::size_t agree = 0;
    double worst = 0.0;
    const std::size_t trials = 1000;
    auto random_matrix = [&](int rows, int cols) {
        radio::CMatrix m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int rr = 0; rr < rows; ++rr)
                m(rr, c) = radio::complex_normal(rng);
        return m;
    };
    for (std::size_t t = 0; t < trials; ++t) {
        const int n_rx = std::uniform_int_distribution<int>(1, 4)(rng);
        const int m_tx = std::uniform_int_distribution<int>(n_rx, 8)(rng);
        const std::size_t others = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
        const std::size_t k = 1 + others;
        const std::size_t j = 1 + std::uniform_int_distribution<std::size_t>(0, 2)(rng);
        std::vector<double> power(j), noise(j, std::uniform_real_distribution<double>(1e-3, 1.0)(rng));
        for (auto& p : power)
            p = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
        radio::LinkSet ls(k, std::vector<Tier>(j, Tier::macro), power, noise);
        std::vector<std::vector<radio::LinkRealization>> links(k);
        for (std::size_t u = 0; u < k; ++u)
            for (std::size_t b = 0; b < j; ++b) {
                const int streams = std::uniform_int_distribution<int>(1, n_rx)(rng);
                links[u].push_back(radio::make_link(random_matrix(n_rx, m_tx), streams));
                ls.set_link(u, b, links[u][b]);
            }
        AssociationVector a(k);
        for (auto& x : a)
            x = std::uniform_int_distribution<std::size_t>(0, j - 1)(rng);

        std::vector<int> total(j, 0);
        for (std::size_t u = 0; u < k; ++u)
            total[a[u]] += links[u][a[u]].streams;
        auto share = [&](std::size_t u) {
            return power[a[u]] * links[u][a[u]].streams / static_cast<double>(total[a[u]]);
        };
        const BsIndex serving = a[0];
        const oracle::Stream desired{links[0][serving].channel, links[0][serving].precoder, share(0)};
        std::vector<oracle::Stream> interferers;
        for (std::size_t u = 1; u < k; ++u)
            interferers.push_back({links[0][a[u]].channel, links[u][a[u]].precoder, share(u)});
        const double want = oracle::determinant_ratio_rate(links[0][serving].combiner, desired, interferers, noise[serving]);
        const double got = ls.link_rate(0, serving, a);
        const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
        worst = std::max(worst, rel);
        agree += rel <= 1e-9;
    }
    std::ostringstream d;
    d << agree << "/1000 links agree, worst relative error " << worst;
    return {agree == trials, d.str()};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion10()
{
    const auto root = std::filesystem::temp_directory_path() / "cellsim_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::size_t identical = 0, compared = 0;
    std::vector<ScenarioConfig> cfgs{scenario("network2", PolicyKind::clb, 11, 120),
                                     scenario("network1", PolicyKind::dlb, 12, 120, mobility::SpeedProfile::bike),
                                     scenario("network1", PolicyKind::wcs, 13, 48),
                                     scenario("network3", PolicyKind::max_sinr, 14, 48)};
    cfgs[0].engine.dump_q = true;
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        const auto a = root / std::to_string(i) / "a";
        const auto b = root / std::to_string(i) / "b";
        output::write_run(output::run_scenario(cfgs[i]), a);
        const auto manifest = json::parse(slurp(a / "manifest.json"));
        output::write_run(output::run_scenario(output::config_from_manifest(manifest)), b);
        for (const auto& entry : std::filesystem::directory_iterator(a)) {
            if (entry.path().extension() != ".csv")
                continue;
            ++compared;
            identical += slurp(entry.path()) == slurp(b / entry.path().filename());
        }
    }
    std::filesystem::remove_all(root);
    return {compared > 0 && identical == compared,
            std::to_string(identical) + "/" + std::to_string(compared) + " CSV files byte-identical"};
}

} // namespace

int main()
{
    using clock = std::chrono::steady_clock;
    bool all = true;
    auto report = [&](int n, const std::function<Outcome()>& f) {
        const auto t0 = clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(clock::now() - t0).count();
        all = all && o.pass;
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << std::fixed
                  << std::setprecision(1) << s << " s) " << o.detail << std::endl;
        std::cout.unsetf(std::ios::fixed);
        std::cout << std::setprecision(6);
    };
    report(8, criterion8);
    report(9, criterion9);
    report(2, criterion2);
    report(3, criterion3);
    report(10, criterion10);
    report(4, criterion4);
    report(5, criterion5);
    MobilityRuns mob;
    report(6, [&] {
        mob = mobility_runs();
        return criterion6(mob);
    });
    report(7, [&] { return mob.ql.empty() ? Outcome{false, "mobility runs missing"} : criterion7(mob); });
    report(1, criterion1);
    std::cout << (all ? "all acceptance criteria pass" : "some acceptance criteria FAIL") << std::endl;
    return all ? 0 : 1;
}
