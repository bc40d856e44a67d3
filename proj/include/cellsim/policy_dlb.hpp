#pragma once

// Distributed action selection: per-BS U-tables fed by UE reports, preference
// lists on both sides and a quota-respecting deferred-acceptance game.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cellsim/agent.hpp"
#include "cellsim/core.hpp"
#include "cellsim/topology.hpp"

namespace cellsim::dlb {

using PreferenceList = std::vector<std::size_t>;

/// One BS's view: |S| x K table, column k holding UE k's latest report for
/// this BS. Cells go stale while the UE is served elsewhere.
class BsUTable {
public:
    BsUTable() = default;
    BsUTable(std::size_t n_states, std::size_t n_ues)
        : u_(n_states, n_ues)
    {
    }

    std::size_t state_count() const { return u_.rows(); }
    std::size_t ue_count() const { return u_.cols(); }

    void ingest_u_report(UeIndex k, std::size_t s, double u)
    {
        if (k >= u_.cols())
            throw ProtocolError("U report from unknown UE " + std::to_string(k));
        if (s >= u_.rows())
            throw InvalidInput("U report state out of range");
        u_(s, k) = u;
    }

    double value(std::size_t s, UeIndex k) const { return u_(s, k); }

    /// Current U-value of every UE given each UE's present state.
    std::vector<double> current(std::span<const std::size_t> states) const
    {
        if (states.size() != u_.cols())
            throw InvalidInput("BsUTable::current: one state per UE required");
        std::vector<double> out(states.size());
        for (UeIndex k = 0; k < states.size(); ++k)
            out[k] = u_(states[k], k);
        return out;
    }

private:
    agent::Table<double> u_;
};

/// Indices sorted by value descending, lower index first on ties.
inline PreferenceList sort_descending(std::span<const double> values)
{
    PreferenceList order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return order;
}

inline PreferenceList build_ue_preferences(const agent::AgentLearningState& agent, std::uint64_t t, double c)
{
    const auto u = agent.u_row(t, c);
    return sort_descending(u);
}

inline PreferenceList build_bs_preferences(const BsUTable& table, std::span<const std::size_t> states)
{
    const auto u = table.current(states);
    return sort_descending(u);
}

struct DaResult {
    AssociationVector assoc;
    std::size_t rounds = 0;
    std::size_t applications = 0;
    bool waitlists_within_quota = true; // checked after every round
};

/// Deferred acceptance. Every free UE applies to the next BS on its list;
/// each BS keeps its most-preferred applicants (old waitlist plus new
/// applications) that fit within its stream quota and rejects the rest.
/// Rejected UEs move one place down their list and drop out once it is
/// exhausted.
inline DaResult da_match(std::span<const PreferenceList> ue_prefs, std::span<const PreferenceList> bs_prefs,
                         const LoadSpec& spec)
{
    const std::size_t k_count = spec.ue_count();
    const std::size_t j_count = spec.bs_count();
    if (ue_prefs.size() != k_count || bs_prefs.size() != j_count)
        throw InvalidInput("da_match: one preference list per UE and per BS required");

    // rank[j][k]: position of UE k on BS j's list
    std::vector<std::vector<std::size_t>> rank(j_count, std::vector<std::size_t>(k_count, k_count));
    for (BsIndex j = 0; j < j_count; ++j) {
        if (bs_prefs[j].size() != k_count)
            throw InvalidInput("da_match: BS preference list must rank every UE");
        for (std::size_t pos = 0; pos < k_count; ++pos) {
            const UeIndex k = bs_prefs[j][pos];
            if (k >= k_count || rank[j][k] != k_count)
                throw InvalidInput("da_match: BS preference list is not a permutation");
            rank[j][k] = pos;
        }
    }
    for (const auto& p : ue_prefs)
        for (BsIndex j : p)
            if (j >= j_count)
                throw InvalidInput("da_match: UE preference list names an unknown BS");

    DaResult res;
    res.assoc.assign(k_count, kUnassociated);
    std::vector<std::size_t> next(k_count, 0);
    std::vector<std::vector<UeIndex>> waitlist(j_count);
    std::vector<UeIndex> free_ues;
    for (UeIndex k = 0; k < k_count; ++k)
        if (!ue_prefs[k].empty())
            free_ues.push_back(k);

    std::vector<std::vector<UeIndex>> pool(j_count);
    while (!free_ues.empty()) {
        ++res.rounds;
        for (auto& p : pool)
            p.clear();
        for (UeIndex k : free_ues) {
            pool[ue_prefs[k][next[k]]].push_back(k);
            ++res.applications;
        }

        std::vector<UeIndex> rejected;
        for (BsIndex j = 0; j < j_count; ++j) {
            if (pool[j].empty())
                continue;
            auto& cand = pool[j];
            cand.insert(cand.end(), waitlist[j].begin(), waitlist[j].end());
            std::sort(cand.begin(), cand.end(), [&](UeIndex a, UeIndex b) { return rank[j][a] < rank[j][b]; });
            waitlist[j].clear();
            int load = 0;
            for (UeIndex k : cand) {
                const int d = spec.demand(k, j);
                if (load + d <= spec.quota(j)) {
                    waitlist[j].push_back(k);
                    load += d;
                } else {
                    rejected.push_back(k);
                }
            }
            if (load > spec.quota(j))
                res.waitlists_within_quota = false;
        }

        free_ues.clear();
        std::sort(rejected.begin(), rejected.end());
        for (UeIndex k : rejected)
            if (++next[k] < ue_prefs[k].size())
                free_ues.push_back(k);
    }

    for (BsIndex j = 0; j < j_count; ++j)
        for (UeIndex k : waitlist[j])
            res.assoc[k] = j;
    return res;
}

} // namespace cellsim::dlb
