#pragma once

// Centralized action selection: the CLB mirrors every agent's Q-table,
// owns the visit counts, assembles the network U-table and runs the
// worst-connection-swapping assignment.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cellsim/agent.hpp"
#include "cellsim/core.hpp"
#include "cellsim/topology.hpp"

namespace cellsim::clb {

using ValueTable = agent::Table<double>; // K x J

struct QReport {
    UeIndex ue = 0;
    std::size_t state = 0;
    BsIndex action = 0;
    double q = 0.0;
};

class ClbRecords {
public:
    ClbRecords() = default;
    ClbRecords(std::size_t n_ues, std::size_t n_states, std::size_t n_actions)
        : q_(n_ues, agent::QTable(n_states, n_actions))
        , n_(n_ues, agent::VisitCountTable(n_states, n_actions))
    {
    }

    std::size_t ue_count() const { return q_.size(); }

    /// One-time upload of an agent's full initial Q-table.
    void load_initial(UeIndex k, const agent::QTable& table)
    {
        check_ue(k);
        if (table.rows() != q_[k].rows() || table.cols() != q_[k].cols())
            throw ProtocolError("initial Q-table has the wrong shape");
        q_[k] = table;
    }

    void ingest_q_report(const QReport& r)
    {
        check_ue(r.ue);
        if (!q_[r.ue].in_range(r.state, r.action))
            throw InvalidInput("Q report (state, action) out of range");
        q_[r.ue](r.state, r.action) = r.q;
        agent::visit_increment(n_[r.ue], r.state, r.action);
    }

    const agent::QTable& q(UeIndex k) const { return q_.at(k); }
    const agent::VisitCountTable& n(UeIndex k) const { return n_.at(k); }

private:
    void check_ue(UeIndex k) const
    {
        if (k >= q_.size())
            throw ProtocolError("report from unknown UE " + std::to_string(k));
    }

    std::vector<agent::QTable> q_;
    std::vector<agent::VisitCountTable> n_;
};

/// U[k][j] = ucb(Q_k(s_k, j), N_k(s_k, j), t, c)
inline ValueTable assemble_u_table(const ClbRecords& rec, std::span<const std::size_t> states, std::uint64_t t, double c)
{
    if (states.size() != rec.ue_count())
        throw InvalidInput("assemble_u_table: one state per UE required");
    const std::size_t j_count = rec.ue_count() ? rec.q(0).cols() : 0;
    ValueTable u(rec.ue_count(), j_count);
    for (UeIndex k = 0; k < rec.ue_count(); ++k)
        for (BsIndex j = 0; j < j_count; ++j)
            u(k, j) = agent::ucb_value(rec.q(k)(states[k], j), rec.n(k)(states[k], j), t, c);
    return u;
}

struct WcsOptions {
    std::size_t max_iterations = 0; // 0 selects 50 K
};

struct WcsResult {
    AssociationVector assoc;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool hit_cap = false;
    std::vector<double> best_trace; // best objective after each iteration
};

/// Sum_k values[k][eta_k]; unassociated UEs contribute 0.
inline double association_value(const ValueTable& values, std::span<const BsIndex> assoc)
{
    double total = 0.0;
    for (UeIndex k = 0; k < assoc.size(); ++k)
        if (assoc[k] != kUnassociated)
            total += values(k, assoc[k]);
    return total;
}

namespace detail {

inline double value_at(const ValueTable& v, UeIndex k, BsIndex j) { return j == kUnassociated ? 0.0 : v(k, j); }

inline bool fits(const LoadSpec& spec, std::span<const int> loads, BsIndex j, int delta)
{
    return j == kUnassociated || loads[j] + delta <= spec.quota(j);
}

inline int demand_at(const LoadSpec& spec, UeIndex k, BsIndex j) { return j == kUnassociated ? 0 : spec.demand(k, j); }

/// Can UEs a and b exchange their serving BSs without breaking a quota?
inline bool swap_feasible(const LoadSpec& spec, std::span<const int> loads, std::span<const BsIndex> assoc, UeIndex a,
                          UeIndex b)
{
    const BsIndex ja = assoc[a];
    const BsIndex jb = assoc[b];
    if (ja == jb)
        return true;
    return fits(spec, loads, ja, demand_at(spec, b, ja) - demand_at(spec, a, ja)) &&
           fits(spec, loads, jb, demand_at(spec, a, jb) - demand_at(spec, b, jb));
}

inline void apply_swap(const LoadSpec& spec, std::vector<int>& loads, AssociationVector& assoc, UeIndex a, UeIndex b)
{
    const BsIndex ja = assoc[a];
    const BsIndex jb = assoc[b];
    if (ja == jb)
        return;
    if (ja != kUnassociated)
        loads[ja] += spec.demand(b, ja) - spec.demand(a, ja);
    if (jb != kUnassociated)
        loads[jb] += spec.demand(a, jb) - spec.demand(b, jb);
    std::swap(assoc[a], assoc[b]);
}

inline void apply_move(const LoadSpec& spec, std::vector<int>& loads, AssociationVector& assoc, UeIndex k, BsIndex to)
{
    const BsIndex from = assoc[k];
    if (from != kUnassociated)
        loads[from] -= spec.demand(k, from);
    if (to != kUnassociated)
        loads[to] += spec.demand(k, to);
    assoc[k] = to;
}

inline UeIndex worst_connection(const ValueTable& v, std::span<const BsIndex> assoc)
{
    UeIndex worst = 0;
    double lowest = value_at(v, 0, assoc[0]);
    for (UeIndex k = 1; k < assoc.size(); ++k) {
        const double x = value_at(v, k, assoc[k]);
        if (x < lowest) {
            lowest = x;
            worst = k;
        }
    }
    return worst;
}

} // namespace detail

/// Worst-connection swapping. Starting from a load-balanced `init`, each
/// iteration swaps the lowest-valued connection with whichever other
/// connection (or free capacity) raises the total most; when nothing
/// improves, the worst UE is switched with a rotating partner to leave the
/// local optimum. Stops once the best association survives K consecutive
/// iterations. Swaps and moves that break a quota are never taken, and the
/// best association seen is returned.
inline WcsResult wcs_assign(const ValueTable& values, const LoadSpec& spec, AssociationVector init,
                            WcsOptions opt = {})
{
    const std::size_t k_count = spec.ue_count();
    const std::size_t j_count = spec.bs_count();
    if (values.rows() != k_count || values.cols() != j_count)
        throw InvalidInput("wcs: value table must be K x J");
    if (!is_load_balanced(init, spec))
        throw PreconditionError("wcs: initial association violates a quota");

    WcsResult res;
    res.assoc = init;
    res.objective = association_value(values, init);
    if (k_count == 0)
        return res;

    const std::size_t cap = opt.max_iterations ? opt.max_iterations : 50 * k_count;
    AssociationVector cur = std::move(init);
    std::vector<int> loads = spec.loads(cur);
    double cur_value = res.objective;
    std::size_t switch_counter = 1;
    std::size_t unchanged = 0;
    UeIndex worst = detail::worst_connection(values, cur);

    while (unchanged < k_count) {
        if (res.iterations >= cap) {
            res.hit_cap = true;
            break;
        }
        ++res.iterations;

        // best single swap or move of the worst connection
        const BsIndex jw = cur[worst];
        const double vw = detail::value_at(values, worst, jw);
        double best_delta = 0.0;
        enum class Kind { none, swap, move } kind = Kind::none;
        std::size_t target = 0;
        for (UeIndex n = 0; n < k_count; ++n) {
            if (n == worst || cur[n] == jw)
                continue;
            if (!detail::swap_feasible(spec, loads, cur, worst, n))
                continue;
            const BsIndex jn = cur[n];
            const double delta = detail::value_at(values, worst, jn) + detail::value_at(values, n, jw) - vw -
                                 detail::value_at(values, n, jn);
            if (delta > best_delta) {
                best_delta = delta;
                kind = Kind::swap;
                target = n;
            }
        }
        for (BsIndex j = 0; j <= j_count; ++j) {
            const BsIndex to = j == j_count ? kUnassociated : j;
            if (to == jw || !detail::fits(spec, loads, to, detail::demand_at(spec, worst, to)))
                continue;
            const double delta = detail::value_at(values, worst, to) - vw;
            if (delta > best_delta) {
                best_delta = delta;
                kind = Kind::move;
                target = to;
            }
        }

        if (kind == Kind::swap)
            detail::apply_swap(spec, loads, cur, worst, target);
        else if (kind == Kind::move)
            detail::apply_move(spec, loads, cur, worst, target);
        cur_value += best_delta;
        worst = detail::worst_connection(values, cur);

        if (kind == Kind::none) {
            const UeIndex partner = (switch_counter - 1) % k_count;
            ++switch_counter;
            if (partner != worst && detail::swap_feasible(spec, loads, cur, worst, partner)) {
                // the next swap round still works on the same UE index
                detail::apply_swap(spec, loads, cur, worst, partner);
                cur_value = association_value(values, cur);
            }
        }

        if (cur_value > res.objective) {
            res.objective = cur_value;
            res.assoc = cur;
            unchanged = 0;
        } else {
            ++unchanged;
        }
        res.best_trace.push_back(res.objective);
    }
    res.objective = association_value(values, res.assoc);
    return res;
}

/// Centralized action selection on a network U-table.
inline WcsResult wcs_clb(const ValueTable& u, const LoadSpec& spec, AssociationVector init, WcsOptions opt = {})
{
    return wcs_assign(u, spec, std::move(init), opt);
}

} // namespace cellsim::clb
