#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellsim/core.hpp"
#include "cellsim/rng.hpp"

namespace cellsim {

struct Position {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct BaseStation {
    Tier tier = Tier::macro;
    Position position;
    int antennas = 64;
    int quota = 1; // stream units
};

/// Streams a UE requests from each tier.
struct StreamDemand {
    int macro = 2;
    int small = 4;

    int toward(Tier t) const { return t == Tier::macro ? macro : small; }
};

struct UserEquipment {
    Position position;
    StreamDemand demand;
};

/// eta_k for every UE: serving BS index or kUnassociated.
using AssociationVector = std::vector<BsIndex>;

/// Quotas and per-(UE, BS) stream demands: everything needed to check
/// the load-balancing constraint.
class LoadSpec {
public:
    LoadSpec() = default;

    LoadSpec(std::vector<int> quotas, std::size_t n_ues, std::vector<int> demand_row_major)
        : quota_(std::move(quotas))
        , k_(n_ues)
        , demand_(std::move(demand_row_major))
    {
        if (demand_.size() != k_ * quota_.size())
            throw InvalidInput("LoadSpec: demand table must be K x J");
        for (int q : quota_)
            if (q < 0)
                throw InvalidInput("LoadSpec: quotas must be nonnegative");
        for (int d : demand_)
            if (d < 1)
                throw InvalidInput("LoadSpec: stream demands must be >= 1");
    }

    static LoadSpec uniform(std::vector<int> quotas, std::size_t n_ues, int demand)
    {
        const std::size_t j = quotas.size();
        return LoadSpec(std::move(quotas), n_ues, std::vector<int>(n_ues * j, demand));
    }

    static LoadSpec from_network(std::span<const BaseStation> bss, std::span<const UserEquipment> ues)
    {
        std::vector<int> quotas;
        for (const auto& b : bss)
            quotas.push_back(b.quota);
        std::vector<int> demand;
        demand.reserve(ues.size() * bss.size());
        for (const auto& u : ues)
            for (const auto& b : bss)
                demand.push_back(u.demand.toward(b.tier));
        return LoadSpec(std::move(quotas), ues.size(), std::move(demand));
    }

    std::size_t ue_count() const { return k_; }
    std::size_t bs_count() const { return quota_.size(); }
    int quota(BsIndex j) const { return quota_[j]; }
    std::span<const int> quotas() const { return quota_; }
    int demand(UeIndex k, BsIndex j) const { return demand_[k * quota_.size() + j]; }

    std::vector<int> loads(std::span<const BsIndex> assoc) const
    {
        check(assoc);
        std::vector<int> out(bs_count(), 0);
        for (UeIndex k = 0; k < k_; ++k)
            if (assoc[k] != kUnassociated)
                out[assoc[k]] += demand(k, assoc[k]);
        return out;
    }

    void check(std::span<const BsIndex> assoc) const
    {
        if (assoc.size() != k_)
            throw InvalidInput("association length " + std::to_string(assoc.size()) + " does not match K = " +
                               std::to_string(k_));
        for (BsIndex b : assoc)
            if (b != kUnassociated && b >= bs_count())
                throw InvalidInput("association refers to unknown BS " + std::to_string(b));
    }

private:
    std::vector<int> quota_;
    std::size_t k_ = 0;
    std::vector<int> demand_;
};

/// Stream units consumed at BS j.
inline int load_of(std::span<const BsIndex> assoc, BsIndex j, const LoadSpec& spec)
{
    spec.check(assoc);
    int load = 0;
    for (UeIndex k = 0; k < assoc.size(); ++k)
        if (assoc[k] == j)
            load += spec.demand(k, j);
    return load;
}

inline bool is_load_balanced(std::span<const BsIndex> assoc, const LoadSpec& spec)
{
    const auto loads = spec.loads(assoc);
    for (BsIndex j = 0; j < loads.size(); ++j)
        if (loads[j] > spec.quota(j))
            return false;
    return true;
}

/// Random order, each UE to a uniformly chosen BS that still fits it.
inline AssociationVector initial_feasible_association(const LoadSpec& spec, Rng& rng)
{
    const std::size_t k_count = spec.ue_count();
    const std::size_t j_count = spec.bs_count();
    AssociationVector assoc(k_count, kUnassociated);
    std::vector<int> remaining(spec.quotas().begin(), spec.quotas().end());

    std::vector<UeIndex> order(k_count);
    std::iota(order.begin(), order.end(), UeIndex{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<BsIndex> open;
    for (UeIndex k : order) {
        open.clear();
        for (BsIndex j = 0; j < j_count; ++j)
            if (remaining[j] >= spec.demand(k, j))
                open.push_back(j);
        if (open.empty())
            continue;
        std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
        const BsIndex j = open[pick(rng)];
        assoc[k] = j;
        remaining[j] -= spec.demand(k, j);
    }
    return assoc;
}

struct BsSite {
    Tier tier = Tier::macro;
    Position position;
    int quota = 1;
};

struct TopologyConfig {
    double area_m = 500.0;
    std::vector<BsSite> sites;
    std::size_t ue_count = 18;
    StreamDemand demand;
    int uniform_demand = 0; // > 0 overrides both tiers

    StreamDemand effective_demand() const
    {
        return uniform_demand > 0 ? StreamDemand{uniform_demand, uniform_demand} : demand;
    }
};

struct NetworkLayout {
    std::vector<BaseStation> base_stations;
    std::vector<UserEquipment> ues;
};

/// Base stations at their configured sites; UEs i.i.d. uniform over the
/// square area (a PPP conditioned on its count).
inline NetworkLayout place_network(const TopologyConfig& cfg, int bs_antennas, Rng& rng)
{
    if (!(cfg.area_m > 0.0))
        throw InvalidInput("place_network: area must be positive");
    NetworkLayout net;
    for (const auto& s : cfg.sites) {
        if (s.quota < 1 || s.quota > bs_antennas)
            throw InvalidInput("place_network: quota must satisfy 1 <= m_j <= M_j");
        net.base_stations.push_back({s.tier, s.position, bs_antennas, s.quota});
    }
    std::uniform_real_distribution<double> coord(0.0, cfg.area_m);
    const StreamDemand d = cfg.effective_demand();
    for (std::size_t k = 0; k < cfg.ue_count; ++k) {
        const double x = coord(rng);
        const double y = coord(rng);
        net.ues.push_back({{x, y}, d});
    }
    return net;
}

} // namespace cellsim
