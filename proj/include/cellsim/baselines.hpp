#pragma once

// Non-learning comparators.

#include <algorithm>
#include <vector>

#include "cellsim/core.hpp"
#include "cellsim/policy_clb.hpp"
#include "cellsim/topology.hpp"

namespace cellsim::baselines {

using ValueTable = clb::ValueTable;

/// Every UE points at its highest-SINR BS. An overloaded BS keeps its
/// strongest UEs that fit and drops the rest.
inline AssociationVector max_sinr_association(const ValueTable& sinr, const LoadSpec& spec)
{
    const std::size_t k_count = spec.ue_count();
    const std::size_t j_count = spec.bs_count();
    if (sinr.rows() != k_count || sinr.cols() != j_count)
        throw InvalidInput("max_sinr_association: SINR table must be K x J");

    AssociationVector assoc(k_count, kUnassociated);
    if (j_count == 0)
        return assoc;
    std::vector<std::vector<UeIndex>> wanted(j_count);
    for (UeIndex k = 0; k < k_count; ++k)
        wanted[agent::argmax_lowest(sinr.row(k))].push_back(k);

    for (BsIndex j = 0; j < j_count; ++j) {
        auto& ues = wanted[j];
        std::stable_sort(ues.begin(), ues.end(), [&](UeIndex a, UeIndex b) { return sinr(a, j) > sinr(b, j); });
        int load = 0;
        for (UeIndex k : ues) {
            if (load + spec.demand(k, j) > spec.quota(j))
                continue;
            load += spec.demand(k, j);
            assoc[k] = j;
        }
    }
    return assoc;
}

/// The swap heuristic run directly on a per-link rate table.
inline clb::WcsResult wcs_rate_association(const ValueTable& rates, const LoadSpec& spec, AssociationVector init,
                                           clb::WcsOptions opt = {})
{
    return clb::wcs_assign(rates, spec, std::move(init), opt);
}

} // namespace cellsim::baselines
