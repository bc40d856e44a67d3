#pragma once

#include <cstdint>

#include "cellsim/core.hpp"

namespace cellsim {

enum class SignalingKind { clb, dlb, amf, wcs, max_sinr };

/// Message widths in bits.
struct BitWidths {
    std::uint64_t q_value = 16;     // X1: a Q (or U) value
    std::uint64_t assoc = 8;        // X2: a state or BS index
    std::uint64_t rate = 16;        // X3: a rate or SINR report
    std::uint64_t channel_coef = 16; // X4: one channel coefficient

    void validate() const
    {
        if (q_value == 0 || assoc == 0 || rate == 0 || channel_coef == 0)
            throw ConfigError("engine.bits: all widths must be positive");
    }
};

/// Bits exchanged in one learning step (per measurement block for wcs).
/// `bs_antennas` and `ue_antennas` only matter for wcs.
inline std::uint64_t signaling_step_cost(SignalingKind kind, std::uint64_t k, std::uint64_t j, const BitWidths& x,
                                         std::uint64_t bs_antennas = 64, std::uint64_t ue_antennas = 4)
{
    if (x.q_value == 0 || x.assoc == 0 || x.rate == 0 || x.channel_coef == 0)
        throw InvalidInput("signaling_step_cost: widths must be positive");
    switch (kind) {
    case SignalingKind::clb: return k * (x.q_value + 2 * x.assoc);
    case SignalingKind::dlb: return k * (x.q_value + x.assoc + 2 * j);
    case SignalingKind::amf: return k * x.rate;
    case SignalingKind::wcs: return k * j * bs_antennas * ue_antennas * x.channel_coef;
    case SignalingKind::max_sinr: return k * j * x.rate;
    }
    return 0;
}

} // namespace cellsim
