#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cellsim {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream tags for child generators derived from the master seed.
enum class Stream : std::uint64_t {
    placement = 1,
    mobility = 2,
    channel = 3,
    q_init = 4,
    initial_association = 5,
    movers = 6,
    large_scale = 7,
};

/// Derives an independent generator from (master seed, stream, indices).
/// The result does not depend on the order in which streams are requested.
inline Rng derive_rng(std::uint64_t master, Stream stream, std::initializer_list<std::uint64_t> ids = {})
{
    std::uint64_t h = mix64(master ^ mix64(static_cast<std::uint64_t>(stream)));
    for (auto id : ids)
        h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
    return Rng{h};
}

} // namespace cellsim
