#pragma once

// Modified random waypoint mobility and the measurement-block clock.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellsim/core.hpp"
#include "cellsim/rng.hpp"
#include "cellsim/topology.hpp"

namespace cellsim::mobility {

enum class SpeedProfile { static_, walk, bike, drive };

inline const char* to_string(SpeedProfile p)
{
    switch (p) {
    case SpeedProfile::static_: return "static";
    case SpeedProfile::walk: return "walk";
    case SpeedProfile::bike: return "bike";
    case SpeedProfile::drive: return "drive";
    }
    return "?";
}

inline std::optional<SpeedProfile> parse_speed(const std::string& s)
{
    if (s == "static") return SpeedProfile::static_;
    if (s == "walk") return SpeedProfile::walk;
    if (s == "bike") return SpeedProfile::bike;
    if (s == "drive") return SpeedProfile::drive;
    return std::nullopt;
}

/// Fixed speed of a named profile in m/s (0 for static).
inline double profile_speed(SpeedProfile p)
{
    switch (p) {
    case SpeedProfile::static_: return 0.0;
    case SpeedProfile::walk: return 6.0 / 3.6;
    case SpeedProfile::bike: return 17.0 / 3.6;
    case SpeedProfile::drive: return 40.0 / 3.6;
    }
    return 0.0;
}

struct MobilityParams {
    double v_max = 6.0 / 3.6;   // m/s
    double v_min = 6.0 / 3.6;   // velocity ~ U(v_min, v_max]; equal bounds fix the speed
    double intensity = 1e-3;    // waypoint PPP points per m^2
    double pause_min_s = 0.0;
    double pause_max_s = 2.0;
    double block_s = 0.48;      // t^MB
    double moving_fraction = 0.3;
    double area_m = 500.0;

    void validate() const
    {
        if (!(v_max > 0.0))
            throw ConfigError("mobility.v_max must be > 0");
        if (v_min < 0.0 || v_min > v_max)
            throw ConfigError("mobility.v_min must lie in [0, v_max]");
        if (!(intensity > 0.0))
            throw ConfigError("mobility.intensity must be > 0");
        if (!(block_s > 0.0))
            throw ConfigError("mobility.block_s must be > 0");
        if (pause_min_s < 0.0 || pause_max_s < pause_min_s)
            throw ConfigError("mobility: pause range must satisfy 0 <= pause_min_s <= pause_max_s");
        if (moving_fraction < 0.0 || moving_fraction > 1.0)
            throw ConfigError("mobility.moving_fraction must lie in [0, 1]");
        if (!(area_m > 0.0))
            throw ConfigError("mobility.area_m must be > 0");
    }
};

/// B = ceil(T / t_MB)
inline long block_count(double transition_s, double block_s)
{
    if (!(transition_s > 0.0) || !(block_s > 0.0))
        throw InvalidInput("block_count: transition time and block duration must be positive");
    return static_cast<long>(std::ceil(transition_s / block_s));
}

struct MovingStep {
    Position source;
    Position target;
    double velocity = 0.0; // m/s
    double pause_s = 0.0;
    double length_m = 0.0;
    double transition_s = 0.0;
    long blocks = 1;
};

inline MovingStep make_step(Position source, Position target, double velocity, double pause_s, double block_s)
{
    MovingStep s;
    s.source = source;
    s.target = target;
    s.velocity = velocity;
    s.pause_s = pause_s;
    s.length_m = distance(source, target);
    s.transition_s = s.length_m / velocity;
    // a zero-length hop still occupies one block
    s.blocks = s.transition_s > 0.0 ? block_count(s.transition_s, block_s) : 1;
    return s;
}

/// Nearest point of `points` to `source`.
inline Position nearest_point(Position source, std::span<const Position> points)
{
    if (points.empty())
        throw InvalidInput("nearest_point: empty point set");
    Position best = points.front();
    double best_d = distance(source, best);
    for (const auto& p : points.subspan(1)) {
        const double d = distance(source, p);
        if (d < best_d) {
            best_d = d;
            best = p;
        }
    }
    return best;
}

/// Homogeneous PPP on the square area; redrawn until nonempty.
inline std::vector<Position> draw_ppp(double intensity, double area_m, Rng& rng)
{
    std::poisson_distribution<long> count(intensity * area_m * area_m);
    std::uniform_real_distribution<double> coord(0.0, area_m);
    for (;;) {
        const long n = count(rng);
        if (n == 0)
            continue;
        std::vector<Position> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) {
            const double x = coord(rng);
            const double y = coord(rng);
            pts.push_back({x, y});
        }
        return pts;
    }
}

inline double draw_velocity(const MobilityParams& p, Rng& rng)
{
    if (p.v_min >= p.v_max)
        return p.v_max;
    // U(v_min, v_max]
    std::uniform_real_distribution<double> u(p.v_min, p.v_max);
    double v = u(rng);
    if (v <= p.v_min)
        v = p.v_max;
    return v;
}

struct Waypoint {
    Position target;
    double velocity = 0.0;
    double pause_s = 0.0;
};

inline Waypoint next_waypoint(Position source, const MobilityParams& p, Rng& rng)
{
    const auto pts = draw_ppp(p.intensity, p.area_m, rng);
    Waypoint w;
    w.target = nearest_point(source, pts);
    w.target.x = std::clamp(w.target.x, 0.0, p.area_m);
    w.target.y = std::clamp(w.target.y, 0.0, p.area_m);
    w.velocity = draw_velocity(p, rng);
    std::uniform_real_distribution<double> pause(p.pause_min_s, p.pause_max_s);
    w.pause_s = p.pause_max_s > p.pause_min_s ? pause(rng) : p.pause_min_s;
    return w;
}

/// Position `elapsed` seconds into a step: straight-line travel, then rest at the target.
inline Position advance(const MovingStep& step, double elapsed_s)
{
    if (elapsed_s <= 0.0 || step.length_m == 0.0)
        return elapsed_s <= 0.0 ? step.source : step.target;
    if (elapsed_s >= step.transition_s)
        return step.target;
    const double f = elapsed_s / step.transition_s;
    return {step.source.x + f * (step.target.x - step.source.x), step.source.y + f * (step.target.y - step.source.y)};
}

/// floor(fraction * K) distinct UEs, ascending.
inline std::vector<UeIndex> select_movers(std::size_t n_ues, double fraction, Rng& rng)
{
    if (fraction < 0.0 || fraction > 1.0)
        throw InvalidInput("select_movers: fraction must lie in [0, 1]");
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_ues) + 1e-9));
    std::vector<UeIndex> all(n_ues);
    std::iota(all.begin(), all.end(), UeIndex{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace cellsim::mobility
