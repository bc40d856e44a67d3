#pragma once

// Channel realizations, eigenbeamforming and the interference-coupled MIMO
// rate of a UE under a given association.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellsim/core.hpp"
#include "cellsim/rng.hpp"

namespace cellsim::radio {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
// Stream-domain matrices never exceed 4x4 (the largest UE array).
using SmallCMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

/// PL[dB] = intercept + distance_slope * log10(d / 1 m) + frequency_slope * log10(f / 1 GHz)
struct PathLossCoefficients {
    double intercept_db = 0.0;
    double distance_slope_db = 0.0;
    double frequency_slope_db = 0.0;
};

struct TierRadio {
    double carrier_hz = 0.0;
    double bandwidth_hz = 0.0;
    double tx_power_dbm = 0.0;
    PathLossCoefficients los;
    PathLossCoefficients nlos;
    // LoS probability: 1 for d <= breakpoint, else bp/d + exp(-d/decay) * (1 - bp/d)
    double los_breakpoint_m = 18.0;
    double los_decay_m = 36.0;
    int ue_antennas = 1;
    int bs_rows = 8;
    int bs_cols = 8;
    double bs_height_m = 10.0;

    int bs_antennas() const { return bs_rows * bs_cols; }
};

struct RadioParams {
    // 3GPP TR 38.901 UMa at 1.8 GHz with 2-antenna UEs
    TierRadio macro{
        .carrier_hz = 1.8e9,
        .bandwidth_hz = 20e6,
        .tx_power_dbm = 45.0,
        .los = {28.0, 22.0, 20.0},
        .nlos = {13.54, 39.08, 20.0},
        .los_breakpoint_m = 18.0,
        .los_decay_m = 63.0,
        .ue_antennas = 2,
        .bs_rows = 8,
        .bs_cols = 8,
        .bs_height_m = 25.0,
    };
    // 38.901 UMi street canyon at 28 GHz with 4-antenna UEs
    TierRadio small{
        .carrier_hz = 28e9,
        .bandwidth_hz = 400e6,
        .tx_power_dbm = 35.0,
        .los = {32.4, 21.0, 20.0},
        .nlos = {22.4, 35.3, 21.3},
        .los_breakpoint_m = 18.0,
        .los_decay_m = 36.0,
        .ue_antennas = 4,
        .bs_rows = 8,
        .bs_cols = 8,
        .bs_height_m = 10.0,
    };
    double noise_psd_dbm_hz = -174.0;
    double ue_height_m = 1.5;
    int clusters = 5;
    int rays_per_cluster = 10;
    double cluster_decay_db = 3.0;       // power drop between consecutive clusters
    double angular_spread_deg = 5.0;     // Laplacian per-ray offset
    double sector_half_width_deg = 60.0; // cluster centers uniform in +-this azimuth

    const TierRadio& tier(Tier t) const { return t == Tier::macro ? macro : small; }

    /// Noise power over the tier bandwidth, watts.
    double noise_power_w(Tier t) const { return dbm_to_watts(noise_psd_dbm_hz) * tier(t).bandwidth_hz; }

    void validate() const
    {
        for (const TierRadio* tr : {&macro, &small}) {
            if (!std::isfinite(tr->tx_power_dbm))
                throw ConfigError("radio: transmit power must be finite");
            if (!(tr->carrier_hz > 0.0) || !(tr->bandwidth_hz > 0.0))
                throw ConfigError("radio: carrier and bandwidth must be positive");
            if (tr->ue_antennas < 1 || tr->bs_rows < 1 || tr->bs_cols < 1)
                throw ConfigError("radio: antenna counts must be >= 1");
        }
        if (!std::isfinite(noise_psd_dbm_hz))
            throw ConfigError("radio: noise_psd_dbm_hz must be finite");
        if (clusters < 1)
            throw ConfigError("radio: clusters must be >= 1");
        if (rays_per_cluster < 1)
            throw ConfigError("radio: rays_per_cluster must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Large-scale propagation

inline double path_loss(const TierRadio& tr, double distance_m, bool los)
{
    if (!(distance_m > 0.0))
        throw InvalidInput("path_loss: distance must be positive, got " + std::to_string(distance_m));
    const double fghz = tr.carrier_hz / 1e9;
    auto eval = [&](const PathLossCoefficients& c) {
        return c.intercept_db + c.distance_slope_db * std::log10(distance_m) + c.frequency_slope_db * std::log10(fghz);
    };
    const double pl_los = eval(tr.los);
    if (los)
        return pl_los;
    return std::max(pl_los, eval(tr.nlos));
}

inline double path_loss(const RadioParams& p, double distance_m, Tier tier, bool los)
{
    return path_loss(p.tier(tier), distance_m, los);
}

inline double los_probability(const TierRadio& tr, double distance_m)
{
    if (!(distance_m > 0.0))
        throw InvalidInput("los_probability: distance must be positive");
    const double bp = tr.los_breakpoint_m;
    if (distance_m <= bp)
        return 1.0;
    const double r = bp / distance_m;
    return r + std::exp(-distance_m / tr.los_decay_m) * (1.0 - r);
}

inline double los_probability(const RadioParams& p, double distance_m, Tier tier)
{
    return los_probability(p.tier(tier), distance_m);
}

// ---------------------------------------------------------------------------
// Small-scale fading

inline cd complex_normal(Rng& rng)
{
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

/// i.i.d. CN(0,1) entries scaled by the path-loss amplitude.
inline CMatrix gen_sub6_channel(const RadioParams& p, Tier bs_tier, double amplitude, Rng& rng)
{
    if (bs_tier != Tier::macro)
        throw InvalidPairing("gen_sub6_channel: sub-6 links are only defined toward macro base stations");
    const int rows = p.macro.ue_antennas;
    const int cols = p.macro.bs_antennas();
    CMatrix h(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r)
            h(r, c) = amplitude * complex_normal(rng);
    return h;
}

/// Half-wavelength uniform planar array, unit-modulus entries.
/// Elevation is measured from zenith; broadside is (az = 0, el = pi/2).
inline CVector upa_response(int rows, int cols, double azimuth, double elevation)
{
    CVector a(rows * cols);
    const double u = std::numbers::pi * std::sin(azimuth) * std::sin(elevation);
    const double v = std::numbers::pi * std::cos(elevation);
    for (int m = 0; m < rows; ++m)
        for (int n = 0; n < cols; ++n)
            a(m * cols + n) = std::polar(1.0, m * v + n * u);
    return a;
}

/// Half-wavelength uniform linear array, unit-modulus entries.
inline CVector ula_response(int n, double azimuth)
{
    CVector a(n);
    const double u = std::numbers::pi * std::sin(azimuth);
    for (int i = 0; i < n; ++i)
        a(i) = std::polar(1.0, i * u);
    return a;
}

struct Ray {
    cd gain;
    double aod_azimuth = 0.0;
    double aod_elevation = std::numbers::pi / 2;
    double aoa_azimuth = 0.0;
};

/// H = amplitude * sum_r gain_r * a_rx(aoa_r) a_tx(aod_r)^H
inline CMatrix clustered_channel(int ue_antennas, int bs_rows, int bs_cols, std::span<const Ray> rays, double amplitude)
{
    CMatrix h = CMatrix::Zero(ue_antennas, bs_rows * bs_cols);
    for (const auto& ray : rays) {
        const CVector arx = ula_response(ue_antennas, ray.aoa_azimuth);
        const CVector atx = upa_response(bs_rows, bs_cols, ray.aod_azimuth, ray.aod_elevation);
        h.noalias() += ray.gain * arx * atx.adjoint();
    }
    return amplitude * h;
}

inline double laplacian(Rng& rng, double spread)
{
    // std deviation = spread
    const double b = spread / std::sqrt(2.0);
    std::exponential_distribution<double> e(1.0 / b);
    std::bernoulli_distribution sign(0.5);
    const double x = e(rng);
    return sign(rng) ? x : -x;
}

/// Cluster geometry with exponentially decaying, normalized cluster powers
/// (sum of ray powers = 1). Gains hold the ray amplitude only; small-scale
/// phases and fading come from apply_ray_fading.
inline std::vector<Ray> draw_mmwave_geometry(const RadioParams& p, Rng& rng)
{
    std::vector<double> cluster_power(p.clusters);
    double total = 0.0;
    for (int c = 0; c < p.clusters; ++c) {
        cluster_power[c] = db_to_linear(-p.cluster_decay_db * c);
        total += cluster_power[c];
    }
    const double half = p.sector_half_width_deg * std::numbers::pi / 180.0;
    const double spread = p.angular_spread_deg * std::numbers::pi / 180.0;
    std::uniform_real_distribution<double> az(-half, half);
    // elevation centers within +-15 degrees of the horizon
    std::uniform_real_distribution<double> el(std::numbers::pi / 2 - std::numbers::pi / 12,
                                              std::numbers::pi / 2 + std::numbers::pi / 12);

    std::vector<Ray> rays;
    rays.reserve(static_cast<std::size_t>(p.clusters * p.rays_per_cluster));
    for (int c = 0; c < p.clusters; ++c) {
        const double aod_az = az(rng);
        const double aod_el = el(rng);
        const double aoa_az = az(rng);
        const double ray_power = cluster_power[c] / total / p.rays_per_cluster;
        for (int r = 0; r < p.rays_per_cluster; ++r) {
            Ray ray;
            ray.gain = std::sqrt(ray_power);
            ray.aod_azimuth = aod_az + laplacian(rng, spread);
            ray.aod_elevation = aod_el + laplacian(rng, spread);
            ray.aoa_azimuth = aoa_az + laplacian(rng, spread);
            rays.push_back(ray);
        }
    }
    return rays;
}

/// Multiplies every ray gain by an independent CN(0,1) coefficient.
inline void apply_ray_fading(std::vector<Ray>& rays, Rng& rng)
{
    for (auto& r : rays)
        r.gain *= complex_normal(rng);
}

inline std::vector<Ray> draw_mmwave_rays(const RadioParams& p, Rng& rng)
{
    auto rays = draw_mmwave_geometry(p, rng);
    apply_ray_fading(rays, rng);
    return rays;
}

inline CMatrix gen_mmwave_channel(const RadioParams& p, Tier bs_tier, double amplitude, Rng& rng)
{
    if (bs_tier != Tier::small)
        throw InvalidPairing("gen_mmwave_channel: mmWave links are only defined toward small-cell base stations");
    const auto rays = draw_mmwave_rays(p, rng);
    return clustered_channel(p.small.ue_antennas, p.small.bs_rows, p.small.bs_cols, rays, amplitude);
}

/// One (UE, BS) link at the given 3-D distance. `large` draws the LoS state
/// and the cluster geometry, `small` the fading; keeping `large` fixed while
/// a UE stands still holds its propagation environment fixed.
inline CMatrix gen_channel(const RadioParams& p, Tier bs_tier, double distance_m, Rng& large, Rng& small,
                           bool* los_out = nullptr)
{
    std::bernoulli_distribution los_draw(los_probability(p, distance_m, bs_tier));
    const bool los = los_draw(large);
    if (los_out)
        *los_out = los;
    const double amplitude = std::pow(10.0, -path_loss(p, distance_m, bs_tier, los) / 20.0);
    if (bs_tier == Tier::macro)
        return gen_sub6_channel(p, bs_tier, amplitude, small);
    auto rays = draw_mmwave_geometry(p, large);
    apply_ray_fading(rays, small);
    return clustered_channel(p.small.ue_antennas, p.small.bs_rows, p.small.bs_cols, rays, amplitude);
}

inline CMatrix gen_channel(const RadioParams& p, Tier bs_tier, double distance_m, Rng& rng, bool* los_out = nullptr)
{
    return gen_channel(p, bs_tier, distance_m, rng, rng, los_out);
}

// ---------------------------------------------------------------------------
// Beamforming

struct Beamformers {
    CMatrix precoder; // M x n, ||F||_F^2 = power share, equal per-stream power
    CMatrix combiner; // N x n, orthonormal columns
    int streams = 0;
    bool rank_reduced = false;
};

inline Beamformers eigen_beamformers(const CMatrix& h, int n_streams, double power_share)
{
    if (n_streams < 1)
        throw InvalidInput("eigen_beamformers: n_streams must be >= 1");
    if (!(power_share > 0.0))
        throw InvalidInput("eigen_beamformers: power_share must be positive");
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const int max_rank = static_cast<int>(sv.size());
    int rank = 0;
    const double tol = sv.size() > 0 ? sv(0) * 1e-10 * std::max(h.rows(), h.cols()) : 0.0;
    for (int i = 0; i < max_rank; ++i)
        if (sv(i) > tol)
            ++rank;

    Beamformers bf;
    bf.streams = std::min(n_streams, std::max(rank, 1));
    bf.rank_reduced = bf.streams < n_streams;
    const double per_stream = std::sqrt(power_share / bf.streams);
    bf.precoder = svd.matrixV().leftCols(bf.streams) * per_stream;
    bf.combiner = svd.matrixU().leftCols(bf.streams);
    return bf;
}

// ---------------------------------------------------------------------------
// Link set for one measurement block

struct LinkRealization {
    CMatrix channel;   // N_k x M_j
    CMatrix precoder;  // unit-power direction: M_j x n, ||.||_F = 1
    CMatrix combiner;  // N_k x n
    int streams = 0;
    bool rank_reduced = false;
};

inline LinkRealization make_link(CMatrix channel, int demand_streams)
{
    auto bf = eigen_beamformers(channel, demand_streams, 1.0);
    LinkRealization l;
    l.channel = std::move(channel);
    l.precoder = std::move(bf.precoder);
    l.combiner = std::move(bf.combiner);
    l.streams = bf.streams;
    l.rank_reduced = bf.rank_reduced;
    return l;
}

struct LinkEvaluation {
    double rate = 0.0;         // bits/s/Hz
    std::vector<double> sinr;  // per stream, linear
    double mean_sinr() const
    {
        if (sinr.empty())
            return 0.0;
        double s = 0.0;
        for (double x : sinr)
            s += x;
        return s / static_cast<double>(sinr.size());
    }
};

/// All (UE, BS) links of one measurement block. Lazily caches
/// stream-domain cross gains, so an instance must not be shared between
/// threads.
class LinkSet {
public:
    LinkSet(std::size_t n_ues, std::vector<Tier> bs_tiers, std::vector<double> tx_power_w, std::vector<double> noise_w)
        : k_(n_ues)
        , j_(bs_tiers.size())
        , tiers_(std::move(bs_tiers))
        , power_(std::move(tx_power_w))
        , noise_(std::move(noise_w))
        , links_(k_ * j_)
        , cross_(k_ * j_ * k_ * j_)
        , cross_ready_(k_ * j_ * k_ * j_, 0)
    {
        if (power_.size() != j_ || noise_.size() != j_)
            throw InvalidInput("LinkSet: per-BS power and noise vectors must match the BS count");
    }

    std::size_t ue_count() const { return k_; }
    std::size_t bs_count() const { return j_; }
    Tier tier(BsIndex j) const { return tiers_[j]; }
    double tx_power(BsIndex j) const { return power_[j]; }
    double noise(BsIndex j) const { return noise_[j]; }

    void set_link(UeIndex k, BsIndex j, LinkRealization link)
    {
        links_.at(k * j_ + j) = std::move(link);
        if (cache_used_) {
            std::fill(cross_ready_.begin(), cross_ready_.end(), 0);
            cache_used_ = false;
        }
    }

    bool has_link(UeIndex k, BsIndex j) const { return links_[k * j_ + j].has_value(); }

    const LinkRealization& link(UeIndex k, BsIndex j) const
    {
        const auto& l = links_.at(k * j_ + j);
        if (!l)
            throw InternalError("missing link realization for UE " + std::to_string(k) + ", BS " + std::to_string(j));
        return *l;
    }

    /// Stream count each BS transmits under `assoc`, with UE `k` moved to `j`.
    std::vector<int> active_streams(std::span<const BsIndex> assoc, UeIndex k, BsIndex j) const
    {
        std::vector<int> total(j_, 0);
        for (UeIndex l = 0; l < k_; ++l) {
            const BsIndex i = l == k ? j : assoc[l];
            if (i == kUnassociated)
                continue;
            total[i] += link(l, i).streams;
        }
        return total;
    }

    /// Power share of link (l, i) given per-BS active stream totals.
    double power_share(UeIndex l, BsIndex i, std::span<const int> streams) const
    {
        return power_[i] * link(l, i).streams / streams[i];
    }

    /// W_{k,j}^* H_{k,i} F_{l,i} with unit-power F.
    const SmallCMatrix& cross(UeIndex k, BsIndex j, UeIndex l, BsIndex i) const
    {
        const std::size_t idx = ((k * j_ + j) * k_ + l) * j_ + i;
        if (!cross_ready_[idx]) {
            const auto& w = link(k, j).combiner;
            cross_[idx] = w.adjoint() * (link(k, i).channel * link(l, i).precoder);
            cross_ready_[idx] = 1;
            cache_used_ = true;
        }
        return cross_[idx];
    }

    /// Interference-plus-noise covariance seen by UE k when served by j,
    /// all other UEs as in `assoc`.
    SmallCMatrix interference_covariance(UeIndex k, BsIndex j, std::span<const BsIndex> assoc) const
    {
        check_assoc(assoc);
        check_pair(k, j);
        return covariance(k, j, assoc, active_streams(assoc, k, j));
    }

    double link_rate(UeIndex k, BsIndex j, std::span<const BsIndex> assoc) const
    {
        return evaluate(k, j, assoc).rate;
    }

    std::vector<double> per_stream_sinr(UeIndex k, BsIndex j, std::span<const BsIndex> assoc) const
    {
        return evaluate(k, j, assoc).sinr;
    }

    /// Rate and per-stream SINR of UE k served by j, others held at `assoc`.
    LinkEvaluation evaluate(UeIndex k, BsIndex j, std::span<const BsIndex> assoc) const
    {
        check_assoc(assoc);
        check_pair(k, j);
        return evaluate_with(k, j, assoc, active_streams(assoc, k, j));
    }

    /// Sum over associated UEs of spectral efficiency times serving bandwidth.
    double network_sum_rate(std::span<const BsIndex> assoc, std::span<const double> bandwidth_hz) const
    {
        check_assoc(assoc);
        double total = 0.0;
        std::vector<int> streams;
        for (UeIndex k = 0; k < k_; ++k) {
            if (assoc[k] == kUnassociated)
                continue;
            if (streams.empty())
                streams = active_streams(assoc, k, assoc[k]);
            total += evaluate_with(k, assoc[k], assoc, streams).rate * bandwidth_hz[assoc[k]];
        }
        return total;
    }

    /// Per-UE rates (bits/s/Hz) under `assoc`; zero for unassociated UEs.
    std::vector<double> rates(std::span<const BsIndex> assoc) const
    {
        check_assoc(assoc);
        std::vector<double> out(k_, 0.0);
        std::vector<int> streams;
        for (UeIndex k = 0; k < k_; ++k) {
            if (assoc[k] == kUnassociated)
                continue;
            if (streams.empty())
                streams = active_streams(assoc, k, assoc[k]);
            out[k] = evaluate_with(k, assoc[k], assoc, streams).rate;
        }
        return out;
    }

private:
    void check_assoc(std::span<const BsIndex> assoc) const
    {
        if (assoc.size() != k_)
            throw InvalidInput("association length does not match the UE count");
        for (BsIndex b : assoc)
            if (b != kUnassociated && b >= j_)
                throw InvalidInput("association refers to an unknown base station");
    }

    void check_pair(UeIndex k, BsIndex j) const
    {
        if (k >= k_ || j >= j_)
            throw InvalidInput("link index out of range");
    }

    SmallCMatrix covariance(UeIndex k, BsIndex j, std::span<const BsIndex> assoc, std::span<const int> streams) const
    {
        const auto& w = link(k, j).combiner;
        SmallCMatrix v = noise_[j] * (w.adjoint() * w);
        for (UeIndex l = 0; l < k_; ++l) {
            if (l == k)
                continue;
            const BsIndex i = assoc[l];
            if (i == kUnassociated || tiers_[i] != tiers_[j])
                continue;
            const auto& m = cross(k, j, l, i);
            v.noalias() += power_share(l, i, streams) * (m * m.adjoint());
        }
        return v;
    }

    LinkEvaluation evaluate_with(UeIndex k, BsIndex j, std::span<const BsIndex> assoc, std::span<const int> streams) const
    {
        const SmallCMatrix v = covariance(k, j, assoc, streams);
        const SmallCMatrix e = std::sqrt(power_share(k, j, streams)) * cross(k, j, k, j);
        const auto n = e.rows();

        LinkEvaluation out;
        // log2 det(I + V^{-1} E E^*)
        Eigen::LLT<SmallCMatrix> llt(v);
        if (llt.info() != Eigen::Success)
            throw ConfigError("interference-plus-noise covariance is singular; noise power must be positive");
        const SmallCMatrix vinv = llt.solve(SmallCMatrix::Identity(n, n));
        const SmallCMatrix g = SmallCMatrix::Identity(n, n) + vinv * e * e.adjoint();
        out.rate = std::max(0.0, std::log2(std::abs(g.determinant())));

        out.sinr.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            double leak = 0.0;
            for (Eigen::Index m = 0; m < e.cols(); ++m)
                if (m != i)
                    leak += std::norm(e(i, m));
            out.sinr[static_cast<std::size_t>(i)] = std::norm(e(i, i)) / (leak + v(i, i).real());
        }
        return out;
    }

    std::size_t k_;
    std::size_t j_;
    std::vector<Tier> tiers_;
    std::vector<double> power_;
    std::vector<double> noise_;
    std::vector<std::optional<LinkRealization>> links_;
    mutable std::vector<SmallCMatrix> cross_;
    mutable std::vector<std::uint8_t> cross_ready_;
    mutable bool cache_used_ = false;
};

} // namespace cellsim::radio
