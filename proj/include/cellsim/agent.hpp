#pragma once

// Per-UE tabular Q-learning: state quantization and encoding, UCB values,
// the Q update, visit counts and the sojourn-dependent handover reward.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellsim/core.hpp"
#include "cellsim/rng.hpp"

namespace cellsim::agent {

struct QuantizerConfig {
    int serving_levels = 8; // S
    double sinr_min_db = -10.0;
    double sinr_max_db = 30.0;
    double binary_threshold_db = 0.0;

    void validate() const
    {
        if (serving_levels <= 2)
            throw ConfigError("learner.quantizer.serving_levels must be > 2");
        if (!(sinr_min_db < sinr_max_db))
            throw ConfigError("learner.quantizer: sinr_min_db must be < sinr_max_db");
    }
};

struct LearnerParams {
    double alpha = 0.9;
    double gamma = 0.2;
    double exploration = 2.0;     // c
    double cost_soft = 0.3;       // C_d
    double cost_hard = 0.1;       // C_0
    double sojourn_scale_s = 10.0;
    double reward_scale = 1e8;    // bits/s per reward unit
    bool reward_spectral = false; // rewards in bits/s/Hz instead of bits/s
    double q_init_max = 0.0;      // initial Q ~ U[0, q_init_max); 0 keeps tables zero
    QuantizerConfig quantizer;

    void validate() const
    {
        if (alpha < 0.0 || alpha >= 1.0)
            throw ConfigError("learner.alpha must lie in [0, 1)");
        if (gamma < 0.0 || gamma >= 1.0)
            throw ConfigError("learner.gamma must lie in [0, 1)");
        if (!(exploration > 0.0))
            throw ConfigError("learner.exploration must be > 0");
        if (cost_soft < 0.0 || cost_hard < 0.0 || cost_soft + cost_hard >= 1.0)
            throw ConfigError("learner: handover costs must satisfy 0 <= cost_soft + cost_hard < 1");
        if (!(sojourn_scale_s > 0.0))
            throw ConfigError("learner.sojourn_scale_s must be > 0");
        if (!(reward_scale > 0.0))
            throw ConfigError("learner.reward_scale must be > 0");
        if (q_init_max < 0.0)
            throw ConfigError("learner.q_init_max must be >= 0");
        quantizer.validate();
    }
};

/// Serving BS plus one quantized SINR level per BS.
struct QuantizedState {
    BsIndex serving = kUnassociated;
    std::vector<int> levels; // serving entry in [0, S), others in {0, 1}

    friend bool operator==(const QuantizedState&, const QuantizedState&) = default;
};

inline QuantizedState quantize_state(std::span<const double> sinr_linear, BsIndex serving, const QuantizerConfig& q)
{
    QuantizedState s;
    s.serving = serving;
    s.levels.resize(sinr_linear.size());
    const double thr = db_to_linear(q.binary_threshold_db);
    for (BsIndex j = 0; j < sinr_linear.size(); ++j) {
        const double x = sinr_linear[j];
        if (j == serving) {
            const double db = x > 0.0 ? linear_to_db(x) : -std::numeric_limits<double>::infinity();
            const double width = (q.sinr_max_db - q.sinr_min_db) / q.serving_levels;
            const double pos = std::floor((db - q.sinr_min_db) / width);
            s.levels[j] = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(q.serving_levels - 1)));
        } else {
            s.levels[j] = x >= thr ? 1 : 0;
        }
    }
    return s;
}

/// Mixed-radix bijection between quantized states and table rows.
/// Rows [0, J*S*2^(J-1)) hold associated states; the trailing 2^J rows hold
/// unassociated states (all J entries binary).
class StateCodec {
public:
    StateCodec(std::size_t n_bs, int serving_levels)
        : j_(n_bs)
        , s_(serving_levels)
    {
        if (n_bs < 1 || n_bs > 20)
            throw InvalidInput("StateCodec: BS count must lie in [1, 20]");
        if (serving_levels < 1)
            throw InvalidInput("StateCodec: serving_levels must be >= 1");
    }

    std::size_t bs_count() const { return j_; }
    int serving_levels() const { return s_; }

    std::size_t associated_state_count() const { return j_ * static_cast<std::size_t>(s_) * (std::size_t{1} << (j_ - 1)); }
    std::size_t state_count() const { return associated_state_count() + (std::size_t{1} << j_); }

    std::size_t encode(const QuantizedState& st) const
    {
        if (st.levels.size() != j_)
            throw InvalidInput("encode_state: level vector length must equal J");
        if (st.serving == kUnassociated) {
            std::size_t bits = 0;
            for (std::size_t j = 0; j < j_; ++j) {
                check_binary(st.levels[j]);
                bits |= static_cast<std::size_t>(st.levels[j]) << j;
            }
            return associated_state_count() + bits;
        }
        if (st.serving >= j_)
            throw InvalidInput("encode_state: serving BS out of range");
        const int lvl = st.levels[st.serving];
        if (lvl < 0 || lvl >= s_)
            throw InvalidInput("encode_state: serving level out of range");
        std::size_t bits = 0;
        std::size_t pos = 0;
        for (std::size_t j = 0; j < j_; ++j) {
            if (j == st.serving)
                continue;
            check_binary(st.levels[j]);
            bits |= static_cast<std::size_t>(st.levels[j]) << pos;
            ++pos;
        }
        return (st.serving * static_cast<std::size_t>(s_) + static_cast<std::size_t>(lvl)) * (std::size_t{1} << (j_ - 1)) +
               bits;
    }

    QuantizedState decode(std::size_t index) const
    {
        if (index >= state_count())
            throw InvalidInput("decode_state: index out of range");
        QuantizedState st;
        st.levels.assign(j_, 0);
        if (index >= associated_state_count()) {
            st.serving = kUnassociated;
            const std::size_t bits = index - associated_state_count();
            for (std::size_t j = 0; j < j_; ++j)
                st.levels[j] = static_cast<int>((bits >> j) & 1U);
            return st;
        }
        const std::size_t block = std::size_t{1} << (j_ - 1);
        const std::size_t bits = index % block;
        const std::size_t head = index / block;
        st.serving = head / static_cast<std::size_t>(s_);
        st.levels[st.serving] = static_cast<int>(head % static_cast<std::size_t>(s_));
        std::size_t pos = 0;
        for (std::size_t j = 0; j < j_; ++j) {
            if (j == st.serving)
                continue;
            st.levels[j] = static_cast<int>((bits >> pos) & 1U);
            ++pos;
        }
        return st;
    }

private:
    static void check_binary(int v)
    {
        if (v != 0 && v != 1)
            throw InvalidInput("encode_state: non-serving level must be 0 or 1");
    }

    std::size_t j_;
    int s_;
};

/// UCB value assigned to an action never tried in a state. Finite so that
/// sums over a network U-table stay ordered.
inline constexpr double kUntriedUcb = 1e9;

inline double ucb_value(double q, std::uint64_t n, std::uint64_t t, double c)
{
    if (t < 1)
        throw PreconditionError("ucb_value: learning step t must be >= 1");
    if (c == 0.0)
        return q;
    if (n == 0)
        return kUntriedUcb;
    return q + c * std::sqrt(std::log(static_cast<double>(t)) / static_cast<double>(n));
}

template <typename T>
class Table {
public:
    Table() = default;
    Table(std::size_t rows, std::size_t cols, T init = T{})
        : rows_(rows)
        , cols_(cols)
        , data_(rows * cols, init)
    {
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> data() const { return data_; }

    bool in_range(std::size_t r, std::size_t c) const { return r < rows_ && c < cols_; }

    friend bool operator==(const Table&, const Table&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using QTable = Table<double>;
using VisitCountTable = Table<std::uint64_t>;

inline double max_row(const QTable& q, std::size_t s)
{
    const auto r = q.row(s);
    return *std::max_element(r.begin(), r.end());
}

/// Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + gamma max_b Q(s', b)); returns the new value.
inline double q_update(QTable& q, std::size_t s, BsIndex a, double reward, std::size_t s_next, double alpha, double gamma)
{
    if (!q.in_range(s, a) || s_next >= q.rows())
        throw InvalidInput("q_update: state or action out of range");
    const double target = reward + gamma * max_row(q, s_next);
    q(s, a) = (1.0 - alpha) * q(s, a) + alpha * target;
    return q(s, a);
}

inline std::uint64_t visit_increment(VisitCountTable& n, std::size_t s, BsIndex a)
{
    if (!n.in_range(s, a))
        throw InvalidInput("visit_increment: state or action out of range");
    return ++n(s, a);
}

/// zeta(tau) = C_d exp(-tau / scale) + C_0
inline double handover_cost(double sojourn_s, double cost_soft, double cost_hard, double scale_s = 10.0)
{
    return cost_soft * std::exp(-sojourn_s / scale_s) + cost_hard;
}

inline double handover_reward(double raw, BsIndex previous, BsIndex action, double sojourn_s, double cost_soft,
                              double cost_hard, double scale_s = 10.0)
{
    if (sojourn_s < 0.0)
        throw PreconditionError("handover_reward: sojourn time must be >= 0");
    if (action == previous)
        return raw;
    return raw * (1.0 - handover_cost(sojourn_s, cost_soft, cost_hard, scale_s));
}

/// One UE's learning machinery.
struct AgentLearningState {
    std::size_t state = 0;
    QTable q;
    VisitCountTable n; // kept locally only in distributed mode
    BsIndex previous = kUnassociated; // learning association one step back

    AgentLearningState() = default;
    AgentLearningState(std::size_t n_states, std::size_t n_actions)
        : q(n_states, n_actions)
        , n(n_states, n_actions)
    {
    }

    void randomize_q(double max_value, Rng& rng)
    {
        if (max_value <= 0.0)
            return;
        std::uniform_real_distribution<double> u(0.0, max_value);
        for (std::size_t s = 0; s < q.rows(); ++s)
            for (std::size_t a = 0; a < q.cols(); ++a)
                q(s, a) = u(rng);
    }

    std::vector<double> u_row(std::uint64_t t, double c) const
    {
        std::vector<double> u(q.cols());
        for (std::size_t a = 0; a < q.cols(); ++a)
            u[a] = ucb_value(q(state, a), n(state, a), t, c);
        return u;
    }
};

/// Index of the largest value; lowest index on ties.
inline BsIndex argmax_lowest(std::span<const double> v)
{
    BsIndex best = 0;
    for (BsIndex j = 1; j < v.size(); ++j)
        if (v[j] > v[best])
            best = j;
    return best;
}

} // namespace cellsim::agent
