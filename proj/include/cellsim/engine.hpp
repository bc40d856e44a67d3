#pragma once

// The online loop: moving steps contain measurement blocks, blocks contain
// learning steps. Each learning step picks a load-balanced association,
// lets the AMF keep the best one seen in the block, and updates every
// agent. Handovers to the best association happen at block ends.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cellsim/agent.hpp"
#include "cellsim/baselines.hpp"
#include "cellsim/config.hpp"
#include "cellsim/core.hpp"
#include "cellsim/mobility.hpp"
#include "cellsim/policy_clb.hpp"
#include "cellsim/policy_dlb.hpp"
#include "cellsim/radio.hpp"
#include "cellsim/rng.hpp"
#include "cellsim/signaling.hpp"
#include "cellsim/topology.hpp"

namespace cellsim::engine {

struct SimClock {
    std::size_t moving_step = 0; // completed moving steps
    std::size_t block = 0;       // current measurement block, 1-based once started
    std::uint64_t t = 0;         // learning steps taken
    double seconds = 0.0;
};

/// Best-to-date association of the current block plus per-UE sojourn timers.
struct AmfState {
    AssociationVector best;
    double best_rate = 0.0;
    std::vector<double> sojourn_s;
};

/// Replaces the best association iff `rate` is strictly higher.
inline bool amf_update_best(AmfState& amf, double rate, const AssociationVector& eta)
{
    if (rate > amf.best_rate) {
        amf.best = eta;
        amf.best_rate = rate;
        return true;
    }
    return false;
}

/// Number of UEs whose serving BS changes. Switched UEs restart their
/// sojourn timer; the others accumulate `elapsed_s`.
inline std::size_t execute_handovers(std::span<const BsIndex> prev, std::span<const BsIndex> next,
                                     std::span<double> sojourn_s, double elapsed_s)
{
    if (prev.size() != next.size() || sojourn_s.size() != next.size())
        throw InvalidInput("execute_handovers: vector lengths differ");
    std::size_t count = 0;
    for (std::size_t k = 0; k < next.size(); ++k) {
        if (prev[k] != next[k]) {
            ++count;
            sojourn_s[k] = 0.0;
        } else {
            sojourn_s[k] += elapsed_s;
        }
    }
    return count;
}

struct StepRecord {
    std::uint64_t t = 0;
    std::size_t block = 0;
    std::size_t moving_step = 0;
    double r_learn = 0.0; // bits/s
    double r_best = 0.0;
    std::uint64_t bits = 0;
    std::vector<int> loads;
    double q_total = 0.0; // sum of the Q values reported this step
};

struct BlockRecord {
    std::size_t block = 0;
    std::size_t handovers = 0;
    double throughput = 0.0; // sum rate of the serving association, bits/s
};

struct TrajectoryRow {
    std::uint64_t step = 0;
    UeIndex ue = 0;
    Position position;
    BsIndex serving = kUnassociated;
};

struct RunSummary {
    std::size_t steps = 0;
    std::size_t blocks = 0;
    std::size_t moving_steps = 0;
    double mean_r_learn = 0.0;
    double mean_r_best = 0.0;
    double mean_throughput = 0.0;
    double tail_throughput = 0.0; // mean over the second half of the blocks
    std::size_t handovers = 0;
    double handover_rate = 0.0;   // per UE per block
    std::uint64_t bits = 0;
    std::optional<std::uint64_t> convergence_step;
    std::size_t invariant_violations = 0;
    double mean_unassociated = 0.0;
};

/// First step at which the trailing `window` values vary by less than
/// `tolerance` relative to their mean.
inline std::optional<std::uint64_t> plateau_step(std::span<const double> values, std::size_t window, double tolerance)
{
    if (window < 2)
        throw InvalidInput("plateau_step: window must be >= 2");
    for (std::size_t end = window; end <= values.size(); ++end) {
        const auto w = values.subspan(end - window, window);
        const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
        double mean = 0.0;
        for (double x : w)
            mean += x;
        mean /= static_cast<double>(window);
        if (mean != 0.0 && (*hi - *lo) / std::abs(mean) < tolerance)
            return end;
    }
    return std::nullopt;
}

class Simulation;

/// Read-only view handed to step observers.
struct StepView {
    const Simulation& sim;
    const StepRecord& record;
    const AssociationVector& eta;
};

class Simulation {
public:
    using Observer = std::function<void(const StepView&)>;

    explicit Simulation(ScenarioConfig cfg)
        : cfg_(std::move(cfg))
    {
        cfg_.mobility.area_m = cfg_.topology.area_m;
        cfg_.validate();
        const auto seed = cfg_.engine.seed;

        Rng place = derive_rng(seed, Stream::placement);
        layout_ = place_network(cfg_.topology, cfg_.radio.macro.bs_antennas(), place);
        spec_ = LoadSpec::from_network(layout_.base_stations, layout_.ues);
        k_ = layout_.ues.size();
        j_ = layout_.base_stations.size();

        std::vector<Tier> tiers;
        std::vector<double> power;
        std::vector<double> noise;
        for (const auto& b : layout_.base_stations) {
            tiers.push_back(b.tier);
            power.push_back(dbm_to_watts(cfg_.radio.tier(b.tier).tx_power_dbm));
            noise.push_back(cfg_.radio.noise_power_w(b.tier));
            bandwidth_.push_back(cfg_.radio.tier(b.tier).bandwidth_hz);
        }
        links_.emplace(k_, tiers, power, noise);

        codec_.emplace(j_, cfg_.learner.quantizer.serving_levels);
        const std::size_t n_states = codec_->state_count();
        if (learning()) {
            agents_.assign(k_, agent::AgentLearningState(n_states, j_));
            for (UeIndex k = 0; k < k_; ++k) {
                Rng r = derive_rng(seed, Stream::q_init, {k});
                agents_[k].randomize_q(cfg_.learner.q_init_max, r);
            }
            if (cfg_.engine.policy == PolicyKind::clb) {
                clb_ = clb::ClbRecords(k_, n_states, j_);
                for (UeIndex k = 0; k < k_; ++k)
                    clb_.load_initial(k, agents_[k].q);
            } else {
                bs_tables_.assign(j_, dlb::BsUTable(n_states, k_));
            }
        }

        if (cfg_.engine.policy == PolicyKind::max_sinr) {
            eta_.assign(k_, kUnassociated);
        } else {
            Rng r = derive_rng(seed, Stream::initial_association);
            eta_ = initial_feasible_association(spec_, r);
        }
        serving_ = eta_;
        amf_.best = eta_;
        amf_.sojourn_s.assign(k_, 0.0);
        for (UeIndex k = 0; k < agents_.size(); ++k)
            agents_[k].previous = eta_[k];
        positions_.resize(k_);
        position_epoch_.assign(k_, 0);
        for (UeIndex k = 0; k < k_; ++k)
            positions_[k] = layout_.ues[k].position;
    }

    void set_observer(Observer obs) { observer_ = std::move(obs); }

    bool done() const
    {
        if (clock_.t >= cfg_.engine.steps)
            return true;
        return cfg_.is_mobile() && cfg_.engine.moving_steps > 0 && clock_.moving_step >= cfg_.engine.moving_steps &&
               step_in_block_ == 0;
    }

    /// One learning step (opening and closing measurement blocks as needed).
    void step()
    {
        if (step_in_block_ == 0)
            begin_block();
        ++clock_.t;
        clock_.seconds += cfg_.mobility.block_s / static_cast<double>(cfg_.engine.steps_per_block);
        if (learning())
            learning_step();
        else
            baseline_step();
        ++step_in_block_;
        if (step_in_block_ == cfg_.engine.steps_per_block)
            end_block();
    }

    void run()
    {
        while (!done())
            step();
        if (step_in_block_ > 0)
            end_block();
    }

    RunSummary summary() const
    {
        RunSummary s;
        s.steps = steps_.size();
        s.blocks = blocks_.size();
        s.moving_steps = clock_.moving_step;
        s.invariant_violations = violations_;
        for (const auto& r : steps_) {
            s.mean_r_learn += r.r_learn;
            s.mean_r_best += r.r_best;
            s.bits += r.bits;
        }
        if (!steps_.empty()) {
            s.mean_r_learn /= static_cast<double>(steps_.size());
            s.mean_r_best /= static_cast<double>(steps_.size());
        }
        for (const auto& b : blocks_) {
            s.mean_throughput += b.throughput;
            s.handovers += b.handovers;
        }
        if (!blocks_.empty()) {
            s.mean_throughput /= static_cast<double>(blocks_.size());
            const std::size_t from = blocks_.size() / 2;
            for (std::size_t i = from; i < blocks_.size(); ++i)
                s.tail_throughput += blocks_[i].throughput;
            s.tail_throughput /= static_cast<double>(blocks_.size() - from);
            s.handover_rate = static_cast<double>(s.handovers) / static_cast<double>(k_ * blocks_.size());
            s.mean_unassociated = unassociated_total_ / static_cast<double>(blocks_.size());
        }
        if (learning()) {
            std::vector<double> q;
            for (const auto& r : steps_)
                q.push_back(r.q_total);
            s.convergence_step = plateau_step(q, cfg_.engine.convergence_window, cfg_.engine.convergence_tolerance);
        }
        return s;
    }

    const ScenarioConfig& config() const { return cfg_; }
    const SimClock& clock() const { return clock_; }
    const NetworkLayout& layout() const { return layout_; }
    const LoadSpec& load_spec() const { return spec_; }
    const radio::LinkSet& links() const { return *links_; }
    const agent::StateCodec& codec() const { return *codec_; }
    const AssociationVector& eta() const { return eta_; }
    const AssociationVector& serving() const { return serving_; }
    const AmfState& amf() const { return amf_; }
    std::span<const Position> positions() const { return positions_; }
    std::span<const double> bandwidths() const { return bandwidth_; }
    const std::vector<agent::AgentLearningState>& agents() const { return agents_; }
    const clb::ClbRecords& clb_records() const { return clb_; }
    const std::vector<dlb::BsUTable>& bs_tables() const { return bs_tables_; }
    const std::vector<StepRecord>& steps() const { return steps_; }
    const std::vector<BlockRecord>& blocks() const { return blocks_; }
    const std::vector<TrajectoryRow>& trajectory() const { return trajectory_; }
    std::size_t invariant_violations() const { return violations_; }

    /// Stream-averaged SINR of UE k toward every BS, k moved hypothetically
    /// and everyone else held at `assoc`.
    std::vector<double> candidate_sinr(UeIndex k, std::span<const BsIndex> assoc) const
    {
        std::vector<double> out(j_);
        for (BsIndex j = 0; j < j_; ++j)
            out[j] = links_->evaluate(k, j, assoc).mean_sinr();
        return out;
    }

private:
    bool learning() const
    {
        return cfg_.engine.policy == PolicyKind::clb || cfg_.engine.policy == PolicyKind::dlb;
    }

    double sum_rate(std::span<const BsIndex> assoc) const { return links_->network_sum_rate(assoc, bandwidth_); }

    // ---- blocks ---------------------------------------------------------

    void begin_block()
    {
        ++clock_.block;
        if (cfg_.is_mobile())
            advance_mobility();
        realize_channels();

        if (clock_.block == 1) {
            for (UeIndex k = 0; k < k_; ++k)
                trajectory_.push_back({0, k, positions_[k], serving_[k]});
            if (learning())
                for (UeIndex k = 0; k < k_; ++k)
                    agents_[k].state = measure_state(k, eta_);
        }

        block_handovers_ = 0;
        block_bits_ = 0;
        switch (cfg_.engine.policy) {
        case PolicyKind::clb:
        case PolicyKind::dlb:
            amf_.best = serving_;
            amf_.best_rate = sum_rate(amf_.best);
            break;
        case PolicyKind::max_sinr: {
            clb::ValueTable sinr(k_, j_);
            for (UeIndex k = 0; k < k_; ++k) {
                const auto row = candidate_sinr(k, serving_);
                std::copy(row.begin(), row.end(), sinr.row(k).begin());
            }
            eta_ = baselines::max_sinr_association(sinr, spec_);
            amf_.best = eta_;
            amf_.best_rate = sum_rate(eta_);
            block_bits_ = signaling_step_cost(SignalingKind::max_sinr, k_, j_, cfg_.engine.bits);
            break;
        }
        case PolicyKind::wcs:
            wcs_block();
            break;
        }
    }

    void wcs_block()
    {
        AssociationVector best = serving_;
        double best_rate = sum_rate(best);
        auto refine = [&](AssociationVector cur) {
            for (std::size_t round = 0; round < cfg_.engine.wcs_rounds; ++round) {
                clb::ValueTable rates(k_, j_);
                for (UeIndex k = 0; k < k_; ++k)
                    for (BsIndex j = 0; j < j_; ++j)
                        rates(k, j) = links_->evaluate(k, j, cur).rate * bandwidth_[j];
                auto next = baselines::wcs_rate_association(rates, spec_, cur).assoc;
                if (next == cur)
                    break;
                cur = std::move(next);
                const double r = sum_rate(cur);
                if (r > best_rate) {
                    best_rate = r;
                    best = cur;
                }
            }
        };
        refine(serving_);
        for (std::size_t i = 0; i < cfg_.engine.wcs_restarts; ++i) {
            Rng r = derive_rng(cfg_.engine.seed, Stream::initial_association, {clock_.block, i});
            AssociationVector start = initial_feasible_association(spec_, r);
            const double rate = sum_rate(start);
            if (rate > best_rate) {
                best_rate = rate;
                best = start;
            }
            refine(std::move(start));
        }
        eta_ = best;
        amf_.best = best;
        amf_.best_rate = best_rate;
        std::uint64_t bits = 0;
        for (const auto& b : layout_.base_stations)
            bits += signaling_step_cost(SignalingKind::wcs, k_, 1, cfg_.engine.bits,
                                        static_cast<std::uint64_t>(b.antennas),
                                        static_cast<std::uint64_t>(cfg_.radio.tier(b.tier).ue_antennas));
        block_bits_ = bits;
    }

    void end_block()
    {
        if (cfg_.engine.target_update == TargetUpdate::per_block) {
            block_handovers_ += execute_handovers(serving_, amf_.best, amf_.sojourn_s, cfg_.mobility.block_s);
            serving_ = amf_.best;
        }
        audit(serving_);
        blocks_.push_back({clock_.block, block_handovers_, sum_rate(serving_)});
        unassociated_total_ += static_cast<double>(std::count(serving_.begin(), serving_.end(), kUnassociated));
        for (UeIndex k = 0; k < k_; ++k)
            trajectory_.push_back({clock_.t, k, positions_[k], serving_[k]});
        step_in_block_ = 0;
        if (cfg_.is_mobile() && --blocks_left_in_moving_step_ == 0)
            ++clock_.moving_step;
    }

    // ---- mobility and channels ------------------------------------------

    void advance_mobility()
    {
        if (blocks_left_in_moving_step_ == 0) {
            const std::uint64_t n = clock_.moving_step;
            Rng pick = derive_rng(cfg_.engine.seed, Stream::movers, {n});
            movers_ = mobility::select_movers(k_, cfg_.mobility.moving_fraction, pick);
            trips_.clear();
            long length = 1;
            for (UeIndex k : movers_) {
                Rng r = derive_rng(cfg_.engine.seed, Stream::mobility, {n, k});
                const auto w = mobility::next_waypoint(positions_[k], cfg_.mobility, r);
                trips_.push_back(mobility::make_step(positions_[k], w.target, w.velocity, w.pause_s, cfg_.mobility.block_s));
                length = std::max(length, trips_.back().blocks);
            }
            blocks_left_in_moving_step_ = static_cast<std::size_t>(length);
            block_in_moving_step_ = 0;
        } else {
            ++block_in_moving_step_;
        }
        const double elapsed = static_cast<double>(block_in_moving_step_) * cfg_.mobility.block_s;
        for (std::size_t i = 0; i < movers_.size(); ++i) {
            const Position next = mobility::advance(trips_[i], elapsed);
            if (!(next == positions_[movers_[i]]))
                ++position_epoch_[movers_[i]];
            positions_[movers_[i]] = next;
        }
    }

    void realize_channels()
    {
        const double ue_h = cfg_.radio.ue_height_m;
        for (UeIndex k = 0; k < k_; ++k) {
            for (BsIndex j = 0; j < j_; ++j) {
                const auto& bs = layout_.base_stations[j];
                const auto& tr = cfg_.radio.tier(bs.tier);
                const double planar = distance(positions_[k], bs.position);
                const double dz = tr.bs_height_m - ue_h;
                const double d3 = std::max(std::sqrt(planar * planar + dz * dz), 1.0);
                Rng large = derive_rng(cfg_.engine.seed, Stream::large_scale, {position_epoch_[k], k, j});
                Rng small = derive_rng(cfg_.engine.seed, Stream::channel, {clock_.block, k, j});
                auto h = radio::gen_channel(cfg_.radio, bs.tier, d3, large, small);
                links_->set_link(k, j, radio::make_link(std::move(h), layout_.ues[k].demand.toward(bs.tier)));
            }
        }
    }

    // ---- learning -------------------------------------------------------

    std::size_t measure_state(UeIndex k, std::span<const BsIndex> assoc) const
    {
        const auto sinr = candidate_sinr(k, assoc);
        return codec_->encode(agent::quantize_state(sinr, assoc[k], cfg_.learner.quantizer));
    }

    void learning_step()
    {
        const auto& lp = cfg_.learner;
        const std::uint64_t t = clock_.t;
        const bool central = cfg_.engine.policy == PolicyKind::clb;

        // action selection
        std::vector<BsIndex> attempted(k_);
        std::uint64_t bits = signaling_step_cost(SignalingKind::amf, k_, j_, cfg_.engine.bits);
        if (central) {
            std::vector<std::size_t> states(k_);
            for (UeIndex k = 0; k < k_; ++k)
                states[k] = agents_[k].state;
            const auto u = clb::assemble_u_table(clb_, states, t, lp.exploration);
            const AssociationVector& init = step_in_block_ == 0 ? serving_ : eta_;
            eta_ = clb::wcs_clb(u, spec_, init).assoc;
            for (UeIndex k = 0; k < k_; ++k)
                attempted[k] = agent::argmax_lowest(u.row(k));
            bits += signaling_step_cost(SignalingKind::clb, k_, j_, cfg_.engine.bits);
        } else {
            std::vector<dlb::PreferenceList> ue_prefs(k_);
            for (UeIndex k = 0; k < k_; ++k) {
                ue_prefs[k] = dlb::build_ue_preferences(agents_[k], t, lp.exploration);
                attempted[k] = ue_prefs[k].front();
            }
            std::vector<std::size_t> states(k_);
            for (UeIndex k = 0; k < k_; ++k)
                states[k] = agents_[k].state;
            std::vector<dlb::PreferenceList> bs_prefs(j_);
            for (BsIndex j = 0; j < j_; ++j)
                bs_prefs[j] = dlb::build_bs_preferences(bs_tables_[j], states);
            const auto match = dlb::da_match(ue_prefs, bs_prefs, spec_);
            if (!match.waitlists_within_quota)
                ++violations_;
            eta_ = match.assoc;
            bits += signaling_step_cost(SignalingKind::dlb, k_, j_, cfg_.engine.bits);
        }

        // AMF
        const AssociationVector serving_prev = serving_;
        const auto rates = links_->rates(eta_);
        double r_learn = 0.0;
        for (UeIndex k = 0; k < k_; ++k)
            if (eta_[k] != kUnassociated)
                r_learn += rates[k] * bandwidth_[eta_[k]];
        if (cfg_.engine.target_update == TargetUpdate::per_step) {
            amf_.best = eta_;
            amf_.best_rate = r_learn;
            const double dt = cfg_.mobility.block_s / static_cast<double>(cfg_.engine.steps_per_block);
            block_handovers_ += execute_handovers(serving_, eta_, amf_.sojourn_s, dt);
            serving_ = eta_;
        } else {
            amf_update_best(amf_, r_learn, eta_);
        }

        // agents act, observe, update and report
        double q_total = 0.0;
        for (UeIndex k = 0; k < k_; ++k) {
            auto& ag = agents_[k];
            const BsIndex served = eta_[k];
            const BsIndex action = served == kUnassociated ? attempted[k] : served;
            double raw = 0.0;
            if (served != kUnassociated)
                raw = lp.reward_spectral ? rates[k] : rates[k] * bandwidth_[served] / lp.reward_scale;
            const BsIndex prev = central ? serving_prev[k] : ag.previous;
            const double reward = agent::handover_reward(raw, prev, served, amf_.sojourn_s[k], lp.cost_soft,
                                                         lp.cost_hard, lp.sojourn_scale_s);
            const std::size_t s = ag.state;
            const std::size_t s_next = measure_state(k, eta_);
            const double q = agent::q_update(ag.q, s, action, reward, s_next, lp.alpha, lp.gamma);
            if (central) {
                clb_.ingest_q_report({k, s, action, q});
            } else {
                const auto n = agent::visit_increment(ag.n, s, action);
                if (served != kUnassociated)
                    bs_tables_[served].ingest_u_report(k, s, agent::ucb_value(q, n, t, lp.exploration));
            }
            q_total += q;
            ag.state = s_next;
            ag.previous = served;
        }

        record_step(r_learn, bits, q_total);
    }

    void baseline_step()
    {
        const double r = amf_.best_rate;
        const std::uint64_t bits = step_in_block_ == 0 ? block_bits_ : 0;
        record_step(r, bits, 0.0);
    }

    void record_step(double r_learn, std::uint64_t bits, double q_total)
    {
        audit(eta_);
        audit(amf_.best);
        StepRecord rec;
        rec.t = clock_.t;
        rec.block = clock_.block;
        rec.moving_step = clock_.moving_step;
        rec.r_learn = r_learn;
        rec.r_best = amf_.best_rate;
        rec.bits = bits;
        rec.loads = spec_.loads(eta_);
        rec.q_total = q_total;
        steps_.push_back(std::move(rec));
        if (observer_)
            observer_(StepView{*this, steps_.back(), eta_});
    }

    void audit(std::span<const BsIndex> assoc)
    {
        if (assoc.size() != k_) {
            ++violations_;
            return;
        }
        for (BsIndex b : assoc)
            if (b != kUnassociated && b >= j_) {
                ++violations_;
                return;
            }
        if (!is_load_balanced(assoc, spec_))
            ++violations_;
    }

    ScenarioConfig cfg_;
    NetworkLayout layout_;
    LoadSpec spec_;
    std::size_t k_ = 0;
    std::size_t j_ = 0;
    std::vector<double> bandwidth_;
    std::optional<radio::LinkSet> links_;
    std::optional<agent::StateCodec> codec_;

    std::vector<agent::AgentLearningState> agents_;
    clb::ClbRecords clb_;
    std::vector<dlb::BsUTable> bs_tables_;

    SimClock clock_;
    std::size_t step_in_block_ = 0;
    AssociationVector eta_;
    AssociationVector serving_; // association carrying data
    AmfState amf_;

    std::vector<Position> positions_;
    std::vector<std::uint64_t> position_epoch_; // bumps whenever a UE changes position
    std::vector<UeIndex> movers_;
    std::vector<mobility::MovingStep> trips_;
    std::size_t blocks_left_in_moving_step_ = 0;
    std::size_t block_in_moving_step_ = 0;

    std::size_t block_handovers_ = 0;
    std::uint64_t block_bits_ = 0;
    std::size_t violations_ = 0;
    double unassociated_total_ = 0.0;

    std::vector<StepRecord> steps_;
    std::vector<BlockRecord> blocks_;
    std::vector<TrajectoryRow> trajectory_;
    Observer observer_;
};

} // namespace cellsim::engine
