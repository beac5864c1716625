#include "dcf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dcf {

namespace {

constexpr std::uint64_t kStallSlotLimit = 10000000;

// Unbiased draw from {0, ..., bound-1} by rejection.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t threshold = (0 - bound) % bound; // 2^64 mod bound
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

// Bernoulli(prob) from 53 uniform bits; consumes nothing at the exact ends.
bool bernoulli(std::mt19937_64& rng, double prob) {
    if (prob <= 0.0) return false;
    if (prob >= 1.0) return true;
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return u < prob;
}

} // namespace

void SimConfig::validate() const {
    if (warmup_frames < 0) throw std::invalid_argument("warmup must be >= 0");
    if (frames_target <= warmup_frames)
        throw std::invalid_argument("frames must exceed warmup");
    if (replications < 1) throw std::invalid_argument("reps must be >= 1");
}

double SlotTally::elapsed_us(const ChannelTimes& ct, double sigma) const {
    return static_cast<double>(idle) * sigma + static_cast<double>(success) * ct.t_s +
           static_cast<double>(collision) * ct.t_c + static_cast<double>(error) * ct.t_e;
}

std::string_view sim_generator_name() { return "mt19937_64"; }

ReplicationResult run_replication(const Scenario& sc, const SimConfig& cfg,
                                  std::uint64_t seed, DelayNorm norm) {
    sc.validate();
    cfg.validate();
    const ChannelTimes ct = channel_times(sc.mode, sc.timing);
    const double sigma = sc.timing.slot_sigma_us;
    const auto& bp = sc.backoff;
    const int n = sc.n;

    std::mt19937_64 rng(seed);
    std::vector<StationState> st(static_cast<std::size_t>(n));
    SlotTally global{}; // from time zero; frame births snapshot this
    for (auto& s : st) {
        s.stage = 0;
        s.timer = static_cast<std::int64_t>(
            uniform_below(rng, static_cast<std::uint64_t>(bp.w0)));
        s.birth = global;
    }

    ReplicationResult res;
    res.seed = seed;
    res.attempts_by_stage.assign(bp.persistent() ? bp.m + 1 : bp.max_stage() + 1, 0);

    std::int64_t outcomes_total = 0; // including warmup
    bool stats_on = cfg.warmup_frames == 0;
    std::uint64_t slots_since_outcome = 0;
    std::vector<int> txers;
    txers.reserve(static_cast<std::size_t>(n));

    // A failed attempt climbs one stage; at the last stage the frame is
    // dropped and a fresh one admitted.  Persistent backoff never drops, and
    // its attempt histogram lumps every frozen-window stage into bucket m.
    auto advance_or_discard = [&](StationState& s) {
        if (!bp.persistent() && s.stage == bp.max_stage()) {
            if (stats_on) ++res.discards;
            ++outcomes_total;
            slots_since_outcome = 0;
            s.stage = 0;
            s.birth = global;
        } else {
            ++s.stage;
        }
        s.timer = static_cast<std::int64_t>(uniform_below(
            rng, static_cast<std::uint64_t>(window_size(s.stage, bp))));
    };

    while (outcomes_total < cfg.frames_target) {
        txers.clear();
        for (int i = 0; i < n; ++i)
            if (st[static_cast<std::size_t>(i)].timer == 0) txers.push_back(i);

        if (txers.empty()) {
            ++global.idle;
            if (stats_on) ++res.tally.idle;
            for (auto& s : st) --s.timer;
        } else if (txers.size() == 1) {
            StationState& s = st[static_cast<std::size_t>(txers[0])];
            if (stats_on) {
                ++res.attempts;
                const int bucket = bp.persistent() ? std::min(s.stage, bp.m) : s.stage;
                ++res.attempts_by_stage[static_cast<std::size_t>(bucket)];
            }
            if (!bernoulli(rng, sc.p_f)) {
                ++global.success;
                if (stats_on) {
                    ++res.tally.success;
                    ++res.successes;
                    SlotTally d = global;
                    d.idle -= s.birth.idle;
                    d.success -= s.birth.success;
                    d.collision -= s.birth.collision;
                    d.error -= s.birth.error;
                    res.delay_sum_us += d.elapsed_us(ct, sigma);
                }
                ++outcomes_total;
                slots_since_outcome = 0;
                s.stage = 0;
                s.birth = global;
                s.timer = static_cast<std::int64_t>(
                    uniform_below(rng, static_cast<std::uint64_t>(bp.w0)));
            } else {
                ++global.error;
                if (stats_on) {
                    ++res.tally.error;
                    ++res.error_attempts;
                }
                advance_or_discard(s);
            }
            for (int i = 0; i < n; ++i)
                if (i != txers[0]) --st[static_cast<std::size_t>(i)].timer;
        } else {
            ++global.collision;
            if (stats_on) {
                ++res.tally.collision;
                res.attempts += txers.size();
                res.collision_attempts += txers.size();
                for (int i : txers) {
                    const int stg = st[static_cast<std::size_t>(i)].stage;
                    const int bucket = bp.persistent() ? std::min(stg, bp.m) : stg;
                    ++res.attempts_by_stage[static_cast<std::size_t>(bucket)];
                }
            }
            std::size_t next_tx = 0;
            for (int i = 0; i < n; ++i) {
                if (next_tx < txers.size() && txers[next_tx] == i) {
                    advance_or_discard(st[static_cast<std::size_t>(i)]);
                    ++next_tx;
                } else {
                    --st[static_cast<std::size_t>(i)].timer;
                }
            }
        }

        if (++slots_since_outcome > kStallSlotLimit)
            throw std::runtime_error(
                "simulation stalled: no completed frame in " +
                std::to_string(kStallSlotLimit) + " slots (n=" + std::to_string(n) +
                ", pf=" + std::to_string(sc.p_f) +
                (bp.persistent() ? ", persistent backoff)" : ")"));
        if (!stats_on && outcomes_total >= cfg.warmup_frames) stats_on = true;
    }

    res.slots = res.tally.total();
    res.outcomes_observed = res.successes + res.discards;
    if (res.outcomes_observed == 0)
        throw std::runtime_error("simulation horizon too small: no completed frame "
                                 "outcomes after warmup");
    res.sim_time_us = res.tally.elapsed_us(ct, sigma);

    const double slots_d = static_cast<double>(res.slots);
    const double att = static_cast<double>(res.attempts);
    res.tau_hat = att / (static_cast<double>(n) * slots_d);
    res.p_hat = att > 0 ? static_cast<double>(res.collision_attempts + res.error_attempts) / att
                        : 0.0;
    res.p1_hat = att > 0 ? static_cast<double>(res.collision_attempts) / att : 0.0;
    const double busy = slots_d - static_cast<double>(res.tally.idle);
    res.ptr_hat = busy / slots_d;
    res.ps_hat = busy > 0
                     ? static_cast<double>(res.tally.success + res.tally.error) / busy
                     : 0.0;
    res.throughput_hat =
        static_cast<double>(res.successes) * ct.payload_airtime / res.sim_time_us;
    res.discard_hat = static_cast<double>(res.discards) /
                      static_cast<double>(res.outcomes_observed);
    const double delay_denom = norm == DelayNorm::Conditional
                                   ? static_cast<double>(res.successes)
                                   : static_cast<double>(res.outcomes_observed);
    res.delay_hat_us = delay_denom > 0 ? res.delay_sum_us / delay_denom
                                       : std::numeric_limits<double>::quiet_NaN();
    return res;
}

namespace {

struct MeanCi {
    double mean;
    double ci95;
};

MeanCi pool(const std::vector<ReplicationResult>& reps, double ReplicationResult::* field) {
    const std::size_t r = reps.size();
    double sum = 0.0;
    for (const auto& rep : reps) sum += rep.*field;
    const double mean = sum / static_cast<double>(r);
    if (r < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
    double ss = 0.0;
    for (const auto& rep : reps) {
        const double d = rep.*field - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(r - 1));
    return {mean, 1.96 * sd / std::sqrt(static_cast<double>(r))};
}

} // namespace

SimResult replicate_and_pool(const Scenario& sc, const SimConfig& cfg, DelayNorm norm) {
    sc.validate();
    cfg.validate();

    SimResult out;
    out.seed = cfg.seed;
    out.delay_norm = norm;
    out.replications.resize(static_cast<std::size_t>(cfg.replications));

    if (cfg.replications == 1) {
        out.replications[0] = run_replication(sc, cfg, cfg.seed, norm);
    } else {
        std::vector<std::future<ReplicationResult>> futs;
        futs.reserve(out.replications.size());
        for (int r = 0; r < cfg.replications; ++r)
            futs.push_back(std::async(std::launch::async, [&, r] {
                return run_replication(sc, cfg, cfg.seed + static_cast<std::uint64_t>(r), norm);
            }));
        for (int r = 0; r < cfg.replications; ++r)
            out.replications[static_cast<std::size_t>(r)] =
                futs[static_cast<std::size_t>(r)].get();
    }

    const auto& reps = out.replications;
    auto [tau, ci_tau] = pool(reps, &ReplicationResult::tau_hat);
    out.tau_hat = tau;
    out.ci95_tau = ci_tau;
    out.p_hat = pool(reps, &ReplicationResult::p_hat).mean;
    out.p1_hat = pool(reps, &ReplicationResult::p1_hat).mean;
    out.ptr_hat = pool(reps, &ReplicationResult::ptr_hat).mean;
    out.ps_hat = pool(reps, &ReplicationResult::ps_hat).mean;
    auto [thr, ci_thr] = pool(reps, &ReplicationResult::throughput_hat);
    out.throughput_hat = thr;
    out.ci95_throughput = ci_thr;
    auto [dly, ci_dly] = pool(reps, &ReplicationResult::delay_hat_us);
    out.delay_hat_us = dly;
    out.ci95_delay_us = ci_dly;
    auto [dsc, ci_dsc] = pool(reps, &ReplicationResult::discard_hat);
    out.discard_hat = dsc;
    out.ci95_discard = ci_dsc;

    for (const auto& rep : reps) {
        out.slots += rep.slots;
        out.successes += rep.successes;
        out.collisions += rep.tally.collision;
        out.error_slots += rep.tally.error;
        out.discards += rep.discards;
        out.elapsed_sim_us += rep.sim_time_us;
    }
    return out;
}

SimResult simulate(const Scenario& sc, const SimConfig& cfg, DelayNorm norm) {
    return replicate_and_pool(sc, cfg, norm);
}

} // namespace dcf
