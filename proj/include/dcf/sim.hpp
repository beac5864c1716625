#pragma once
// Slot-level Monte Carlo simulator of n saturated DCF stations.
//
// Time advances one channel slot at a time: an idle slot (sigma), a success
// (t_s), a collision (t_c), or a frame error (t_e).  Stations hold a backoff
// timer drawn uniformly over their stage's contention window; whoever sits at
// zero transmits, everyone else ticks down by one per slot (the standard's
// decrement-then-freeze rule collapses to exactly one tick per busy slot).
// Channel errors hit a lone transmitter with probability p_f, independently
// per attempt.  Failed attempts climb the backoff stages; past stage m+f the
// frame is discarded (never, with persistent backoff).
//
// The simulated clock is carried as slot-class tallies, so every reported
// time is an exact dot product of integer counts with the four durations --
// the accounting identity clock = idle*sigma + succ*t_s + coll*t_c + err*t_e
// holds bit-exactly, and a frame's delay is the tally delta since admission.
//
// Determinism: one mt19937_64 stream per replication, seeded seed + rep
// index; station state is scanned in index order.  Identical configuration
// gives identical results, independent of how replications are scheduled.

#include "dcf/model.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace dcf {

struct SimConfig {
    std::uint64_t seed = 1;
    std::int64_t frames_target = 100000; // completed outcomes (success+discard) per replication
    std::int64_t warmup_frames = 1000;   // first outcomes excluded from statistics
    int replications = 10;

    void validate() const; // throws std::invalid_argument
};

// Slot-class tallies; all times derive from these.
struct SlotTally {
    std::uint64_t idle = 0;
    std::uint64_t success = 0;
    std::uint64_t collision = 0;
    std::uint64_t error = 0;

    std::uint64_t total() const { return idle + success + collision + error; }
    double elapsed_us(const ChannelTimes& ct, double sigma) const;
};

struct StationState {
    int stage = 0;
    std::int64_t timer = 0; // slots until this station transmits
    SlotTally birth{};      // global tally snapshot when the current frame was admitted
};

struct ReplicationResult {
    std::uint64_t seed = 0;
    // post-warmup counters
    SlotTally tally{};
    std::uint64_t slots = 0; // == tally.total()
    std::uint64_t attempts = 0;
    std::uint64_t collision_attempts = 0; // attempts lost to collisions
    std::uint64_t error_attempts = 0;     // lone attempts lost to channel errors
    std::uint64_t successes = 0;
    std::uint64_t discards = 0;
    std::uint64_t outcomes_observed = 0; // == successes + discards
    std::vector<std::uint64_t> attempts_by_stage;
    double sim_time_us = 0.0;  // post-warmup elapsed clock
    double delay_sum_us = 0.0; // summed delays of delivered frames
    // per-replication estimates
    double tau_hat = 0.0;
    double p_hat = 0.0;
    double p1_hat = 0.0;
    double ptr_hat = 0.0;
    double ps_hat = 0.0;
    double throughput_hat = 0.0;
    double delay_hat_us = 0.0;
    double discard_hat = 0.0;
};

struct SimResult {
    std::vector<ReplicationResult> replications;
    // pooled estimates: plain means of the per-replication estimates
    double tau_hat = 0.0;
    double p_hat = 0.0;
    double p1_hat = 0.0;
    double ptr_hat = 0.0;
    double ps_hat = 0.0;
    double throughput_hat = 0.0;
    double delay_hat_us = 0.0;
    double discard_hat = 0.0;
    // 95% CI half-widths over replication means: 1.96 * s / sqrt(R).
    // NaN when R = 1 (no spread estimate from a single replication).
    double ci95_tau = 0.0;
    double ci95_throughput = 0.0;
    double ci95_delay_us = 0.0;
    double ci95_discard = 0.0;
    // pooled counts across replications
    std::uint64_t slots = 0;
    std::uint64_t successes = 0;
    std::uint64_t collisions = 0;
    std::uint64_t error_slots = 0;
    std::uint64_t discards = 0;
    double elapsed_sim_us = 0.0;
    std::uint64_t seed = 0;
    DelayNorm delay_norm = DelayNorm::Paper;
};

// Name of the PRNG algorithm, recorded in output provenance.
std::string_view sim_generator_name();

// One replication with its own generator.  Throws std::runtime_error if
// 10^7 consecutive slots pass without a completed outcome (the configuration
// cannot terminate, e.g. persistent backoff with p_f = 1).
ReplicationResult run_replication(const Scenario& sc, const SimConfig& cfg,
                                  std::uint64_t seed, DelayNorm norm = DelayNorm::Paper);

// R independent replications (seeds cfg.seed, cfg.seed+1, ...), run
// concurrently, pooled by replication index.
SimResult replicate_and_pool(const Scenario& sc, const SimConfig& cfg,
                             DelayNorm norm = DelayNorm::Paper);

// Front door; same as replicate_and_pool.
SimResult simulate(const Scenario& sc, const SimConfig& cfg, DelayNorm norm = DelayNorm::Paper);

} // namespace dcf
