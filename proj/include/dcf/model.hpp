#pragma once
// Saturation performance model of 802.11 DCF over an error-prone channel.
//
// Each of n saturated stations runs binary exponential backoff: the stage-i
// contention window is W_i = w0 * 2^min(i, m).  An attempt fails with
// probability p = p1 + p_f - p1*p_f, combining collisions (p1, from the other
// n-1 stations) with channel errors (p_f, independent per attempt).  After
// m + f + 1 failed attempts the frame is discarded; with persistent backoff
// (f unbounded) it never is.
//
// The per-slot transmission probability tau is tied to p by the stationary
// distribution of the backoff chain:
//
//     b00 = 2 / sum_{i=0}^{m+f} p^i (W_i + 1),     tau = b00 * sum_{i=0}^{m+f} p^i
//
// and p depends on tau through p1 = 1 - (1-tau)^(n-1), closing a fixed-point
// system with a unique solution.  The series sums above are the authoritative
// forms everywhere; closed forms exist but have removable singularities at
// p = 1/2 (and p = 1), so they appear only in tests as cross-checks.
//
// From the solved (tau, p, p1) follow throughput, discard probability, and
// mean frame delay; the delay analysis views the medium between a tagged
// station's backoff decrements as a renewal process (see renewal_cycle).

#include "dcf/mac_timing.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace dcf {

struct BackoffParams {
    int w0 = 8;           // initial contention window, slots
    int m = 5;            // doubling threshold: window frozen at w0*2^m beyond stage m
    std::optional<int> f; // extra frozen-window retries; nullopt = persistent (never discard)

    bool persistent() const { return !f.has_value(); }
    int max_stage() const;        // m + f; throws std::logic_error in persistent mode
    std::int64_t window(int stage) const; // w0 * 2^min(stage, m); range-checked
    void validate() const;        // throws std::invalid_argument
};

struct Scenario {
    int n = 1;            // contending stations
    double p_f = 0.0;     // frame error probability per attempt
    BackoffParams backoff{};
    AccessMode mode = AccessMode::Basic;
    MacTimingParams timing{};

    void validate() const; // throws std::invalid_argument
};

struct FixedPointSolution {
    double tau = 0.0;      // per-slot transmission probability
    double p = 0.0;        // per-attempt failure probability (collision or error)
    double p1 = 0.0;       // collision-only component
    double residual = 0.0; // |tau - tau_of_p(p(tau))| at the returned point
    int iterations = 0;
};

// Stationary distribution of the backoff chain at a given p (finite f only;
// the table is infinite in persistent mode).  b[i][k] is the probability of
// being at stage i with timer k.
struct ChainDistribution {
    std::vector<std::vector<double>> b;
    double b00 = 0.0;
    double total() const;
};

struct RenewalCycle {
    double p1s = 0.0;    // P(busy slot is a single foreign transmission)
    double n_idle = 0.0; // mean idle slots per cycle, 1/p1 - 1; +inf when p1 = 0
    double t_rc = 0.0;   // mean cycle duration, us; +inf when p1 = 0
    double t_coe = 0.0;  // mean channel time of one own failed attempt, us; 0 when p = 0
    double p1_t_rc = 0.0; // the product p1 * t_rc -- mean duration of one backoff
                          // decrement -- finite for all p1 in [0,1]
};

enum class DelayNorm {
    Paper,       // literal form: weights (1-p)p^i sum to 1 - p^(m+f+1)
    Conditional, // divided by 1 - p^(m+f+1): mean delay given eventual delivery
};

struct PerfMetrics {
    double throughput = 0.0;   // fraction of channel time carrying delivered payload
    double delay_us = 0.0;     // mean frame delay (+inf if persistent delay diverges)
    double discard_prob = 0.0; // probability a frame exhausts all m+f+1 attempts
    // intermediates, useful for reporting
    double p_tr = 0.0;  // P(slot has >= 1 transmission)
    double p_s = 0.0;   // P(single transmission | >= 1)
    double p1s = 0.0;
    double n_idle = 0.0;
    double t_rc = 0.0;
    double t_coe = 0.0;
};

struct Evaluation {
    FixedPointSolution solution;
    PerfMetrics metrics;
};

// Contention window at the given backoff stage: w0 * 2^min(stage, m).
// Throws std::out_of_range if stage < 0 or, for finite f, stage > m + f.
std::int64_t window_size(int stage, const BackoffParams& backoff);

struct FailureProb {
    double p1; // collision probability seen by one station: 1 - (1-tau)^(n-1)
    double p;  // total failure probability: p1 + p_f - p1*p_f
};
FailureProb failure_prob(double tau, int n, double p_f);

// Transmission probability as a function of the failure probability, via the
// series sums (stable on all of [0,1]).  Persistent mode uses the f->infinity
// limit, which requires p < 1 (throws std::domain_error at p = 1).
double tau_of_p(double p, const BackoffParams& backoff);

// g(tau) = tau - tau_of_p(p(tau)): strictly increasing in tau, negative at 0;
// its unique zero is the operating point.  Exposed for bracket diagnostics.
// In persistent mode, when p(tau) rounds to exactly 1 (large n near the
// bracket top), the continuous p->1 limit 2/(1 + w0*2^m) stands in for
// tau_of_p so the gap stays defined.
double fixed_point_gap(double tau, const Scenario& sc);

// Solve tau = tau_of_p(p(tau)) by bisection.  The root always lies in
// [0, 2/(w0+1)] because tau_of_p is nonincreasing in p and maximal at p = 0;
// in persistent mode the upper end is additionally kept below 1.  When the
// root sits at the bracket top itself (n = 1 with pf = 0; m = 0, where
// tau_of_p is constant; the degenerate persistent one-slot window), the top
// is returned directly once its gap is within tolerance.  residual <= 1e-12;
// iteration cap 200 (exceeding it throws std::runtime_error).
FixedPointSolution solve_fixed_point(const Scenario& sc);

// Full stationary table for finite f (throws std::invalid_argument on
// persistent backoff).  Test/diagnostic path, not used by the solver.
ChainDistribution chain_distribution(double p, const BackoffParams& backoff);

// Saturation throughput: fraction of channel time spent on successfully
// delivered payload bits.  Slot classes: idle (sigma), success (t_s),
// collision (t_c), frame error (t_e); a success delivers payload_airtime us
// of payload.  tau = 0 gives S = 0.
double throughput(const FixedPointSolution& sol, const Scenario& sc, const ChannelTimes& ct);

// p^(m+f+1); exactly 0 in persistent mode.  Contains no timing quantity, so
// it is identical for Basic and RTS/CTS at the same operating point.
double discard_probability(const FixedPointSolution& sol, const BackoffParams& backoff);

// The medium as the tagged station sees it between backoff decrements: a
// renewal process whose cycle is a run of idle slots closed by one foreign
// busy slot.  All singular points are absorbed into the product p1 * t_rc
// (the mean cost of one backoff decrement), which stays finite.
RenewalCycle renewal_cycle(const FixedPointSolution& sol, const Scenario& sc,
                           const ChannelTimes& ct);

// Mean frame delay for finite f: sum over the stage at which delivery happens
// of (backoff time + failed-attempt time + t_s), weighted by (1-p)p^i.  Each
// stage's waiting time is computed both by the explicit per-stage sum and by
// its closed form; disagreement beyond 1e-9 relative throws std::logic_error.
// DelayNorm::Paper keeps the literal weights (summing to 1 - p^(m+f+1));
// DelayNorm::Conditional renormalizes by delivery probability.
double mean_delay(const FixedPointSolution& sol, const Scenario& sc, const ChannelTimes& ct,
                  DelayNorm norm = DelayNorm::Paper);

// Persistent-mode mean delay (the f->infinity limit of mean_delay; every
// frame is eventually delivered, so no normalization question arises).
// Throws std::domain_error when p >= 1 - 1e-12 (delay diverges).
double mean_delay_persistent(const FixedPointSolution& sol, const Scenario& sc,
                             const ChannelTimes& ct);

// All metrics for a solved scenario.  Persistent-mode delay divergence is
// reported as +infinity here rather than an exception.
PerfMetrics perf_metrics(const FixedPointSolution& sol, const Scenario& sc,
                         DelayNorm norm = DelayNorm::Paper);

// solve_fixed_point + perf_metrics in one call.
Evaluation evaluate(const Scenario& sc, DelayNorm norm = DelayNorm::Paper);

} // namespace dcf
