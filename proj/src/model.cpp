#include "dcf/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dcf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

int BackoffParams::max_stage() const {
    if (persistent())
        throw std::logic_error("max_stage: persistent backoff has no final stage");
    return m + *f;
}

std::int64_t BackoffParams::window(int stage) const { return window_size(stage, *this); }

void BackoffParams::validate() const {
    if (w0 < 1) throw std::invalid_argument("w0 must be >= 1");
    if (w0 > (1 << 20)) throw std::invalid_argument("w0 too large (max 2^20)");
    if (m < 0) throw std::invalid_argument("m must be >= 0");
    if (m > 30) throw std::invalid_argument("m too large (max 30)");
    if (f) {
        if (*f < 0) throw std::invalid_argument("f must be >= 0 (or persistent)");
        if (*f > 1000000) throw std::invalid_argument("f too large (max 1e6)");
    }
}

void Scenario::validate() const {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (n > 1000000) throw std::invalid_argument("n too large (max 1e6)");
    if (!(p_f >= 0.0 && p_f <= 1.0))
        throw std::invalid_argument("pf must be in [0,1]");
    backoff.validate();
    timing.validate();
}

std::int64_t window_size(int stage, const BackoffParams& backoff) {
    backoff.validate();
    if (stage < 0) throw std::out_of_range("window_size: stage must be >= 0");
    if (!backoff.persistent() && stage > backoff.max_stage())
        throw std::out_of_range("window_size: stage " + std::to_string(stage) +
                                " exceeds final stage " + std::to_string(backoff.max_stage()));
    const int doubled = stage < backoff.m ? stage : backoff.m;
    return static_cast<std::int64_t>(backoff.w0) << doubled;
}

FailureProb failure_prob(double tau, int n, double p_f) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("failure_prob: tau must be in [0,1]");
    if (n < 1) throw std::invalid_argument("failure_prob: n must be >= 1");
    if (!(p_f >= 0.0 && p_f <= 1.0))
        throw std::invalid_argument("failure_prob: p_f must be in [0,1]");
    FailureProb r;
    r.p1 = 1.0 - std::pow(1.0 - tau, n - 1); // exactly 0 when n = 1
    r.p = r.p1 + p_f - r.p1 * p_f;
    return r;
}

double tau_of_p(double p, const BackoffParams& backoff) {
    backoff.validate();
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("tau_of_p: p must be in [0,1]");

    if (backoff.persistent()) {
        if (p >= 1.0)
            throw std::domain_error("tau_of_p: p = 1 with persistent backoff (no stationary "
                                    "regime; every attempt fails forever)");
        // f->infinity limit of the series:
        //   tau = 2 / [ (1-p)*w0*G + 1 + w0*(2p)^m ],  G = sum_{i=0}^{m-1} (2p)^i.
        // Summing G as a loop keeps this exact at 2p = 1, where the usual
        // geometric quotient form of the limit is 0/0.
        double g_sum = 0.0, twop_i = 1.0;
        for (int i = 0; i < backoff.m; ++i) {
            g_sum += twop_i;
            twop_i *= 2.0 * p;
        }
        // after the loop twop_i == (2p)^m
        return 2.0 / ((1.0 - p) * backoff.w0 * g_sum + 1.0 + backoff.w0 * twop_i);
    }

    // Series form: finite and stable on all of [0,1].
    double num = 0.0, den = 0.0, pk = 1.0;
    const int last = backoff.max_stage();
    for (int i = 0; i <= last; ++i) {
        const double wi = static_cast<double>(window_size(i, backoff));
        num += pk;
        den += pk * (wi + 1.0);
        pk *= p;
    }
    return 2.0 * num / den;
}

double fixed_point_gap(double tau, const Scenario& sc) {
    const FailureProb fp = failure_prob(tau, sc.n, sc.p_f);
    if (sc.backoff.persistent() && fp.p >= 1.0) {
        // Near the bracket top with many stations, (1-tau)^(n-1) underflows
        // and p rounds to exactly 1, where the persistent series itself has
        // no stationary regime.  Use its p->1 limit, 2/(1 + w0*2^m), so the
        // gap stays defined and continuous for the solver.
        const double w_last = static_cast<double>(window_size(sc.backoff.m, sc.backoff));
        return tau - 2.0 / (1.0 + w_last);
    }
    return tau - tau_of_p(fp.p, sc.backoff);
}

FixedPointSolution solve_fixed_point(const Scenario& sc) {
    sc.validate();
    if (sc.backoff.persistent() && sc.p_f >= 1.0)
        throw std::domain_error("solve_fixed_point: persistent backoff with pf = 1 has no "
                                "operating point (every attempt fails, no frame completes)");

    double lo = 0.0;
    double hi = 2.0 / (sc.backoff.w0 + 1.0);
    if (sc.backoff.persistent() && hi >= 1.0)
        hi = std::nextafter(1.0, 0.0); // w0 = 1: keep p(tau) strictly below 1

    double glo = fixed_point_gap(lo, sc);
    double ghi = fixed_point_gap(hi, sc);
    // The root can sit exactly at the bracket top: n = 1 with pf = 0, or any
    // m = 0 configuration, where tau_of_p is constant and rounding may land
    // g(hi) a few ulp on either side of zero.  Accept the top as the root
    // whenever it already meets the residual tolerance.
    if (std::fabs(ghi) <= 1e-12) {
        const FailureProb fp = failure_prob(hi, sc.n, sc.p_f);
        return {hi, fp.p, fp.p1, std::fabs(ghi), 0};
    }
    if (glo > 0.0 || ghi < 0.0)
        throw std::runtime_error("solve_fixed_point: bracket violated (g(lo)=" +
                                 std::to_string(glo) + ", g(hi)=" + std::to_string(ghi) + ")");

    int iter = 0;
    for (; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break; // interval down to adjacent doubles
        const double gm = fixed_point_gap(mid, sc);
        if (gm < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }

    const bool pick_lo = std::fabs(glo) < std::fabs(ghi);
    const double tau = pick_lo ? lo : hi;
    const double residual = std::fabs(pick_lo ? glo : ghi);
    if (residual > 1e-12)
        throw std::runtime_error("solve_fixed_point: residual " + std::to_string(residual) +
                                 " after " + std::to_string(iter) + " iterations (n=" +
                                 std::to_string(sc.n) + ", pf=" + std::to_string(sc.p_f) + ")");
    const FailureProb fp = failure_prob(tau, sc.n, sc.p_f);
    return {tau, fp.p, fp.p1, residual, iter};
}

double ChainDistribution::total() const {
    double s = 0.0;
    for (const auto& row : b)
        for (double v : row) s += v;
    return s;
}

ChainDistribution chain_distribution(double p, const BackoffParams& backoff) {
    backoff.validate();
    if (backoff.persistent())
        throw std::invalid_argument("chain_distribution: persistent backoff has an infinite "
                                    "state table");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("chain_distribution: p must be in [0,1]");
    const int last = backoff.max_stage();

    std::int64_t cells = 0;
    for (int i = 0; i <= last; ++i) cells += window_size(i, backoff);
    if (cells > 100000000)
        throw std::invalid_argument("chain_distribution: state table too large");

    ChainDistribution d;
    // normalization: b00 * sum_i p^i (W_i + 1) = 2
    double den = 0.0, pk = 1.0;
    for (int i = 0; i <= last; ++i) {
        den += pk * (static_cast<double>(window_size(i, backoff)) + 1.0);
        pk *= p;
    }
    d.b00 = 2.0 / den;

    d.b.resize(last + 1);
    pk = 1.0;
    for (int i = 0; i <= last; ++i) {
        const auto wi = window_size(i, backoff);
        const double bi0 = pk * d.b00;
        auto& row = d.b[i];
        row.resize(static_cast<std::size_t>(wi));
        for (std::int64_t k = 0; k < wi; ++k)
            row[static_cast<std::size_t>(k)] =
                (static_cast<double>(wi - k) / static_cast<double>(wi)) * bi0;
        pk *= p;
    }
    return d;
}

double throughput(const FixedPointSolution& sol, const Scenario& sc, const ChannelTimes& ct) {
    const double tau = sol.tau;
    const int n = sc.n;
    const double pf = sc.p_f;
    const double sigma = sc.timing.slot_sigma_us;

    const double p_tr = 1.0 - std::pow(1.0 - tau, n);
    // p_s * p_tr, computed directly so tau -> 0 never divides 0 by 0
    const double single = n * tau * std::pow(1.0 - tau, n - 1);
    if (p_tr <= 0.0) return 0.0;

    const double num = single * (1.0 - pf) * ct.payload_airtime;
    const double den = (1.0 - p_tr) * sigma + single * (1.0 - pf) * ct.t_s +
                       (p_tr - single) * ct.t_c + single * pf * ct.t_e;
    return num / den;
}

double discard_probability(const FixedPointSolution& sol, const BackoffParams& backoff) {
    if (backoff.persistent()) return 0.0;
    return std::pow(sol.p, backoff.max_stage() + 1);
}

RenewalCycle renewal_cycle(const FixedPointSolution& sol, const Scenario& sc,
                           const ChannelTimes& ct) {
    const double tau = sol.tau, p1 = sol.p1, p = sol.p, pf = sc.p_f;
    const double sigma = sc.timing.slot_sigma_us;
    RenewalCycle rc;

    // P(exactly one of the other n-1 stations transmits | at least one does)
    rc.p1s = p1 > 0.0 ? (sc.n - 1) * tau * std::pow(1.0 - tau, sc.n - 2) / p1 : 0.0;
    const double busy =
        rc.p1s * (1.0 - pf) * ct.t_s + (1.0 - rc.p1s) * ct.t_c + rc.p1s * pf * ct.t_e;
    rc.p1_t_rc = (1.0 - p1) * sigma + p1 * busy;
    rc.n_idle = p1 > 0.0 ? 1.0 / p1 - 1.0 : kInf;
    rc.t_rc = p1 > 0.0 ? rc.p1_t_rc / p1 : kInf;
    // own failed attempt: collision with prob p1, clean channel error otherwise
    rc.t_coe = p > 0.0 ? (p1 * ct.t_c + (1.0 - p1) * pf * ct.t_e) / p : 0.0;
    return rc;
}

namespace {

// Waiting time spent before the attempt made from stage i: all backoff draws
// up to stage i (mean (W_k - 1)/2 decrements each, one renewal cycle per
// decrement) plus the channel time of the i failed attempts so far.
// Two routes that must agree:
//   explicit:  (A/2) * sum_{k=0}^{i} (W_k - 1)            + i*C
//   closed:    (A/2) * (w0*c_i - (i+1))                   + i*C
// where A = p1*t_rc, C = t_coe and c_i collapses the window schedule:
//   c_i = 2^(i+1) - 1                      for i <= m-1
//   c_i = 2^(m+1) - 1 + 2^m * (i - m)      for i >= m.
double stage_wait_checked(int i, double cum_w, double a, double c, int m, int w0) {
    const double explicit_form = 0.5 * a * (cum_w - (i + 1)) + i * c;
    const double ci = i < m ? std::ldexp(1.0, i + 1) - 1.0
                            : std::ldexp(1.0, m + 1) - 1.0 + std::ldexp(1.0, m) * (i - m);
    const double closed_form = 0.5 * a * (w0 * ci - (i + 1)) + i * c;
    if (std::fabs(explicit_form - closed_form) >
        1e-9 * std::fmax(1.0, std::fabs(explicit_form)))
        throw std::logic_error("mean_delay: per-stage waiting-time forms disagree at stage " +
                               std::to_string(i));
    return explicit_form;
}

} // namespace

double mean_delay(const FixedPointSolution& sol, const Scenario& sc, const ChannelTimes& ct,
                  DelayNorm norm) {
    if (sc.backoff.persistent())
        throw std::invalid_argument("mean_delay: use mean_delay_persistent");
    const RenewalCycle rc = renewal_cycle(sol, sc, ct);
    const double a = rc.p1_t_rc, c = rc.t_coe, p = sol.p;
    const int last = sc.backoff.max_stage();

    double td = 0.0, pk = 1.0, cum_w = 0.0;
    for (int i = 0; i <= last; ++i) {
        cum_w += static_cast<double>(window_size(i, sc.backoff));
        const double wait = stage_wait_checked(i, cum_w, a, c, sc.backoff.m, sc.backoff.w0);
        td += (1.0 - p) * pk * (wait + ct.t_s);
        pk *= p;
    }
    if (norm == DelayNorm::Conditional) {
        const double delivered = 1.0 - std::pow(p, last + 1);
        td = delivered > 0.0 ? td / delivered : 0.0;
    }
    return td;
}

double mean_delay_persistent(const FixedPointSolution& sol, const Scenario& sc,
                             const ChannelTimes& ct) {
    if (!sc.backoff.persistent())
        throw std::invalid_argument("mean_delay_persistent: finite backoff, use mean_delay");
    const double p = sol.p;
    if (p >= 1.0 - 1e-12)
        throw std::domain_error("mean_delay_persistent: delay diverges (p >= 1 - 1e-12)");
    const RenewalCycle rc = renewal_cycle(sol, sc, ct);
    const double a = rc.p1_t_rc, c = rc.t_coe;
    const int m = sc.backoff.m;
    const double w0 = sc.backoff.w0;

    // Summing the finite-f delay series to f -> infinity:
    //   T_d = t_s + (c*p - a/2)/(1-p) + (a/2) * w0 * E[c_i]
    // with E[c_i] = sum_i (1-p) p^i c_i expanded per the two c_i branches:
    //   E[c_i] = 2(1-p)*G - (1 - p^m) + (2^(m+1) - 1) p^m + 2^m p^(m+1)/(1-p),
    //   G = sum_{i=0}^{m-1} (2p)^i   (loop-summed: exact at 2p = 1).
    double g_sum = 0.0, twop_i = 1.0;
    for (int i = 0; i < m; ++i) {
        g_sum += twop_i;
        twop_i *= 2.0 * p;
    }
    const double pm = std::pow(p, m);
    const double e_ci = 2.0 * (1.0 - p) * g_sum - (1.0 - pm) +
                        (std::ldexp(1.0, m + 1) - 1.0) * pm +
                        std::ldexp(1.0, m) * pm * p / (1.0 - p);
    return ct.t_s + (c * p - 0.5 * a) / (1.0 - p) + 0.5 * a * w0 * e_ci;
}

PerfMetrics perf_metrics(const FixedPointSolution& sol, const Scenario& sc, DelayNorm norm) {
    const ChannelTimes ct = channel_times(sc.mode, sc.timing);
    PerfMetrics pm;
    pm.p_tr = 1.0 - std::pow(1.0 - sol.tau, sc.n);
    const double single = sc.n * sol.tau * std::pow(1.0 - sol.tau, sc.n - 1);
    pm.p_s = pm.p_tr > 0.0 ? single / pm.p_tr : 0.0;
    pm.throughput = throughput(sol, sc, ct);
    pm.discard_prob = discard_probability(sol, sc.backoff);
    const RenewalCycle rc = renewal_cycle(sol, sc, ct);
    pm.p1s = rc.p1s;
    pm.n_idle = rc.n_idle;
    pm.t_rc = rc.t_rc;
    pm.t_coe = rc.t_coe;
    if (sc.backoff.persistent()) {
        try {
            pm.delay_us = mean_delay_persistent(sol, sc, ct);
        } catch (const std::domain_error&) {
            pm.delay_us = kInf;
        }
    } else {
        pm.delay_us = mean_delay(sol, sc, ct, norm);
    }
    return pm;
}

Evaluation evaluate(const Scenario& sc, DelayNorm norm) {
    Evaluation ev;
    ev.solution = solve_fixed_point(sc);
    ev.metrics = perf_metrics(ev.solution, sc, norm);
    return ev;
}

} // namespace dcf
