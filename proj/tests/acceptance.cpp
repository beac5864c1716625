// Acceptance gate: the ten project-level checks, one [PASS]/[FAIL] line each,
// nonzero exit if any fails.  Tolerances are stated inline with each check.

#include "dcf/cli.hpp"
#include "dcf/mac_timing.hpp"
#include "dcf/model.hpp"
#include "dcf/sim.hpp"

#include "test_helpers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace dcf;
using testutil::classical_persistent_tau;
using testutil::closed_form_tau;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail = {}) {
    std::printf("[%s] %2d. %s%s%s\n", ok ? "PASS" : "FAIL", id, name,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Scenario scenario(int n, double pf, std::optional<int> f, AccessMode mode) {
    Scenario sc;
    sc.n = n;
    sc.p_f = pf;
    sc.backoff = BackoffParams{8, 5, f};
    sc.mode = mode;
    return sc;
}

// Independent fixed-point reference for the classical collision-only model:
// bisection against the closed form, nothing shared with the library solver.
double reference_classical_tau(int n, int w, int m) {
    double lo = 0.0, hi = 2.0 / (w + 1.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double p1 = 1.0 - std::pow(1.0 - mid, n - 1);
        if (mid - classical_persistent_tau(p1, w, m) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// --------------------------------------------------------------------------

void check_1_channel_times() {
    const MacTimingParams tp;
    const ChannelTimes bas = channel_times(AccessMode::Basic, tp);
    const ChannelTimes rts = channel_times(AccessMode::RtsCts, tp);
    double worst = 0.0;
    for (auto [derived, ref] : {std::pair{bas.t_s, 2160.4}, {bas.t_c, 1948.2},
                                {rts.t_s, 2589.1}, {rts.t_c, 256.5}})
        worst = std::max(worst, std::fabs(derived - ref));
    report(1, "derived channel occupancy times match the references within 0.1 us",
           worst <= 0.1, fmt("worst |diff| %.4f us", worst));
}

void check_2_series_vs_closed_form() {
    double worst = 0.0;
    for (int w : {4, 8, 32})
        for (int m : {3, 5})
            for (int f : {0, 1, 5, 10}) {
                const BackoffParams bp{w, m, f};
                for (int k = 0; k <= 19; ++k) {
                    const double p = (k == 0) ? 0.01 : 0.05 * k;
                    if (std::fabs(p - 0.5) < 1e-3) continue;
                    const double series = tau_of_p(p, bp);
                    const double closed = closed_form_tau(p, w, m, f);
                    worst = std::max(worst, std::fabs(series - closed) / closed);
                }
            }
    report(2, "series form of tau(p) agrees with the closed form to 1e-10",
           worst <= 1e-10, fmt("worst rel diff %.2e over 456 grid points", worst));
}

void check_3_classical_reduction() {
    // (a) the persistent series collapses to the classical tau(p)
    double worst_tau_of_p = 0.0;
    for (int w : {8, 32})
        for (int m : {3, 5})
            for (double p = 0.0; p <= 0.49 + 1e-12; p += 0.005)
                worst_tau_of_p =
                    std::max(worst_tau_of_p, std::fabs(tau_of_p(p, BackoffParams{w, m, std::nullopt}) -
                                                       classical_persistent_tau(p, w, m)));

    // (b) the pf = 0 persistent fixed point reproduces the classical model's
    // operating point and throughput, against an independent reference solve
    const MacTimingParams tp;
    const ChannelTimes bas = channel_times(AccessMode::Basic, tp);
    double worst_tau = 0.0, worst_s = 0.0;
    for (int n : {5, 10, 20, 30, 50}) {
        const Scenario sc = scenario(n, 0.0, std::nullopt, AccessMode::Basic);
        const FixedPointSolution sol = solve_fixed_point(sc);
        const double tau_ref = reference_classical_tau(n, 8, 5);
        worst_tau = std::max(worst_tau, std::fabs(sol.tau - tau_ref));

        const double ptr = 1.0 - std::pow(1.0 - tau_ref, n);
        const double ps = n * tau_ref * std::pow(1.0 - tau_ref, n - 1) / ptr;
        const double s_ref = ps * ptr * bas.payload_airtime /
                             ((1.0 - ptr) * tp.slot_sigma_us +
                              ptr * (ps * bas.t_s + (1.0 - ps) * bas.t_c));
        worst_s = std::max(worst_s, std::fabs(throughput(sol, sc, bas) - s_ref));
    }
    const bool ok = worst_tau_of_p <= 1e-12 && worst_tau <= 1e-10 && worst_s <= 1e-10;
    report(3, "error-free persistent mode reduces to the classical model", ok,
           fmt("tau(p) diff %.1e; fixed point: tau diff %.1e, throughput diff %.1e",
               worst_tau_of_p, worst_tau, worst_s));
}

void check_4_solver_robustness() {
    std::mt19937 rng(987654321u);
    std::uniform_int_distribution<int> n_d(1, 60);
    std::uniform_real_distribution<double> pf_d(0.0, 0.999);
    std::uniform_int_distribution<int> w_exp_d(1, 10);
    std::uniform_int_distribution<int> m_d(0, 8);
    std::uniform_int_distribution<int> f_d(-1, 12);

    double worst_res = 0.0;
    bool brackets_ok = true;
    for (int t = 0; t < 200; ++t) {
        const int w0 = 1 << w_exp_d(rng);
        const int m = m_d(rng);
        const int f = f_d(rng);
        Scenario sc;
        sc.n = n_d(rng);
        sc.p_f = pf_d(rng);
        sc.backoff = BackoffParams{w0, m, f < 0 ? std::optional<int>{} : std::optional<int>{f}};

        const FixedPointSolution sol = solve_fixed_point(sc);
        worst_res = std::max(worst_res, sol.residual);

        // the wide bracket: g(0) <= 0 <= g(1)
        if (!(fixed_point_gap(0.0, sc) <= 0.0 && fixed_point_gap(1.0, sc) >= 0.0))
            brackets_ok = false;
        // and the refined top the solver actually uses; m = 0 makes tau_of_p
        // constant, putting the root at the top itself, where rounding can
        // leave g(hi) a few ulp below zero
        double hi = 2.0 / (w0 + 1.0);
        if (sc.backoff.persistent()) hi = std::min(hi, std::nextafter(1.0, 0.0));
        if (fixed_point_gap(hi, sc) < -1e-12) brackets_ok = false;
    }
    report(4, "solver: bracket holds and residual <= 1e-12 on 200 random scenarios",
           brackets_ok && worst_res <= 1e-12, fmt("worst residual %.2e", worst_res));
}

// Shared grid for checks 5-7: analytic vs simulation, conditional delay.
struct GridPoint {
    Scenario sc;
    Evaluation ana;
    SimResult sim;
};

std::vector<GridPoint> run_grid(double& seconds) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<GridPoint> grid;
    std::size_t idx = 0;
    for (int n : {2, 5, 10, 30})
        for (double pf : {0.0, 0.1, 0.3})
            for (AccessMode mode : {AccessMode::Basic, AccessMode::RtsCts}) {
                GridPoint gp;
                gp.sc = scenario(n, pf, 10, mode);
                gp.ana = evaluate(gp.sc, DelayNorm::Conditional);
                SimConfig cfg;
                cfg.frames_target = 101000; // >= 1e5 outcomes after the 1e3 warmup
                cfg.warmup_frames = 1000;
                cfg.replications = 10;
                cfg.seed = 1 + 10000 * static_cast<std::uint64_t>(idx++);
                gp.sim = simulate(gp.sc, cfg, DelayNorm::Conditional);
                grid.push_back(std::move(gp));
            }
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return grid;
}

void check_5_throughput(const std::vector<GridPoint>& grid, double seconds) {
    double worst = 0.0;
    for (const auto& gp : grid)
        worst = std::max(worst, std::fabs(gp.sim.throughput_hat - gp.ana.metrics.throughput) /
                                    gp.ana.metrics.throughput);
    const bool ok = worst <= 0.05 && seconds <= 300.0;
    report(5, "simulated throughput within 5% of analytic on the 24-point grid", ok,
           fmt("worst rel err %.2f%%; 1e5 frames x 10 reps per point, %.1f s total",
               100 * worst, seconds));
}

void check_6_discards(const std::vector<GridPoint>& grid) {
    bool ok = true;
    double worst = 0.0;
    for (const auto& gp : grid) {
        const double err = std::fabs(gp.sim.discard_hat - gp.ana.metrics.discard_prob);
        worst = std::max(worst, err);
        if (err > std::fmax(0.1 * gp.ana.metrics.discard_prob, 0.005)) ok = false;
    }
    // the discard probability must not depend on the access mode
    double worst_cross = 0.0;
    for (std::size_t i = 0; i < grid.size(); i += 2) {
        const auto& a = grid[i];     // basic
        const auto& b = grid[i + 1]; // rtscts, same (n, pf)
        if (a.ana.metrics.discard_prob != b.ana.metrics.discard_prob) ok = false;
        const double se_a = a.sim.ci95_discard / 1.96, se_b = b.sim.ci95_discard / 1.96;
        const double limit = std::fmax(3.0 * std::sqrt(se_a * se_a + se_b * se_b), 2e-5);
        const double diff = std::fabs(a.sim.discard_hat - b.sim.discard_hat);
        worst_cross = std::max(worst_cross, diff);
        if (diff > limit) ok = false;
    }
    report(6, "discard probability: sim within max(10% rel, 0.005 abs); mode-independent", ok,
           fmt("worst abs err %.2e; worst cross-mode sim diff %.2e", worst, worst_cross));
}

void check_7_delay(const std::vector<GridPoint>& grid) {
    double worst = 0.0;
    for (const auto& gp : grid)
        worst = std::max(worst, std::fabs(gp.sim.delay_hat_us - gp.ana.metrics.delay_us) /
                                    gp.ana.metrics.delay_us);
    report(7, "conditional frame delay within 15% of analytic on the grid",
           worst <= 0.15, fmt("worst rel err %.2f%%", 100 * worst));
}

void check_8_exact_small_cases() {
    bool ok = true;
    std::string detail;

    // one error-free station: the model is exact, the sim must be clean
    {
        const Scenario sc = scenario(1, 0.0, 10, AccessMode::Basic);
        SimConfig cfg;
        cfg.frames_target = 101000;
        cfg.warmup_frames = 1000;
        cfg.replications = 10;
        cfg.seed = 424242;
        const SimResult r = simulate(sc, cfg);
        const Evaluation ev = evaluate(sc);
        if (r.collisions != 0 || r.discards != 0) ok = false;
        if (std::fabs(ev.metrics.delay_us - 2230.3636363636364) > 1e-9) ok = false;
        if (std::fabs(r.delay_hat_us - ev.metrics.delay_us) >
            std::fmax(4.0 * r.ci95_delay_us, 1.0))
            ok = false;
        if (std::fabs(r.tau_hat - 2.0 / 9.0) > std::fmax(4.0 * r.ci95_tau, 1e-3)) ok = false;
        detail += fmt("n=1 pf=0: 0 collisions/discards, delay err %.3f us",
                      std::fabs(r.delay_hat_us - ev.metrics.delay_us));
    }

    // one station, p = 1/2, six attempts: discard probability is (1/2)^6
    {
        const Scenario sc = scenario(1, 0.5, 0, AccessMode::Basic);
        SimConfig cfg;
        cfg.frames_target = 201000;
        cfg.warmup_frames = 1000;
        cfg.replications = 10;
        cfg.seed = 848484;
        const SimResult r = simulate(sc, cfg);
        if (discard_probability(solve_fixed_point(sc), sc.backoff) != 0.015625) ok = false;
        if (std::fabs(r.discard_hat - 0.015625) > std::fmax(4.0 * r.ci95_discard, 0.002))
            ok = false;
        detail += fmt("; n=1 pf=0.5: discard err %.2e vs 1/64",
                      std::fabs(r.discard_hat - 0.015625));
    }
    report(8, "single-station cases reproduce the exact answers", ok, detail);
}

void check_9_qualitative_shapes() {
    const MacTimingParams tp;
    bool ok = true;
    std::string bad;

    // network-size sweep, error-free, persistent: basic throughput decays with
    // contention, RTS/CTS throughput is nearly flat
    {
        std::vector<double> s_bas, s_rts;
        for (int n = 5; n <= 50; ++n) {
            s_bas.push_back(
                evaluate(scenario(n, 0.0, std::nullopt, AccessMode::Basic)).metrics.throughput);
            s_rts.push_back(
                evaluate(scenario(n, 0.0, std::nullopt, AccessMode::RtsCts)).metrics.throughput);
        }
        for (std::size_t i = 1; i < s_bas.size(); ++i)
            if (!(s_bas[i] < s_bas[i - 1])) { ok = false; bad += " basic-S-not-decreasing"; break; }
        // flat on the normalized-throughput scale: the curve moves by less
        // than five percentage points across the whole contention range
        const double lo = *std::min_element(s_rts.begin(), s_rts.end());
        const double hi = *std::max_element(s_rts.begin(), s_rts.end());
        if (hi - lo >= 0.05) { ok = false; bad += " rts-S-not-flat"; }
    }

    // retry-allowance sweep at n = 30: more retries trade discards for delay
    for (double pf : {0.1, 0.5})
        for (AccessMode mode : {AccessMode::Basic, AccessMode::RtsCts}) {
            double prev_d = -1.0, prev_pd = 2.0;
            for (int f = 0; f <= 20; ++f) {
                const PerfMetrics pm = evaluate(scenario(30, pf, f, mode)).metrics;
                if (pm.delay_us < prev_d - 1e-9) { ok = false; bad += " delay-vs-f"; break; }
                if (pm.discard_prob > prev_pd + 1e-12) { ok = false; bad += " discard-vs-f"; break; }
                prev_d = pm.delay_us;
                prev_pd = pm.discard_prob;
            }
        }

    // error-rate sweep at n = 30: throughput falls, discards rise, and the
    // pf = 1 endpoint delivers nothing
    for (int f : {1, 10})
        for (AccessMode mode : {AccessMode::Basic, AccessMode::RtsCts}) {
            double prev_s = 2.0, prev_pd = -1.0;
            for (int k = 0; k <= 20; ++k) {
                const double pf = std::pow(10.0, -2.0 + k / 10.0);
                const PerfMetrics pm = evaluate(scenario(30, pf, f, mode)).metrics;
                if (pm.throughput > prev_s + 1e-12) { ok = false; bad += " S-vs-pf"; break; }
                if (pm.discard_prob < prev_pd - 1e-12) { ok = false; bad += " PD-vs-pf"; break; }
                prev_s = pm.throughput;
                prev_pd = pm.discard_prob;
            }
            const PerfMetrics end = evaluate(scenario(30, 1.0, f, mode)).metrics;
            if (end.throughput != 0.0 || end.delay_us != 0.0 || end.discard_prob != 1.0) {
                ok = false;
                bad += " pf=1-endpoint";
            }
        }

    report(9, "figure-level shapes: contention decay, retry trade-off, error-rate decay", ok,
           ok ? std::string("all curve families behave") : ("violations:" + bad));
}

void check_10_determinism() {
    const std::vector<std::string> sweep_args = {
        "sweep", "--axis", "n", "--values", "2,5",  "--source", "both",
        "--pf",  "0.1",    "--f", "10",     "--seed", "7",      "--reps",
        "3",     "--frames", "3000", "--warmup", "100"};
    std::ostringstream o1, o2, e1, e2;
    const int r1 = dcf::cli::run(sweep_args, o1, e1);
    const int r2 = dcf::cli::run(sweep_args, o2, e2);

    const char* f1 = "/tmp/dcf_acceptance_det1.csv";
    const char* f2 = "/tmp/dcf_acceptance_det2.csv";
    const std::vector<std::string> sim_base = {"simulate", "--n", "5", "--pf", "0.2",
                                               "--f", "6", "--seed", "99", "--reps", "4",
                                               "--frames", "5000", "--warmup", "200"};
    auto with_out = [&](const char* path) {
        std::vector<std::string> a = sim_base;
        a.push_back("--out");
        a.push_back(path);
        return a;
    };
    std::ostringstream sink;
    const int r3 = dcf::cli::run(with_out(f1), sink, sink);
    const int r4 = dcf::cli::run(with_out(f2), sink, sink);
    auto slurp = [](const char* path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string c1 = slurp(f1), c2 = slurp(f2);
    std::remove(f1);
    std::remove(f2);

    const bool ok = r1 == 0 && r2 == 0 && r3 == 0 && r4 == 0 && o1.str() == o2.str() &&
                    !c1.empty() && c1 == c2;
    report(10, "repeated runs are byte-identical (stdout and --out files)", ok);
}

} // namespace

int main() {
    std::printf("acceptance checks\n-----------------\n");
    check_1_channel_times();
    check_2_series_vs_closed_form();
    check_3_classical_reduction();
    check_4_solver_robustness();
    double grid_seconds = 0.0;
    const std::vector<GridPoint> grid = run_grid(grid_seconds);
    check_5_throughput(grid, grid_seconds);
    check_6_discards(grid);
    check_7_delay(grid);
    check_8_exact_small_cases();
    check_9_qualitative_shapes();
    check_10_determinism();
    std::printf("-----------------\nRESULT: %d/10 passed\n", 10 - failures);
    return failures == 0 ? 0 : 1;
}
