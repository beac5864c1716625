#include "dcf/cli.hpp"

#include "dcf/model.hpp"
#include "dcf/sim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcf::cli {

namespace {

using nlohmann::ordered_json;

constexpr const char* kVersion = "dcf 1.0.0";
constexpr const char* kCsvHeader =
    "mode,n,w0,m,f,pf,source,tau,p,p1,ptr,ps,throughput,delay_us,discard_prob,"
    "seed,reps,frames,ci95_throughput,ci95_delay_us,ci95_discard";

// Shortest round-trip decimal form; "inf"/"nan" for non-finite.
std::string num(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("cannot parse " + what + " value '" + s + "'");
    }
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("cannot parse " + what + " value '" + s + "'");
    }
}

// ---------------------------------------------------------------------------
// Options shared by all subcommands.

struct CommonOpts {
    std::string mode = "basic";
    int n = 1;
    int w0 = 8;
    int m = 5;
    std::string f = "inf"; // "inf" = persistent
    double pf = 0.0;
    double rate = 11.0;
    int payload = 2312;
    std::string format = "csv";
    std::string out_path;
    std::string delay_norm = "paper";
    std::uint64_t seed = 1;
    int reps = 10;
    std::int64_t frames = 100000;
    std::int64_t warmup = 1000;
};

std::optional<int> parse_f(const std::string& s) {
    if (s == "inf") return std::nullopt;
    return parse_int(s, "--f");
}

DelayNorm parse_norm(const std::string& s) {
    if (s == "paper") return DelayNorm::Paper;
    if (s == "conditional") return DelayNorm::Conditional;
    throw std::invalid_argument("unknown delay normalization '" + s + "'");
}

Scenario make_scenario(const CommonOpts& o) {
    Scenario sc;
    sc.mode = access_mode_from_string(o.mode);
    sc.n = o.n;
    sc.p_f = o.pf;
    sc.backoff.w0 = o.w0;
    sc.backoff.m = o.m;
    sc.backoff.f = parse_f(o.f);
    sc.timing.channel_rate_mbps = o.rate;
    sc.timing.payload_octets = o.payload;
    sc.validate();
    return sc;
}

SimConfig make_sim_config(const CommonOpts& o) {
    SimConfig cfg;
    cfg.seed = o.seed;
    cfg.frames_target = o.frames;
    cfg.warmup_frames = o.warmup;
    cfg.replications = o.reps;
    cfg.validate();
    return cfg;
}

std::string f_string(const std::optional<int>& f) {
    return f ? std::to_string(*f) : std::string("inf");
}

std::string scenario_config_string(const Scenario& sc, const CommonOpts& o) {
    std::ostringstream os;
    os << "mode=" << to_string(sc.mode) << " n=" << sc.n << " w0=" << sc.backoff.w0
       << " m=" << sc.backoff.m << " f=" << f_string(sc.backoff.f) << " pf=" << num(sc.p_f)
       << " rate=" << num(sc.timing.channel_rate_mbps) << " payload=" << sc.timing.payload_octets
       << " delay-normalization=" << o.delay_norm;
    return os.str();
}

std::string sim_config_string(const SimConfig& cfg) {
    std::ostringstream os;
    os << "seed=" << cfg.seed << " reps=" << cfg.replications << " frames=" << cfg.frames_target
       << " warmup=" << cfg.warmup_frames;
    return os.str();
}

// ---------------------------------------------------------------------------
// One output row.

struct RunRecord {
    std::string mode;
    int n = 0, w0 = 0, m = 0;
    std::optional<int> f;
    double pf = 0.0;
    std::string source; // "analytic" | "sim"
    double tau = 0, p = 0, p1 = 0, ptr = 0, ps = 0;
    double throughput = 0, delay_us = 0, discard_prob = 0;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<std::int64_t> frames;
    std::optional<double> ci_throughput, ci_delay_us, ci_discard;
};

RunRecord analytic_record(const Scenario& sc, const Evaluation& ev) {
    RunRecord r;
    r.mode = to_string(sc.mode);
    r.n = sc.n;
    r.w0 = sc.backoff.w0;
    r.m = sc.backoff.m;
    r.f = sc.backoff.f;
    r.pf = sc.p_f;
    r.source = "analytic";
    r.tau = ev.solution.tau;
    r.p = ev.solution.p;
    r.p1 = ev.solution.p1;
    r.ptr = ev.metrics.p_tr;
    r.ps = ev.metrics.p_s;
    r.throughput = ev.metrics.throughput;
    r.delay_us = ev.metrics.delay_us;
    r.discard_prob = ev.metrics.discard_prob;
    return r;
}

RunRecord sim_record(const Scenario& sc, const SimConfig& cfg, const SimResult& sr) {
    RunRecord r;
    r.mode = to_string(sc.mode);
    r.n = sc.n;
    r.w0 = sc.backoff.w0;
    r.m = sc.backoff.m;
    r.f = sc.backoff.f;
    r.pf = sc.p_f;
    r.source = "sim";
    r.tau = sr.tau_hat;
    r.p = sr.p_hat;
    r.p1 = sr.p1_hat;
    r.ptr = sr.ptr_hat;
    r.ps = sr.ps_hat;
    r.throughput = sr.throughput_hat;
    r.delay_us = sr.delay_hat_us;
    r.discard_prob = sr.discard_hat;
    r.seed = cfg.seed;
    r.reps = cfg.replications;
    r.frames = cfg.frames_target;
    r.ci_throughput = sr.ci95_throughput;
    r.ci_delay_us = sr.ci95_delay_us;
    r.ci_discard = sr.ci95_discard;
    return r;
}

std::string csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.mode << ',' << r.n << ',' << r.w0 << ',' << r.m << ',' << f_string(r.f) << ','
       << num(r.pf) << ',' << r.source << ',' << num(r.tau) << ',' << num(r.p) << ','
       << num(r.p1) << ',' << num(r.ptr) << ',' << num(r.ps) << ',' << num(r.throughput) << ','
       << num(r.delay_us) << ',' << num(r.discard_prob) << ','
       << (r.seed ? std::to_string(*r.seed) : "") << ','
       << (r.reps ? std::to_string(*r.reps) : "") << ','
       << (r.frames ? std::to_string(*r.frames) : "") << ','
       << (r.ci_throughput ? num(*r.ci_throughput) : "") << ','
       << (r.ci_delay_us ? num(*r.ci_delay_us) : "") << ','
       << (r.ci_discard ? num(*r.ci_discard) : "");
    return os.str();
}

ordered_json json_record(const RunRecord& r) {
    ordered_json j;
    j["mode"] = r.mode;
    j["n"] = r.n;
    j["w0"] = r.w0;
    j["m"] = r.m;
    if (r.f)
        j["f"] = *r.f;
    else
        j["f"] = "inf";
    j["pf"] = r.pf;
    j["source"] = r.source;
    j["tau"] = r.tau;
    j["p"] = r.p;
    j["p1"] = r.p1;
    j["ptr"] = r.ptr;
    j["ps"] = r.ps;
    j["throughput"] = r.throughput;
    j["delay_us"] = r.delay_us;
    j["discard_prob"] = r.discard_prob;
    if (r.seed) j["seed"] = *r.seed;
    if (r.reps) j["reps"] = *r.reps;
    if (r.frames) j["frames"] = *r.frames;
    if (r.ci_throughput) j["ci95_throughput"] = *r.ci_throughput;
    if (r.ci_delay_us) j["ci95_delay_us"] = *r.ci_delay_us;
    if (r.ci_discard) j["ci95_discard"] = *r.ci_discard;
    return j;
}

std::string csv_block(const std::string& config_line, bool with_generator,
                      const std::vector<RunRecord>& rows) {
    std::ostringstream os;
    os << "# " << kVersion << "\n";
    os << "# config: " << config_line << "\n";
    if (with_generator) os << "# generator: " << sim_generator_name() << "\n";
    os << kCsvHeader << "\n";
    for (const auto& r : rows) os << csv_row(r) << "\n";
    return os.str();
}

std::string json_block(const std::string& config_line, bool with_generator,
                       const std::vector<RunRecord>& rows) {
    ordered_json j;
    j["version"] = kVersion;
    j["config"] = config_line;
    if (with_generator) j["generator"] = std::string(sim_generator_name());
    j["rows"] = ordered_json::array();
    for (const auto& r : rows) j["rows"].push_back(json_record(r));
    return j.dump(2) + "\n";
}

int emit(const std::string& content, const CommonOpts& o, std::ostream& out, std::ostream& err) {
    if (!o.out_path.empty()) {
        std::ofstream file(o.out_path, std::ios::binary);
        if (!file) {
            err << "error: cannot open output file '" << o.out_path << "'\n";
            return 2;
        }
        file << content;
        return 0;
    }
    out << content;
    return 0;
}

// ---------------------------------------------------------------------------
// table1: derived channel times, checked against the reference durations
// when the timing parameters are the defaults.

int cmd_table1(const CommonOpts& o, std::ostream& out, std::ostream& err) {
    MacTimingParams tp;
    tp.channel_rate_mbps = o.rate;
    tp.payload_octets = o.payload;
    tp.validate();
    const ChannelTimes bas = channel_times(AccessMode::Basic, tp);
    const ChannelTimes rts = channel_times(AccessMode::RtsCts, tp);
    const bool defaults = tp == MacTimingParams{};

    struct Ref {
        const char* name;
        double derived;
        double reference;
    };
    const Ref refs[] = {
        {"t_s basic ", bas.t_s, 2160.4},
        {"t_c basic ", bas.t_c, 1948.2},
        {"t_s rtscts", rts.t_s, 2589.1},
        {"t_c rtscts", rts.t_c, 256.5},
    };
    bool all_pass = true;
    for (const auto& r : refs)
        if (std::fabs(r.derived - r.reference) > 0.1) all_pass = false;

    if (o.format == "json") {
        ordered_json j;
        j["version"] = kVersion;
        j["rate_mbps"] = tp.channel_rate_mbps;
        j["payload_octets"] = tp.payload_octets;
        j["phy_overhead_us"] = phy_overhead(tp);
        j["basic"] = {{"t_s", bas.t_s}, {"t_c", bas.t_c}, {"t_e", bas.t_e}};
        j["rtscts"] = {{"t_s", rts.t_s}, {"t_c", rts.t_c}, {"t_e", rts.t_e}};
        j["payload_airtime_us"] = bas.payload_airtime;
        if (defaults) {
            j["reference_check"] = ordered_json::array();
            for (const auto& r : refs)
                j["reference_check"].push_back({{"name", r.name},
                                                {"derived", r.derived},
                                                {"reference", r.reference},
                                                {"pass", std::fabs(r.derived - r.reference) <= 0.1}});
            j["pass"] = all_pass;
        }
        const int rc = emit(j.dump(2) + "\n", o, out, err);
        return rc != 0 ? rc : (defaults && !all_pass ? 1 : 0);
    }

    std::ostringstream os;
    os << "channel occupancy times (us), rate " << num(tp.channel_rate_mbps) << " Mbps, payload "
       << tp.payload_octets << " octets\n";
    char line[160];
    std::snprintf(line, sizeof line, "  %-16s %12s %12s\n", "quantity", "basic", "rtscts");
    os << line;
    auto row = [&](const char* name, double a, double b) {
        std::snprintf(line, sizeof line, "  %-16s %12.3f %12.3f\n", name, a, b);
        os << line;
    };
    row("t_s", bas.t_s, rts.t_s);
    row("t_c", bas.t_c, rts.t_c);
    row("t_e", bas.t_e, rts.t_e);
    row("payload airtime", bas.payload_airtime, rts.payload_airtime);
    row("phy overhead", phy_overhead(tp), phy_overhead(tp));
    if (defaults) {
        os << "\nreference check (0.1 us tolerance):\n";
        for (const auto& r : refs) {
            const bool pass = std::fabs(r.derived - r.reference) <= 0.1;
            std::snprintf(line, sizeof line, "  %s %10.3f  vs %7.1f  [%s]\n", r.name, r.derived,
                          r.reference, pass ? "PASS" : "FAIL");
            os << line;
        }
    } else {
        os << "\n(non-default parameters: no reference comparison)\n";
    }
    const int rc = emit(os.str(), o, out, err);
    return rc != 0 ? rc : (defaults && !all_pass ? 1 : 0);
}

// ---------------------------------------------------------------------------
// solve / simulate: one row each.

int cmd_solve(const CommonOpts& o, std::ostream& out, std::ostream& err) {
    const Scenario sc = make_scenario(o);
    const Evaluation ev = evaluate(sc, parse_norm(o.delay_norm));
    const std::vector<RunRecord> rows = {analytic_record(sc, ev)};
    const std::string cfg_line = scenario_config_string(sc, o);
    const std::string content = o.format == "json" ? json_block(cfg_line, false, rows)
                                                   : csv_block(cfg_line, false, rows);
    return emit(content, o, out, err);
}

int cmd_simulate(const CommonOpts& o, std::ostream& out, std::ostream& err) {
    const Scenario sc = make_scenario(o);
    const SimConfig cfg = make_sim_config(o);
    const SimResult sr = simulate(sc, cfg, parse_norm(o.delay_norm));
    const std::vector<RunRecord> rows = {sim_record(sc, cfg, sr)};
    const std::string cfg_line = scenario_config_string(sc, o) + " " + sim_config_string(cfg);
    const std::string content = o.format == "json" ? json_block(cfg_line, true, rows)
                                                   : csv_block(cfg_line, true, rows);
    return emit(content, o, out, err);
}

// ---------------------------------------------------------------------------
// sweep: presets reproducing the reference figures, or a custom single axis.

struct SweepOpts {
    std::string preset;
    std::string axis;
    std::string values;
    std::string range;     // from:to:step, linear
    std::string log_range; // from:to:count, log-spaced (pf only)
    std::string source = "analytic";
};

struct SweepPoint {
    Scenario sc;
};

std::vector<double> parse_axis_values(const SweepOpts& so) {
    const int given = (!so.values.empty()) + (!so.range.empty()) + (!so.log_range.empty());
    if (given != 1)
        throw std::invalid_argument(
            "custom sweep needs exactly one of --values / --range / --log-range");
    std::vector<double> vals;
    if (!so.values.empty()) {
        for (const auto& tok : split(so.values, ','))
            vals.push_back(parse_double(tok, "--values"));
    } else if (!so.range.empty()) {
        const auto parts = split(so.range, ':');
        if (parts.size() != 3) throw std::invalid_argument("--range wants from:to:step");
        const double from = parse_double(parts[0], "--range from");
        const double to = parse_double(parts[1], "--range to");
        const double step = parse_double(parts[2], "--range step");
        if (step <= 0 || to < from) throw std::invalid_argument("--range: need to >= from, step > 0");
        for (double v = from; v <= to + 1e-9 * step; v += step) vals.push_back(v);
    } else {
        if (so.axis != "pf")
            throw std::invalid_argument("--log-range applies to the pf axis only");
        const auto parts = split(so.log_range, ':');
        if (parts.size() != 3) throw std::invalid_argument("--log-range wants from:to:count");
        const double from = parse_double(parts[0], "--log-range from");
        const double to = parse_double(parts[1], "--log-range to");
        const int count = parse_int(parts[2], "--log-range count");
        if (from <= 0 || to < from || count < 2)
            throw std::invalid_argument("--log-range: need 0 < from <= to, count >= 2");
        const double la = std::log10(from), lb = std::log10(to);
        for (int k = 0; k < count; ++k)
            vals.push_back(std::pow(10.0, la + (lb - la) * k / (count - 1)));
    }
    if (vals.empty()) throw std::invalid_argument("sweep axis has no values");
    std::sort(vals.begin(), vals.end()); // output rows are ordered by axis value
    return vals;
}

std::vector<SweepPoint> sweep_points(const SweepOpts& so, const CommonOpts& o) {
    std::vector<SweepPoint> pts;
    const AccessMode both_modes[] = {AccessMode::Basic, AccessMode::RtsCts};
    auto base = [&] {
        Scenario sc;
        sc.backoff.w0 = o.w0;
        sc.backoff.m = o.m;
        sc.timing.channel_rate_mbps = o.rate;
        sc.timing.payload_octets = o.payload;
        return sc;
    };

    if (so.preset == "fig2") {
        // throughput/delay vs network size, error-free, persistent backoff
        for (int n = 2; n <= 50; ++n)
            for (AccessMode mode : both_modes) {
                Scenario sc = base();
                sc.n = n;
                sc.p_f = 0.0;
                sc.backoff.f.reset();
                sc.mode = mode;
                pts.push_back({sc});
            }
    } else if (so.preset == "fig3") {
        // delay/discard vs retry allowance at n = 30
        for (int f = 0; f <= 20; ++f)
            for (double pf : {0.1, 0.5})
                for (AccessMode mode : both_modes) {
                    Scenario sc = base();
                    sc.n = 30;
                    sc.p_f = pf;
                    sc.backoff.f = f;
                    sc.mode = mode;
                    pts.push_back({sc});
                }
    } else if (so.preset == "fig4") {
        // throughput/delay/discard vs frame error rate at n = 30
        for (int k = 0; k <= 20; ++k) {
            const double pf = std::pow(10.0, -2.0 + k / 10.0);
            for (int f : {1, 10})
                for (AccessMode mode : both_modes) {
                    Scenario sc = base();
                    sc.n = 30;
                    sc.p_f = pf;
                    sc.backoff.f = f;
                    sc.mode = mode;
                    pts.push_back({sc});
                }
        }
    } else if (!so.preset.empty()) {
        throw std::invalid_argument("unknown preset '" + so.preset + "'");
    } else {
        if (so.axis != "n" && so.axis != "pf" && so.axis != "f")
            throw std::invalid_argument("sweep needs --preset or --axis {n,pf,f}");
        const std::vector<double> vals = parse_axis_values(so);
        for (double v : vals) {
            Scenario sc = make_scenario(o);
            if (so.axis == "n") {
                if (v < 1 || v != std::floor(v))
                    throw std::invalid_argument("axis n values must be integers >= 1");
                sc.n = static_cast<int>(v);
            } else if (so.axis == "f") {
                if (v < 0 || v != std::floor(v))
                    throw std::invalid_argument("axis f values must be integers >= 0");
                sc.backoff.f = static_cast<int>(v);
            } else {
                sc.p_f = v;
            }
            pts.push_back({sc});
        }
    }
    for (auto& pt : pts) pt.sc.validate();
    return pts;
}

std::string sweep_config_suffix(const SweepOpts& so) {
    std::ostringstream os;
    if (!so.preset.empty())
        os << "preset=" << so.preset;
    else {
        os << "axis=" << so.axis;
        if (!so.values.empty()) os << " values=" << so.values;
        if (!so.range.empty()) os << " range=" << so.range;
        if (!so.log_range.empty()) os << " log-range=" << so.log_range;
    }
    os << " source=" << so.source;
    return os.str();
}

int cmd_sweep(const CommonOpts& o, const SweepOpts& so, std::ostream& out, std::ostream& err) {
    const std::vector<SweepPoint> pts = sweep_points(so, o);
    const bool want_analytic = so.source == "analytic" || so.source == "both";
    const bool want_sim = so.source == "sim" || so.source == "both";
    const DelayNorm norm = parse_norm(o.delay_norm);

    std::vector<RunRecord> rows;
    rows.reserve(pts.size() * (want_analytic + want_sim));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Scenario& sc = pts[i].sc;
        if (want_analytic) rows.push_back(analytic_record(sc, evaluate(sc, norm)));
        if (want_sim) {
            SimConfig cfg = make_sim_config(o);
            // disjoint seed blocks per point keep replication streams distinct
            cfg.seed = o.seed + 10000 * static_cast<std::uint64_t>(i);
            rows.push_back(sim_record(sc, cfg, simulate(sc, cfg, norm)));
        }
    }

    std::ostringstream cfgline;
    cfgline << "w0=" << o.w0 << " m=" << o.m << " rate=" << num(o.rate) << " payload="
            << o.payload << " delay-normalization=" << o.delay_norm << " "
            << sweep_config_suffix(so);
    if (want_sim)
        cfgline << " " << sim_config_string(make_sim_config(o))
                << " (per-point seed = seed + 10000*index)";
    const std::string content = o.format == "json"
                                    ? json_block(cfgline.str(), want_sim, rows)
                                    : csv_block(cfgline.str(), want_sim, rows);
    return emit(content, o, out, err);
}

// ---------------------------------------------------------------------------
// validate: analytic vs simulation over the cross-validation grid.

struct ValidateOpts {
    double max_rel_err = 0.05;   // throughput tolerance
    double delay_rel_err = 0.15; // conditional-delay tolerance
    std::vector<std::string> points;
};

struct PointReport {
    Scenario sc;
    Evaluation ana;
    SimResult sim;
    double thr_rel = 0.0, delay_rel = 0.0, disc_err = 0.0, disc_limit = 0.0;
    bool exact_case = false; // n = 1, pf = 0: collision-free, discard-free
    bool ok = true;
};

Scenario point_from_spec(const std::string& spec, const CommonOpts& o) {
    CommonOpts po = o;
    for (const auto& kv : split(spec, ':')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--points entries look like n=1:pf=0");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "n")
            po.n = parse_int(val, "n");
        else if (key == "pf")
            po.pf = parse_double(val, "pf");
        else if (key == "mode")
            po.mode = val;
        else if (key == "f")
            po.f = val;
        else if (key == "w0")
            po.w0 = parse_int(val, "w0");
        else if (key == "m")
            po.m = parse_int(val, "m");
        else
            throw std::invalid_argument("unknown --points key '" + key + "'");
    }
    return make_scenario(po);
}

int cmd_validate(const CommonOpts& o, const ValidateOpts& vo, std::ostream& out,
                 std::ostream& err) {
    // Delay comparison is conditional-on-delivery on both sides: the simulator
    // can only time frames it delivers.
    const DelayNorm norm = DelayNorm::Conditional;

    std::vector<Scenario> grid;
    if (!vo.points.empty()) {
        for (const auto& spec : vo.points) grid.push_back(point_from_spec(spec, o));
    } else {
        for (int n : {2, 5, 10, 30})
            for (double pf : {0.0, 0.1, 0.3})
                for (AccessMode mode : {AccessMode::Basic, AccessMode::RtsCts}) {
                    CommonOpts po = o;
                    po.n = n;
                    po.pf = pf;
                    po.mode = std::string(to_string(mode));
                    po.f = "10";
                    grid.push_back(make_scenario(po));
                }
    }

    std::vector<PointReport> reports;
    reports.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        PointReport pr;
        pr.sc = grid[i];
        pr.ana = evaluate(pr.sc, norm);
        SimConfig cfg = make_sim_config(o);
        cfg.seed = o.seed + 10000 * static_cast<std::uint64_t>(i);
        pr.sim = simulate(pr.sc, cfg, norm);

        const double s_ana = pr.ana.metrics.throughput;
        pr.thr_rel = s_ana > 0 ? std::fabs(pr.sim.throughput_hat - s_ana) / s_ana
                               : std::fabs(pr.sim.throughput_hat);
        const double d_ana = pr.ana.metrics.delay_us;
        pr.delay_rel = d_ana > 0 ? std::fabs(pr.sim.delay_hat_us - d_ana) / d_ana
                                 : std::fabs(pr.sim.delay_hat_us);
        const double pd_ana = pr.ana.metrics.discard_prob;
        pr.disc_err = std::fabs(pr.sim.discard_hat - pd_ana);
        pr.disc_limit = std::fmax(0.1 * pd_ana, 0.005);
        pr.exact_case = pr.sc.n == 1 && pr.sc.p_f == 0.0;
        pr.ok = pr.thr_rel <= vo.max_rel_err && pr.delay_rel <= vo.delay_rel_err &&
                pr.disc_err <= pr.disc_limit;
        if (pr.exact_case && (pr.sim.discards != 0 || pr.sim.collisions != 0)) pr.ok = false;
        reports.push_back(std::move(pr));
    }

    // Discard probability must not depend on the access mode: exact equality
    // analytically, statistical agreement in simulation.
    struct CrossMode {
        int n;
        double pf;
        double ana_diff;
        double sim_diff;
        double limit;
        bool ok;
    };
    std::vector<CrossMode> cross;
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (std::size_t j = i + 1; j < reports.size(); ++j) {
            const auto &a = reports[i], &b = reports[j];
            if (a.sc.n != b.sc.n || a.sc.p_f != b.sc.p_f || a.sc.mode == b.sc.mode) continue;
            if (a.sc.backoff.w0 != b.sc.backoff.w0 || a.sc.backoff.m != b.sc.backoff.m ||
                a.sc.backoff.f != b.sc.backoff.f)
                continue;
            CrossMode cm;
            cm.n = a.sc.n;
            cm.pf = a.sc.p_f;
            cm.ana_diff =
                std::fabs(a.ana.metrics.discard_prob - b.ana.metrics.discard_prob);
            cm.sim_diff = std::fabs(a.sim.discard_hat - b.sim.discard_hat);
            const double se_a = a.sim.ci95_discard / 1.96, se_b = b.sim.ci95_discard / 1.96;
            const double se = std::sqrt(se_a * se_a + se_b * se_b);
            cm.limit = std::isnan(se) ? 0.005 : std::fmax(3.0 * se, 2e-5);
            cm.ok = cm.ana_diff == 0.0 && cm.sim_diff <= cm.limit;
            cross.push_back(cm);
        }

    bool all_ok = true;
    double worst_thr = 0.0, worst_delay = 0.0;
    for (const auto& pr : reports) {
        all_ok = all_ok && pr.ok;
        worst_thr = std::fmax(worst_thr, pr.thr_rel);
        worst_delay = std::fmax(worst_delay, pr.delay_rel);
    }
    for (const auto& cm : cross) all_ok = all_ok && cm.ok;

    if (o.format == "json") {
        ordered_json j;
        j["version"] = kVersion;
        j["delay_normalization"] = "conditional";
        j["tolerances"] = {{"throughput_rel", vo.max_rel_err},
                           {"delay_rel", vo.delay_rel_err},
                           {"discard", "max(10% rel, 0.005 abs)"}};
        j["sim"] = sim_config_string(make_sim_config(o)) + " (per-point seed = seed + 10000*index)";
        j["points"] = ordered_json::array();
        for (const auto& pr : reports) {
            ordered_json p;
            p["mode"] = to_string(pr.sc.mode);
            p["n"] = pr.sc.n;
            p["pf"] = pr.sc.p_f;
            p["f"] = f_string(pr.sc.backoff.f);
            p["throughput_analytic"] = pr.ana.metrics.throughput;
            p["throughput_sim"] = pr.sim.throughput_hat;
            p["throughput_rel_err"] = pr.thr_rel;
            p["delay_analytic_us"] = pr.ana.metrics.delay_us;
            p["delay_sim_us"] = pr.sim.delay_hat_us;
            p["delay_rel_err"] = pr.delay_rel;
            p["discard_analytic"] = pr.ana.metrics.discard_prob;
            p["discard_sim"] = pr.sim.discard_hat;
            p["discard_abs_err"] = pr.disc_err;
            if (pr.exact_case) {
                p["exact"] = true;
                p["sim_collisions"] = pr.sim.collisions;
                p["sim_discards"] = pr.sim.discards;
            }
            p["ok"] = pr.ok;
            j["points"].push_back(p);
        }
        j["cross_mode_discard"] = ordered_json::array();
        for (const auto& cm : cross)
            j["cross_mode_discard"].push_back({{"n", cm.n},
                                               {"pf", cm.pf},
                                               {"analytic_diff", cm.ana_diff},
                                               {"sim_diff", cm.sim_diff},
                                               {"limit", cm.limit},
                                               {"ok", cm.ok}});
        j["worst_throughput_rel_err"] = worst_thr;
        j["worst_delay_rel_err"] = worst_delay;
        j["pass"] = all_ok;
        const int rc = emit(j.dump(2) + "\n", o, out, err);
        return rc != 0 ? rc : (all_ok ? 0 : 1);
    }

    std::ostringstream os;
    os << "analytic vs simulation validation (" << kVersion << ")\n";
    os << "delay normalization: conditional; " << sim_config_string(make_sim_config(o))
       << " (per-point seed = seed + 10000*index)\n";
    os << fmt("tolerances: throughput %.1f%%, delay %.1f%%, discard max(10%% rel, 0.005 abs)\n",
              100 * vo.max_rel_err, 100 * vo.delay_rel_err);
    os << "\n";
    char line[256];
    for (const auto& pr : reports) {
        std::snprintf(line, sizeof line,
                      "%-6s n=%-3d pf=%-5s f=%-4s S %8.6f/%8.6f (%5.2f%%)  Td %11.1f/%11.1f "
                      "(%5.2f%%)  PD %9.3g/%9.3g (|d|=%8.2g)%s %s\n",
                      std::string(to_string(pr.sc.mode)).c_str(), pr.sc.n,
                      num(pr.sc.p_f).c_str(), f_string(pr.sc.backoff.f).c_str(),
                      pr.ana.metrics.throughput, pr.sim.throughput_hat, 100 * pr.thr_rel,
                      pr.ana.metrics.delay_us, pr.sim.delay_hat_us, 100 * pr.delay_rel,
                      pr.ana.metrics.discard_prob, pr.sim.discard_hat, pr.disc_err,
                      pr.exact_case ? " [exact: 0 collisions, 0 discards expected]" : "",
                      pr.ok ? "ok" : "FAIL");
        os << line;
    }
    if (!cross.empty()) {
        os << "\ncross-mode discard agreement:\n";
        for (const auto& cm : cross) {
            std::snprintf(line, sizeof line,
                          "  n=%-3d pf=%-5s analytic diff %.3g, sim diff %.3g (limit %.3g) %s\n",
                          cm.n, num(cm.pf).c_str(), cm.ana_diff, cm.sim_diff, cm.limit,
                          cm.ok ? "ok" : "FAIL");
            os << line;
        }
    }
    os << fmt("\nworst relative error: throughput %.2f%%, delay %.2f%%\n", 100 * worst_thr,
              100 * worst_delay);
    os << "overall: " << (all_ok ? "PASS" : "FAIL") << "\n";
    const int rc = emit(os.str(), o, out, err);
    return rc != 0 ? rc : (all_ok ? 0 : 1);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"802.11 DCF saturation performance over an error-prone channel: "
                 "fixed-point analytic model and slot-level Monte Carlo simulator"};
    app.name("dcf");

    CommonOpts o;
    app.add_option("--mode", o.mode, "access mode")->check(CLI::IsMember({"basic", "rtscts"}));
    app.add_option("--n", o.n, "number of contending stations");
    app.add_option("--w0", o.w0, "initial contention window (slots)");
    app.add_option("--m", o.m, "window-doubling threshold");
    app.add_option("--f", o.f, "extra frozen-window retries, or 'inf' for persistent");
    app.add_option("--pf", o.pf, "frame error probability per attempt");
    app.add_option("--rate", o.rate, "channel bit rate, Mbps");
    app.add_option("--payload", o.payload, "payload size, octets");
    app.add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--out", o.out_path, "write output to this file instead of stdout");
    app.add_option("--delay-normalization", o.delay_norm,
                   "'paper' (literal form) or 'conditional' (per delivered frame)")
        ->check(CLI::IsMember({"paper", "conditional"}));
    app.add_option("--seed", o.seed, "simulation base seed");
    app.add_option("--reps", o.reps, "independent replications");
    app.add_option("--frames", o.frames, "completed frame outcomes per replication");
    app.add_option("--warmup", o.warmup, "outcomes excluded from statistics");
    app.set_config("--config", "", "flat key=value file (keys mirror flag names); flags win");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CLI::App* c_table1 =
        app.add_subcommand("table1", "derived channel occupancy times, checked against the "
                                     "reference values at default parameters");
    c_table1->fallthrough();
    CLI::App* c_solve = app.add_subcommand("solve", "analytic evaluation of one scenario");
    c_solve->fallthrough();
    CLI::App* c_sim = app.add_subcommand("simulate", "Monte Carlo run of one scenario");
    c_sim->fallthrough();

    SweepOpts so;
    CLI::App* c_sweep = app.add_subcommand("sweep", "evaluate a series of scenarios along one "
                                                    "axis or a built-in preset");
    c_sweep->fallthrough();
    c_sweep->add_option("--preset", so.preset, "fig2 | fig3 | fig4")
        ->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    c_sweep->add_option("--axis", so.axis, "swept parameter: n, pf, or f")
        ->check(CLI::IsMember({"n", "pf", "f"}));
    c_sweep->add_option("--values", so.values, "comma-separated axis values");
    c_sweep->add_option("--range", so.range, "linear axis range from:to:step");
    c_sweep->add_option("--log-range", so.log_range, "log-spaced pf range from:to:count");
    c_sweep->add_option("--source", so.source, "analytic | sim | both")
        ->check(CLI::IsMember({"analytic", "sim", "both"}));

    ValidateOpts vo;
    CLI::App* c_validate = app.add_subcommand(
        "validate", "run the analytic-vs-simulation cross-validation grid");
    c_validate->fallthrough();
    c_validate->add_option("--max-rel-err", vo.max_rel_err,
                           "throughput relative-error tolerance");
    c_validate->add_option("--delay-rel-err", vo.delay_rel_err,
                           "delay relative-error tolerance");
    c_validate->add_option("--points", vo.points,
                           "replace the grid with explicit points, e.g. n=1:pf=0 (repeatable)");

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.push_back("dcf");
    for (const auto& a : args) argv_store.push_back(a);
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (c_table1->parsed()) return cmd_table1(o, out, err);
        if (c_solve->parsed()) return cmd_solve(o, out, err);
        if (c_sim->parsed()) return cmd_simulate(o, out, err);
        if (c_sweep->parsed()) return cmd_sweep(o, so, out, err);
        if (c_validate->parsed()) return cmd_validate(o, vo, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << "error: no subcommand\n";
    return 2;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace dcf::cli
