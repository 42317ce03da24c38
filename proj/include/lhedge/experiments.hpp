#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lhedge/affine.hpp"
#include "lhedge/errors.hpp"
#include "lhedge/montecarlo.hpp"
#include "lhedge/params.hpp"
#include "lhedge/scenario.hpp"

namespace lhedge {

enum class SweepParameter { gamma, theta_lambda, T_L, r_c, r_w };

inline std::string to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::gamma: return "gamma";
        case SweepParameter::theta_lambda: return "theta_lambda";
        case SweepParameter::T_L: return "T_L";
        case SweepParameter::r_c: return "r_c";
        case SweepParameter::r_w: return "r_w";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(std::string_view name) {
    for (auto p : {SweepParameter::gamma, SweepParameter::theta_lambda, SweepParameter::T_L, SweepParameter::r_c,
                   SweepParameter::r_w}) {
        if (name == to_string(p)) return p;
    }
    throw ParseError("unknown sweep parameter '" + std::string(name) + "'");
}

/// Value lists of the sensitivity study.
inline std::vector<double> default_sweep_values(SweepParameter p) {
    switch (p) {
        case SweepParameter::gamma: return {2, 3, 4, 5};
        case SweepParameter::theta_lambda: return {-0.06, -0.08, -0.12, -0.14};
        case SweepParameter::T_L: return {5, 15, 20, 25};
        case SweepParameter::r_c: return {0.10, 0.20, 0.30, 0.40};
        case SweepParameter::r_w: return {0.30, 0.50, 0.70, 0.90};
    }
    return {};
}

inline double& sweep_field(ModelParams& m, SweepParameter p) {
    switch (p) {
        case SweepParameter::gamma: return m.scheme.gamma;
        case SweepParameter::theta_lambda: return m.mortality.theta_lambda;
        case SweepParameter::T_L: return m.scheme.T_L;
        case SweepParameter::r_c: return m.scheme.r_c;
        case SweepParameter::r_w: return m.scheme.r_w;
    }
    return m.scheme.gamma;
}

struct SweepSpec {
    SweepParameter parameter = SweepParameter::gamma;
    std::vector<double> values;
    ModelParams base;
};

struct SweepRun {
    double value = 0.0;
    std::optional<EnsembleSummary> summary;
    std::string error;  // non-empty when the value failed
};

struct SweepResult {
    SweepParameter parameter = SweepParameter::gamma;
    std::vector<SweepRun> runs;
};

struct ExperimentOptions {
    unsigned threads = 0;
    bool svg = false;
    bool keep_paths = false;
};

struct BaseResult {
    ModelParams params;
    EnsembleSummary summary;
    RiskPremiums premiums;
    GammaCondition gamma;
    double lambda0 = 0.0;
};

namespace detail {

/// Minimal line chart: one polyline per series over a shared x axis.
inline void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                            const std::vector<double>& x, const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    constexpr double W = 640, H = 400, L = 60, R = 140, Tm = 30, B = 40;
    double lo = 0, hi = 0;
    bool first = true;
    for (const auto& [name, ys] : series) {
        for (double v : ys) {
            if (!std::isfinite(v)) continue;
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
    }
    if (hi == lo) hi = lo + 1.0;
    const double x0 = x.empty() ? 0.0 : x.front(), x1 = x.empty() ? 1.0 : x.back();
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0 == 0 ? 1 : x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - lo) / (hi - lo) * (H - Tm - B); };
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << L << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    out << "<text x=\"5\" y=\"" << py(hi) + 4 << "\" font-size=\"10\">" << format_real(hi) << "</text>\n";
    out << "<text x=\"5\" y=\"" << py(lo) + 4 << "\" font-size=\"10\">" << format_real(lo) << "</text>\n";
    out << "<text x=\"" << L << "\" y=\"" << H - 20 << "\" font-size=\"10\">" << format_real(x0) << "</text>\n";
    out << "<text x=\"" << W - R - 20 << "\" y=\"" << H - 20 << "\" font-size=\"10\">" << format_real(x1) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* colour = colours[s % 6];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
        const auto& ys = series[s].second;
        for (std::size_t k = 0; k < std::min(x.size(), ys.size()); ++k) out << px(x[k]) << ',' << py(ys[k]) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << W - R + 10 << "\" y=\"" << Tm + 16 * (s + 1) << "\" font-size=\"11\" fill=\"" << colour
            << "\">" << series[s].first << "</text>\n";
    }
    out << "</svg>\n";
}

inline void write_ensemble_svg(const EnsembleSummary& e, const std::filesystem::path& path, const std::string& title) {
    std::vector<double> t, wB, wL, wS, w0, yf;
    for (const auto& s : e.steps) {
        t.push_back(s.t);
        wB.push_back(s.w_B.mean);
        wL.push_back(s.w_L.mean);
        wS.push_back(s.w_S.mean);
        w0.push_back(s.w_0.mean);
        yf.push_back(s.Y_over_F.mean);
    }
    write_svg_chart(path, title, t, {{"w_B", wB}, {"w_L", wL}, {"w_S", wS}, {"w_0", w0}, {"Y/F", yf}});
}

}  // namespace detail

/// Base-scenario ensemble; writes ensemble.csv (and optionally paths.csv,
/// ensemble.svg) to out_dir when it is non-empty.
inline BaseResult run_base(const ModelParams& p, const std::filesystem::path& out_dir = {},
                           const ExperimentOptions& opt = {}) {
    BaseResult res;
    res.params = p;
    res.summary = run_ensemble(p, {opt.threads, opt.keep_paths, 1.0});
    const AffineCurve curve(p);
    res.lambda0 = lambda0(p.mortality);
    res.premiums = curve.risk_premiums(p.rate.r0, res.lambda0, 0.0);
    res.gamma = check_gamma_condition(p);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_ensemble_csv(res.summary, out_dir / "ensemble.csv");
        if (opt.keep_paths) write_paths_csv(res.summary, out_dir / "paths.csv");
        if (opt.svg) detail::write_ensemble_svg(res.summary, out_dir / "ensemble.svg", "base scenario");
    }
    return res;
}

/// Runs every value of the sweep with the same seed (common random numbers).
/// Values run concurrently, one ensemble per worker; a failing value records
/// its error and the rest still run.
inline SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir = {},
                             const ExperimentOptions& opt = {}) {
    SweepResult res;
    res.parameter = spec.parameter;
    res.runs.resize(spec.values.size());
    const auto n = static_cast<std::int64_t>(spec.values.size());
    detail::parallel_for(n, detail::resolve_threads(opt.threads, n), [&](std::int64_t i) {
        SweepRun& run = res.runs[i];
        run.value = spec.values[i];
        ModelParams p = spec.base;
        sweep_field(p, spec.parameter) = run.value;
        try {
            run.summary = run_ensemble(p, {1, opt.keep_paths, 1.0});
        } catch (const std::exception& e) {
            run.error = e.what();
        }
    });
    if (out_dir.empty()) return res;

    const std::filesystem::path dir = out_dir / to_string(spec.parameter);
    std::filesystem::create_directories(dir);
    std::ofstream cmp(dir / "comparison.csv", std::ios::binary);
    if (!cmp) throw ParseError("cannot write comparison.csv");
    cmp << "param_value,t,mean_wB,mean_wL,mean_wS,mean_w0,mean_YoverF\n";
    std::vector<std::pair<std::string, std::vector<double>>> wl_series;
    std::vector<double> t_axis;
    for (const auto& run : res.runs) {
        if (!run.summary) continue;
        const std::filesystem::path sub = dir / format_real(run.value);
        std::filesystem::create_directories(sub);
        write_ensemble_csv(*run.summary, sub / "ensemble.csv");
        if (opt.keep_paths) write_paths_csv(*run.summary, sub / "paths.csv");
        std::vector<double> wl;
        t_axis.clear();
        for (const auto& s : run.summary->steps) {
            cmp << format_real(run.value) << ',' << format_real(s.t) << ',' << format_real(s.w_B.mean) << ','
                << format_real(s.w_L.mean) << ',' << format_real(s.w_S.mean) << ',' << format_real(s.w_0.mean) << ','
                << format_real(s.Y_over_F.mean) << '\n';
            t_axis.push_back(s.t);
            wl.push_back(s.w_L.mean);
        }
        wl_series.emplace_back(to_string(spec.parameter) + "=" + format_real(run.value), std::move(wl));
        if (opt.svg) {
            detail::write_ensemble_svg(*run.summary, sub / "ensemble.svg",
                                       to_string(spec.parameter) + " = " + format_real(run.value));
        }
    }
    if (opt.svg && !wl_series.empty()) {
        detail::write_svg_chart(dir / "comparison_wL.svg", "mean w_L by " + to_string(spec.parameter), t_axis,
                                wl_series);
    }
    return res;
}

struct Anchor {
    std::string name;
    double expected = 0.0;
    double computed = 0.0;
    double tolerance = 0.0;
    bool relative = false;

    bool pass() const {
        const double err = std::abs(computed - expected);
        return relative ? err <= tolerance * std::abs(expected) : err <= tolerance;
    }
};

/// Published anchors that can be evaluated from a scenario alone.
inline std::vector<Anchor> base_anchors(const BaseResult& base) {
    std::vector<Anchor> a;
    a.push_back({"bond premium t=0", 0.01370, base.premiums.bond, 1e-4, false});
    a.push_back({"longevity bond premium t=0", 0.01372, base.premiums.longevity_bond, 1e-4, false});
    a.push_back({"stock premium t=0", 0.01670, base.premiums.stock, 1e-4, false});
    if (!base.summary.steps.empty()) {
        a.push_back({"mean w_L(T)", 0.6644, base.summary.steps.back().w_L.mean, 0.05, false});
    }
    return a;
}

/// Plain-text report of the base run, anchors and sweep outcomes.
inline std::string emit_report(const BaseResult& base, const std::vector<SweepResult>& sweeps = {}) {
    std::ostringstream out;
    const auto& s = base.summary;
    out << "# Longevity hedge experiment report\n\n";
    out << "## Base scenario\n\n";
    out << "lambda0 = " << format_real(base.lambda0) << "\n";
    out << "gamma bound = " << format_real(base.gamma.bound) << " (rate fraction " << format_real(base.gamma.rate_fraction)
        << ", mortality fraction " << format_real(base.gamma.mortality_fraction) << ")\n";
    out << "premiums t=0: bond " << format_real(base.premiums.bond) << ", longevity bond "
        << format_real(base.premiums.longevity_bond) << " (longevity component "
        << format_real(base.premiums.longevity_component) << "), stock " << format_real(base.premiums.stock) << "\n";
    out << "D(0) = " << format_real(s.D0) << ", G(0) = " << format_real(s.G0) << ", Y(0) = " << format_real(s.Y0)
        << "\n";
    out << "paths = " << s.n_paths << ", mean Y(T) = " << format_real(s.terminal_Y.mean) << " (se "
        << format_real(s.terminal_Y.se) << ")\n\n";

    out << "## Anchors\n\n";
    out << "| anchor | expected | computed | tolerance | result |\n|---|---|---|---|---|\n";
    for (const auto& a : base_anchors(base)) {
        out << "| " << a.name << " | " << format_real(a.expected) << " | " << format_real(a.computed) << " | "
            << (a.relative ? "rel " : "abs ") << format_real(a.tolerance) << " | " << (a.pass() ? "PASS" : "FAIL")
            << " |\n";
    }
    for (const auto& sw : sweeps) {
        out << "\n## Sweep " << to_string(sw.parameter) << "\n\n";
        if (sw.parameter == SweepParameter::T_L) {
            const auto& m = base.params.mortality;
            const CirExponents mort(m.b_lambda + m.theta_lambda * m.sigma_lambda, m.sigma_lambda);
            out << "1/h1(t, t+T_L):";
            for (const auto& run : sw.runs) out << " " << format_real(run.value) << " -> " << format_real(1.0 / mort.duration(run.value)) << ";";
            out << "\n\n";
        }
        out << "| value | mean w_B(T) | mean w_L(T) | mean w_S(T) | mean w_0(T) | mean Y/F(T) |\n|---|---|---|---|---|---|\n";
        for (const auto& run : sw.runs) {
            if (!run.summary) {
                out << "| " << format_real(run.value) << " | error: " << run.error << " |||||\n";
                continue;
            }
            const auto& l = run.summary->steps.back();
            out << "| " << format_real(run.value) << " | " << format_real(l.w_B.mean) << " | " << format_real(l.w_L.mean)
                << " | " << format_real(l.w_S.mean) << " | " << format_real(l.w_0.mean) << " | "
                << format_real(l.Y_over_F.mean) << " |\n";
        }
    }
    return out.str();
}

}  // namespace lhedge
