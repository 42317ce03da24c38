#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lhedge/lhedge.hpp"

namespace fs = std::filesystem;
using namespace lhedge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

struct Common {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<std::int64_t> paths;
    unsigned threads = 0;
    bool csv = false;
};

ModelParams load(const Common& c) {
    ModelParams p = c.scenario.empty() ? base_scenario() : load_scenario(c.scenario);
    if (c.seed) p.numerics.seed = *c.seed;
    if (c.dt) p.numerics.dt = *c.dt;
    if (c.paths) p.numerics.n_paths = *c.paths;
    validate(p);
    return p;
}

void print_rows(const std::vector<std::pair<std::string, double>>& rows, bool csv) {
    if (csv) {
        for (std::size_t i = 0; i < rows.size(); ++i) std::cout << (i ? "," : "") << rows[i].first;
        std::cout << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i) std::cout << (i ? "," : "") << format_real(rows[i].second);
        std::cout << '\n';
        return;
    }
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    for (const auto& [k, v] : rows) {
        std::cout << k << std::string(width - k.size() + 2, ' ') << format_real(v) << '\n';
    }
}

int cmd_validate(const Common& c) {
    const ModelParams p = load(c);
    const GammaCondition gc = check_gamma_condition(p);
    print_rows({{"gamma_bound", gc.bound},
                {"gamma_rate_fraction", gc.rate_fraction},
                {"gamma_mortality_fraction", gc.mortality_fraction},
                {"delta1", gc.delta1},
                {"delta2", gc.delta2},
                {"rate_feller_margin", rate_feller_margin(p.rate)},
                {"mortality_feller_margin", mortality_feller_margin(p.mortality)},
                {"lambda0", lambda0(p.mortality)},
                {"contribution_c", p.scheme.contribution()},
                {"instalment_pi", p.scheme.instalment()}},
               c.csv);
    return kExitOk;
}

struct PriceArgs {
    double t = 0.0;
    std::optional<double> maturity;
    std::optional<double> r;
    std::optional<double> lambda;
    double cum = 0.0;
    bool legs = false;
};

int cmd_price(const Common& c, const PriceArgs& a) {
    const ModelParams p = load(c);
    const AffineCurve curve(p);
    const double r = a.r.value_or(p.rate.r0);
    const double lambda = a.lambda.value_or(lambda0(p.mortality));
    const double T = a.maturity.value_or(a.t + p.scheme.T_B);
    const auto h = curve.h_coefficients(a.t, T);
    const auto prem = curve.risk_premiums(r, lambda, a.t);
    std::vector<std::pair<std::string, double>> rows = {
        {"t", a.t},
        {"T", T},
        {"r", r},
        {"lambda", lambda},
        {"f0", curve.f0(a.t, T)},
        {"f1", curve.f1(a.t, T)},
        {"h0", h.h0},
        {"h1", h.h1},
        {"bond_price", curve.bond_price(r, a.t, T)},
        {"survival_factor", curve.survival_factor(lambda, a.t, T)},
        {"longevity_bond_price", curve.longevity_bond_price(r, lambda, a.cum, a.t, T)},
        {"premium_bond", prem.bond},
        {"premium_longevity_bond", prem.longevity_bond},
        {"premium_longevity_component", prem.longevity_component},
        {"premium_stock", prem.stock}};
    if (a.legs) {
        const auto D = contributions_pv(curve, r, a.t);
        const auto G = guarantee_pv(curve, r, lambda, a.cum, a.t);
        rows.insert(rows.end(), {{"D", D.D},
                                 {"alpha_B_D", D.alpha_B_D},
                                 {"alpha_0_D", D.alpha_0_D},
                                 {"G", G.G},
                                 {"alpha_L_G", G.alpha_L_G},
                                 {"alpha_B_G", G.alpha_B_G},
                                 {"alpha_0_G", G.alpha_0_G},
                                 {"annuity_a", G.annuity_a},
                                 {"annuity_price_at_T", annuity_price(curve, r, lambda, p.scheme.T)}});
    }
    print_rows(rows, c.csv);
    return kExitOk;
}

struct SolveArgs {
    std::vector<double> at;
    int grid = 0;
    std::optional<double> weights_t;
    std::optional<double> r;
    std::optional<double> lambda;
    double cum = 0.0;
    std::optional<double> F;
};

int cmd_solve(const Common& c, const SolveArgs& a) {
    const ModelParams p = load(c);
    const RiccatiSolution sol(p);
    const GammaCondition gc = check_gamma_condition(p);
    std::vector<double> times = a.at;
    if (a.grid >= 2) {
        for (int i = 0; i < a.grid; ++i) times.push_back(p.scheme.T * i / (a.grid - 1));
    }
    if (times.empty() && !a.weights_t) times = {0.0, p.scheme.T};

    if (!c.csv) {
        print_rows({{"delta1", sol.delta1()},
                    {"delta2", sol.delta2()},
                    {"gamma_bound", gc.bound},
                    {"a11", sol.a11()},
                    {"a12", sol.a12()},
                    {"a21", sol.a21()},
                    {"a22", sol.a22()}},
                   false);
    }
    if (!times.empty()) {
        const auto A0 = sol.A0_on_grid(times);
        if (c.csv) {
            std::cout << "t,A0,A1,A2\n";
            for (std::size_t i = 0; i < times.size(); ++i) {
                std::cout << format_real(times[i]) << ',' << format_real(A0[i]) << ',' << format_real(sol.A1(times[i]))
                          << ',' << format_real(sol.A2(times[i])) << '\n';
            }
        } else {
            std::printf("%12s %16s %16s %16s\n", "t", "A0", "A1", "A2");
            for (std::size_t i = 0; i < times.size(); ++i) {
                std::printf("%12.6g %16.10g %16.10g %16.10g\n", times[i], A0[i], sol.A1(times[i]), sol.A2(times[i]));
            }
        }
    }
    if (a.weights_t) {
        const double t = *a.weights_t;
        const AffineCurve curve(p);
        const double r = a.r.value_or(p.rate.r0);
        const double lambda = a.lambda.value_or(lambda0(p.mortality));
        const double F = a.F.value_or(p.scheme.F0);
        const auto D = contributions_pv(curve, r, t);
        const auto G = guarantee_pv(curve, r, lambda, a.cum, t);
        const double y = F + D.D - G.G;
        const auto u = optimal_surplus_controls(y, t, sol);
        const auto al = optimal_allocation(F, D, G, y, t, sol);
        if (!c.csv) std::cout << '\n';
        print_rows({{"t", t},
                    {"F", F},
                    {"D", D.D},
                    {"G", G.G},
                    {"Y", y},
                    {"aYB", u.aYB},
                    {"aYL", u.aYL},
                    {"aYS", u.aYS},
                    {"aY0", u.aY0},
                    {"alpha_B", al.alpha_B},
                    {"alpha_L", al.alpha_L},
                    {"alpha_S", al.alpha_S},
                    {"alpha_0", al.alpha_0},
                    {"w_B", al.w_B},
                    {"w_L", al.w_L},
                    {"w_S", al.w_S},
                    {"w_0", al.w_0}},
                   c.csv);
    }
    return kExitOk;
}

struct RunArgs {
    std::string out = "out";
    bool svg = false;
    bool write_paths = false;
    std::vector<std::string> params;
    std::vector<double> values;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << text;
}

int cmd_simulate(const Common& c, const RunArgs& a) {
    const ModelParams p = load(c);
    const BaseResult base = run_base(p, a.out, {c.threads, a.svg, a.write_paths});
    write_text(fs::path(a.out) / "report.md", emit_report(base));
    const auto& last = base.summary.steps.back();
    std::cout << "wrote " << (fs::path(a.out) / "ensemble.csv").string() << "\n"
              << "Y(0) = " << format_real(base.summary.Y0) << ", mean w_L(T) = " << format_real(last.w_L.mean)
              << ", mean Y/F(T) = " << format_real(last.Y_over_F.mean) << '\n';
    return kExitOk;
}

int cmd_sweep(const Common& c, const RunArgs& a) {
    const ModelParams p = load(c);
    std::vector<SweepParameter> which;
    if (a.params.empty()) {
        which = {SweepParameter::gamma, SweepParameter::theta_lambda, SweepParameter::T_L, SweepParameter::r_c,
                 SweepParameter::r_w};
    } else {
        for (const auto& name : a.params) which.push_back(parse_sweep_parameter(name));
    }
    if (!a.values.empty() && which.size() != 1) throw ParseError("--values needs exactly one --param");

    const BaseResult base = run_base(p, fs::path(a.out) / "base", {c.threads, a.svg, a.write_paths});
    std::vector<SweepResult> sweeps;
    int failures = 0;
    for (auto param : which) {
        SweepSpec spec{param, a.values.empty() ? default_sweep_values(param) : a.values, p};
        sweeps.push_back(run_sweep(spec, a.out, {c.threads, a.svg, a.write_paths}));
        for (const auto& run : sweeps.back().runs) {
            if (!run.error.empty()) {
                ++failures;
                std::cerr << to_string(param) << " = " << format_real(run.value) << ": " << run.error << '\n';
            }
        }
    }
    write_text(fs::path(a.out) / "report.md", emit_report(base, sweeps));
    std::cout << "wrote " << (fs::path(a.out) / "report.md").string() << '\n';
    return failures ? kExitInvalid : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Longevity-risk hedging for a defined-contribution pension scheme"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", common.scenario, "Scenario file (default: built-in base scenario)");
        sub->add_option("--seed", common.seed, "RNG seed override");
        sub->add_option("--dt", common.dt, "Simulation step override, years");
        sub->add_option("--paths", common.paths, "Number of simulated paths override");
        sub->add_option("--threads", common.threads, "Worker threads (0: all cores)");
        sub->add_flag("--csv", common.csv, "Print CSV instead of aligned text");
    };

    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario and print derived constants");
    add_common(validate_cmd);

    PriceArgs price;
    auto* price_cmd = app.add_subcommand("price", "Affine coefficients, prices and premiums");
    add_common(price_cmd);
    price_cmd->add_option("--t", price.t, "Valuation time, years since age t0");
    price_cmd->add_option("--maturity", price.maturity, "Maturity (default t + T_B)");
    price_cmd->add_option("--r", price.r, "Short rate (default r0)");
    price_cmd->add_option("--lambda", price.lambda, "Force of mortality (default lambda0)");
    price_cmd->add_option("--cum", price.cum, "Cumulative mortality int_0^t lambda");
    price_cmd->add_flag("--legs", price.legs, "Also print D, G, annuity price and replication holdings");

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve", "Riccati solution and optimal controls");
    add_common(solve_cmd);
    solve_cmd->add_option("--at", solve.at, "Times at which to print A0, A1, A2");
    solve_cmd->add_option("--grid", solve.grid, "Uniform grid of n points over [0, T]");
    solve_cmd->add_option("--weights", solve.weights_t, "Print controls and fund weights at this t");
    solve_cmd->add_option("--r", solve.r, "Short rate for --weights (default r0)");
    solve_cmd->add_option("--lambda", solve.lambda, "Force of mortality for --weights (default lambda0)");
    solve_cmd->add_option("--cum", solve.cum, "Cumulative mortality for --weights");
    solve_cmd->add_option("--F", solve.F, "Fund value for --weights (default F0)");

    RunArgs run;
    auto* sim_cmd = app.add_subcommand("simulate", "Base-scenario ensemble to ensemble.csv");
    add_common(sim_cmd);
    sim_cmd->add_option("--out", run.out, "Output directory");
    sim_cmd->add_flag("--svg", run.svg, "Also render SVG charts");
    sim_cmd->add_flag("--write-paths", run.write_paths, "Also write paths.csv");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sensitivity sweeps with common random numbers");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--out", run.out, "Output directory");
    sweep_cmd->add_option("--param", run.params, "gamma, theta_lambda, T_L, r_c or r_w (default: all)");
    sweep_cmd->add_option("--values", run.values, "Value list for a single --param");
    sweep_cmd->add_flag("--svg", run.svg, "Also render SVG charts");
    sweep_cmd->add_flag("--write-paths", run.write_paths, "Also write paths.csv per value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (*validate_cmd) return cmd_validate(common);
        if (*price_cmd) return cmd_price(common, price);
        if (*solve_cmd) return cmd_solve(common, solve);
        if (*sim_cmd) return cmd_simulate(common, run);
        if (*sweep_cmd) return cmd_sweep(common, run);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
