#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "lhedge/errors.hpp"

namespace lhedge {

// CIR short rate: dr = (a_r - b_r r) dt + sigma_r sqrt(r) dW1, market price
// of rate risk theta_r sqrt(r).
struct RateParams {
    double a_r = 0.0;
    double b_r = 0.0;
    double sigma_r = 0.0;
    double theta_r = 0.0;
    double r0 = 0.0;
};

// CIR-type force of mortality with a Gompertz-Makeham anchored drift a_lambda(age).
// m, b and t0 are in years of age.
struct MortalityParams {
    double b_lambda = 0.0;
    double sigma_lambda = 0.0;
    double theta_lambda = 0.0;
    double phi = 0.0;
    double m = 0.0;
    double b = 0.0;
    double t0 = 0.0;
};

struct StockParams {
    double sigma_S = 0.0;
    double sigma_S_r = 0.0;
    double theta_S = 0.0;
};

struct SchemeParams {
    double w = 0.0;
    double r_c = 0.0;
    double r_w = 0.0;
    double T = 0.0;
    double T_B = 0.0;
    double T_L = 0.0;
    double F0 = 0.0;
    double gamma = 0.0;

    /// Instantaneous contribution c = r_c w.
    double contribution() const { return r_c * w; }
    /// Annuity instalment pi = r_w w.
    double instalment() const { return r_w * w; }
};

struct NumericsParams {
    double dt = 1.0 / 52.0;
    std::int64_t n_paths = 100;
    std::uint64_t seed = 1;
    double quad_rel_tol = 1e-9;
    double guarantee_age_cap = 130.0;
};

struct ModelParams {
    RateParams rate;
    MortalityParams mortality;
    StockParams stock;
    SchemeParams scheme;
    NumericsParams numerics;
};

/// The base scenario used throughout the numerical study.
inline ModelParams base_scenario() {
    ModelParams p;
    p.rate = {0.0056210, 0.0904668, 0.0543625, -0.5590635, 0.0621328};
    p.mortality = {0.561, 0.0352, -0.10, 0.0009944, 86.4515, 12.9374, 40.0};
    p.stock = {0.14926, -0.0046306, 0.1108301};
    p.scheme = {15.0, 0.15, 0.59, 25.0, 10.0, 10.0, 50.0, 2.0};
    return p;
}

/// Gompertz-Makeham force of mortality at the given age.
inline double gompertz_makeham_force(const MortalityParams& m, double age) {
    return m.phi + std::exp((age - m.m) / m.b) / m.b;
}

/// Initial force of mortality, seeded from the Gompertz-Makeham law at age t0.
inline double lambda0(const MortalityParams& m) { return gompertz_makeham_force(m, m.t0); }

/// Mortality drift level a_lambda evaluated at calendar age (t0 + elapsed time).
/// With this drift E[lambda(t)] equals the Gompertz-Makeham force at age t0 + t.
inline double mortality_drift(const MortalityParams& m, double age) {
    return m.b_lambda * (m.phi + (1.0 / (m.b_lambda * m.b) + 1.0) / m.b * std::exp((age - m.m) / m.b));
}

/// Result of the risk-aversion admissibility check.
struct GammaCondition {
    double rate_fraction = 0.0;
    double mortality_fraction = 0.0;
    double bound = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    bool ok = false;
};

/// Evaluates the lower bound on gamma under which both Riccati discriminants
/// are positive. `ok` also requires delta1 > 0 and delta2 > 0.
inline GammaCondition check_gamma_condition(const ModelParams& p) {
    const auto& r = p.rate;
    const auto& m = p.mortality;
    const double gamma = p.scheme.gamma;

    const double k_rate = 2.0 * r.sigma_r * r.sigma_r + r.sigma_r * r.sigma_r * r.theta_r * r.theta_r +
                          2.0 * r.b_r * r.theta_r * r.sigma_r;
    const double bt_r = r.b_r + r.theta_r * r.sigma_r;
    const double k_mort =
        2.0 * m.b_lambda * m.theta_lambda * m.sigma_lambda + m.sigma_lambda * m.sigma_lambda * m.theta_lambda * m.theta_lambda;
    const double bt_l = m.b_lambda + m.theta_lambda * m.sigma_lambda;

    GammaCondition out;
    out.rate_fraction = k_rate / (bt_r * bt_r + 2.0 * r.sigma_r * r.sigma_r);
    out.mortality_fraction = k_mort / (bt_l * bt_l);
    out.bound = std::max(out.rate_fraction, out.mortality_fraction);
    out.delta1 = r.b_r * r.b_r + (gamma - 1.0) / gamma * k_rate;
    out.delta2 = m.b_lambda * m.b_lambda + (gamma - 1.0) / gamma * k_mort;
    out.ok = gamma > out.bound && out.delta1 > 0.0 && out.delta2 > 0.0;
    return out;
}

/// 2 a_r - sigma_r^2.
inline double rate_feller_margin(const RateParams& r) { return 2.0 * r.a_r - r.sigma_r * r.sigma_r; }

/// 2 a_lambda(t0) - sigma_lambda^2; a_lambda increases with age so this is the minimum.
inline double mortality_feller_margin(const MortalityParams& m) {
    return 2.0 * mortality_drift(m, m.t0) - m.sigma_lambda * m.sigma_lambda;
}

namespace detail {
inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}
}  // namespace detail

/// Throws ValidationError naming the first violated precondition.
inline void validate(const ModelParams& p) {
    using detail::require;
    const auto& r = p.rate;
    const auto& m = p.mortality;
    const auto& s = p.stock;
    const auto& c = p.scheme;
    const auto& n = p.numerics;

    for (double v : {r.a_r, r.b_r, r.sigma_r, r.theta_r, r.r0, m.b_lambda, m.sigma_lambda, m.theta_lambda, m.phi,
                     m.m, m.b, m.t0, s.sigma_S, s.sigma_S_r, s.theta_S, c.w, c.r_c, c.r_w, c.T, c.T_B, c.T_L, c.F0,
                     c.gamma, n.dt, n.quad_rel_tol, n.guarantee_age_cap}) {
        require(std::isfinite(v), "all parameters must be finite");
    }

    require(r.a_r > 0.0, "rate.a_r must be > 0");
    require(r.b_r > 0.0, "rate.b_r must be > 0");
    require(r.sigma_r > 0.0, "rate.sigma_r must be > 0");
    require(r.r0 > 0.0, "rate.r0 must be > 0");
    require(rate_feller_margin(r) > 0.0, "Feller condition 2 a_r > sigma_r^2 violated");

    require(m.b_lambda > 0.0, "mortality.b_lambda must be > 0");
    require(m.sigma_lambda > 0.0, "mortality.sigma_lambda must be > 0");
    require(m.b > 0.0, "mortality.b must be > 0");
    // a_lambda(age) = b_lambda phi + (1/b + b_lambda)/b exp((age-m)/b) is increasing
    // iff the exponential coefficient is positive; checking at t0 then covers all later ages.
    require((1.0 / m.b + m.b_lambda) / m.b > 0.0, "a_lambda must be increasing in age");
    require(mortality_feller_margin(m) > 0.0, "mortality condition 2 a_lambda(t0) > sigma_lambda^2 violated");
    require(lambda0(m) > 0.0, "initial force of mortality must be > 0");

    require(s.sigma_S > 0.0, "stock.sigma_S must be > 0");

    require(c.w > 0.0, "scheme.w must be > 0");
    require(c.r_c > 0.0 && c.r_c <= 1.0, "scheme.r_c must lie in (0, 1]");
    require(c.r_w > 0.0 && c.r_w <= 1.0, "scheme.r_w must lie in (0, 1]");
    require(c.T > 0.0, "scheme.T must be > 0");
    require(c.T_B > 0.0, "scheme.T_B must be > 0");
    require(c.T_L > 0.0, "scheme.T_L must be > 0");
    require(c.F0 > 0.0, "scheme.F0 must be > 0");
    require(c.gamma > 0.0, "scheme.gamma must be > 0");
    require(c.gamma != 1.0, "scheme.gamma must differ from 1 (log utility excluded)");
    const GammaCondition gc = check_gamma_condition(p);
    require(gc.ok, "scheme.gamma must exceed the risk-aversion bound " + std::to_string(gc.bound));

    require(n.dt > 0.0 && n.dt <= c.T, "numerics.dt must lie in (0, T]");
    require(n.n_paths >= 1, "numerics.n_paths must be >= 1");
    require(n.quad_rel_tol > 0.0 && n.quad_rel_tol <= 1e-3, "numerics.quad_rel_tol must lie in (0, 1e-3]");
    require(n.guarantee_age_cap > m.t0 + c.T, "numerics.guarantee_age_cap must exceed retirement age t0 + T");
}

}  // namespace lhedge
