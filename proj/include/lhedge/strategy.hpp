#pragma once

#include <array>
#include <cmath>

#include "lhedge/errors.hpp"
#include "lhedge/replication.hpp"
#include "lhedge/riccati.hpp"

namespace lhedge {

/// Optimal amounts held by the surplus portfolio Y in the rolling bond, rolling
/// longevity bond, stock and money market.
struct SurplusControls {
    double aYB = 0.0;
    double aYL = 0.0;
    double aYS = 0.0;
    double aY0 = 0.0;
};

/// Holdings of the fund F and the same holdings as fractions of F.
struct Allocation {
    double alpha_B = 0.0;
    double alpha_L = 0.0;
    double alpha_S = 0.0;
    double alpha_0 = 0.0;
    double w_B = 0.0;
    double w_L = 0.0;
    double w_S = 0.0;
    double w_0 = 0.0;
};

/// Risky-asset proportions of Y. They do not depend on (r, lambda): the
/// square-root loadings cancel against the market prices of risk.
inline std::array<double, 3> surplus_proportions(double t, const RiccatiSolution& sol) {
    const auto& p = sol.params();
    const double g = sol.gamma();
    const auto& d = sol.durations();
    const double piS = p.stock.theta_S / (g * p.stock.sigma_S);
    const double piL = -(p.mortality.theta_lambda + p.mortality.sigma_lambda * sol.A2(t)) /
                       (g * p.mortality.sigma_lambda * d.longevity_mort);
    const double piB = -((p.rate.theta_r + p.rate.sigma_r * sol.A1(t)) / g - piS * p.stock.sigma_S_r) /
                           (d.bond * p.rate.sigma_r) -
                       piL * d.longevity_rate / d.bond;
    return {piB, piL, piS};
}

inline SurplusControls optimal_surplus_controls(double y, double t, const RiccatiSolution& sol) {
    if (!(y > 0.0)) throw DomainError("surplus must be positive");
    if (t > sol.horizon()) throw DomainError("t beyond retirement");
    const auto pi = surplus_proportions(t, sol);
    SurplusControls c;
    c.aYB = pi[0] * y;
    c.aYL = pi[1] * y;
    c.aYS = pi[2] * y;
    c.aY0 = y - (c.aYB + c.aYL + c.aYS);
    return c;
}

/// Excess drift M and diffusion matrix Sigma' (rows: rolling bond, rolling
/// longevity bond, stock; columns: W1 rate, W2 mortality, W3 stock).
struct MarketCoefficients {
    std::array<double, 3> M{};
    std::array<std::array<double, 3>, 3> Sigma{};
};

inline MarketCoefficients market_coefficients(double r, double lambda, const RiccatiSolution& sol) {
    const auto& p = sol.params();
    const auto& d = sol.durations();
    const double sr = std::sqrt(std::max(r, 0.0));
    const double sl = std::sqrt(std::max(lambda, 0.0));
    MarketCoefficients mc;
    mc.Sigma[0] = {-d.bond * p.rate.sigma_r * sr, 0.0, 0.0};
    mc.Sigma[1] = {-d.longevity_rate * p.rate.sigma_r * sr, -d.longevity_mort * p.mortality.sigma_lambda * sl, 0.0};
    mc.Sigma[2] = {p.stock.sigma_S_r * sr, 0.0, p.stock.sigma_S};
    const std::array<double, 3> theta = {p.rate.theta_r * sr, p.mortality.theta_lambda * sl, p.stock.theta_S};
    for (int i = 0; i < 3; ++i) {
        mc.M[i] = 0.0;
        for (int j = 0; j < 3; ++j) mc.M[i] += mc.Sigma[i][j] * theta[j];
    }
    return mc;
}

/// Fund allocation alpha = alpha^Y - alpha^D + alpha^G, reported in amounts and
/// as fractions of F.
inline Allocation optimal_allocation(double F, const ContributionLeg& D_leg, const GuaranteeLeg& G_leg, double y,
                                     double t, const RiccatiSolution& sol) {
    if (!(F > 0.0)) throw DomainError("fund value must be positive");
    if (!(y > 0.0)) throw DomainError("surplus must be positive");
    const SurplusControls c = optimal_surplus_controls(y, t, sol);
    Allocation a;
    a.alpha_L = c.aYL + G_leg.alpha_L_G;
    a.alpha_B = c.aYB - D_leg.alpha_B_D + G_leg.alpha_B_G;
    a.alpha_S = c.aYS;
    a.alpha_0 = F - (a.alpha_B + a.alpha_L + a.alpha_S);
    a.w_B = a.alpha_B / F;
    a.w_L = a.alpha_L / F;
    a.w_S = a.alpha_S / F;
    a.w_0 = 1.0 - (a.w_B + a.w_L + a.w_S);
    return a;
}

}  // namespace lhedge
