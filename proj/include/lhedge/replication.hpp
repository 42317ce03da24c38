#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lhedge/affine.hpp"
#include "lhedge/errors.hpp"
#include "lhedge/quadrature.hpp"

namespace lhedge {

/// Present value of future contributions and its replicating holdings.
struct ContributionLeg {
    double D = 0.0;
    double alpha_B_D = 0.0;
    double alpha_0_D = 0.0;
};

/// Present value of the minimum guarantee and its replicating holdings.
struct GuaranteeLeg {
    double G = 0.0;
    double alpha_L_G = 0.0;
    double alpha_B_G = 0.0;
    double alpha_0_G = 0.0;
    /// Deferred-annuity price per surviving member, G exp(cum_lambda); equals a(T) at t = T.
    double annuity_a = 0.0;
};

/// Ratio below which the guarantee integrand at the truncation age must fall.
inline constexpr double kTailTolerance = 1e-12;

/// Time (since age t0) at which the lifetime annuity integral is truncated.
inline double annuity_horizon(const ModelParams& p) { return p.numerics.guarantee_age_cap - p.mortality.t0; }

namespace detail {

inline ContributionLeg contribution_holdings(double D, double I_f1, double f1_bond) {
    ContributionLeg leg;
    leg.D = D;
    leg.alpha_B_D = I_f1 / f1_bond;
    leg.alpha_0_D = D - leg.alpha_B_D;
    return leg;
}

inline GuaranteeLeg guarantee_holdings(double G, double I_f1, double I_h1, double cum_lambda,
                                       const RollingDurations& d) {
    GuaranteeLeg leg;
    leg.G = G;
    leg.annuity_a = G * std::exp(cum_lambda);
    leg.alpha_L_G = I_h1 / d.longevity_mort;
    leg.alpha_B_G = I_f1 / d.bond - leg.alpha_L_G * d.longevity_rate / d.bond;
    leg.alpha_0_G = G - leg.alpha_B_G - leg.alpha_L_G;
    return leg;
}

inline RollingDurations rolling_durations(const AffineCurve& curve) {
    const auto& sc = curve.params().scheme;
    return {curve.rate_exponents().duration(sc.T_B), curve.rate_exponents().duration(sc.T_L),
            curve.mortality_exponents().duration(sc.T_L)};
}

inline void check_tail(double tail_integrand, double G) {
    if (tail_integrand > kTailTolerance * G) {
        throw NumericalError("annuity truncation too early: integrand at the age cap is " +
                             std::to_string(tail_integrand) + " against G = " + std::to_string(G));
    }
}

}  // namespace detail

/// D(t) = c int_t^T B(t,s) ds with rolling-bond holding c int B f1 ds / f1(t, t+T_B).
inline ContributionLeg contributions_pv(const AffineCurve& curve, double r, double t) {
    const auto& p = curve.params();
    const double T = p.scheme.T;
    if (t > T) throw DomainError("contributions_pv: t beyond retirement");
    const double c = p.scheme.contribution();
    const double tol = p.numerics.quad_rel_tol;
    const double D = c * adaptive_simpson([&](double s) { return curve.bond_price(r, t, s); }, t, T, tol);
    const double I_f1 =
        c * adaptive_simpson([&](double s) { return curve.bond_price(r, t, s) * curve.f1(t, s); }, t, T, tol);
    return detail::contribution_holdings(D, I_f1, curve.rate_exponents().duration(p.scheme.T_B));
}

/// G(t) = pi int_T^inf L(t,s) ds, truncated at the age cap, with its holdings in
/// the rolling longevity bond, rolling bond and cash.
inline GuaranteeLeg guarantee_pv(const AffineCurve& curve, double r, double lambda, double cum_lambda, double t) {
    const auto& p = curve.params();
    const double T = p.scheme.T;
    if (t > T) throw DomainError("guarantee_pv: t beyond retirement");
    if (cum_lambda < 0.0) throw DomainError("guarantee_pv: cumulative mortality must be >= 0");
    const double pi = p.scheme.instalment();
    if (pi == 0.0) return {};
    const double cap = annuity_horizon(p);
    const double tol = p.numerics.quad_rel_tol;
    auto L = [&](double s) { return curve.longevity_bond_price(r, lambda, cum_lambda, t, s); };
    const double G = pi * adaptive_simpson(L, T, cap, tol);
    const double I_f1 = pi * adaptive_simpson([&](double s) { return L(s) * curve.f1(t, s); }, T, cap, tol);
    const double I_h1 = pi * adaptive_simpson([&](double s) { return L(s) * curve.h1(t, s); }, T, cap, tol);
    detail::check_tail(pi * L(cap), G);
    return detail::guarantee_holdings(G, I_f1, I_h1, cum_lambda, detail::rolling_durations(curve));
}

/// Price at time `at` of the lifetime annuity paying pi per year to a survivor:
/// pi int_at^inf N(at, s) ds. G(T) = p(T) a(T).
inline double annuity_price(const AffineCurve& curve, double r, double lambda, double at) {
    const auto& p = curve.params();
    const double pi = p.scheme.instalment();
    if (pi == 0.0) return 0.0;
    const double cap = annuity_horizon(p);
    if (at >= cap) throw DomainError("annuity_price: valuation time beyond the age cap");
    auto N = [&](double s) { return curve.longevity_bond_price(r, lambda, 0.0, at, s); };
    const double a = pi * adaptive_simpson(N, at, cap, p.numerics.quad_rel_tol);
    detail::check_tail(pi * N(cap), a);
    return a;
}

/// Fixed quadrature tableaux of the contribution and guarantee integrals on a
/// time grid. The deterministic parts exp(f0 + h0) are stored per node so that
/// a path only supplies (r, lambda, cum_lambda) at lookup.
class LegTableau {
   public:
    LegTableau(const AffineCurve& curve, std::span<const double> times)
        : params_(curve.params()), durations_(detail::rolling_durations(curve)), rule_(kNodesPerPanel) {
        const auto& p = curve.params();
        const double T = p.scheme.T;
        const double cap = annuity_horizon(p);
        const double tol = p.numerics.quad_rel_tol;

        guarantee_panels_ = choose_panels(tol, [&](int panels) {
            const auto q = composite_gauss_legendre(T, cap, panels, rule_);
            double sum = 0.0;
            for (std::size_t j = 0; j < q.nodes.size(); ++j) {
                sum += q.weights[j] *
                       curve.longevity_bond_price(p.rate.r0, lambda0(p.mortality), 0.0, 0.0, q.nodes[j]);
            }
            return sum;
        });
        contribution_panels_ = choose_panels(tol, [&](int panels) {
            const auto q = composite_gauss_legendre(0.0, T, panels, rule_);
            double sum = 0.0;
            for (std::size_t j = 0; j < q.nodes.size(); ++j) sum += q.weights[j] * curve.bond_price(p.rate.r0, 0.0, q.nodes[j]);
            return sum;
        });

        cells_.reserve(times.size());
        for (double t : times) cells_.push_back(build_cell(curve, t, T, cap));
    }

    std::size_t size() const { return cells_.size(); }
    int guarantee_panels() const { return guarantee_panels_; }
    int contribution_panels() const { return contribution_panels_; }

    ContributionLeg contributions(std::size_t k, double r) const {
        const Cell& cell = cells_.at(k);
        double D = 0.0, I_f1 = 0.0;
        for (const auto& n : cell.contribution) {
            const double v = std::exp(n.log_weight - n.f1 * r);
            D += v;
            I_f1 += v * n.f1;
        }
        const double c = params_.scheme.contribution();
        return detail::contribution_holdings(c * D, c * I_f1, durations_.bond);
    }

    GuaranteeLeg guarantee(std::size_t k, double r, double lambda, double cum_lambda) const {
        const Cell& cell = cells_.at(k);
        const double pi = params_.scheme.instalment();
        if (pi == 0.0) return {};
        double G = 0.0, I_f1 = 0.0, I_h1 = 0.0;
        for (const auto& n : cell.guarantee) {
            const double v = std::exp(n.log_weight - cum_lambda - n.f1 * r - n.h1 * lambda);
            G += v;
            I_f1 += v * n.f1;
            I_h1 += v * n.h1;
        }
        G *= pi;
        const auto& tail = cell.tail;
        detail::check_tail(pi * std::exp(tail.log_weight - cum_lambda - tail.f1 * r - tail.h1 * lambda), G);
        return detail::guarantee_holdings(G, pi * I_f1, pi * I_h1, cum_lambda, durations_);
    }

   private:
    static constexpr int kNodesPerPanel = 8;

    struct Node {
        double log_weight = 0.0;  // log(w) + f0 (+ h0)
        double f1 = 0.0;
        double h1 = 0.0;
    };
    struct Cell {
        std::vector<Node> contribution;
        std::vector<Node> guarantee;
        Node tail;  // integrand exponent at the truncation age, unit weight
    };

    template <class Estimate>
    static int choose_panels(double tol, Estimate&& estimate) {
        int panels = 2;
        double prev = estimate(panels);
        while (panels < 4096) {
            const double next = estimate(2 * panels);
            panels *= 2;
            if (std::abs(next - prev) <= 0.1 * tol * std::abs(next)) break;
            prev = next;
        }
        return panels;
    }

    Cell build_cell(const AffineCurve& curve, double t, double T, double cap) const {
        Cell cell;
        const int d_panels =
            std::max(1, static_cast<int>(std::ceil(contribution_panels_ * (T - t) / T)));
        const auto qd = composite_gauss_legendre(t, T, d_panels, rule_);
        cell.contribution.reserve(qd.nodes.size());
        for (std::size_t j = 0; j < qd.nodes.size(); ++j) {
            const double s = qd.nodes[j];
            cell.contribution.push_back({std::log(qd.weights[j]) + curve.f0(t, s), curve.f1(t, s), 0.0});
        }
        const auto qg = composite_gauss_legendre(T, cap, guarantee_panels_, rule_);
        cell.guarantee.reserve(qg.nodes.size());
        for (std::size_t j = 0; j < qg.nodes.size(); ++j) {
            const double s = qg.nodes[j];
            cell.guarantee.push_back(
                {std::log(qg.weights[j]) + curve.f0(t, s) + curve.h0(t, s), curve.f1(t, s), curve.h1(t, s)});
        }
        cell.tail = {curve.f0(t, cap) + curve.h0(t, cap), curve.f1(t, cap), curve.h1(t, cap)};
        return cell;
    }

    ModelParams params_;
    RollingDurations durations_;
    GaussLegendreRule rule_;
    int guarantee_panels_ = 0;
    int contribution_panels_ = 0;
    std::vector<Cell> cells_;
};

}  // namespace lhedge
