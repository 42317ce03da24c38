#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "lhedge/affine.hpp"
#include "lhedge/errors.hpp"
#include "lhedge/params.hpp"
#include "lhedge/quadrature.hpp"

namespace lhedge {

/// Scalar Riccati equation dA/dt + k0 + k1 A + k2 A^2 = 0 with A(T) = 0.
struct RiccatiCoefficients {
    double k0 = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;

    double residual(double a, double da_dt) const { return da_dt + k0 + k1 * a + k2 * a * a; }
};

/// Closed-form solution of one Riccati equation in time to go tau = T - t:
///   A(tau) = a_plus a_minus (e - 1) / (a_minus e - a_plus),  e = exp(-sqrt(delta) tau),
/// where a_plus > a_minus are the roots of k2 x^2 + k1 x + k0.
class RiccatiBranch {
   public:
    RiccatiBranch() = default;
    RiccatiBranch(const RiccatiCoefficients& k, double delta) : k_(k), delta_(delta) {
        if (!(delta > 0.0)) throw NumericalError("Riccati discriminant must be positive");
        // delta equals the quadratic discriminant k1^2 - 4 k0 k2.
        sqrt_delta_ = std::sqrt(delta);
        a_plus_ = (-k.k1 + sqrt_delta_) / (2.0 * k.k2);
        a_minus_ = (-k.k1 - sqrt_delta_) / (2.0 * k.k2);
    }

    const RiccatiCoefficients& coefficients() const { return k_; }
    double delta() const { return delta_; }
    double root_plus() const { return a_plus_; }
    double root_minus() const { return a_minus_; }

    double operator()(double tau) const {
        const double e = std::exp(-sqrt_delta_ * tau);
        return a_plus_ * a_minus_ * std::expm1(-sqrt_delta_ * tau) / (a_minus_ * e - a_plus_);
    }

    /// Denominator a_minus e - a_plus must keep one sign on [0, horizon].
    bool pole_free(double horizon) const {
        const double d0 = a_minus_ - a_plus_;
        const double d1 = a_minus_ * std::exp(-sqrt_delta_ * horizon) - a_plus_;
        return d0 != 0.0 && d1 != 0.0 && (d0 > 0.0) == (d1 > 0.0);
    }

   private:
    RiccatiCoefficients k_;
    double delta_ = 0.0;
    double sqrt_delta_ = 0.0;
    double a_plus_ = 0.0;
    double a_minus_ = 0.0;
};

/// Riccati factors of the value function exp(A0 + A1 r + A2 lambda) for the
/// surplus problem. Immutable after construction.
class RiccatiSolution {
   public:
    explicit RiccatiSolution(const ModelParams& p) : p_(p) {
        const auto& r = p.rate;
        const auto& m = p.mortality;
        const double g = p.scheme.gamma;
        const GammaCondition gc = check_gamma_condition(p);
        if (!(gc.delta1 > 0.0)) throw NumericalError("Riccati condition violated: delta1 <= 0");
        if (!(gc.delta2 > 0.0)) throw NumericalError("Riccati condition violated: delta2 <= 0");

        rate_coeffs_ = {(1.0 - g) * (2.0 * g + r.theta_r * r.theta_r) / (2.0 * g),
                        ((1.0 - g) * r.theta_r * r.sigma_r - r.b_r * g) / g, r.sigma_r * r.sigma_r / (2.0 * g)};
        mort_coeffs_ = {(1.0 - g) * m.theta_lambda * m.theta_lambda / (2.0 * g),
                        ((1.0 - g) * m.theta_lambda * m.sigma_lambda - m.b_lambda * g) / g,
                        m.sigma_lambda * m.sigma_lambda / (2.0 * g)};
        a1_ = RiccatiBranch(rate_coeffs_, gc.delta1);
        a2_ = RiccatiBranch(mort_coeffs_, gc.delta2);
        if (!a1_.pole_free(p.scheme.T)) throw NumericalError("A1 closed form has a pole on [0, T]");
        if (!a2_.pole_free(p.scheme.T)) throw NumericalError("A2 closed form has a pole on [0, T]");
        constant_rate_ = (1.0 - g) / (2.0 * g) * p.stock.theta_S * p.stock.theta_S;

        const CirExponents rate(r.b_r + r.theta_r * r.sigma_r, r.sigma_r);
        const CirExponents mort(m.b_lambda + m.theta_lambda * m.sigma_lambda, m.sigma_lambda);
        durations_ = {rate.duration(p.scheme.T_B), rate.duration(p.scheme.T_L), mort.duration(p.scheme.T_L)};
    }

    const ModelParams& params() const { return p_; }
    double horizon() const { return p_.scheme.T; }
    double gamma() const { return p_.scheme.gamma; }
    double delta1() const { return a1_.delta(); }
    double delta2() const { return a2_.delta(); }
    double a11() const { return a1_.root_plus(); }
    double a12() const { return a1_.root_minus(); }
    double a21() const { return a2_.root_plus(); }
    double a22() const { return a2_.root_minus(); }
    const RiccatiCoefficients& rate_coefficients() const { return rate_coeffs_; }
    const RiccatiCoefficients& mortality_coefficients() const { return mort_coeffs_; }
    const RollingDurations& durations() const { return durations_; }

    double A1(double t) const { return a1_(horizon() - t); }
    double A2(double t) const { return a2_(horizon() - t); }

    /// Integrand of A0: a_r A1(s) + a_lambda(t0 + s) A2(s) + (1 - gamma)/(2 gamma) theta_S^2.
    double a0_rate(double s) const {
        return p_.rate.a_r * A1(s) + mortality_drift(p_.mortality, p_.mortality.t0 + s) * A2(s) + constant_rate_;
    }

    /// A0(t) = int_t^T a0_rate(s) ds.
    double A0(double t) const {
        return adaptive_simpson([this](double s) { return a0_rate(s); }, t, horizon(), p_.numerics.quad_rel_tol);
    }

    /// A0 at every point of an increasing time grid, accumulated backwards from T
    /// one cell at a time.
    std::vector<double> A0_on_grid(std::span<const double> times) const {
        std::vector<double> out(times.size(), 0.0);
        if (times.empty()) return out;
        const std::size_t last = times.size() - 1;
        out[last] = A0(times[last]);
        for (std::size_t k = last; k-- > 0;) {
            out[k] = out[k + 1] + adaptive_simpson([this](double s) { return a0_rate(s); }, times[k], times[k + 1],
                                                   p_.numerics.quad_rel_tol);
        }
        return out;
    }

    /// g(t, r, lambda) = exp(A0 + A1 r + A2 lambda).
    double g(double t, double r, double lambda) const { return std::exp(A0(t) + A1(t) * r + A2(t) * lambda); }

   private:
    ModelParams p_;
    RiccatiCoefficients rate_coeffs_;
    RiccatiCoefficients mort_coeffs_;
    RiccatiBranch a1_;
    RiccatiBranch a2_;
    double constant_rate_ = 0.0;
    RollingDurations durations_;
};

inline RiccatiSolution solve_riccati(const ModelParams& p) { return RiccatiSolution(p); }

/// V(t, y, r, lambda) = y^(1-gamma)/(1-gamma) g(t, r, lambda).
inline double value_function(double y, double r, double lambda, double t, const RiccatiSolution& sol) {
    if (!(y > 0.0)) throw DomainError("value function needs y > 0");
    const double g = sol.gamma();
    return std::pow(y, 1.0 - g) / (1.0 - g) * sol.g(t, r, lambda);
}

/// Largest absolute residual of the three Riccati ODEs on a uniform grid of
/// `grid_n` points over [0, T], with derivatives taken by central differences
/// of step `h`. `a1` and `a2` default to the closed forms; passing other
/// callables probes the check's sensitivity.
inline double verify_riccati_ode(const RiccatiSolution& sol, int grid_n, const std::function<double(double)>& a1 = {},
                                 const std::function<double(double)>& a2 = {}, double h = 1e-6) {
    if (grid_n < 2) throw DomainError("grid_n must be >= 2");
    const std::function<double(double)> A1 = a1 ? a1 : [&sol](double t) { return sol.A1(t); };
    const std::function<double(double)> A2 = a2 ? a2 : [&sol](double t) { return sol.A2(t); };
    const auto& p = sol.params();
    const double g = sol.gamma();
    const double const_rate = (1.0 - g) / (2.0 * g) * p.stock.theta_S * p.stock.theta_S;
    const double T = sol.horizon();

    double worst = 0.0;
    for (int i = 0; i < grid_n; ++i) {
        const double t = T * i / (grid_n - 1);
        const double d1 = (A1(t + h) - A1(t - h)) / (2.0 * h);
        const double d2 = (A2(t + h) - A2(t - h)) / (2.0 * h);
        // A0(t+h) - A0(t-h) = -int_{t-h}^{t+h} a0_rate, integrated directly.
        const double d0 = -adaptive_simpson(
                              [&](double s) {
                                  return p.rate.a_r * A1(s) + mortality_drift(p.mortality, p.mortality.t0 + s) * A2(s) +
                                         const_rate;
                              },
                              t - h, t + h, 1e-12) /
                          (2.0 * h);
        const double r1 = sol.rate_coefficients().residual(A1(t), d1);
        const double r2 = sol.mortality_coefficients().residual(A2(t), d2);
        const double r0 = d0 + const_rate + p.rate.a_r * A1(t) + mortality_drift(p.mortality, p.mortality.t0 + t) * A2(t);
        worst = std::max({worst, std::abs(r1), std::abs(r2), std::abs(r0)});
    }
    return worst;
}

}  // namespace lhedge
