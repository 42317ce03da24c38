#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "lhedge/errors.hpp"
#include "lhedge/params.hpp"
#include "lhedge/quadrature.hpp"

namespace lhedge {

/// Affine exponents of a square-root factor priced under the drift
/// (a - b_tilde x). With time to maturity tau the discount factor is
/// exp(-a * integrated_duration(tau) - duration(tau) * x).
class CirExponents {
   public:
    CirExponents() = default;
    CirExponents(double b_tilde, double sigma)
        : b_tilde_(b_tilde), sigma_(sigma), eta_(std::sqrt(b_tilde * b_tilde + 2.0 * sigma * sigma)) {}

    double b_tilde() const { return b_tilde_; }
    double eta() const { return eta_; }

    /// Solution of 1 = d/dtau(D) + b_tilde D + sigma^2 D^2 / 2 with D(0) = 0 (written in tau).
    double duration(double tau) const {
        const double em = std::exp(-eta_ * tau);
        const double one_minus = -std::expm1(-eta_ * tau);
        return 2.0 * one_minus / ((b_tilde_ + eta_) * one_minus + 2.0 * eta_ * em);
    }

    /// Integral of duration(v) over v in [0, tau], in closed form. Written with
    /// q = (b_tilde - eta) / sigma^2 = -2 / (b_tilde + eta) so that it stays
    /// accurate as sigma -> 0.
    double integrated_duration(double tau) const {
        const double one_minus = -std::expm1(-eta_ * tau);
        const double q = -2.0 / (b_tilde_ + eta_);
        const double x = sigma_ * sigma_ * q * one_minus / (2.0 * eta_);
        const double log1p_over_x = std::abs(x) < 1e-8 ? 1.0 - 0.5 * x : std::log1p(x) / x;
        return -q * tau + q * one_minus / eta_ * log1p_over_x;
    }

   private:
    double b_tilde_ = 0.0;
    double sigma_ = 0.0;
    double eta_ = 0.0;
};

/// Durations of the rolling instruments; constant because the maturities roll.
struct RollingDurations {
    double bond = 0.0;            // f1(t, t + T_B)
    double longevity_rate = 0.0;  // f1(t, t + T_L)
    double longevity_mort = 0.0;  // h1(t, t + T_L)
};

struct HCoefficients {
    double h0 = 0.0;
    double h1 = 0.0;
};

struct RiskPremiums {
    double bond = 0.0;
    double longevity_bond = 0.0;
    /// Mortality part of the longevity-bond premium, -h1 sigma_lambda theta_lambda lambda.
    double longevity_component = 0.0;
    double stock = 0.0;
};

struct DiffusionLoadings {
    double sigma_B = 0.0;
    double sigma_L_r = 0.0;
    double sigma_L_lambda = 0.0;
};

struct ReplicationWeights {
    double n0 = 0.0;
    double nB = 0.0;
    double nL = 0.0;
};

/// Closed-form affine coefficients for zero-coupon bonds and zero-coupon
/// longevity bonds. Times t, T are elapsed years since the member was t0.
///
/// h0 uses the split a_lambda(age) = b_lambda phi + K exp((age - m)/b):
///   h0(t,T) = -b_lambda phi H(tau) - K exp((t0 + T - m)/b) E(tau),  tau = T - t,
/// with H the closed-form integrated duration and E(tau) = int_0^tau e^{-v/b} h1(v) dv
/// evaluated by adaptive quadrature and memoised on tau.
class AffineCurve {
   public:
    explicit AffineCurve(const ModelParams& p)
        : p_(p),
          rate_(p.rate.b_r + p.rate.theta_r * p.rate.sigma_r, p.rate.sigma_r),
          mort_(p.mortality.b_lambda + p.mortality.theta_lambda * p.mortality.sigma_lambda, p.mortality.sigma_lambda),
          senescence_coeff_((1.0 / p.mortality.b + p.mortality.b_lambda) / p.mortality.b),
          cache_(std::make_shared<Cache>()) {}

    const ModelParams& params() const { return p_; }
    const CirExponents& rate_exponents() const { return rate_; }
    const CirExponents& mortality_exponents() const { return mort_; }

    double eta_r() const { return rate_.eta(); }
    double eta_lambda() const { return mort_.eta(); }
    double b_tilde_r() const { return rate_.b_tilde(); }
    double b_tilde_lambda() const { return mort_.b_tilde(); }

    double f1(double t, double T) const { return rate_.duration(maturity(t, T)); }
    double f0(double t, double T) const { return -p_.rate.a_r * rate_.integrated_duration(maturity(t, T)); }
    double h1(double t, double T) const { return mort_.duration(maturity(t, T)); }
    double h0(double t, double T) const {
        const double tau = maturity(t, T);
        if (tau == 0.0) return 0.0;
        const auto& m = p_.mortality;
        return -m.b_lambda * m.phi * mort_.integrated_duration(tau) -
               senescence_coeff_ * std::exp((m.t0 + T - m.m) / m.b) * senescence_integral(tau);
    }

    HCoefficients h_coefficients(double t, double T) const { return {h0(t, T), h1(t, T)}; }

    /// Zero-coupon bond price B(t,T) = exp(f0 - f1 r).
    double bond_price(double r, double t, double T) const { return std::exp(f0(t, T) - f1(t, T) * r); }

    /// Risk-neutral expected survival exp(h0 - h1 lambda) from t to T.
    double survival_factor(double lambda, double t, double T) const {
        return std::exp(h0(t, T) - h1(t, T) * lambda);
    }

    /// Zero-coupon longevity bond price exp(-cum_lambda) N(t,T).
    double longevity_bond_price(double r, double lambda, double cum_lambda, double t, double T) const {
        if (cum_lambda < 0.0) throw DomainError("cumulative mortality must be >= 0");
        return std::exp(-cum_lambda + f0(t, T) - f1(t, T) * r + h0(t, T) - h1(t, T) * lambda);
    }

    DiffusionLoadings loadings(double r, double lambda, double t, double T) const {
        const double f = f1(t, T);
        return {-f * p_.rate.sigma_r * std::sqrt(r), -f * p_.rate.sigma_r * std::sqrt(r),
                -h1(t, T) * p_.mortality.sigma_lambda * std::sqrt(lambda)};
    }

    /// Excess drifts over r of the rolling bond, rolling longevity bond and stock.
    RiskPremiums risk_premiums(double r, double lambda, double /*t*/) const {
        const auto& rp = p_.rate;
        const auto& mp = p_.mortality;
        const auto& sc = p_.scheme;
        RiskPremiums out;
        out.bond = -rate_.duration(sc.T_B) * rp.sigma_r * rp.theta_r * r;
        out.longevity_component = mort_.duration(sc.T_L) * mp.sigma_lambda * (0.0 - mp.theta_lambda) * lambda;
        out.longevity_bond = -rate_.duration(sc.T_L) * rp.sigma_r * rp.theta_r * r + out.longevity_component;
        out.stock = rp.theta_r * p_.stock.sigma_S_r * r + p_.stock.theta_S * p_.stock.sigma_S;
        return out;
    }

    /// Holdings in cash, rolling bond and rolling longevity bond (fractions of
    /// value) replicating a zero-coupon longevity bond maturing at T_fix.
    ReplicationWeights fixed_maturity_replication_weights(double /*r*/, double /*lambda*/, double t,
                                                          double T_fix) const {
        const double tau = maturity(t, T_fix);
        const double hL = mort_.duration(p_.scheme.T_L);
        const double fB = rate_.duration(p_.scheme.T_B);
        if (hL == 0.0 || fB == 0.0) throw DomainError("rolling instrument with zero maturity");
        // sqrt(r) and sqrt(lambda) cancel in every ratio of loadings.
        ReplicationWeights w;
        w.nL = mort_.duration(tau) / hL;
        w.nB = rate_.duration(tau) / fB - w.nL * rate_.duration(p_.scheme.T_L) / fB;
        w.n0 = 1.0 - w.nB - w.nL;
        return w;
    }

    /// E(tau) = int_0^tau exp(-v/b) h1(v) dv.
    double senescence_integral(double tau) const {
        const std::uint64_t key = std::bit_cast<std::uint64_t>(tau);
        {
            std::shared_lock lock(cache_->mutex);
            if (auto it = cache_->values.find(key); it != cache_->values.end()) return it->second;
        }
        const double inv_b = 1.0 / p_.mortality.b;
        const double value = adaptive_simpson([&](double v) { return std::exp(-v * inv_b) * mort_.duration(v); }, 0.0,
                                              tau, p_.numerics.quad_rel_tol);
        std::unique_lock lock(cache_->mutex);
        if (cache_->values.size() >= kCacheLimit) cache_->values.clear();
        cache_->values.emplace(key, value);
        return value;
    }

   private:
    static constexpr std::size_t kCacheLimit = 1u << 20;

    struct Cache {
        std::shared_mutex mutex;
        std::unordered_map<std::uint64_t, double> values;
    };

    static double maturity(double t, double T) {
        if (!(T >= t)) throw DomainError("maturity precedes valuation time");
        return T - t;
    }

    ModelParams p_;
    CirExponents rate_;
    CirExponents mort_;
    double senescence_coeff_;
    std::shared_ptr<Cache> cache_;
};

}  // namespace lhedge
