#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lhedge/errors.hpp"

namespace lhedge {

namespace detail {

template <class F>
double simpson_recurse(F& f, double a, double fa, double m, double fm, double b, double fb, double whole, double eps,
                       int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0) {
        throw NumericalError("adaptive Simpson quadrature did not converge");
    }
    if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    return simpson_recurse(f, a, fa, lm, flm, m, fm, left, 0.5 * eps, depth - 1) +
           simpson_recurse(f, m, fm, rm, frm, b, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of `f` over [a, b] to relative tolerance
/// `rel_tol` (relative to the magnitude of the integral). Reversed limits
/// give the negated integral.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double rel_tol, int max_depth = 48) {
    if (a == b) return 0.0;
    if (b < a) return -adaptive_simpson(f, b, a, rel_tol, max_depth);

    // A coarse composite pass sets the absolute target and keeps the
    // recursion from accepting a lucky first estimate.
    constexpr int kPanels = 8;
    const double h = (b - a) / kPanels;
    double coarse = 0.0;
    std::vector<double> xs(2 * kPanels + 1), fs(2 * kPanels + 1);
    for (int i = 0; i <= 2 * kPanels; ++i) {
        xs[i] = i == 2 * kPanels ? b : a + 0.5 * h * i;
        fs[i] = f(xs[i]);
    }
    for (int p = 0; p < kPanels; ++p) {
        coarse += h / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
    }
    double scale = std::abs(coarse);
    if (scale == 0.0) {
        for (double v : fs) scale = std::max(scale, std::abs(v) * (b - a));
    }
    if (scale == 0.0) return 0.0;
    const double eps = rel_tol * scale / kPanels;

    double total = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const double whole = h / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
        total += detail::simpson_recurse(f, xs[2 * p], fs[2 * p], xs[2 * p + 1], fs[2 * p + 1], xs[2 * p + 2],
                                         fs[2 * p + 2], whole, eps, max_depth);
    }
    return total;
}

/// n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendreRule(int n) : nodes(n), weights(n) {
        for (int i = 0; i < n; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

/// A fixed composite quadrature rule: nodes and weights on [a, b].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Composite Gauss-Legendre with `panels` equal panels of `rule`.
inline QuadratureRule composite_gauss_legendre(double a, double b, int panels, const GaussLegendreRule& rule) {
    QuadratureRule out;
    if (b <= a || panels <= 0) return out;
    const double h = (b - a) / panels;
    out.nodes.reserve(panels * rule.nodes.size());
    out.weights.reserve(panels * rule.nodes.size());
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            out.nodes.push_back(lo + 0.5 * h * (rule.nodes[i] + 1.0));
            out.weights.push_back(0.5 * h * rule.weights[i]);
        }
    }
    return out;
}

}  // namespace lhedge
