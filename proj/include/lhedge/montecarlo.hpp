#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lhedge/affine.hpp"
#include "lhedge/errors.hpp"
#include "lhedge/params.hpp"
#include "lhedge/replication.hpp"
#include "lhedge/riccati.hpp"
#include "lhedge/scenario.hpp"
#include "lhedge/strategy.hpp"

namespace lhedge {

using Noise = std::array<double, 3>;

struct StateStep {
    double r = 0.0;
    double lambda = 0.0;
    double d_cum = 0.0;
};

/// One full-truncation Euler step of (r, lambda) over [t, t+dt]; the mortality
/// drift is evaluated at age t0 + t. d_cum is the trapezoid increment of int lambda.
inline StateStep simulate_state_step(const ModelParams& p, double r, double lambda, double t, double dt,
                                     const Noise& xi) {
    const auto& rp = p.rate;
    const auto& mp = p.mortality;
    const double sdt = std::sqrt(dt);
    const double rp0 = std::max(r, 0.0);
    const double lp0 = std::max(lambda, 0.0);
    StateStep s;
    s.r = r + (rp.a_r - rp.b_r * rp0) * dt + rp.sigma_r * std::sqrt(rp0) * sdt * xi[0];
    s.lambda = lambda + (mortality_drift(mp, mp.t0 + t) - mp.b_lambda * lp0) * dt +
               mp.sigma_lambda * std::sqrt(lp0) * sdt * xi[1];
    s.d_cum = 0.5 * (lp0 + std::max(s.lambda, 0.0)) * dt;
    return s;
}

/// Log-Euler step of the surplus with risky proportions `prop` of Y (rolling
/// bond, rolling longevity bond, stock), driven by the same noise as the state.
inline double simulate_surplus_step(double y, double r, double lambda, double dt, const Noise& xi,
                                    const std::array<double, 3>& prop, const RiccatiSolution& sol) {
    const MarketCoefficients mc = market_coefficients(r, lambda, sol);
    double drift = std::max(r, 0.0);
    std::array<double, 3> vol{};
    for (int i = 0; i < 3; ++i) {
        drift += prop[i] * mc.M[i];
        for (int j = 0; j < 3; ++j) vol[j] += prop[i] * mc.Sigma[i][j];
    }
    const double var = vol[0] * vol[0] + vol[1] * vol[1] + vol[2] * vol[2];
    const double sdt = std::sqrt(dt);
    const double shock = vol[0] * xi[0] + vol[1] * xi[1] + vol[2] * xi[2];
    const double next = y * std::exp((drift - 0.5 * var) * dt + shock * sdt);
    if (!(next >= 1e-300)) throw NumericalError("surplus underflow below 1e-300");
    return next;
}

/// Simulation grid t_k = k dt with the last point moved to T exactly.
inline std::vector<double> time_grid(double T, double dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw DomainError("time grid needs T > 0 and dt > 0");
    const auto n = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
    std::vector<double> times(n + 1);
    for (std::size_t k = 0; k < n; ++k) times[k] = static_cast<double>(k) * dt;
    times[n] = T;
    return times;
}

/// Independent normal stream for one path; identical across runs, thread
/// counts and sweep values sharing a seed.
class PathNoise {
   public:
    PathNoise(std::uint64_t seed, std::uint64_t path) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
        engine_.seed(seq);
    }
    Noise next() {
        Noise xi;
        for (auto& x : xi) x = normal_(engine_);
        return xi;
    }

   private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// One grid point of a simulated trajectory.
struct PathState {
    double t = 0.0;
    double r = 0.0;
    double lambda = 0.0;
    double cum_lambda = 0.0;
    double p = 1.0;
    double Y = 0.0;
    double D = 0.0;
    double G = 0.0;
    double F = 0.0;
    Allocation allocation;
};

struct Stat {
    double mean = 0.0;
    double se = 0.0;
};

struct StepSummary {
    double t = 0.0;
    Stat w_B, w_L, w_S, w_0, Y_over_F;
};

struct EnsembleSummary {
    std::vector<StepSummary> steps;
    Stat terminal_Y;
    Stat terminal_utility;
    double D0 = 0.0;
    double G0 = 0.0;
    double Y0 = 0.0;
    std::int64_t n_paths = 0;
    /// Filled only when requested: paths[i][k] is path i at grid point k.
    std::vector<std::vector<PathState>> paths;
};

struct EnsembleOptions {
    unsigned threads = 0;  // 0: hardware concurrency
    bool keep_paths = false;
    double control_scale = 1.0;
};

/// Initial legs and surplus Y(0) = F0 + D(0) - G(0); throws DomainError when Y(0) <= 0.
struct InitialPosition {
    ContributionLeg D;
    GuaranteeLeg G;
    double Y0 = 0.0;
};

inline InitialPosition initial_position(const AffineCurve& curve) {
    const auto& p = curve.params();
    InitialPosition out;
    out.D = contributions_pv(curve, p.rate.r0, 0.0);
    out.G = guarantee_pv(curve, p.rate.r0, lambda0(p.mortality), 0.0, 0.0);
    out.Y0 = p.scheme.F0 + out.D.D - out.G.G;
    if (!(out.Y0 > 0.0)) throw DomainError("initial surplus F0 + D(0) - G(0) must be positive");
    return out;
}

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::int64_t work_items) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::int64_t>(n, std::max<std::int64_t>(work_items, 1)));
}

/// Runs body(i) for i in [0, count) on `threads` workers. The first exception
/// (lowest index) is rethrown after all workers finish.
template <class Body>
void parallel_for(std::int64_t count, unsigned threads, Body&& body) {
    std::atomic<std::int64_t> next{0};
    std::mutex mutex;
    std::int64_t failed_at = count;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (i < failed_at) {
                    failed_at = i;
                    error = std::current_exception();
                }
                next.store(count);
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

inline Stat finish_stat(double sum, double sum_sq, std::int64_t n) {
    Stat s;
    s.mean = sum / static_cast<double>(n);
    if (n > 1) {
        const double var = std::max(0.0, (sum_sq - sum * s.mean) / static_cast<double>(n - 1));
        s.se = std::sqrt(var / static_cast<double>(n));
    }
    return s;
}

inline double crra_utility(double y, double gamma) { return std::pow(y, 1.0 - gamma) / (1.0 - gamma); }

}  // namespace detail

/// Simulates n_paths trajectories under the optimal strategy. Paths are
/// reduced in fixed blocks and the blocks combined in index order, so the
/// result does not depend on the number of threads.
inline EnsembleSummary run_ensemble(const ModelParams& p, const EnsembleOptions& opt = {}) {
    validate(p);
    const AffineCurve curve(p);
    const RiccatiSolution sol(p);
    const InitialPosition init = initial_position(curve);
    const std::vector<double> times = time_grid(p.scheme.T, p.numerics.dt);
    const LegTableau legs(curve, times);
    const std::size_t n_steps = times.size();
    const std::int64_t n_paths = p.numerics.n_paths;

    std::vector<std::array<double, 3>> props(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        props[k] = surplus_proportions(times[k], sol);
        for (auto& x : props[k]) x *= opt.control_scale;
    }

    constexpr std::int64_t kBlock = 32;
    constexpr int kFields = 5;  // wB, wL, wS, w0, Y/F
    const std::int64_t n_blocks = (n_paths + kBlock - 1) / kBlock;
    // Per block: n_steps x kFields sums and sums of squares.
    std::vector<std::vector<double>> block_sum(n_blocks), block_sq(n_blocks);
    std::vector<double> terminal_Y(n_paths);
    std::vector<std::vector<PathState>> kept(opt.keep_paths ? n_paths : 0);

    const double gamma = p.scheme.gamma;
    detail::parallel_for(n_blocks, detail::resolve_threads(opt.threads, n_blocks), [&](std::int64_t b) {
        std::vector<double> sum(n_steps * kFields, 0.0), sq(n_steps * kFields, 0.0);
        const std::int64_t first = b * kBlock;
        const std::int64_t last = std::min(n_paths, first + kBlock);
        for (std::int64_t i = first; i < last; ++i) {
            PathNoise noise(p.numerics.seed, static_cast<std::uint64_t>(i));
            double r = p.rate.r0, lambda = lambda0(p.mortality), cum = 0.0, y = init.Y0;
            std::vector<PathState>* rec = opt.keep_paths ? &kept[i] : nullptr;
            if (rec) rec->reserve(n_steps);
            for (std::size_t k = 0; k < n_steps; ++k) {
                const double t = times[k];
                const double rr = std::max(r, 0.0), ll = std::max(lambda, 0.0);
                const ContributionLeg D = legs.contributions(k, rr);
                const GuaranteeLeg G = legs.guarantee(k, rr, ll, cum);
                const double F = y - D.D + G.G;
                if (!(F > 0.0)) throw NumericalError("fund value F became non-positive at t = " + std::to_string(t));
                const Allocation a = optimal_allocation(F, D, G, y, t, sol);
                const double vals[kFields] = {a.w_B, a.w_L, a.w_S, a.w_0, y / F};
                for (int f = 0; f < kFields; ++f) {
                    sum[k * kFields + f] += vals[f];
                    sq[k * kFields + f] += vals[f] * vals[f];
                }
                if (rec) rec->push_back({t, rr, ll, cum, std::exp(-cum), y, D.D, G.G, F, a});
                if (k + 1 == n_steps) break;
                const double h = times[k + 1] - t;
                const Noise xi = noise.next();
                const double y_next = simulate_surplus_step(y, r, lambda, h, xi, props[k], sol);
                const StateStep s = simulate_state_step(p, r, lambda, t, h, xi);
                r = s.r;
                lambda = s.lambda;
                cum += s.d_cum;
                y = y_next;
            }
            terminal_Y[i] = y;
        }
        block_sum[b] = std::move(sum);
        block_sq[b] = std::move(sq);
    });

    EnsembleSummary out;
    out.D0 = init.D.D;
    out.G0 = init.G.G;
    out.Y0 = init.Y0;
    out.n_paths = n_paths;
    out.steps.resize(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        double s[kFields] = {}, q[kFields] = {};
        for (std::int64_t b = 0; b < n_blocks; ++b) {
            for (int f = 0; f < kFields; ++f) {
                s[f] += block_sum[b][k * kFields + f];
                q[f] += block_sq[b][k * kFields + f];
            }
        }
        StepSummary& st = out.steps[k];
        st.t = times[k];
        st.w_B = detail::finish_stat(s[0], q[0], n_paths);
        st.w_L = detail::finish_stat(s[1], q[1], n_paths);
        st.w_S = detail::finish_stat(s[2], q[2], n_paths);
        st.w_0 = detail::finish_stat(s[3], q[3], n_paths);
        st.Y_over_F = detail::finish_stat(s[4], q[4], n_paths);
    }
    double sy = 0.0, qy = 0.0, su = 0.0, qu = 0.0;
    for (double y : terminal_Y) {
        const double u = detail::crra_utility(y, gamma);
        sy += y;
        qy += y * y;
        su += u;
        qu += u * u;
    }
    out.terminal_Y = detail::finish_stat(sy, qy, n_paths);
    out.terminal_utility = detail::finish_stat(su, qu, n_paths);
    out.paths = std::move(kept);
    return out;
}

struct TerminalOptions {
    unsigned threads = 0;
    double control_scale = 1.0;
    /// Number of consecutive base increments merged into one step. With
    /// aggregate = 2 the run uses step 2 dt driven by the same Brownian path.
    int aggregate = 1;
};

/// Terminal surplus Y(T) per path, simulating only (r, lambda, Y). The
/// optimal Y dynamics need neither D nor G.
inline std::vector<double> simulate_terminal_surplus(const ModelParams& p, double Y0,
                                                     const TerminalOptions& opt = {}) {
    if (!(Y0 > 0.0)) throw DomainError("initial surplus must be positive");
    if (opt.aggregate < 1) throw DomainError("aggregate must be >= 1");
    const RiccatiSolution sol(p);
    const std::vector<double> fine = time_grid(p.scheme.T, p.numerics.dt);
    std::vector<double> times;
    for (std::size_t k = 0; k < fine.size(); k += opt.aggregate) times.push_back(fine[k]);
    if (times.back() != fine.back()) times.push_back(fine.back());

    std::vector<std::array<double, 3>> props(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        props[k] = surplus_proportions(times[k], sol);
        for (auto& x : props[k]) x *= opt.control_scale;
    }
    const std::int64_t n_paths = p.numerics.n_paths;
    std::vector<double> out(n_paths);
    detail::parallel_for(n_paths, detail::resolve_threads(opt.threads, n_paths), [&](std::int64_t i) {
        PathNoise noise(p.numerics.seed, static_cast<std::uint64_t>(i));
        double r = p.rate.r0, lambda = lambda0(p.mortality), y = Y0;
        std::size_t fk = 0;
        for (std::size_t k = 0; k + 1 < times.size(); ++k) {
            // Sum the fine increments dW = sqrt(h_j) xi_j over this coarse step.
            Noise dw{};
            while (fk + 1 < fine.size() && fine[fk] < times[k + 1]) {
                const Noise xi = noise.next();
                const double sh = std::sqrt(fine[fk + 1] - fine[fk]);
                for (int j = 0; j < 3; ++j) dw[j] += sh * xi[j];
                ++fk;
            }
            const double h = times[k + 1] - times[k];
            const double sh = std::sqrt(h);
            const Noise xi = {dw[0] / sh, dw[1] / sh, dw[2] / sh};
            const double y_next = simulate_surplus_step(y, r, lambda, h, xi, props[k], sol);
            const StateStep s = simulate_state_step(p, r, lambda, times[k], h, xi);
            r = s.r;
            lambda = s.lambda;
            y = y_next;
        }
        out[i] = y;
    });
    return out;
}

inline void write_ensemble_csv(const EnsembleSummary& e, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "t,mean_wB,se_wB,mean_wL,se_wL,mean_wS,se_wS,mean_w0,se_w0,mean_YoverF,se_YoverF\n";
    for (const auto& s : e.steps) {
        out << format_real(s.t);
        for (const Stat* st : {&s.w_B, &s.w_L, &s.w_S, &s.w_0, &s.Y_over_F}) {
            out << ',' << format_real(st->mean) << ',' << format_real(st->se);
        }
        out << '\n';
    }
}

inline void write_paths_csv(const EnsembleSummary& e, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "path_id,t,r,lambda,p,Y,D,G,F,wB,wL,wS,w0\n";
    for (std::size_t i = 0; i < e.paths.size(); ++i) {
        for (const auto& s : e.paths[i]) {
            out << i;
            for (double v : {s.t, s.r, s.lambda, s.p, s.Y, s.D, s.G, s.F, s.allocation.w_B, s.allocation.w_L,
                             s.allocation.w_S, s.allocation.w_0}) {
                out << ',' << format_real(v);
            }
            out << '\n';
        }
    }
}

}  // namespace lhedge
