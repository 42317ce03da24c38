#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "lhedge/lhedge.hpp"

using namespace lhedge;

namespace {

ModelParams small_run(std::int64_t paths = 20, double dt = 1.0 / 12) {
    ModelParams p = base_scenario();
    p.numerics.n_paths = paths;
    p.numerics.dt = dt;
    return p;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(TimeGrid, EndpointsExact) {
    const auto g = time_grid(25.0, 1.0 / 52);
    EXPECT_EQ(g.size(), 1301u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 25.0);
    const auto h = time_grid(1.0, 0.3);
    EXPECT_EQ(h.size(), 5u);
    EXPECT_EQ(h.back(), 1.0);
    EXPECT_THROW(time_grid(1.0, 0.0), DomainError);
}

TEST(StateStep, DeterministicLimitMatchesLinearOde) {
    ModelParams p = base_scenario();
    p.rate.sigma_r = 0.0;
    p.mortality.sigma_lambda = 0.0;
    const double dt = 1e-4;
    double r = p.rate.r0, l = 0.004;
    for (int i = 0; i < 100000; ++i) {
        const auto s = simulate_state_step(p, r, l, i * dt, dt, {0.7, -1.3, 0.2});
        r = s.r;
        l = s.lambda;
    }
    const double mean = p.rate.a_r / p.rate.b_r;
    EXPECT_NEAR(r, mean + (p.rate.r0 - mean) * std::exp(-p.rate.b_r * 10.0), 1e-6);
}

TEST(StateStep, TruncationKeepsSquareRootsReal) {
    const ModelParams p = base_scenario();
    const auto s = simulate_state_step(p, -0.01, -0.001, 0.0, 0.1, {-5, -5, 0});
    EXPECT_TRUE(std::isfinite(s.r));
    EXPECT_TRUE(std::isfinite(s.lambda));
    EXPECT_GE(s.d_cum, 0.0);
}

TEST(SurplusStep, MoneyMarketOnly) {
    const RiccatiSolution sol(base_scenario());
    const double y = simulate_surplus_step(10.0, 0.05, 0.01, 0.5, {1.0, -2.0, 0.5}, {0.0, 0.0, 0.0}, sol);
    EXPECT_NEAR(y, 10.0 * std::exp(0.05 * 0.5), 1e-13);
    EXPECT_THROW(simulate_surplus_step(1e-300, 0.05, 0.01, 1.0, {0, 0, -50}, {0, 0, 50}, sol), NumericalError);
}

TEST(Ensemble, PathInvariants) {
    const ModelParams p = small_run(8);
    const auto e = run_ensemble(p, {1, true, 1.0});
    ASSERT_EQ(e.paths.size(), 8u);
    const double ratio = p.stock.theta_S / (p.scheme.gamma * p.stock.sigma_S);
    for (const auto& path : e.paths) {
        for (const auto& s : path) {
            EXPECT_GE(s.r, 0.0);
            EXPECT_GE(s.lambda, 0.0);
            EXPECT_GT(s.p, 0.0);
            EXPECT_LE(s.p, 1.0);
            EXPECT_GT(s.Y, 0.0);
            EXPECT_NEAR(s.F, s.Y - s.D + s.G, 1e-12 * s.F);
            const auto& a = s.allocation;
            const double scale = std::max({1.0, std::abs(a.w_B), std::abs(a.w_L), std::abs(a.w_0)});
            EXPECT_NEAR(a.w_B + a.w_L + a.w_S + a.w_0, 1.0, 8 * std::numeric_limits<double>::epsilon() * scale);
            EXPECT_NEAR(a.w_S * s.F / s.Y, ratio, 1e-10);
        }
        EXPECT_EQ(path.back().D, 0.0);
        EXPECT_NEAR(path.back().Y, path.back().F - path.back().G, 1e-12 * path.back().F);
    }
    for (const auto& st : e.steps) {
        EXPECT_NEAR(st.w_B.mean + st.w_L.mean + st.w_S.mean + st.w_0.mean, 1.0, 1e-12);
    }
}

TEST(Ensemble, SinglePathZeroVolatility) {
    ModelParams p = small_run(1);
    p.rate.sigma_r = 1e-9;
    p.mortality.sigma_lambda = 1e-9;
    p.stock.sigma_S = 1e-9;
    p.stock.theta_S = 0.0;
    p.rate.theta_r = 0.0;
    p.mortality.theta_lambda = 0.0;
    const auto e = run_ensemble(p, {1, true, 1.0});
    const auto& last = e.paths[0].back();
    EXPECT_EQ(last.F - last.G, last.Y + last.G - last.G - last.D);
    EXPECT_NEAR(last.F - last.G, last.Y, 1e-12 * last.F);
    EXPECT_EQ(e.steps.back().w_B.se, 0.0);
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
    const ModelParams p = small_run(70);
    const auto dir = std::filesystem::temp_directory_path() / "lhedge_det";
    std::filesystem::create_directories(dir);
    std::string first, first_paths;
    for (unsigned threads : {1u, 3u, 8u}) {
        const auto e = run_ensemble(p, {threads, true, 1.0});
        write_ensemble_csv(e, dir / "e.csv");
        write_paths_csv(e, dir / "p.csv");
        if (first.empty()) {
            first = slurp(dir / "e.csv");
            first_paths = slurp(dir / "p.csv");
        } else {
            EXPECT_EQ(slurp(dir / "e.csv"), first);
            EXPECT_EQ(slurp(dir / "p.csv"), first_paths);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST(Ensemble, CsvHeaders) {
    const auto e = run_ensemble(small_run(2), {1, true, 1.0});
    const auto dir = std::filesystem::temp_directory_path() / "lhedge_hdr";
    std::filesystem::create_directories(dir);
    write_ensemble_csv(e, dir / "e.csv");
    write_paths_csv(e, dir / "p.csv");
    EXPECT_EQ(slurp(dir / "e.csv").substr(0, slurp(dir / "e.csv").find('\n')),
              "t,mean_wB,se_wB,mean_wL,se_wL,mean_wS,se_wS,mean_w0,se_w0,mean_YoverF,se_YoverF");
    EXPECT_EQ(slurp(dir / "p.csv").substr(0, slurp(dir / "p.csv").find('\n')),
              "path_id,t,r,lambda,p,Y,D,G,F,wB,wL,wS,w0");
    std::filesystem::remove_all(dir);
}

TEST(Ensemble, TerminalSurplusAgreesWithFullEngine) {
    const ModelParams p = small_run(6);
    const auto e = run_ensemble(p, {1, true, 1.0});
    const auto ys = simulate_terminal_surplus(p, e.Y0, {1, 1.0, 1});
    for (std::size_t i = 0; i < ys.size(); ++i) EXPECT_NEAR(ys[i], e.paths[i].back().Y, 1e-10 * ys[i]);
}

TEST(Ensemble, DiscretizationConvergence) {
    // Halving dt on the same Brownian path moves mean Y(T) by < 0.5%.
    ModelParams p = small_run(400, 1.0 / 104);
    const AffineCurve curve(p);
    const double Y0 = initial_position(curve).Y0;
    const auto fine = simulate_terminal_surplus(p, Y0, {1, 1.0, 1});
    const auto coarse = simulate_terminal_surplus(p, Y0, {1, 1.0, 2});
    double mf = 0, mc = 0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        mf += fine[i];
        mc += coarse[i];
    }
    EXPECT_LT(std::abs(mc - mf) / mf, 0.005);
}

TEST(Ensemble, NonPositiveInitialSurplusRejected) {
    ModelParams p = small_run(2);
    p.scheme.F0 = 1e-3;
    p.scheme.r_w = 1.0;
    p.scheme.r_c = 0.01;
    EXPECT_THROW(run_ensemble(p, {1, false, 1.0}), DomainError);
}
