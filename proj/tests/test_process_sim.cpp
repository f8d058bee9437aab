#include "nlhk/duhamel.hpp"
#include "nlhk/kernels.hpp"
#include "nlhk/process_sim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace nlhk;

namespace {

const double A1 = 1.0 / M_PI;

const Coefficient& zero() {
    static const Coefficient c = make_coefficient({{"family", "zero"}});
    return c;
}
const Coefficient& indicator() {
    static const Coefficient c = make_coefficient({{"family", "indicator"}, {"params", {{"M", 1.0}, {"lambda", 1.0}}}});
    return c;
}

// P(tau <= u) for standard Brownian motion leaving (-r, r) from 0
double bm_exit_cdf(double u, double r) {
    double s = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double m = 2 * k + 1;
        s += (k % 2 ? -1.0 : 1.0) / m * std::exp(-m * m * M_PI * M_PI * u / (8 * r * r));
    }
    return std::clamp(1.0 - 4.0 / M_PI * s, 0.0, 1.0);
}

}  // namespace

TEST_CASE("jump rate and small jump covariance") {
    // M_b S_d (eps^{-beta} - R^{-beta}) / beta
    CHECK(jump_rate(indicator(), 0.05, 1e3) == doctest::Approx(2.0 * (20.0 - 1.0)));
    const Coefficient c = make_coefficient({{"family", "constant"}, {"params", {{"c", 0.3}}}});
    CHECK(jump_rate(c, 0.1, 100.0) == doctest::Approx(0.3 * 2.0 * (10.0 - 0.01)));
    // int_{|z|<eps} z^2 b |z|^{-2} dz = 2 b eps
    const auto cov = small_jump_covariance(c, Point{}, 0.05);
    CHECK(cov[0] == doctest::Approx(2 * 0.3 * 0.05));
    const Coefficient c2 = make_coefficient({{"family", "constant"}, {"d", 2}, {"beta", 1.5}, {"params", {{"c", 0.3}}}});
    // d = 2: int_{|z|<eps} z_1^2 b |z|^{-3.5} dz = b pi int_0^eps r^{-1/2} dr = 2 b pi sqrt(eps)
    const auto cov2 = small_jump_covariance(c2, Point{}, 0.05);
    CHECK(cov2[0] == doctest::Approx(0.3 * M_PI * 2 * std::sqrt(0.05)));
    CHECK(cov2[1] == doctest::Approx(cov2[0]));
    CHECK(std::abs(cov2[2]) < 1e-14);
}

TEST_CASE("wilson interval") {
    const Proportion p = wilson(5, 10);
    CHECK(p.p == 0.5);
    CHECK(p.lo == doctest::Approx(0.2366).epsilon(1e-3));
    CHECK(p.hi == doctest::Approx(0.7634).epsilon(1e-3));
    const Proportion z = wilson(0, 100);
    CHECK(z.lo == 0.0);
    CHECK(z.hi == doctest::Approx(0.037).epsilon(1e-2));
}

TEST_CASE("log-log slope") {
    const std::vector<double> d{2, 3, 4};
    std::vector<double> p;
    for (double x : d) p.push_back(3.0 * std::pow(x, -2.0));
    const SlopeFit f = loglog_slope(d, p);
    CHECK(f.valid);
    CHECK(f.slope == doctest::Approx(-2.0));
    CHECK_FALSE(loglog_slope(d, {0.1, 0.0, 0.01}).valid);
}

TEST_CASE("Brownian part has variance 2t per axis") {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.horizon = 0.25;
    cfg.record_jumps = false;
    const SimResult s = simulate(zero(), cfg, Point{});
    double m = 0.0, v = 0.0;
    for (const PathSample& p : s.paths) m += p.final_pos[0];
    m /= cfg.n_paths;
    for (const PathSample& p : s.paths) v += (p.final_pos[0] - m) * (p.final_pos[0] - m);
    v /= cfg.n_paths - 1;
    const double se = 0.5 * std::sqrt(2.0 / cfg.n_paths);
    CHECK(std::abs(v - 0.5) < 4 * se);
    CHECK(s.rate == 0.0);
}

TEST_CASE("fixed seed reproduces, a new seed does not") {
    SimConfig cfg;
    cfg.n_paths = 200;
    cfg.horizon = 0.1;
    const SimResult a = simulate(indicator(), cfg, Point{});
    const SimResult b = simulate(indicator(), cfg, Point{});
    cfg.seed = 2;
    const SimResult c = simulate(indicator(), cfg, Point{});
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
        same = same && a.paths[i].final_pos == b.paths[i].final_pos && a.paths[i].jumps.size() == b.paths[i].jumps.size();
        differ = differ || a.paths[i].final_pos != c.paths[i].final_pos;
    }
    CHECK(same);
    CHECK(differ);
    CHECK(a.summary().dump() == b.summary().dump());
}

TEST_CASE("jumps respect the support and the thinning rate") {
    SimConfig cfg;
    cfg.n_paths = 2000;
    cfg.horizon = 0.5;
    const SimResult s = simulate(indicator(), cfg, Point{});
    std::size_t jumps = 0;
    for (const PathSample& p : s.paths)
        for (const JumpRecord& j : p.jumps) {
            ++jumps;
            CHECK(std::abs(j.z[0]) <= 1.0);
            CHECK(std::abs(j.z[0]) >= cfg.eps_jump);
        }
    // b = M_b on its support, so every proposal inside is accepted: mean count = rate * t
    const double mean = static_cast<double>(jumps) / cfg.n_paths;
    const double expect = 2.0 * (20.0 - 1.0) * cfg.horizon;
    CHECK(std::abs(mean - expect) < 4 * std::sqrt(expect / cfg.n_paths));
}

TEST_CASE("empirical law against the kernel table") {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.horizon = 0.25;
    cfg.record_jumps = false;
    const SimResult s = simulate(zero(), cfg, Point{});
    const SpaceTimeGrid g = make_grid(1, 0.25, 4, 0.02, 6.0);
    const KernelTable q = build_series(zero(), g).table;
    const KSResult ks = empirical_density_check(s, q, 0.25);
    CHECK(ks.n == cfg.n_paths);
    CHECK(ks.distance < 1.63 / std::sqrt(double(cfg.n_paths)));  // 1% level
}

TEST_CASE("Brownian exit time law") {
    SimConfig cfg;
    cfg.n_paths = 10000;
    cfg.horizon = 0.5;
    cfg.record_positions = true;
    cfg.record_jumps = false;
    const SimResult s = simulate(zero(), cfg, Point{});
    const double r = 0.75;
    const ExitStats e = exit_time_stats(s, r);
    // X_s = B_{2s}; discrete monitoring acts like a barrier shifted by 0.5826 sqrt(2 dt)
    const double r_eff = r + 0.5826 * std::sqrt(2 * cfg.dt);
    for (std::size_t i = 0; i < e.s.size(); i += std::max<std::size_t>(1, e.s.size() / 10)) {
        const double expect = bm_exit_cdf(2 * e.s[i], r_eff);
        CHECK(std::abs(e.p[i].p - expect) <= 4 * std::sqrt(expect * (1 - expect) / cfg.n_paths) + 2e-3);
    }
    CHECK(e.kappa > 0.0);
    CHECK(e.kappa < 32.0 / 9.0);
    CHECK(std::isfinite(e.c20));
}

TEST_CASE("hitting probabilities decay like |x-y|^{-(d+beta)} for constant b") {
    const Coefficient c = make_coefficient({{"family", "constant"}, {"params", {{"c", A1}}}});
    SimConfig cfg;
    cfg.n_paths = 100000;
    cfg.horizon = 0.0625;
    cfg.record_positions = true;
    cfg.record_jumps = false;
    const SimResult s = simulate(c, cfg, Point{});
    std::vector<double> dist{2, 3, 4}, p;
    for (double D : dist) p.push_back(hitting_prob_stats(s, Point{D, 0}, 0.5, cfg.horizon).p);
    const SlopeFit f = loglog_slope(dist, p);
    REQUIRE(f.valid);
    CHECK(f.slope == doctest::Approx(-2.0).epsilon(0.15));
}

TEST_CASE("Levy system balance") {
    SimConfig cfg;
    cfg.n_paths = 4000;
    cfg.horizon = 0.25;
    cfg.record_positions = true;
    const SimResult s = simulate(indicator(), cfg, Point{});
    const LevySystemCheck near = levy_system_check(s, indicator(), Box{{-0.5, 0}, {0.5, 0}}, Box{{1.0, 0}, {1.5, 0}});
    CHECK(near.lhs > 0.0);
    CHECK(near.pass);
    const LevySystemCheck far = levy_system_check(s, indicator(), Box{{-0.5, 0}, {0.5, 0}}, Box{{2.0, 0}, {2.5, 0}});
    CHECK(far.lhs == 0.0);
    CHECK(far.rhs == 0.0);
    CHECK(far.pass);
    const SimResult z = simulate(zero(), cfg, Point{});
    const LevySystemCheck none = levy_system_check(z, zero(), Box{{-0.5, 0}, {0.5, 0}}, Box{{1.0, 0}, {1.5, 0}});
    CHECK(none.lhs == 0.0);
    CHECK(none.rhs == 0.0);
}

TEST_CASE("configuration errors") {
    SimConfig cfg;
    cfg.eps_jump = 0.0;
    CHECK_THROWS_AS(simulate(indicator(), cfg, Point{}), std::invalid_argument);
    cfg = SimConfig{};
    cfg.eps_jump = 2.0;  // beyond the support
    CHECK_THROWS_AS(simulate(indicator(), cfg, Point{}), std::invalid_argument);
    const Coefficient neg =
        make_coefficient({{"family", "indicator"}, {"params", {{"M", -0.2}, {"lambda", 2.0}, {"inner", 1.0}}}});
    CHECK_THROWS_AS(simulate(neg, SimConfig{}, Point{}), std::invalid_argument);
}
