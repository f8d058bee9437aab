#include "nlhk/duhamel.hpp"
#include "nlhk/kernels.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace nlhk;

namespace {

const double A1 = 1.0 / M_PI;

Coefficient constant(double c) { return make_coefficient({{"family", "constant"}, {"params", {{"c", c}}}}); }

double rel_sup(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("base horizon rule") {
    CHECK(choose_base_horizon(make_coefficient({{"family", "zero"}})) == 1.0);
    // (a0 / |b|)^{2/(2-beta)} with a0 = A/4, beta = 1
    CHECK(choose_base_horizon(constant(0.5 * A1)) == doctest::Approx(0.25));
    CHECK(choose_base_horizon(constant(0.1 * A1)) == 1.0);
    CHECK(choose_base_horizon(constant(2.0 * A1)) == doctest::Approx(1.0 / 64));
}

TEST_CASE("zero coefficient: the series is the Gaussian") {
    const Coefficient z = make_coefficient({{"family", "zero"}});
    const SpaceTimeGrid g = make_grid(1, 1.0, 8, 0.1, 6.0);
    const SeriesResult r = build_series(z, g);
    for (std::size_t k = 0; k < g.times.size(); ++k)
        for (int j = 0; j < g.n; j += 3) {
            const double u = g.coord(j);
            CHECK(r.table.slice(k)[j] == doctest::Approx(ref::gaussian1(g.times[k], u)).epsilon(1e-14).scale(1e-300));
        }
    for (std::size_t n = 1; n < r.states.size(); ++n) CHECK(r.states[n].sup == 0.0);
}

TEST_CASE("first term for constant b has a closed form") {
    // b = kappa A: q1(t) = -kappa t (-Δ)^{1/2} p0(t)
    const double kappa = 0.5;
    const Coefficient c = constant(kappa * A1);
    const SpaceTimeGrid g = make_grid(1, 0.25, 12, 0.03125, 8.0);
    const DuhamelOperator op(c, g);
    const KernelTable& q1 = op.first_term();
    double worst = 0.0, peak = 0.0;
    for (std::size_t k : {2u, 5u, 11u}) {
        const double t = g.times[k];
        for (int j = 0; j < g.n; j += 4) {
            const double u = g.coord(j);
            if (std::abs(u) > 4.0) continue;
            const double e = -kappa * t * ref::frac_lap_gaussian1(1.0, t, u);
            worst = std::max(worst, std::abs(q1.slice(k)[j] - e));
            peak = std::max(peak, std::abs(e));
        }
    }
    CHECK(worst <= 2e-3 * peak);
}

TEST_CASE("constant b series against the Fourier integral") {
    const Coefficient c = constant(0.5 * A1);
    const double T = choose_base_horizon(c);
    const SpaceTimeGrid g = default_grid(c, T, T);
    const SeriesResult r = build_series(c, g);
    // geometric decay of the terms
    for (std::size_t n = 2; n < r.states.size(); ++n) CHECK(r.states[n].sup_ratio <= 0.6);
    double worst = 0.0;
    for (std::size_t k : {5u, 20u, 47u}) {
        const double t = g.times[k];
        for (double u : {0.0, 0.3, 1.0, 2.0}) {
            const double e = ref::density1([](double x) { return x * x + 0.5 * x; }, t, u);
            worst = std::max(worst, std::abs(r.table.at(k, Point{u, 0}, Point{}) - e) / e);
        }
    }
    CHECK(worst <= 1e-3);

    SUBCASE("Duhamel residuals") {
        const ResidualReport rr = duhamel_residuals(r.table, DuhamelOperator(c, g));
        CHECK(rr.first < 1e-3);
        CHECK(rr.second_supported);
        CHECK(rr.second < 1e-3);
        CHECK(rr.mutual < 5e-3);
    }

    SUBCASE("Chapman-Kolmogorov on the lattice") {
        const std::size_t kh = 23, kt = 47;  // t_24 = T / 2
        const std::vector<double> comp = compose(r.table, kh, kh);
        std::vector<double> direct(r.table.slice(kt), r.table.slice(kt) + r.table.slice_size());
        CHECK(rel_sup(comp, direct) < 1e-3);
    }

    SUBCASE("time extension keeps agreeing with the Fourier integral") {
        const KernelTable ext = extend_to(r.table, 1.0);
        CHECK(ext.grid.T() == doctest::Approx(1.0));
        const std::size_t k = ext.n_times() - 1;
        for (double u : {0.0, 1.0, 3.0}) {
            const double e = ref::density1([](double x) { return x * x + 0.5 * x; }, 1.0, u);
            CHECK(ext.at(k, Point{u, 0}, Point{}) == doctest::Approx(e).epsilon(2e-3));
        }
    }

    SUBCASE("generator identity on a bump") {
        const TestFunction f = gaussian_bump(1.0, Point{0.0, 0.0}, 1);
        const GeneratorDefect gd = generator_check(r.table, c, f, {Point{0, 0}, Point{0.5, 0}, Point{1, 0}}, 0.1);
        CHECK(gd.scaled / f.c2_norm < 1e-2);
    }
}

TEST_CASE("gaussian composition reproduces the Gaussian") {
    const Coefficient z = make_coefficient({{"family", "zero"}});
    const SpaceTimeGrid g = make_grid(1, 0.5, 2, 0.05, 8.0);
    const DuhamelOperator op(z, g);
    KernelTable q = op.gaussian();
    const std::vector<double> comp = compose(q, 0, 0);
    std::vector<double> direct(q.slice(1), q.slice(1) + q.slice_size());
    CHECK(rel_sup(comp, direct) < 1e-10);
}

TEST_CASE("scaling transfer") {
    // q^b(t, x, y) = lambda^{d/2} q^{b^(lambda)}(lambda t, sqrt(lambda) x, sqrt(lambda) y)
    const double lambda = 4.0;
    const Coefficient c = constant(0.5 * A1);
    const ScaledCoefficient cl = rescale(c, lambda);
    CHECK(cl.sup_norm() == doctest::Approx(0.25 * A1));
    const SpaceTimeGrid target = make_grid(1, 0.0625, 16, 0.015625, 4.0);
    const SpaceTimeGrid image = make_grid(1, 0.25, 16, 0.03125, 8.0);
    const KernelTable src = build_series(cl.scaled, image).table;
    const KernelTable tr = scaling_transfer(src, lambda, target);
    const KernelTable direct = build_series(c, target).table;
    double worst = 0.0;
    for (std::size_t k : {3u, 15u}) {
        std::vector<double> a(tr.slice(k), tr.slice(k) + tr.slice_size());
        std::vector<double> b(direct.slice(k), direct.slice(k) + direct.slice_size());
        worst = std::max(worst, rel_sup(a, b));
    }
    CHECK(worst < 1e-3);
    CHECK_THROWS_AS(scaling_transfer(src, 2.0, target), std::invalid_argument);
}

TEST_CASE("x-dependent coefficient in full mode") {
    const Coefficient c = make_coefficient(
        {{"family", "product"},
         {"params", {{"a", {{"mean", 1.0}, {"amp", 0.5}, {"freq", 1.0}}}, {"rho", {{"family", "indicator"}, {"M", 0.3}, {"lambda", 1.0}}}}}});
    REQUIRE_FALSE(c.translation_invariant());
    const SpaceTimeGrid g = make_grid(1, 0.2, 8, 0.05, 4.0);
    const SeriesResult r = build_series(c, g);
    CHECK_FALSE(r.table.ti);
    const std::size_t k = g.times.size() - 1;
    const int n = g.n;
    // mass in y for rows well inside the box
    for (int i = n / 2 - 20; i <= n / 2 + 20; i += 10) {
        double m = 0.0;
        for (int j = 0; j < n; ++j) m += r.table.slice(k)[static_cast<std::size_t>(i) * n + j] * g.dx;
        CHECK(m == doctest::Approx(1.0).epsilon(1e-3));
    }
    CHECK(r.table.min_value() > -1e-4 * r.table.sup_abs());
    // the Duhamel first form holds in full mode as well
    CHECK(duhamel_residual(r.table, c, DuhamelForm::First) < 1e-3);
}

TEST_CASE("series that does not contract raises") {
    const Coefficient c = constant(30.0 * A1);
    const SpaceTimeGrid g = make_grid(1, 1.0, 8, 0.125, 8.0);
    CHECK_THROWS_AS(build_series(c, g), NonContraction);
}

TEST_CASE("test functions") {
    const TestFunction f = gaussian_bump(0.5, Point{0.2, 0}, 1);
    const double h = 1e-4;
    for (double x : {0.0, 0.5}) {
        const double fd = (f.f(Point{x + h, 0}) + f.f(Point{x - h, 0}) - 2 * f.f(Point{x, 0})) / (h * h);
        CHECK(f.laplacian(Point{x, 0}) == doctest::Approx(fd).epsilon(1e-5));
    }
    const TestFunction one = constant_one();
    CHECK(one.laplacian(Point{3, 0}) == 0.0);
}
