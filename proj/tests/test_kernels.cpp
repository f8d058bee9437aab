#include "nlhk/kernels.hpp"
#include "nlhk/quadrature.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace nlhk;

TEST_CASE("gauss_legendre is exact for polynomials up to degree 2n-1") {
    const QuadRule q = gauss_legendre(6, 0.0, 2.0);
    for (int deg = 0; deg <= 11; ++deg) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], deg);
        CHECK(s == doctest::Approx(std::pow(2.0, deg + 1) / (deg + 1)).epsilon(1e-13));
    }
}

TEST_CASE("gauss_jacobi_unit matches the beta function") {
    for (double alpha : {-0.75, -0.5, 0.0, 0.4}) {
        const QuadRule q = gauss_jacobi_unit(10, alpha);
        for (int deg : {0, 3, 7, 19}) {
            double s = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i], deg);
            // int_0^1 u^{alpha+deg} du
            CHECK(s == doctest::Approx(1.0 / (alpha + deg + 1.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("composite_gauss respects breaks and integrates smooth functions") {
    const QuadRule q = composite_gauss({0.1, 1.0, 5.0}, 8, 0.5, 0.5);
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(q.nodes[i] > 0.1);
        CHECK(q.nodes[i] < 5.0);
        s += q.weights[i] * std::exp(-q.nodes[i]) / q.nodes[i];
    }
    CHECK(s == doctest::Approx(ref::integrate([](double x) { return std::exp(-x) / x; }, 0.1, 5.0)).epsilon(1e-12));
}

TEST_CASE("heat kernel of the Laplacian") {
    // generator is Δ, so the variance per axis is 2t
    CHECK(gaussian_r(0.5, 0.3, 1) == doctest::Approx(ref::gaussian1(0.5, 0.3)).epsilon(1e-15));
    CHECK(gaussian_r(0.5, 0.3, 2) == doctest::Approx(ref::gaussian2(0.5, 0.3)).epsilon(1e-15));
    const double var = ref::integrate_gk([](double x) { return x * x * ref::gaussian1(0.7, x); }, -30, 30);
    CHECK(var == doctest::Approx(1.4).epsilon(1e-10));
    CHECK(gaussian(0.2, Point{1.0, 2.0}, Point{0.5, 1.0}, 2) == doctest::Approx(ref::gaussian2(0.2, std::hypot(0.5, 1.0))));
    CHECK_THROWS_AS(gaussian(0.0, Point{}, Point{}, 1), std::invalid_argument);
}

TEST_CASE("second derivatives of the heat kernel") {
    // finite differences as the reference
    const double t = 0.3, h = 1e-4;
    for (double x : {0.0, 0.4, 1.3}) {
        const double fd = (gaussian_r(t, x + h, 1) + gaussian_r(t, x - h, 1) - 2 * gaussian_r(t, x, 1)) / (h * h);
        CHECK(gaussian_max_second_partial(t, Point{x, 0.0}, 1) == doctest::Approx(std::abs(fd)).epsilon(1e-6));
    }
    const Point x{0.3, -0.5};
    auto p = [&](double a, double b) { return ref::gaussian2(t, std::hypot(a, b)); };
    const double dxx = (p(x[0] + h, x[1]) + p(x[0] - h, x[1]) - 2 * p(x[0], x[1])) / (h * h);
    const double dyy = (p(x[0], x[1] + h) + p(x[0], x[1] - h) - 2 * p(x[0], x[1])) / (h * h);
    const double dxy = (p(x[0] + h, x[1] + h) - p(x[0] + h, x[1] - h) - p(x[0] - h, x[1] + h) + p(x[0] - h, x[1] - h)) /
                       (4 * h * h);
    const double expect = std::max({std::abs(dxx), std::abs(dyy), std::abs(dxy)});
    CHECK(gaussian_max_second_partial(t, x, 2) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("gaussian C9 dominates the Gaussian and its Hessian") {
    for (int d : {1, 2}) {
        const double c9 = gaussian_c9(d);
        CHECK(std::isfinite(c9));
        double worst = 0.0;
        for (double t : {0.01, 0.3, 2.0})
            for (int i = 0; i <= 2000; ++i) {
                const Point x{0.01 * i * std::sqrt(t), d == 2 ? 0.003 * i * std::sqrt(t) : 0.0};
                const double r = norm(x, d);
                const double cap = r > 0 ? std::min(1.0, std::sqrt(t) / r) : 1.0;
                worst = std::max(worst, gaussian_r(t, r, d) * std::pow(t, d / 2.0) / std::pow(cap, d + 2));
                worst = std::max(worst, gaussian_max_second_partial(t, x, d) / gaussian_hessian_bound(t, x, d) * c9);
            }
        CHECK(worst <= c9 * (1 + 1e-9));
        CHECK(worst >= 0.9 * c9);
    }
}

TEST_CASE("f0 and h") {
    const ModelParams p{1, 1.0};
    CHECK(f0(0.25, 0.1, p) == doctest::Approx(std::pow(0.5, -2.0)));
    CHECK(f0(0.25, 2.0, p) == doctest::Approx(0.25));
    CHECK(h_fn(0.5, 0.0, p) == doctest::Approx(std::pow(0.5, -0.5)));
    const double r = 3.0, t = 0.1;
    CHECK(h_fn(t, r, p) == doctest::Approx(ref::gaussian1(t, r) + t / (r * r)));
    const ModelParams p2{2, 1.5};
    CHECK(h_fn(0.01, 0.001, p2) == doctest::Approx(100.0));
}

TEST_CASE("stable normalizer gives the symbol |xi|^beta") {
    for (double beta : {0.5, 1.0, 1.5}) {
        const ModelParams p{1, beta};
        const double A = stable_normalizer(p).value;
        CHECK(A == doctest::Approx(ref::stable_A(1, beta)).epsilon(1e-13));
        // 2 int_0^inf (1 - cos z) A z^{-1-beta} dz = 1; the cosine tail past Z is O(Z^{-1-beta})
        const double Z = 40 * M_PI, Z2 = 4000 * M_PI;
        const double z0 = 1e-4;
        const double near = z0 * z0 * std::pow(z0, -beta) / (2 * (2 - beta)) +
                            ref::integrate_graded([&](double z) { return (1 - std::cos(z)) * std::pow(z, -1 - beta); }, z0, Z);
        const double cos_tail =
            ref::integrate_pieces([&](double z) { return std::cos(z) * std::pow(z, -1 - beta); }, Z, Z2, 4000);
        const double far = std::pow(Z, -beta) / beta - cos_tail;
        CHECK(2 * A * (near + far) == doctest::Approx(1.0).epsilon(2e-4));
    }
    // d = 1, beta = 1: the Cauchy constant 1/pi
    CHECK(stable_normalizer({1, 1.0}).value == doctest::Approx(1.0 / M_PI).epsilon(1e-14));
    CHECK(stable_normalizer({2, 1.0}).value == doctest::Approx(ref::stable_A(2, 1.0)).epsilon(1e-13));
}
