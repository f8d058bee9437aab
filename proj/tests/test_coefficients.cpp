#include "nlhk/coefficients.hpp"
#include "nlhk/kernels.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace nlhk;
using nlohmann::json;

namespace {
const double A1 = 1.0 / M_PI;  // A(1, -1)
}

TEST_CASE("zero coefficient") {
    const Coefficient c = make_coefficient({{"family", "zero"}});
    CHECK(c.is_zero());
    CHECK(c.sup_norm() == 0.0);
    CHECK(c.nonneg());
    CHECK(c(Point{0.3, 0}, Point{1.0, 0}) == 0.0);
    CHECK(c.check_invariants().empty());
}

TEST_CASE("constant coefficient envelopes") {
    const Coefficient c = make_coefficient({{"family", "constant"}, {"params", {{"c", 0.5 * A1}}}});
    CHECK(c.sup_norm() == doctest::Approx(0.5 * A1));
    CHECK(c.lower_env() == doctest::Approx(0.5 * A1));
    CHECK(c.upper_env() == doctest::Approx(0.5 * A1));
    CHECK(c.translation_invariant());
    CHECK(c.radial());
    CHECK(std::isinf(c.support_radius()));
    CHECK(c.beta() == 1.0);
    CHECK(c.dim() == 1);
}

TEST_CASE("indicator coefficient") {
    const Coefficient c = make_coefficient({{"family", "indicator"}, {"params", {{"M", 1.0}, {"lambda", 1.0}}}});
    CHECK(c(Point{0, 0}, Point{0.999, 0}) == 1.0);
    CHECK(c(Point{0, 0}, Point{-0.5, 0}) == 1.0);
    CHECK(c(Point{0, 0}, Point{1.001, 0}) == 0.0);
    CHECK(c.support_radius() == doctest::Approx(1.0));
    CHECK(c.lower_env() == 0.0);  // m_b = 0 since b vanishes beyond the support
    CHECK(c.upper_env() == 1.0);
    CHECK(c.inf_on_ball(0.9) == 1.0);
    CHECK(c.nonneg());

    SUBCASE("tail mass against direct integration") {
        // int_{|w| > R} b |w|^{-1-beta} dw = 2 int_R^1 w^{-2} dw
        for (double R : {0.1, 0.5, 0.9})
            CHECK(c.tail_mass(Point{0, 0}, R) ==
                  doctest::Approx(2 * ref::integrate([](double w) { return 1 / (w * w); }, R, 1.0)).epsilon(1e-10));
        CHECK(c.tail_mass(Point{0, 0}, 2.0) == 0.0);
    }
}

TEST_CASE("negative part example") {
    const Coefficient c =
        make_coefficient({{"family", "indicator"}, {"params", {{"M", -0.2}, {"lambda", 2.0}, {"inner", 1.0}}}});
    CHECK_FALSE(c.nonneg());
    CHECK(c(Point{0, 0}, Point{1.5, 0}) == doctest::Approx(-0.2));
    CHECK(c(Point{0, 0}, Point{0.5, 0}) == 0.0);
    CHECK(c.lower_env() == doctest::Approx(-0.2));
    CHECK(c.sup_norm() == doctest::Approx(0.2));
    CHECK(c.check_invariants().empty());

    SUBCASE("asserted flag conflicts with the sampled sign") {
        const Coefficient f = c.with_nonneg_flag(true);
        CHECK(f.nonneg());
        CHECK_FALSE(f.check_invariants().empty());
        json spec = c.spec();
        spec["nonneg"] = true;
        CHECK(make_coefficient(spec).nonneg());
    }
}

TEST_CASE("asymmetric input is symmetrized with a warning") {
    json values = json::array();
    // b(z) on z in [-1, 1], 5 nodes; odd part must disappear
    for (double v : {0.0, 0.1, 0.3, 0.5, 0.8}) values.push_back(v);
    const Coefficient c = make_coefficient(
        {{"family", "table"}, {"params", {{"z_min", {-1.0}}, {"z_max", {1.0}}, {"z_count", {5}}, {"values", values}}}});
    REQUIRE_FALSE(c.warnings().empty());
    for (double z : {0.2, 0.5, 0.9}) CHECK(c(Point{0, 0}, Point{z, 0}) == doctest::Approx(c(Point{0, 0}, Point{-z, 0})));
    // endpoints average 0 and 0.8
    CHECK(c(Point{0, 0}, Point{1.0, 0}) == doctest::Approx(0.4));
}

TEST_CASE("product coefficient depends on x") {
    const Coefficient c = make_coefficient(
        {{"family", "product"},
         {"params", {{"a", {{"mean", 1.0}, {"amp", 0.5}, {"freq", 1.0}}}, {"rho", {{"family", "constant"}, {"c", 0.2}}}}}});
    CHECK_FALSE(c.translation_invariant());
    CHECK(c(Point{0, 0}, Point{0.3, 0}) == doctest::Approx(0.3));
    CHECK(c(Point{M_PI, 0}, Point{0.3, 0}) == doctest::Approx(0.1));
    CHECK(c.lower_env() == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(c.upper_env() == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("rescaled coefficient") {
    // b^(lambda)(x, z) = lambda^{beta/2 - 1} b(x / sqrt(lambda), z / sqrt(lambda))
    const Coefficient c = make_coefficient({{"family", "indicator"}, {"params", {{"M", 1.0}, {"lambda", 1.0}}}});
    const ScaledCoefficient s = rescale(c, 4.0);
    CHECK(s.scaled(Point{0, 0}, Point{1.9, 0}) == doctest::Approx(std::pow(4.0, -0.5)));
    CHECK(s.scaled(Point{0, 0}, Point{2.1, 0}) == 0.0);
    CHECK(s.sup_norm() == doctest::Approx(0.5));
    CHECK(s.scaled.support_radius() == doctest::Approx(2.0));
    CHECK(s.scaled.hash() != c.hash());
    CHECK_THROWS_AS(rescale(c, 0.0), std::invalid_argument);
}

TEST_CASE("hash is a function of the spec") {
    const json spec = {{"family", "constant"}, {"params", {{"c", 0.1}}}};
    CHECK(make_coefficient(spec).hash() == make_coefficient(spec).hash());
    CHECK(make_coefficient(spec).hash() != make_coefficient({{"family", "constant"}, {"params", {{"c", 0.2}}}}).hash());
}

TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(make_coefficient({{"params", {}}}), std::invalid_argument);
    CHECK_THROWS_AS(make_coefficient({{"family", "bogus"}}), std::invalid_argument);
    CHECK_THROWS_AS(make_coefficient({{"family", "zero"}, {"beta", 2.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_coefficient({{"family", "zero"}, {"d", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(make_coefficient({{"family", "indicator"}, {"params", {{"lambda", 1.0}, {"inner", 2.0}}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_coefficient({{"family", "table"},
                                      {"params", {{"z_min", {-1.0}}, {"z_max", {1.0}}, {"z_count", {3}}, {"values", {1.0, 2.0}}}}}),
                    std::invalid_argument);
}

TEST_CASE("halton points") {
    double u[2];
    halton(1, 2, u);
    CHECK(u[0] == doctest::Approx(0.5));
    CHECK(u[1] == doctest::Approx(1.0 / 3));
    halton(5, 2, u);
    CHECK(u[0] == doctest::Approx(0.625));
    CHECK(u[1] == doctest::Approx(7.0 / 9));
}
