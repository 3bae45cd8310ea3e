#include <doctest.h>

#include <cmath>

#include "pbound/error.hpp"
#include "pbound/polynomial.hpp"

using namespace pbound;

TEST_CASE("polynomial arithmetic and trimming") {
    const Polynomial p{1.0, 2.0, 3.0};  // 1 + 2x + 3x^2
    CHECK(p.degree() == 2);
    CHECK(p(2.0) == 17.0);
    CHECK(Polynomial(0.0).is_zero());
    CHECK(Polynomial(0.0).degree() == -1);
    CHECK((p - p).is_zero());
    const Polynomial q = p * Polynomial{0.0, 1.0};
    CHECK(q.coeffs() == std::vector<double>{0.0, 1.0, 2.0, 3.0});
    CHECK((2.0 * p)(1.0) == 12.0);
    CHECK(Polynomial::monomial(3, 2.0)(2.0) == 16.0);
    CHECK(p.coeff(7) == 0.0);
}

TEST_CASE("derivatives and rescaling") {
    const Polynomial p{1.0, 2.0, 3.0, 4.0};
    CHECK(p.derivative().coeffs() == std::vector<double>{2.0, 6.0, 12.0});
    CHECK(p.derivative(3).coeffs() == std::vector<double>{24.0});
    CHECK(p.derivative(4).is_zero());
    const Polynomial r = p.rescaled(0.5);
    for (double x : {-1.0, 0.3, 2.0}) {
        CHECK(r(x) == doctest::Approx(p(0.5 * x)).epsilon(1e-15));
    }
}

TEST_CASE("real roots including repeated ones") {
    // (x - 1)(x - 2)(x + 3)
    const Polynomial p = Polynomial{-1.0, 1.0} * Polynomial{-2.0, 1.0} * Polynomial{3.0, 1.0};
    const auto roots = real_roots(p, -10.0, 10.0);
    REQUIRE(roots.size() == 3);
    CHECK(roots[0] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(roots[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(roots[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(real_roots(p, 1.5, 1.9).empty());

    const Polynomial sq = Polynomial{-0.5, 1.0} * Polynomial{-0.5, 1.0};
    const auto r2 = real_roots(sq, 0.0, 1.0);
    REQUIRE(!r2.empty());
    CHECK(r2.front() == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(real_roots(Polynomial{1.0, 0.0, 1.0}, -5.0, 5.0).empty());
}

TEST_CASE("extrema on intervals") {
    const Polynomial p{0.0, 3.0, 0.0, -1.0};  // 3x - x^3, max 2 at x = 1
    const auto mx = max_value(p, 0.0, 2.0);
    CHECK(mx.where == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mx.value == doctest::Approx(2.0).epsilon(1e-14));
    const auto mn = min_value(p, 0.0, 2.0);
    CHECK(mn.where == doctest::Approx(2.0));
    CHECK(mn.value == doctest::Approx(-2.0));
    CHECK(max_abs(p, -3.0, 0.5).value == doctest::Approx(18.0));
}
