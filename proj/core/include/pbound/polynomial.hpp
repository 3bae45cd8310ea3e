#pragma once

#include <initializer_list>
#include <vector>

namespace pbound {

/// Dense univariate polynomial with real coefficients, lowest degree first.
///
/// Doubles as the value type of the bound recursions, where every quantity is
/// a polynomial in 1/lambda.
class Polynomial {
public:
    Polynomial() = default;
    Polynomial(double constant) : coeffs_{constant} { trim(); }  // NOLINT(google-explicit-constructor)
    Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) { trim(); }
    explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

    static Polynomial monomial(int degree, double coeff = 1.0);

    /// Degree of the polynomial; the zero polynomial reports -1.
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    bool is_zero() const noexcept { return coeffs_.empty(); }
    const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    double coeff(int i) const noexcept;

    double operator()(double x) const noexcept;
    Polynomial derivative(int order = 1) const;

    /// Substitute x -> scale * x.
    Polynomial rescaled(double scale) const;

    Polynomial& operator+=(const Polynomial& rhs);
    Polynomial& operator-=(const Polynomial& rhs);
    Polynomial& operator*=(const Polynomial& rhs);
    Polynomial& operator*=(double s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    void trim();
    std::vector<double> coeffs_;
};

/// Real roots of `p` inside [lo, hi], sorted ascending.
///
/// Roots are isolated between consecutive critical points (found recursively
/// from the derivative) and refined by bisection to `tol`. Roots of even
/// multiplicity are reported through the critical points of the derivative.
std::vector<double> real_roots(const Polynomial& p, double lo, double hi, double tol = 1e-13);

struct Extremum {
    double where;
    double value;
};

/// Maximum of |p| over [lo, hi] (finite interval).
Extremum max_abs(const Polynomial& p, double lo, double hi);
/// Minimum of p over [lo, hi] (finite interval).
Extremum min_value(const Polynomial& p, double lo, double hi);
/// Maximum of p over [lo, hi] (finite interval).
Extremum max_value(const Polynomial& p, double lo, double hi);

}  // namespace pbound
