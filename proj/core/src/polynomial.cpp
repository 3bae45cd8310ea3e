#include "pbound/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace pbound {

Polynomial Polynomial::monomial(int degree, double coeff) {
    std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
    c.back() = coeff;
    return Polynomial(std::move(c));
}

double Polynomial::coeff(int i) const noexcept {
    if (i < 0 || i >= static_cast<int>(coeffs_.size())) {
        return 0.0;
    }
    return coeffs_[static_cast<std::size_t>(i)];
}

double Polynomial::operator()(double x) const noexcept {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
        acc = acc * x + *it;
    }
    return acc;
}

Polynomial Polynomial::derivative(int order) const {
    std::vector<double> c = coeffs_;
    for (int k = 0; k < order; ++k) {
        if (c.size() <= 1) {
            return Polynomial{};
        }
        for (std::size_t i = 1; i < c.size(); ++i) {
            c[i - 1] = c[i] * static_cast<double>(i);
        }
        c.pop_back();
    }
    return Polynomial(std::move(c));
}

Polynomial Polynomial::rescaled(double scale) const {
    std::vector<double> c = coeffs_;
    double f = 1.0;
    for (double& ci : c) {
        ci *= f;
        f *= scale;
    }
    return Polynomial(std::move(c));
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
    if (rhs.coeffs_.size() > coeffs_.size()) {
        coeffs_.resize(rhs.coeffs_.size(), 0.0);
    }
    for (std::size_t i = 0; i < rhs.coeffs_.size(); ++i) {
        coeffs_[i] += rhs.coeffs_[i];
    }
    trim();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
    if (rhs.coeffs_.size() > coeffs_.size()) {
        coeffs_.resize(rhs.coeffs_.size(), 0.0);
    }
    for (std::size_t i = 0; i < rhs.coeffs_.size(); ++i) {
        coeffs_[i] -= rhs.coeffs_[i];
    }
    trim();
    return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& rhs) {
    if (is_zero() || rhs.is_zero()) {
        coeffs_.clear();
        return *this;
    }
    std::vector<double> out(coeffs_.size() + rhs.coeffs_.size() - 1, 0.0);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j) {
            out[i + j] += coeffs_[i] * rhs.coeffs_[j];
        }
    }
    coeffs_ = std::move(out);
    trim();
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    for (double& c : coeffs_) {
        c *= s;
    }
    trim();
    return *this;
}

void Polynomial::trim() {
    while (!coeffs_.empty() && coeffs_.back() == 0.0) {
        coeffs_.pop_back();
    }
}

namespace {

double bisect(const Polynomial& p, double a, double b, double fa, double tol) {
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        if (b - a <= tol * std::max(1.0, std::abs(m))) {
            return m;
        }
        const double fm = p(m);
        if (fm == 0.0) {
            return m;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

// Magnitude scale of p around x, used to decide whether a critical value is
// numerically a (multiple) root.
double magnitude_scale(const Polynomial& p, double x) {
    double s = 0.0;
    double xp = 1.0;
    for (double c : p.coeffs()) {
        s += std::abs(c) * xp;
        xp *= std::abs(x);
    }
    return s;
}

}  // namespace

std::vector<double> real_roots(const Polynomial& p, double lo, double hi, double tol) {
    std::vector<double> roots;
    if (p.degree() <= 0 || hi < lo) {
        return roots;
    }
    if (p.degree() == 1) {
        const double r = -p.coeff(0) / p.coeff(1);
        if (r >= lo && r <= hi) {
            roots.push_back(r);
        }
        return roots;
    }

    std::vector<double> knots{lo};
    for (double c : real_roots(p.derivative(), lo, hi, tol)) {
        if (c > knots.back()) {
            knots.push_back(c);
        }
    }
    if (hi > knots.back()) {
        knots.push_back(hi);
    }

    auto push = [&](double r) {
        if (roots.empty() || std::abs(r - roots.back()) > 1e3 * tol * std::max(1.0, std::abs(r))) {
            roots.push_back(r);
        }
    };

    for (std::size_t i = 0; i < knots.size(); ++i) {
        const double a = knots[i];
        const double fa = p(a);
        const bool interior_critical = i > 0 && i + 1 < knots.size();
        if (fa == 0.0 || (interior_critical && std::abs(fa) <= 1e-13 * magnitude_scale(p, a))) {
            push(a);
        }
        if (i + 1 == knots.size()) {
            break;
        }
        const double b = knots[i + 1];
        const double fb = p(b);
        if (fa != 0.0 && fb != 0.0 && ((fa < 0.0) != (fb < 0.0))) {
            push(bisect(p, a, b, fa, tol));
        }
    }
    return roots;
}

namespace {

template <class Better>
Extremum scan_extremum(const Polynomial& p, double lo, double hi, Better better) {
    auto value = [&](double x) { return p(x); };
    Extremum best{lo, value(lo)};
    auto consider = [&](double x) {
        const double v = value(x);
        if (better(v, best.value)) {
            best = {x, v};
        }
    };
    consider(hi);
    for (double c : real_roots(p.derivative(), lo, hi)) {
        consider(c);
    }
    return best;
}

}  // namespace

Extremum max_abs(const Polynomial& p, double lo, double hi) {
    const Extremum mx = max_value(p, lo, hi);
    const Extremum mn = min_value(p, lo, hi);
    if (std::abs(mx.value) >= std::abs(mn.value)) {
        return {mx.where, std::abs(mx.value)};
    }
    return {mn.where, std::abs(mn.value)};
}

Extremum min_value(const Polynomial& p, double lo, double hi) {
    return scan_extremum(p, lo, hi, [](double a, double b) { return a < b; });
}

Extremum max_value(const Polynomial& p, double lo, double hi) {
    return scan_extremum(p, lo, hi, [](double a, double b) { return a > b; });
}

}  // namespace pbound
