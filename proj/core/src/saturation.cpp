#include "pbound/saturation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "pbound/error.hpp"

namespace pbound {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double falling_factorial(int m, int k) {
    double f = 1.0;
    for (int i = 0; i < k; ++i) {
        f *= static_cast<double>(m - i);
    }
    return f;
}

}  // namespace

Saturation::Saturation(int p, double sigma_max, double L, double S, double alpha,
                       std::vector<SaturationPiece> pieces)
    : p_(p), sigma_max_(sigma_max), L_(L), S_(S), alpha_(alpha), pieces_(std::move(pieces)) {
    if (p_ < 0) {
        throw ArgumentError("saturation: smoothness order must be non-negative");
    }
    if (!(sigma_max_ > 0.0 && L_ > 0.0 && alpha_ > 0.0 && S_ >= L_)) {
        throw ArgumentError("saturation: need sigma_max, L, alpha > 0 and S >= L");
    }
    if (pieces_.empty() || pieces_.front().lo != 0.0 || !std::isinf(pieces_.back().hi)) {
        throw ArgumentError("saturation: pieces must cover [0, inf)");
    }
    for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
        if (pieces_[i].hi != pieces_[i + 1].lo || !(pieces_[i].hi > pieces_[i].lo)) {
            throw ArgumentError("saturation: pieces must be contiguous and non-empty");
        }
    }
    if (pieces_.back().poly.degree() > 0) {
        throw ArgumentError("saturation: the unbounded piece must be constant");
    }
    derivs_.reserve(pieces_.size());
    for (const auto& piece : pieces_) {
        std::vector<Polynomial> d;
        d.reserve(static_cast<std::size_t>(p_) + 2);
        d.push_back(piece.poly);
        for (int j = 1; j <= p_ + 1; ++j) {
            d.push_back(d.back().derivative());
        }
        derivs_.push_back(std::move(d));
    }
}

std::size_t Saturation::piece_index(double abs_r) const noexcept {
    std::size_t i = pieces_.size() - 1;
    while (i > 0 && abs_r < pieces_[i].lo) {
        --i;
    }
    return i;
}

double Saturation::eval(double r, int j) const {
    if (j < 0 || j > p_) {
        throw ArgumentError("saturation: derivative order exceeds smoothness order");
    }
    const double a = std::abs(r);
    const std::size_t i = piece_index(a);
    const double v = derivs_[i][static_cast<std::size_t>(j)](a - pieces_[i].origin);
    if (r < 0.0 && j % 2 == 0) {
        return -v;
    }
    return v;
}

void Saturation::eval_all(double r, int up_to, double* out) const {
    const double a = std::abs(r);
    const std::size_t i = piece_index(a);
    const double t = a - pieces_[i].origin;
    const auto& d = derivs_[i];
    for (int j = 0; j <= up_to; ++j) {
        const double v = j < static_cast<int>(d.size()) ? d[static_cast<std::size_t>(j)](t)
                                                        : d.back().derivative(j - static_cast<int>(d.size()) + 1)(t);
        out[j] = (r < 0.0 && j % 2 == 0) ? -v : v;
    }
}

namespace {

// Hermite transition on t in [0, 1]; returns coefficients in t.
std::vector<double> hermite_transition(int p, double sigma_max, double L, double alpha, double h) {
    const int deg = 2 * p + 1;
    std::vector<double> c(static_cast<std::size_t>(deg) + 1, 0.0);
    c[0] = alpha * L;
    if (p >= 1) {
        c[1] = alpha * h;
    }
    const int n_unknown = p + 1;
    Eigen::MatrixXd M(n_unknown, n_unknown);
    Eigen::VectorXd rhs(n_unknown);
    for (int k = 0; k <= p; ++k) {
        double known = 0.0;
        for (int m = 0; m <= p; ++m) {
            if (m >= k) {
                known += c[static_cast<std::size_t>(m)] * falling_factorial(m, k);
            }
        }
        rhs(k) = (k == 0 ? sigma_max : 0.0) - known;
        for (int u = 0; u < n_unknown; ++u) {
            M(k, u) = falling_factorial(p + 1 + u, k);
        }
    }
    const Eigen::VectorXd sol = M.fullPivLu().solve(rhs);
    for (int u = 0; u < n_unknown; ++u) {
        c[static_cast<std::size_t>(p + 1 + u)] = sol(u);
    }
    return c;
}

bool is_monotone(const Polynomial& transition, double h, double alpha) {
    const Extremum lowest = min_value(transition.derivative(), 0.0, h);
    return lowest.value >= -1e-12 * alpha;
}

}  // namespace

Saturation make_hermite_saturation(int p, double sigma_max, double L, double alpha) {
    if (p < 0) {
        throw ArgumentError("make_hermite_saturation: p must be non-negative");
    }
    if (!(sigma_max > 0.0 && L > 0.0 && alpha > 0.0)) {
        throw ArgumentError("make_hermite_saturation: sigma_max, L and alpha must be positive");
    }
    const double gap = sigma_max - alpha * L;
    if (gap < 0.0 || (gap == 0.0 && p > 0)) {
        throw InfeasibleError("make_hermite_saturation: need alpha * L < sigma_max (equality only for p = 0)");
    }
    const Polynomial linear{0.0, alpha};
    if (gap == 0.0) {
        return Saturation(p, sigma_max, L, L, alpha,
                          {{0.0, L, 0.0, linear}, {L, kInf, 0.0, Polynomial{sigma_max}}});
    }

    double h = gap / alpha;
    for (int attempt = 0; attempt < 64; ++attempt, h *= 0.5) {
        const std::vector<double> ct = hermite_transition(p, sigma_max, L, alpha, h);
        // Convert from t = (r - L) / h to the local coordinate r - L.
        std::vector<double> cr(ct.size());
        double hp = 1.0;
        for (std::size_t m = 0; m < ct.size(); ++m) {
            cr[m] = ct[m] / hp;
            hp *= h;
        }
        Polynomial transition(std::move(cr));
        if (!is_monotone(transition, h, alpha)) {
            continue;
        }
        const double S = L + h;
        return Saturation(p, sigma_max, L, S, alpha,
                          {{0.0, L, 0.0, linear},
                           {L, S, L, std::move(transition)},
                           {S, kInf, 0.0, Polynomial{sigma_max}}});
    }
    throw InfeasibleError("make_hermite_saturation: no monotone Hermite transition found");
}

Saturation make_two_quartic_saturation() {
    return Saturation(2, 2.0, 1.0, 2.0, 1.0,
                      {{0.0, 1.0, 0.0, Polynomial{0.0, 1.0}},
                       {1.0, 1.5, 0.0, Polynomial{-4.0, 15.0, -18.0, 10.0, -2.0}},
                       {1.5, 2.0, 0.0, Polynomial{50.0, -120.0, 108.0, -42.0, 6.0}},
                       {2.0, kInf, 0.0, Polynomial{2.0}}});
}

Saturation scale_mu(const Saturation& sigma, double mu_max, double L_mu) {
    if (!(mu_max > 0.0 && L_mu > 0.0)) {
        throw ArgumentError("scale_mu: mu_max and L_mu must be positive");
    }
    const double c = sigma.L() / L_mu;          // argument scale
    const double k = mu_max / sigma.sigma_max();  // amplitude scale
    std::vector<SaturationPiece> pieces;
    pieces.reserve(sigma.pieces().size());
    for (const auto& piece : sigma.pieces()) {
        SaturationPiece out;
        out.lo = piece.lo / c;
        out.hi = std::isinf(piece.hi) ? kInf : piece.hi / c;
        out.origin = piece.origin / c;
        out.poly = piece.poly.rescaled(c) * k;
        if (std::isinf(piece.hi)) {
            out.poly = Polynomial{mu_max};
        }
        pieces.push_back(std::move(out));
    }
    return Saturation(sigma.order(), mu_max, L_mu, sigma.S() / c, k * sigma.alpha() * c, std::move(pieces));
}

double sup_derivative(const Saturation& sigma, int j) {
    if (j < 1 || j > sigma.order()) {
        throw ArgumentError("sup_derivative: need 1 <= j <= p");
    }
    double best = 0.0;
    for (const auto& piece : sigma.pieces()) {
        const Polynomial d = piece.poly.derivative(j);
        if (std::isinf(piece.hi)) {
            best = std::max(best, std::abs(d(0.0)));
            continue;
        }
        best = std::max(best, max_abs(d, piece.lo - piece.origin, piece.hi - piece.origin).value);
    }
    return best;
}

double residual_bound(const Saturation& mu, double radius) {
    if (radius < 0.0) {
        throw ArgumentError("residual_bound: radius must be non-negative");
    }
    double best = 0.0;
    for (const auto& piece : mu.pieces()) {
        if (piece.lo >= radius) {
            break;
        }
        const double top = std::min(piece.hi, radius);
        const Polynomial g = Polynomial{piece.origin, 1.0} - piece.poly;
        best = std::max(best, max_abs(g, piece.lo - piece.origin, top - piece.origin).value);
    }
    return best;
}

SlopeBounds slope_bounds(const Saturation& sigma, double radius) {
    if (!(radius > 0.0)) {
        throw ArgumentError("slope_bounds: radius must be positive");
    }
    double lower = sigma.alpha();
    double upper = sigma.alpha();
    const auto& pieces = sigma.pieces();
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        const auto& piece = pieces[i];
        const double o = piece.origin;
        auto ratio = [&](double t) { return piece.poly(t) / (t + o); };
        if (std::isinf(piece.hi)) {
            upper = std::max(upper, ratio(piece.lo - o));
            if (radius > piece.lo) {
                lower = std::min(lower, ratio(radius - o));
            }
            continue;
        }
        // Stationary points of sigma(r)/r solve r sigma'(r) - sigma(r) = 0.
        const Polynomial numer = Polynomial{o, 1.0} * piece.poly.derivative() - piece.poly;
        const double t_lo = piece.lo - o;
        const double t_hi = piece.hi - o;
        std::vector<double> candidates{t_lo, t_hi};
        for (double t : real_roots(numer, t_lo, t_hi)) {
            candidates.push_back(t);
        }
        for (double t : candidates) {
            const double v = ratio(t);
            upper = std::max(upper, v);
            if (t + o <= radius) {
                lower = std::min(lower, v);
            }
        }
        if (radius > piece.lo && radius < piece.hi) {
            lower = std::min(lower, ratio(radius - o));
        }
    }
    return {lower, upper};
}

MembershipReport check_membership(const Saturation& sigma, double tol) {
    MembershipReport rep;
    std::ostringstream why;
    const int p = sigma.order();
    const double L = sigma.L();
    const double S = sigma.S();

    if (S < L || sigma.alpha() * L > sigma.sigma_max() * (1.0 + tol)) {
        rep.linear_zone = false;
        why << "constants violate S >= L or alpha L <= sigma_max; ";
    }

    constexpr int kSamples = 257;
    for (int s = 0; s < kSamples; ++s) {
        const double frac = static_cast<double>(s) / (kSamples - 1);
        const double r_lin = frac * L;
        const double r_any = frac * 2.0 * S;
        const double r_plat = S * (1.0 + 9.0 * frac);
        if (std::abs(sigma(r_lin) - sigma.alpha() * r_lin) > tol * std::max(1.0, std::abs(sigma.alpha() * r_lin))) {
            rep.linear_zone = false;
        }
        if (std::abs(sigma(r_plat) - sigma.sigma_max()) > tol * sigma.sigma_max() ||
            std::abs(sigma(-r_plat) + sigma.sigma_max()) > tol * sigma.sigma_max()) {
            rep.plateau = false;
        }
        for (int j = 0; j <= p; ++j) {
            const double sgn = (j % 2 == 0) ? -1.0 : 1.0;
            const double v = sigma.eval(r_any, j);
            if (std::abs(sigma.eval(-r_any, j) - sgn * v) > tol * std::max(1.0, std::abs(v))) {
                rep.odd = false;
            }
        }
    }

    // r sigma(r) > 0: sigma stays positive on (0, inf).
    const auto& pieces = sigma.pieces();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const auto& piece = pieces[i];
        if (i == 0) {
            if (piece.poly(piece.lo - piece.origin) != 0.0 || piece.poly.derivative()(0.0 - piece.origin) <= 0.0) {
                rep.sign = false;
            }
            continue;
        }
        const double top = std::isinf(piece.hi) ? piece.lo : piece.hi;
        if (min_value(piece.poly, piece.lo - piece.origin, top - piece.origin).value <= 0.0) {
            rep.sign = false;
        }
    }

    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
        const double x = pieces[i].hi;
        for (int j = 0; j <= p; ++j) {
            const double left = pieces[i].poly.derivative(j)(x - pieces[i].origin);
            const double right = pieces[i + 1].poly.derivative(j)(x - pieces[i + 1].origin);
            const double jump = std::abs(left - right) / std::max(1.0, std::abs(left));
            rep.worst_knot_jump = std::max(rep.worst_knot_jump, jump);
            if (jump > tol) {
                rep.continuity = false;
                why << "derivative " << j << " jumps by " << std::abs(left - right) << " at r=" << x << "; ";
            }
        }
    }
    if (!rep.odd) why << "odd symmetry violated; ";
    if (!rep.linear_zone) why << "not linear on [-L, L]; ";
    if (!rep.plateau) why << "plateau value not reached beyond S; ";
    if (!rep.sign) why << "sign condition r sigma(r) > 0 violated; ";
    rep.detail = why.str();
    return rep;
}

}  // namespace pbound
