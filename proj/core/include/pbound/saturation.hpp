#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pbound/polynomial.hpp"

namespace pbound {

/// One polynomial piece of a saturation on the half line r >= 0.
/// On [lo, hi) the function is poly(r - origin); the last piece has hi = +inf.
struct SaturationPiece {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double origin = 0.0;
    Polynomial poly;
};

/// An odd, C^p, piecewise-polynomial saturation: slope `alpha` on [-L, L],
/// constant +-sigma_max beyond S.
///
/// Only the half line r >= 0 is stored; negative arguments are evaluated
/// through odd symmetry. Instances are immutable once built.
class Saturation {
public:
    Saturation(int p, double sigma_max, double L, double S, double alpha,
               std::vector<SaturationPiece> pieces);

    int order() const noexcept { return p_; }
    double sigma_max() const noexcept { return sigma_max_; }
    double L() const noexcept { return L_; }
    double S() const noexcept { return S_; }
    double alpha() const noexcept { return alpha_; }
    const std::vector<SaturationPiece>& pieces() const noexcept { return pieces_; }

    /// sigma^(j)(r) for 0 <= j <= p. Throws ArgumentError for j outside that range.
    double eval(double r, int j = 0) const;
    double operator()(double r) const { return eval(r, 0); }

    /// sigma^(j)(r) for j = 0..up_to, written into out[0..up_to].
    /// No range check on up_to beyond p + 1 (the piecewise derivative exists
    /// inside every piece); used by the extremum routines.
    void eval_all(double r, int up_to, double* out) const;

    /// Index of the piece containing |r| (right-continuous at knots).
    std::size_t piece_index(double abs_r) const noexcept;

private:
    int p_;
    double sigma_max_;
    double L_;
    double S_;
    double alpha_;
    std::vector<SaturationPiece> pieces_;
    // derivs_[i][j] = j-th derivative of piece i, j = 0..p+1
    std::vector<std::vector<Polynomial>> derivs_;
};

/// Saturation whose transition zone [L, S] is one Hermite polynomial of
/// degree 2p+1 matching slope alpha at L and a flat plateau at S.
///
/// S - L starts at (sigma_max - alpha L) / alpha and is halved until the
/// transition is monotone. For p = 0 and alpha L == sigma_max the result is the
/// plain clamp with S = L.
Saturation make_hermite_saturation(int p, double sigma_max, double L, double alpha);

/// The S(2) saturation with constants (2, 1, 2, 1) built from two quartics:
/// sign(r)(-4 + 15|r| - 18r^2 + 10|r|^3 - 2r^4) on [1, 1.5] and
/// 2 sign(r)(25 - 60|r| + 54r^2 - 21|r|^3 + 3r^4) on [1.5, 2].
Saturation make_two_quartic_saturation();

/// mu(s) = mu_max * sigma(s * L_sigma / L_mu) / sigma_max.
Saturation scale_mu(const Saturation& sigma, double mu_max, double L_mu);

/// max over the real line of |sigma^(j)|, 1 <= j <= p.
double sup_derivative(const Saturation& sigma, int j);

/// max of |r - mu(r)| over |r| <= radius.
double residual_bound(const Saturation& mu, double radius);

struct SlopeBounds {
    double lower;  // min sigma(r)/r over 0 < |r| <= radius
    double upper;  // max sigma(r)/r over r > 0
};

SlopeBounds slope_bounds(const Saturation& sigma, double radius);

/// Outcome of the executable S(p) membership test.
struct MembershipReport {
    bool odd = true;
    bool linear_zone = true;
    bool plateau = true;
    bool sign = true;
    bool continuity = true;
    double worst_knot_jump = 0.0;
    std::string detail;

    bool ok() const noexcept { return odd && linear_zone && plateau && sign && continuity; }
};

MembershipReport check_membership(const Saturation& sigma, double tol = 1e-9);

}  // namespace pbound
