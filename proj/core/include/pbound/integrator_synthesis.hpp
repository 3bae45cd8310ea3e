#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pbound/polynomial.hpp"
#include "pbound/saturation.hpp"

namespace pbound {

/// Problem data for the chain x_i' = x_{i+1}, x_n' = u.
struct ChainSpec {
    int n = 1;
    int p = 0;
    std::vector<double> R;            // R_0..R_p
    std::vector<Saturation> sigmas;   // sigma_1..sigma_n

    void validate() const;
};

/// The inner saturations mu_1..mu_{n-1}. Index i-1 holds mu_i.
struct MuFamily {
    std::vector<Saturation> mu;
    std::vector<double> mu_max;
    std::vector<double> L_mu;
    std::vector<double> S_mu;

    std::size_t size() const noexcept { return mu.size(); }
};

struct SynthesisOptions {
    /// Explicit mu_1^max..mu_{n-1}^max; the default rule is used when empty.
    std::optional<std::vector<double>> mu_max;
    /// Fixed lambda; selected automatically when empty.
    std::optional<double> lambda;
};

/// Default safety factor applied to each strict inequality on mu_i^max.
inline constexpr double kMuSafetyFactor = 0.8;

MuFamily choose_mu_families(const ChainSpec& spec,
                            const std::optional<std::vector<double>>& mu_max_override = std::nullopt);

/// alpha_tilde = R_0 L_{sigma_n} alpha_{sigma_n} / sigma_n^max.
double alpha_tilde(const ChainSpec& spec);

/// H with y = H x, where y_{n-i} = sum_k C(i,k) (alpha_tilde/lambda)^k x_{n-k}.
/// Upper triangular; diagonal entry of row n-i is (alpha_tilde/lambda)^i.
Eigen::MatrixXd coordinate_change(int n, double alpha_tilde, double lambda);

/// Constants feeding the derivative bound recursion.
struct BoundAux {
    std::vector<double> b_mu;                      // b_{mu_i}, i = 1..n-1
    std::vector<std::vector<double>> mu_bar;       // mu_bar[i-1][j-1] = sup |mu_i^(j)|
    std::vector<double> mu_tilde_n;                // mu_tilde_{n,q}, q = 1..p
    double slope_lower = 0.0;                      // lower slope bound of sigma_n
    double slope_upper = 0.0;                      // upper slope bound of sigma_n
    double delta = 0.0;
    double alpha_tilde = 0.0;
};

BoundAux bound_aux(const ChainSpec& spec, const MuFamily& mu);

/// Y, Z, G of the derivative-bound recursion as polynomials in u = 1/lambda.
/// Index conventions: Y[i-1][j-1], Z[i-1][j-1], G[q-1][j-1].
struct BoundPolynomials {
    int n = 0;
    int p = 0;
    BoundAux aux;
    std::vector<std::vector<Polynomial>> Y;
    std::vector<std::vector<Polynomial>> Z;
    std::vector<std::vector<Polynomial>> G;
    /// bound[j-1](u) = sum_q G_{q,j} mu_tilde_{n,q} u^q, the certified sup |U^(j)|.
    std::vector<Polynomial> bound;

    double bound_at(int j, double lambda) const { return bound[static_cast<std::size_t>(j - 1)](1.0 / lambda); }
};

BoundPolynomials bound_polynomials(const ChainSpec& spec, const MuFamily& mu);

/// Numeric tables at a fixed lambda.
struct BoundTable {
    double lambda = 1.0;
    Eigen::MatrixXd Y;  // n x p
    Eigen::MatrixXd Z;  // n x p
    Eigen::MatrixXd G;  // p x p, G(q-1, j-1) defined for q <= j
    BoundAux aux;
    std::vector<double> bound;  // sup |U^(j)| bound, j = 1..p
};

BoundTable derivative_bound_table(const ChainSpec& spec, const MuFamily& mu, double lambda);

/// Smallest lambda >= 1 (within 1%) with every bound_j(lambda) <= min(R_1..R_p).
double select_lambda(const ChainSpec& spec, const MuFamily& mu);

/// Nested-saturation controller in both the y-coordinates (y = H x) and the
/// gain form nu(x) = -a_n sigma_n(k_n^T x + a_{n-1} sigma_{n-1}(... + a_1 sigma_1(k_1^T x))).
class NestedSatController {
public:
    NestedSatController(ChainSpec spec, MuFamily inner, double lambda);

    int n() const noexcept { return spec_.n; }
    int p() const noexcept { return spec_.p; }
    const ChainSpec& spec() const noexcept { return spec_; }
    const MuFamily& inner() const noexcept { return inner_; }
    double lambda() const noexcept { return lambda_; }
    double alpha_tilde() const noexcept { return alpha_tilde_; }
    const Eigen::MatrixXd& H() const noexcept { return H_; }
    /// mu_i for i = 1..n (mu_n is the outer saturation depending on lambda).
    const Saturation& mu(int i) const { return i == spec_.n ? outer_ : inner_.mu[static_cast<std::size_t>(i - 1)]; }
    const std::vector<Eigen::VectorXd>& k() const noexcept { return k_; }
    const std::vector<double>& a() const noexcept { return a_; }

    /// Feedback evaluated as Upsilon(H x).
    double feedback(std::span<const double> x) const;
    /// Feedback evaluated through the gains k_i, a_i and the original sigma_i.
    double feedback_gain_form(std::span<const double> x) const;
    /// The linear law -alpha_{mu_n}(y_1 + ... + y_n) the feedback reduces to
    /// once every level is inside its linear zone.
    double linear_feedback(std::span<const double> x) const;

    std::vector<double> to_y(std::span<const double> x) const;

private:
    ChainSpec spec_;
    MuFamily inner_;
    double lambda_;
    double alpha_tilde_;
    Saturation outer_;
    Eigen::MatrixXd H_;
    std::vector<Eigen::VectorXd> k_;
    std::vector<double> a_;
};

NestedSatController synthesize(const ChainSpec& spec, const SynthesisOptions& options = {});

/// nu(x) for the chain controller; argument-checked wrapper.
double eval_nested_feedback(const NestedSatController& ctrl, std::span<const double> x);

/// U, U', ..., U^(up_to) along the closed loop at state x (up_to <= p).
std::vector<double> chain_u_derivatives(const NestedSatController& ctrl, std::span<const double> x, int up_to);

/// Closed-loop vector field x' = J_n x + e_n nu(x).
void chain_dynamics(std::span<const double> x, double u, std::span<double> dx);

}  // namespace pbound
