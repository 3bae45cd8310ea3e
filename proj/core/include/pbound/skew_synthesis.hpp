#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace pbound {

/// x' = A x + b u with A skew-symmetric and (A, b) controllable.
struct SkewSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double alpha = 0.5;
    int p = 0;
    std::vector<double> R;  // R_0..R_p

    int n() const noexcept { return static_cast<int>(b.size()); }
};

/// Checks shape, skew-symmetry (1e-12), controllability, alpha >= 1/2 and the bounds.
SkewSystem validate_system(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double alpha = 0.5, int p = 0,
                           std::vector<double> R = {1.0});

/// Kalman matrix [b, Ab, ..., A^{n-1} b].
Eigen::MatrixXd kalman_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Solves P A + A^T P = -I over the n(n+1)/2 symmetric unknowns.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A);

struct SkewController {
    SkewSystem system;
    double beta = 0.0;
    Eigen::MatrixXd P;
    double K = 0.0;

    Eigen::MatrixXd A_beta() const { return system.A - beta * system.b * system.b.transpose(); }
};

/// beta * ||P b||^2 / (alpha + 1).
double lyapunov_weight(const SkewSystem& sys, const Eigen::MatrixXd& P, double beta);

/// Builds P and K for a given beta; checks that A_beta is Hurwitz.
SkewController make_skew_controller(const SkewSystem& sys, double beta);

/// nu(x) = -beta b^T x / (1 + ||x||^2)^alpha.
double skew_feedback(const SkewSystem& sys, double beta, std::span<const double> x);
double eval_skew_feedback(const SkewController& ctrl, std::span<const double> x);

/// V(x) = x^T P x + K ((1 + ||x||^2)^(alpha+1) - 1).
double lyapunov_value(const SkewController& ctrl, std::span<const double> x);

/// Time derivatives along the closed loop at one state.
/// x[m] = x^(m) for m = 0..k, G[m] = (1 + ||x||^2)^(m), U[m] = U^(m).
struct SkewDerivatives {
    std::vector<Eigen::VectorXd> x;
    std::vector<double> G;
    std::vector<double> U;
};

SkewDerivatives state_derivatives(const SkewSystem& sys, double beta, std::span<const double> x, int k);
SkewDerivatives state_derivatives(const SkewController& ctrl, std::span<const double> x, int k);

/// Only U^(0..k); same recursion without keeping the intermediate vectors around.
std::vector<double> skew_u_derivatives(const SkewSystem& sys, double beta, std::span<const double> x, int k);

struct CertificationOptions {
    double margin = 0.05;
    std::size_t samples = 100000;
    std::size_t refine = 100;
    double r_min = 1e-3;
    double r_max = 1e6;
    int max_halvings = 20;
    std::uint64_t seed = 20240607;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Result of checking one beta against the rate bounds.
struct BetaCheck {
    double beta = 0.0;
    bool ok = false;
    double amplitude = 0.0;            // analytic sup |nu|
    std::vector<double> sup;           // sampled sup |U^(j)|, j = 0..p
    std::vector<Eigen::VectorXd> witness;  // argmax state per order
    int worst_order = 0;
    double worst_ratio = 0.0;          // max_j sup_j / (R_j (1 - margin)), amplitude for j = 0
};

/// sup over s >= 0 of s / (1 + s^2)^alpha.
double amplitude_factor(double alpha);

BetaCheck check_beta(const SkewSystem& sys, double beta, const CertificationOptions& opts = {});

/// Largest beta on the grid R_min / max(||b||, 1) / 2^m, m = 0..max_halvings, that passes.
SkewController certify_beta(const SkewSystem& sys, const CertificationOptions& opts = {});

/// x' = A x + b u.
void skew_dynamics(const SkewSystem& sys, std::span<const double> x, double u, std::span<double> dx);

}  // namespace pbound
