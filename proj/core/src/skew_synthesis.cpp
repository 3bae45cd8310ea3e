#include "pbound/skew_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "pbound/combinatorics.hpp"
#include "pbound/error.hpp"

namespace pbound {

namespace {

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return c;
}

// d_a = (-1)^a alpha (alpha + 1) ... (alpha + a - 1)
double rising_sign(double alpha, int a) {
    double d = 1.0;
    for (int i = 0; i < a; ++i) {
        d *= -(alpha + i);
    }
    return d;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

void check_dim(const SkewSystem& sys, std::span<const double> x, const char* who) {
    if (x.size() != static_cast<std::size_t>(sys.n())) {
        throw ArgumentError(std::string(who) + ": state dimension mismatch");
    }
}

}  // namespace

Eigen::MatrixXd kalman_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const auto n = b.size();
    Eigen::MatrixXd K(n, n);
    Eigen::VectorXd col = b;
    for (Eigen::Index i = 0; i < n; ++i) {
        K.col(i) = col;
        col = A * col;
    }
    return K;
}

SkewSystem validate_system(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double alpha, int p,
                           std::vector<double> R) {
    if (A.rows() != A.cols() || A.rows() == 0) {
        throw Error(ErrorKind::Shape, "validate_system: A must be square and non-empty");
    }
    if (b.size() != A.rows()) {
        throw Error(ErrorKind::Shape, "validate_system: b must have as many entries as A has rows");
    }
    if (!A.allFinite() || !b.allFinite()) {
        throw ArgumentError("validate_system: non-finite entries");
    }
    if (((A + A.transpose()).array().abs() > 1e-12).any()) {
        throw Error(ErrorKind::Shape, "validate_system: A is not skew-symmetric");
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(kalman_matrix(A, b));
    const auto& s = svd.singularValues();
    const double tol = 1e-10 * std::max(1.0, s(0));
    if (s(s.size() - 1) <= tol) {
        throw Error(ErrorKind::Uncontrollable, "validate_system: (A, b) is not controllable");
    }
    if (!(alpha >= 0.5) || !std::isfinite(alpha)) {
        throw ArgumentError("validate_system: alpha must be at least 1/2");
    }
    if (p < 0) {
        throw ArgumentError("validate_system: p must be non-negative");
    }
    if (R.size() != static_cast<std::size_t>(p) + 1) {
        throw ArgumentError("validate_system: expected p + 1 bounds R_0..R_p");
    }
    for (double r : R) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw ArgumentError("validate_system: bounds must be positive and finite");
        }
    }
    return SkewSystem{A, b, alpha, p, std::move(R)};
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) {
        throw Error(ErrorKind::Shape, "solve_lyapunov: A must be square");
    }
    const Eigen::Index n = A.rows();
    const Eigen::Index m = n * (n + 1) / 2;
    // unknown index of P(i, j), i <= j
    auto idx = [n](Eigen::Index i, Eigen::Index j) {
        if (i > j) {
            std::swap(i, j);
        }
        return i * n - i * (i - 1) / 2 + (j - i);
    };
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    // (P A + A^T P)(r, c) = sum_k P(r, k) A(k, c) + A(k, r) P(k, c)
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = r; c < n; ++c) {
            const Eigen::Index row = idx(r, c);
            for (Eigen::Index k = 0; k < n; ++k) {
                M(row, idx(r, k)) += A(k, c);
                M(row, idx(k, c)) += A(k, r);
            }
            rhs(row) = (r == c) ? -1.0 : 0.0;
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) {
        throw Error(ErrorKind::Conditioning, "solve_lyapunov: the linear system is numerically singular");
    }
    const Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            P(i, j) = sol(idx(i, j));
        }
    }
    return P;
}

double lyapunov_weight(const SkewSystem& sys, const Eigen::MatrixXd& P, double beta) {
    return beta * (P * sys.b).squaredNorm() / (sys.alpha + 1.0);
}

SkewController make_skew_controller(const SkewSystem& sys, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ArgumentError("make_skew_controller: beta must be positive");
    }
    SkewController ctrl;
    ctrl.system = sys;
    ctrl.beta = beta;
    const Eigen::MatrixXd Ab = ctrl.A_beta();
    const Eigen::EigenSolver<Eigen::MatrixXd> es(Ab, false);
    if ((es.eigenvalues().real().array() >= -1e-10).any()) {
        throw Error(ErrorKind::Conditioning, "make_skew_controller: A - beta b b^T is not Hurwitz");
    }
    ctrl.P = solve_lyapunov(Ab);
    ctrl.K = lyapunov_weight(sys, ctrl.P, beta);
    return ctrl;
}

double skew_feedback(const SkewSystem& sys, double beta, std::span<const double> x) {
    check_dim(sys, x, "skew_feedback");
    const auto xv = as_vector(x);
    return -beta * sys.b.dot(xv) / std::pow(1.0 + xv.squaredNorm(), sys.alpha);
}

double eval_skew_feedback(const SkewController& ctrl, std::span<const double> x) {
    return skew_feedback(ctrl.system, ctrl.beta, x);
}

double lyapunov_value(const SkewController& ctrl, std::span<const double> x) {
    check_dim(ctrl.system, x, "lyapunov_value");
    const auto xv = as_vector(x);
    const double g = 1.0 + xv.squaredNorm();
    return xv.dot(ctrl.P * xv) + ctrl.K * (std::pow(g, ctrl.system.alpha + 1.0) - 1.0);
}

SkewDerivatives state_derivatives(const SkewSystem& sys, double beta, std::span<const double> x, int k) {
    check_dim(sys, x, "state_derivatives");
    if (k < 0) {
        throw ArgumentError("state_derivatives: k must be non-negative");
    }
    const auto uk = static_cast<std::size_t>(k);
    const double alpha = sys.alpha;
    SkewDerivatives d;
    d.x.resize(uk + 1);
    d.G.assign(uk + 1, 0.0);
    d.U.assign(uk + 1, 0.0);
    std::vector<double> f(uk + 1, 0.0);  // b^T x^(m)
    std::vector<double> g(uk + 1, 0.0);  // (G^{-alpha})^(m)

    d.x[0] = as_vector(x);
    d.G[0] = 1.0 + d.x[0].squaredNorm();
    f[0] = sys.b.dot(d.x[0]);
    g[0] = std::pow(d.G[0], -alpha);
    d.U[0] = -beta * f[0] * g[0];

    std::vector<double> dg;
    for (std::size_t m = 1; m <= uk; ++m) {
        d.x[m] = sys.A * d.x[m - 1] + sys.b * d.U[m - 1];
        double gm = 0.0;
        for (std::size_t l = 0; l <= m; ++l) {
            gm += binomial(static_cast<int>(m), static_cast<int>(l)) * d.x[l].dot(d.x[m - l]);
        }
        d.G[m] = gm;
        f[m] = sys.b.dot(d.x[m]);
        dg.assign(d.G.begin() + 1, d.G.begin() + static_cast<std::ptrdiff_t>(m) + 1);
        double gdm = 0.0;
        for (int a = 1; a <= static_cast<int>(m); ++a) {
            const auto len = m - static_cast<std::size_t>(a) + 1;
            gdm += rising_sign(alpha, a) * std::pow(d.G[0], -alpha - a) *
                   bell_polynomial(static_cast<int>(m), a, std::span<const double>(dg).first(len));
        }
        g[m] = gdm;
        double um = 0.0;
        for (std::size_t l = 0; l <= m; ++l) {
            um += binomial(static_cast<int>(m), static_cast<int>(l)) * f[m - l] * g[l];
        }
        d.U[m] = -beta * um;
    }
    return d;
}

SkewDerivatives state_derivatives(const SkewController& ctrl, std::span<const double> x, int k) {
    return state_derivatives(ctrl.system, ctrl.beta, x, k);
}

std::vector<double> skew_u_derivatives(const SkewSystem& sys, double beta, std::span<const double> x, int k) {
    return state_derivatives(sys, beta, x, k).U;
}

double amplitude_factor(double alpha) {
    if (alpha <= 0.5) {
        return 1.0;  // supremum approached as s -> infinity
    }
    const double s = 1.0 / std::sqrt(2.0 * alpha - 1.0);
    return s / std::pow(1.0 + s * s, alpha);
}

namespace {

struct SampleSet {
    std::vector<Eigen::VectorXd> states;
};

SampleSet make_samples(int n, const CertificationOptions& opts) {
    SampleSet set;
    set.states.reserve(opts.samples);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double l0 = std::log10(opts.r_min);
    const double l1 = std::log10(opts.r_max);
    const std::size_t N = opts.samples;
    for (std::size_t i = 0; i < N; ++i) {
        const double t = N > 1 ? static_cast<double>(i) / static_cast<double>(N - 1) : 0.0;
        const double r = std::pow(10.0, l0 + t * (l1 - l0));
        Eigen::VectorXd dir(n);
        do {
            for (int c = 0; c < n; ++c) {
                dir(c) = normal(rng);
            }
        } while (dir.norm() < 1e-12);
        set.states.push_back(r * dir.normalized());
    }
    return set;
}

// Largest normalized rate |U^(j)| / (R_j (1 - margin)) over j = 1..p.
struct Scorer {
    const SkewSystem& sys;
    double beta;
    double margin;

    double operator()(const Eigen::VectorXd& x, std::vector<double>* per_order = nullptr) const {
        const auto U = skew_u_derivatives(sys, beta, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), sys.p);
        double worst = 0.0;
        for (int j = 1; j <= sys.p; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            const double v = std::abs(U[uj]);
            if (per_order) {
                (*per_order)[uj] = v;
            }
            worst = std::max(worst, v / (sys.R[uj] * (1.0 - margin)));
        }
        return worst;
    }
};

Eigen::VectorXd refine(const Scorer& score, Eigen::VectorXd x) {
    double best = score(x);
    double step = 0.1 * std::max(x.norm(), 1e-3);
    const double floor = 1e-7 * std::max(x.norm(), 1e-3);
    for (int iter = 0; iter < 200 && step > floor; ++iter) {
        bool improved = false;
        for (Eigen::Index c = 0; c < x.size(); ++c) {
            for (double sgn : {1.0, -1.0}) {
                Eigen::VectorXd trial = x;
                trial(c) += sgn * step;
                const double s = score(trial);
                if (s > best) {
                    best = s;
                    x = std::move(trial);
                    improved = true;
                }
            }
        }
        if (!improved) {
            step *= 0.5;
        }
    }
    return x;
}

}  // namespace

BetaCheck check_beta(const SkewSystem& sys, double beta, const CertificationOptions& opts) {
    if (!(beta > 0.0)) {
        throw ArgumentError("check_beta: beta must be positive");
    }
    const int n = sys.n();
    const auto up = static_cast<std::size_t>(sys.p);
    BetaCheck out;
    out.beta = beta;
    out.amplitude = beta * sys.b.norm() * amplitude_factor(sys.alpha);
    out.sup.assign(up + 1, 0.0);
    out.witness.assign(up + 1, Eigen::VectorXd::Zero(n));
    out.sup[0] = out.amplitude;
    out.worst_ratio = out.amplitude / sys.R[0];
    out.worst_order = 0;

    if (sys.p >= 1) {
        const SampleSet samples = make_samples(n, opts);
        const Scorer score{sys, beta, opts.margin};
        const std::size_t N = samples.states.size();
        std::vector<double> scores(N, 0.0);
        unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
        threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(N / 1000, 1)));
        std::vector<std::future<void>> jobs;
        for (unsigned t = 0; t < threads; ++t) {
            jobs.push_back(std::async(std::launch::async, [&, t] {
                for (std::size_t i = t; i < N; i += threads) {
                    scores[i] = score(samples.states[i]);
                }
            }));
        }
        for (auto& j : jobs) {
            j.get();
        }

        std::vector<std::size_t> order(N);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t top = std::min(opts.refine, N);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                          [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });

        std::vector<Eigen::VectorXd> candidates(top);
        jobs.clear();
        for (unsigned t = 0; t < threads; ++t) {
            jobs.push_back(std::async(std::launch::async, [&, t] {
                for (std::size_t i = t; i < top; i += threads) {
                    candidates[i] = refine(score, samples.states[order[i]]);
                }
            }));
        }
        for (auto& j : jobs) {
            j.get();
        }

        auto consider = [&](const Eigen::VectorXd& x) {
            std::vector<double> per(up + 1, 0.0);
            score(x, &per);
            for (std::size_t j = 1; j <= up; ++j) {
                if (per[j] > out.sup[j]) {
                    out.sup[j] = per[j];
                    out.witness[j] = x;
                }
            }
        };
        for (std::size_t i = 0; i < N; ++i) {
            consider(samples.states[i]);
        }
        for (const auto& x : candidates) {
            consider(x);
        }
        for (std::size_t j = 1; j <= up; ++j) {
            const double ratio = out.sup[j] / (sys.R[j] * (1.0 - opts.margin));
            if (ratio > out.worst_ratio) {
                out.worst_ratio = ratio;
                out.worst_order = static_cast<int>(j);
            }
        }
    }
    out.ok = out.worst_ratio <= 1.0;
    return out;
}

SkewController certify_beta(const SkewSystem& sys, const CertificationOptions& opts) {
    const double r_min = *std::min_element(sys.R.begin(), sys.R.end());
    const double beta0 = r_min / std::max(sys.b.norm(), 1.0);
    BetaCheck last;
    for (int m = 0; m <= opts.max_halvings; ++m) {
        const double beta = std::ldexp(beta0, -m);
        last = check_beta(sys, beta, opts);
        if (last.ok) {
            return make_skew_controller(sys, beta);
        }
    }
    std::ostringstream os;
    os << "certify_beta: no beta down to " << std::ldexp(beta0, -opts.max_halvings)
       << " passes; worst order " << last.worst_order << " at ratio " << last.worst_ratio << ", witness state (";
    const auto& w = last.witness[static_cast<std::size_t>(last.worst_order)];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        os << (i ? ", " : "") << w(i);
    }
    os << ")";
    throw Error(ErrorKind::Certification, os.str());
}

void skew_dynamics(const SkewSystem& sys, std::span<const double> x, double u, std::span<double> dx) {
    const auto n = static_cast<std::size_t>(sys.n());
    for (std::size_t i = 0; i < n; ++i) {
        double s = sys.b(static_cast<Eigen::Index>(i)) * u;
        for (std::size_t j = 0; j < n; ++j) {
            s += sys.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * x[j];
        }
        dx[i] = s;
    }
}

}  // namespace pbound
