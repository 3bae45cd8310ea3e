#include "pbound/integrator_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

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

const Saturation& sigma_at(const ChainSpec& spec, int i) {
    return spec.sigmas[static_cast<std::size_t>(i - 1)];
}

double inner_mu_max(const MuFamily& mu, int i) {
    // mu_0^max := 0
    return i >= 1 ? mu.mu_max[static_cast<std::size_t>(i - 1)] : 0.0;
}

}  // namespace

void ChainSpec::validate() const {
    if (n < 1) {
        throw ArgumentError("chain spec: n must be at least 1");
    }
    if (p < 0) {
        throw ArgumentError("chain spec: p must be non-negative");
    }
    if (R.size() != static_cast<std::size_t>(p) + 1) {
        throw ArgumentError("chain spec: expected p + 1 bounds R_0..R_p");
    }
    for (std::size_t j = 0; j < R.size(); ++j) {
        if (!(R[j] > 0.0) || !std::isfinite(R[j])) {
            throw ArgumentError("chain spec: bound R_" + std::to_string(j) + " must be positive and finite");
        }
    }
    if (sigmas.size() != static_cast<std::size_t>(n)) {
        throw ArgumentError("chain spec: expected one saturation per chain level");
    }
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        if (sigmas[i].order() < p) {
            throw ArgumentError("chain spec: sigma_" + std::to_string(i + 1) + " is not smooth enough for p");
        }
        const auto rep = check_membership(sigmas[i]);
        if (!rep.ok()) {
            throw ArgumentError("chain spec: sigma_" + std::to_string(i + 1) + " is not a valid saturation: " +
                                rep.detail);
        }
    }
}

MuFamily choose_mu_families(const ChainSpec& spec, const std::optional<std::vector<double>>& mu_max_override) {
    MuFamily fam;
    const int n = spec.n;
    if (n <= 1) {
        if (mu_max_override && !mu_max_override->empty()) {
            throw ArgumentError("choose_mu_families: a chain of length 1 takes no mu_max values");
        }
        return fam;
    }
    if (mu_max_override && mu_max_override->size() != static_cast<std::size_t>(n - 1)) {
        throw ArgumentError("choose_mu_families: expected n - 1 mu_max values");
    }
    const auto m = static_cast<std::size_t>(n - 1);
    fam.mu_max.assign(m, 0.0);
    fam.L_mu.assign(m, 0.0);
    fam.S_mu.assign(m, 0.0);
    std::vector<std::optional<Saturation>> mus(m);

    for (int i = n - 1; i >= 1; --i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const double limit = (i == n - 1) ? 0.5 : fam.L_mu[idx + 1] / 2.0;
        const double value = mu_max_override ? (*mu_max_override)[idx] : kMuSafetyFactor * limit;
        if (!(value > 0.0) || !(value < limit)) {
            std::ostringstream os;
            os << "choose_mu_families: mu_" << i << "^max = " << value << " violates 0 < mu_" << i << "^max < "
               << limit;
            throw InfeasibleError(os.str());
        }
        const Saturation& sigma = sigma_at(spec, i);
        fam.mu_max[idx] = value;
        fam.L_mu[idx] = value * sigma.L() * sigma.alpha() / sigma.sigma_max();
        fam.S_mu[idx] = sigma.S() * fam.L_mu[idx] / sigma.L();
        mus[idx] = scale_mu(sigma, value, fam.L_mu[idx]);
    }
    fam.mu.reserve(m);
    for (auto& mu : mus) {
        fam.mu.push_back(std::move(*mu));
    }
    return fam;
}

double alpha_tilde(const ChainSpec& spec) {
    const Saturation& sn = sigma_at(spec, spec.n);
    return spec.R[0] * sn.L() * sn.alpha() / sn.sigma_max();
}

Eigen::MatrixXd coordinate_change(int n, double alpha_tilde, double lambda) {
    if (n < 1) {
        throw ArgumentError("coordinate_change: n must be at least 1");
    }
    if (!(lambda > 0.0)) {
        throw ArgumentError("coordinate_change: lambda must be positive");
    }
    const double c = alpha_tilde / lambda;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double ck = 1.0;
        for (int k = 0; k <= i; ++k) {
            H(n - 1 - i, n - 1 - k) = binomial(i, k) * ck;
            ck *= c;
        }
    }
    return H;
}

BoundAux bound_aux(const ChainSpec& spec, const MuFamily& mu) {
    BoundAux aux;
    const int n = spec.n;
    const int p = spec.p;
    aux.alpha_tilde = alpha_tilde(spec);
    for (int i = 1; i <= n - 1; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const double radius = mu.S_mu[idx] + 2.0 * inner_mu_max(mu, i - 1);
        aux.b_mu.push_back(residual_bound(mu.mu[idx], radius));
        std::vector<double> bars;
        for (int j = 1; j <= p; ++j) {
            bars.push_back(sup_derivative(mu.mu[idx], j));
        }
        aux.mu_bar.push_back(std::move(bars));
    }
    const Saturation& sn = sigma_at(spec, n);
    const double radius = sn.S() + 2.0 * inner_mu_max(mu, n - 1) * sn.L();
    const SlopeBounds sb = slope_bounds(sn, radius);
    aux.slope_lower = sb.lower;
    aux.slope_upper = sb.upper;
    aux.delta = (sb.upper - sb.lower) * (sn.L() * spec.R[0] / sn.sigma_max());
    for (int q = 1; q <= p; ++q) {
        aux.mu_tilde_n.push_back(spec.R[0] * sup_derivative(sn, q) * std::pow(sn.L(), q) / sn.sigma_max());
    }
    return aux;
}

BoundPolynomials bound_polynomials(const ChainSpec& spec, const MuFamily& mu) {
    BoundPolynomials bp;
    const int n = spec.n;
    const int p = spec.p;
    bp.n = n;
    bp.p = p;
    bp.aux = bound_aux(spec, mu);
    if (p == 0) {
        return bp;
    }
    const auto& aux = bp.aux;
    const Saturation& sn = sigma_at(spec, n);
    const auto un = static_cast<std::size_t>(n);
    const auto up = static_cast<std::size_t>(p);

    const Polynomial c{0.0, aux.alpha_tilde};  // alpha_tilde / lambda
    std::vector<Polynomial> mu_bar_n(up);      // mu_bar_{n,q} = mu_tilde_{n,q} u^q
    for (int q = 1; q <= p; ++q) {
        mu_bar_n[static_cast<std::size_t>(q - 1)] = Polynomial::monomial(q, aux.mu_tilde_n[static_cast<std::size_t>(q - 1)]);
    }
    auto mu_bar = [&](int i, int j) { return aux.mu_bar[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)]; };

    auto& Y = bp.Y;
    auto& Z = bp.Z;
    auto& G = bp.G;
    Y.assign(un, std::vector<Polynomial>(up));
    Z.assign(un, std::vector<Polynomial>(up));
    G.assign(up, std::vector<Polynomial>(up));
    auto y = [&](int i, int j) -> Polynomial& { return Y[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)]; };
    auto z = [&](int i, int j) -> Polynomial& { return Z[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)]; };
    auto g = [&](int q, int j) -> Polynomial& { return G[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(j - 1)]; };

    // j = 1
    const double mu_prev_top = inner_mu_max(mu, n - 1);
    const Polynomial delta_term = aux.delta * Polynomial{sn.S() / sn.L(), 2.0 * mu_prev_top};
    for (int i = 1; i <= n - 1; ++i) {
        double s = inner_mu_max(mu, i);
        for (int l = i + 1; l <= n - 1; ++l) {
            s += aux.b_mu[static_cast<std::size_t>(l - 1)];
        }
        y(i, 1) = delta_term + c * s;
    }
    y(n, 1) = Polynomial{spec.R[0]};
    z(1, 1) = y(1, 1);
    for (int i = 2; i <= n; ++i) {
        z(i, 1) = y(i, 1) + mu_bar(i - 1, 1) * z(i - 1, 1);
    }
    g(1, 1) = z(n, 1);

    for (int j = 2; j <= p; ++j) {
        Polynomial u_prev;  // bound on |U^(j-1)|
        for (int q = 1; q <= j - 1; ++q) {
            u_prev += g(q, j - 1) * mu_bar_n[static_cast<std::size_t>(q - 1)];
        }
        for (int i = 1; i <= n; ++i) {
            Polynomial s;
            for (int b = i + 1; b <= n; ++b) {
                s += y(b, j - 1);
            }
            y(i, j) = c * s + u_prev;
        }
        z(1, j) = y(1, j);
        for (int i = 2; i <= n; ++i) {
            Polynomial acc = y(i, j);
            std::vector<Polynomial> args;
            for (int m = 1; m <= j; ++m) {
                args.push_back(z(i - 1, m));
            }
            for (int a = 1; a <= j; ++a) {
                const auto len = static_cast<std::size_t>(j - a + 1);
                acc += mu_bar(i - 1, a) * bell_polynomial<Polynomial>(j, a, std::span<const Polynomial>(args).first(len));
            }
            z(i, j) = std::move(acc);
        }
        std::vector<Polynomial> zn;
        for (int m = 1; m <= j; ++m) {
            zn.push_back(z(n, m));
        }
        for (int q = 1; q <= j; ++q) {
            const auto len = static_cast<std::size_t>(j - q + 1);
            g(q, j) = bell_polynomial<Polynomial>(j, q, std::span<const Polynomial>(zn).first(len));
        }
    }

    for (int j = 1; j <= p; ++j) {
        Polynomial b;
        for (int q = 1; q <= j; ++q) {
            b += g(q, j) * mu_bar_n[static_cast<std::size_t>(q - 1)];
        }
        bp.bound.push_back(std::move(b));
    }
    return bp;
}

BoundTable derivative_bound_table(const ChainSpec& spec, const MuFamily& mu, double lambda) {
    if (!(lambda >= 1.0)) {
        throw ArgumentError("derivative_bound_table: lambda must be at least 1");
    }
    const BoundPolynomials bp = bound_polynomials(spec, mu);
    BoundTable t;
    t.lambda = lambda;
    t.aux = bp.aux;
    const double u = 1.0 / lambda;
    t.Y = Eigen::MatrixXd::Zero(spec.n, spec.p);
    t.Z = Eigen::MatrixXd::Zero(spec.n, spec.p);
    t.G = Eigen::MatrixXd::Zero(spec.p, spec.p);
    for (int i = 0; i < spec.n; ++i) {
        for (int j = 0; j < spec.p; ++j) {
            t.Y(i, j) = bp.Y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](u);
            t.Z(i, j) = bp.Z[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](u);
        }
    }
    for (int q = 0; q < spec.p; ++q) {
        for (int j = q; j < spec.p; ++j) {
            t.G(q, j) = bp.G[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)](u);
        }
    }
    for (const auto& b : bp.bound) {
        t.bound.push_back(b(u));
    }
    return t;
}

double select_lambda(const ChainSpec& spec, const MuFamily& mu) {
    if (spec.p == 0) {
        return 1.0;
    }
    const BoundPolynomials bp = bound_polynomials(spec, mu);
    const double r_min = *std::min_element(spec.R.begin() + 1, spec.R.end());
    auto feasible = [&](double lambda) {
        for (int j = 1; j <= spec.p; ++j) {
            if (bp.bound_at(j, lambda) > r_min) {
                return false;
            }
        }
        return true;
    };
    if (feasible(1.0)) {
        return 1.0;
    }
    double hi = 2.0;
    while (!feasible(hi)) {
        hi *= 2.0;
        if (hi > 1e15) {
            throw InfeasibleError("select_lambda: no lambda satisfies the rate bounds");
        }
    }
    double lo = hi / 2.0;
    while (hi / lo > 1.01) {
        const double mid = std::sqrt(lo * hi);
        if (feasible(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

NestedSatController::NestedSatController(ChainSpec spec, MuFamily inner, double lambda)
    : spec_(std::move(spec)),
      inner_(std::move(inner)),
      lambda_(lambda),
      alpha_tilde_(pbound::alpha_tilde(spec_)),
      outer_(scale_mu(spec_.sigmas.back(), spec_.R[0], lambda)) {
    if (!(lambda_ >= 1.0)) {
        throw ArgumentError("nested controller: lambda must be at least 1");
    }
    if (inner_.size() != static_cast<std::size_t>(spec_.n - 1)) {
        throw ArgumentError("nested controller: mu family size must be n - 1");
    }
    const int n = spec_.n;
    H_ = coordinate_change(n, alpha_tilde_, lambda_);
    for (int i = 1; i <= n; ++i) {
        const Saturation& si = spec_.sigmas[static_cast<std::size_t>(i - 1)];
        const double L_mu = (i == n) ? lambda_ : inner_.L_mu[static_cast<std::size_t>(i - 1)];
        k_.push_back((si.L() / L_mu) * H_.row(i - 1).transpose());
        if (i < n) {
            const Saturation& next = spec_.sigmas[static_cast<std::size_t>(i)];
            const double L_mu_next = (i + 1 == n) ? lambda_ : inner_.L_mu[static_cast<std::size_t>(i)];
            a_.push_back(next.L() * inner_.mu_max[static_cast<std::size_t>(i - 1)] / (L_mu_next * si.sigma_max()));
        } else {
            a_.push_back(spec_.R[0] / si.sigma_max());
        }
    }
}

std::vector<double> NestedSatController::to_y(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(spec_.n), 0.0);
    for (int i = 0; i < spec_.n; ++i) {
        double s = 0.0;
        for (int j = i; j < spec_.n; ++j) {
            s += H_(i, j) * x[static_cast<std::size_t>(j)];
        }
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

double NestedSatController::feedback(std::span<const double> x) const {
    const int n = spec_.n;
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        double yi = 0.0;
        for (int j = i; j < n; ++j) {
            yi += H_(i, j) * x[static_cast<std::size_t>(j)];
        }
        z = (i == 0) ? yi : yi + inner_.mu[static_cast<std::size_t>(i - 1)](z);
    }
    return -outer_(z);
}

double NestedSatController::feedback_gain_form(std::span<const double> x) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    double s = 0.0;
    for (int i = 0; i < spec_.n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        s = a_[ui] * spec_.sigmas[ui](k_[ui].dot(xv) + s);
    }
    return -s;
}

double NestedSatController::linear_feedback(std::span<const double> x) const {
    double s = 0.0;
    for (double yi : to_y(x)) {
        s += yi;
    }
    return -outer_.alpha() * s;
}

NestedSatController synthesize(const ChainSpec& spec, const SynthesisOptions& options) {
    spec.validate();
    MuFamily mu = choose_mu_families(spec, options.mu_max);
    double lambda = 0.0;
    if (options.lambda) {
        lambda = *options.lambda;
        if (!(lambda >= 1.0)) {
            throw ArgumentError("synthesize: lambda must be at least 1");
        }
    } else {
        lambda = select_lambda(spec, mu);
    }
    return NestedSatController(spec, std::move(mu), lambda);
}

double eval_nested_feedback(const NestedSatController& ctrl, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(ctrl.n())) {
        throw ArgumentError("eval_nested_feedback: state dimension mismatch");
    }
    return ctrl.feedback(x);
}

std::vector<double> chain_u_derivatives(const NestedSatController& ctrl, std::span<const double> x, int up_to) {
    const int n = ctrl.n();
    if (x.size() != static_cast<std::size_t>(n)) {
        throw ArgumentError("chain_u_derivatives: state dimension mismatch");
    }
    if (up_to < 0 || up_to > ctrl.p()) {
        throw ArgumentError("chain_u_derivatives: order exceeds p");
    }
    const auto un = static_cast<std::size_t>(n);
    const auto m_count = static_cast<std::size_t>(up_to) + 1;
    const double c = ctrl.alpha_tilde() / ctrl.lambda();

    // yd[i][m] = y_{i+1}^(m), zd likewise, mud[i][a] = mu_{i+1}^(a)(z_{i+1}).
    std::vector<std::vector<double>> yd(un, std::vector<double>(m_count, 0.0));
    std::vector<std::vector<double>> zd(un, std::vector<double>(m_count, 0.0));
    std::vector<std::vector<double>> mud(un, std::vector<double>(m_count, 0.0));
    std::vector<double> U(m_count, 0.0);

    const std::vector<double> y = ctrl.to_y(x);
    for (std::size_t i = 0; i < un; ++i) {
        yd[i][0] = y[i];
        zd[i][0] = (i == 0) ? y[0] : y[i] + mud[i - 1][0];
        ctrl.mu(static_cast<int>(i) + 1).eval_all(zd[i][0], up_to, mud[i].data());
    }
    U[0] = -mud[un - 1][0];

    std::vector<double> outer;
    std::vector<double> inner;
    for (std::size_t m = 1; m < m_count; ++m) {
        double tail = 0.0;  // sum_{l > i} y_l^(m-1), built from the top
        for (std::size_t i = un; i-- > 0;) {
            yd[i][m] = c * tail + U[m - 1];
            tail += yd[i][m - 1];
        }
        const int k = static_cast<int>(m);
        for (std::size_t i = 0; i < un; ++i) {
            if (i == 0) {
                zd[0][m] = yd[0][m];
                continue;
            }
            outer.assign(mud[i - 1].begin() + 1, mud[i - 1].begin() + static_cast<std::ptrdiff_t>(m) + 1);
            inner.assign(zd[i - 1].begin() + 1, zd[i - 1].begin() + static_cast<std::ptrdiff_t>(m) + 1);
            zd[i][m] = yd[i][m] + faa_di_bruno(k, outer, inner);
        }
        outer.assign(mud[un - 1].begin() + 1, mud[un - 1].begin() + static_cast<std::ptrdiff_t>(m) + 1);
        inner.assign(zd[un - 1].begin() + 1, zd[un - 1].begin() + static_cast<std::ptrdiff_t>(m) + 1);
        U[m] = -faa_di_bruno(k, outer, inner);
    }
    return U;
}

void chain_dynamics(std::span<const double> x, double u, std::span<double> dx) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        dx[i] = x[i + 1];
    }
    dx[n - 1] = u;
}

}  // namespace pbound
