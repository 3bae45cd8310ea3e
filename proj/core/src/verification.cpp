#include "pbound/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pbound/error.hpp"
#include "pbound/integrator_synthesis.hpp"
#include "pbound/saturation.hpp"
#include "pbound/skew_synthesis.hpp"

namespace pbound {

DerivativeEvaluator chain_evaluator(const NestedSatController& ctrl) {
    return [&ctrl](std::span<const double> x, int up_to) { return chain_u_derivatives(ctrl, x, up_to); };
}

DerivativeEvaluator skew_evaluator(const SkewController& ctrl) {
    return [&ctrl](std::span<const double> x, int up_to) {
        return skew_u_derivatives(ctrl.system, ctrl.beta, x, up_to);
    };
}

bool BoundReport::pass() const {
    return std::all_of(orders.begin(), orders.end(), [](const OrderReport& o) { return o.pass; });
}

bool BoundReport::cross_check_ok() const {
    return std::all_of(orders.begin(), orders.end(), [](const OrderReport& o) { return o.cross_ok; });
}

BoundReport verify_bounds(const Trajectory& traj, const DerivativeEvaluator& eval, std::span<const double> R,
                          const VerifyOptions& opts) {
    if (R.empty()) {
        throw ArgumentError("verify_bounds: need at least R_0");
    }
    const int p = static_cast<int>(R.size()) - 1;
    const auto up = static_cast<std::size_t>(p);
    const std::size_t N = traj.size();

    std::vector<std::vector<double>> analytic(up + 1, std::vector<double>(N, 0.0));
    for (std::size_t k = 0; k < N; ++k) {
        const auto U = eval(traj.state(k), p);
        if (U.size() != up + 1) {
            throw ArgumentError("verify_bounds: evaluator returned the wrong number of orders");
        }
        for (std::size_t j = 0; j <= up; ++j) {
            analytic[j][k] = U[j];
        }
    }

    BoundReport report;
    for (std::size_t j = 0; j <= up; ++j) {
        OrderReport o;
        o.order = static_cast<int>(j);
        o.bound = R[j];
        for (std::size_t k = 0; k < N; ++k) {
            if (std::abs(analytic[j][k]) > o.analytic_sup) {
                o.analytic_sup = std::abs(analytic[j][k]);
                o.analytic_argmax_t = traj.times[k];
            }
        }
        o.pass = o.analytic_sup <= o.bound;

        const bool enough = j <= 4 && (j == 0 || (N >= (j <= 2 ? 3u : 5u) && traj.dt > 0.0));
        if (enough) {
            const FiniteDiff fd = finite_diff(traj.controls, j == 0 ? 1.0 : traj.dt, static_cast<int>(j));
            double sup = 0.0;
            double err = 0.0;
            for (std::size_t k = 0; k < fd.values.size(); ++k) {
                const double v = fd.values[k];
                if (std::abs(v) > sup) {
                    sup = std::abs(v);
                    o.fd_argmax_t = traj.times[k + fd.offset];
                }
                err = std::max(err, std::abs(v - analytic[j][k + fd.offset]));
            }
            o.fd_sup = sup;
            o.fd_pass = sup <= o.bound * (1.0 + opts.fd_slack);
            o.cross_error = err;
            if (static_cast<int>(j) <= opts.cross_max_order) {
                o.cross_ok = err <= std::max(opts.cross_rel * o.analytic_sup, opts.cross_abs);
            }
        }
        report.orders.push_back(o);
    }
    return report;
}

ConvergenceReport verify_convergence(const Trajectory& traj, double eps) {
    if (!(eps > 0.0)) {
        throw ArgumentError("verify_convergence: eps must be positive");
    }
    ConvergenceReport r;
    const std::size_t N = traj.size();
    if (N == 0) {
        return r;
    }
    r.final_norm = traj.norm(N - 1);
    std::size_t k = N;
    while (k > 0 && traj.norm(k - 1) <= eps) {
        --k;
    }
    if (k == N) {
        return r;
    }
    r.converged = true;
    r.index = k;
    r.t_eps = traj.times[k];
    return r;
}

EntryTimes saturation_entry_times(const Trajectory& traj, const NestedSatController& ctrl) {
    const int n = ctrl.n();
    if (traj.n != n) {
        throw ArgumentError("saturation_entry_times: trajectory dimension mismatch");
    }
    const auto un = static_cast<std::size_t>(n);
    EntryTimes out;
    // level i watches y_{n-i+1}
    for (int i = 1; i <= n; ++i) {
        out.thresholds.push_back(ctrl.mu(n - i + 1).L() / 2.0);
    }
    std::vector<std::size_t> last_violation(un, traj.size());  // traj.size() means never violated
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto y = ctrl.to_y(traj.state(k));
        for (std::size_t lvl = 0; lvl < un; ++lvl) {
            if (std::abs(y[un - 1 - lvl]) > out.thresholds[lvl]) {
                last_violation[lvl] = k;
            }
        }
    }
    std::optional<double> running = 0.0;
    for (std::size_t lvl = 0; lvl < un; ++lvl) {
        std::optional<double> t;
        const std::size_t v = last_violation[lvl];
        if (traj.size() == 0) {
            t = std::nullopt;
        } else if (v == traj.size()) {
            t = traj.times.front();
        } else if (v + 1 < traj.size()) {
            t = traj.times[v + 1];
        }
        out.raw.push_back(t);
        if (running && t) {
            running = std::max(*running, *t);
        } else {
            running = std::nullopt;
        }
        out.monotone.push_back(running);
    }
    return out;
}

double linear_tail_deviation(const Trajectory& traj, const NestedSatController& ctrl, double from_time) {
    double dev = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] >= from_time) {
            const auto x = traj.state(k);
            dev = std::max(dev, std::abs(ctrl.feedback(x) - ctrl.linear_feedback(x)));
        }
    }
    return dev;
}

double lyapunov_derivative(const SkewController& ctrl, std::span<const double> x) {
    const SkewSystem& sys = ctrl.system;
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const double u = eval_skew_feedback(ctrl, x);
    const Eigen::VectorXd f = sys.A * xv + sys.b * u;
    const double g = 1.0 + xv.squaredNorm();
    const Eigen::VectorXd grad = 2.0 * (ctrl.P * xv) + ctrl.K * (sys.alpha + 1.0) * std::pow(g, sys.alpha) * 2.0 * xv;
    return grad.dot(f);
}

LyapunovReport lyapunov_check(const Trajectory& traj, const SkewController& ctrl, double tol_scale) {
    LyapunovReport r;
    const std::size_t N = traj.size();
    if (N < 3) {
        return r;
    }
    if (traj.n != ctrl.system.n()) {
        throw ArgumentError("lyapunov_check: trajectory dimension mismatch");
    }
    std::vector<double> V(N);
    for (std::size_t k = 0; k < N; ++k) {
        V[k] = lyapunov_value(ctrl, traj.state(k));
    }
    const FiniteDiff dV = finite_diff(V, traj.dt, 1);
    r.max_violation = -std::numeric_limits<double>::infinity();
    r.max_normalized = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < dV.values.size(); ++k) {
        const std::size_t i = k + dV.offset;
        const double s = traj.norm(i) * traj.norm(i);
        const double excess = dV.values[k] + s / 2.0;
        const double violation = excess - tol_scale * (1.0 + s);
        if (violation > r.max_violation) {
            r.max_violation = violation;
            r.worst_index = i;
        }
        r.max_normalized = std::max(r.max_normalized, excess / (1.0 + s));
    }
    r.pass = r.max_violation <= 0.0;
    return r;
}

const char* to_string(CounterexampleKind kind) noexcept {
    switch (kind) {
    case CounterexampleKind::LinearCombination: return "linear-combination-double-integrator";
    case CounterexampleKind::PureSaturationOscillator: return "pure-saturation-oscillator";
    }
    return "unknown";
}

DemoTable counterexample_demo(CounterexampleKind kind, std::span<const double> magnitudes) {
    for (std::size_t i = 0; i < magnitudes.size(); ++i) {
        if (!(magnitudes[i] > 0.0) || (i > 0 && !(magnitudes[i] > magnitudes[i - 1]))) {
            throw ArgumentError("counterexample_demo: magnitudes must be positive and increasing");
        }
    }
    const Saturation s = make_two_quartic_saturation();
    DemoTable table;
    table.kind = kind;
    for (double m : magnitudes) {
        DemoRow row;
        row.magnitude = m;
        if (kind == CounterexampleKind::LinearCombination) {
            constexpr double a = 1.0, b = 1.0, c = 1.0, d = 1.0;
            const double x1 = -m;
            const double x2 = m;
            const double u = -a * s(b * x2) - c * s(d * (x1 + x2));
            // U' = -a b s'(b x2) x2' - c d s'(d (x1 + x2)) (x1' + x2'), x1' = x2, x2' = u
            row.u0 = u;
            row.udot0 = -a * b * s.eval(b * x2, 1) * u - c * d * s.eval(d * (x1 + x2), 1) * (x2 + u);
        } else {
            const double x1 = m;
            const double x2 = s.L() / 2.0;
            const double u = -s(x2);
            // U' = -s'(x2) x2', x2' = -x1 + u
            row.u0 = u;
            row.udot0 = -s.eval(x2, 1) * (-x1 + u);
        }
        table.rows.push_back(row);
    }
    const auto N = static_cast<double>(table.rows.size());
    if (table.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& r : table.rows) {
            const double y = std::abs(r.udot0);
            sx += r.magnitude;
            sy += y;
            sxx += r.magnitude * r.magnitude;
            sxy += r.magnitude * y;
        }
        const double den = N * sxx - sx * sx;
        table.slope = (N * sxy - sx * sy) / den;
        table.intercept = (sy - table.slope * sx) / N;
        const double mean = sy / N;
        double ss_res = 0, ss_tot = 0;
        for (const auto& r : table.rows) {
            const double y = std::abs(r.udot0);
            const double fit = table.slope * r.magnitude + table.intercept;
            ss_res += (y - fit) * (y - fit);
            ss_tot += (y - mean) * (y - mean);
        }
        table.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return table;
}

std::string format_report(const BoundReport& report) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return std::string(buf);
    };
    for (const auto& o : report.orders) {
        const std::string k = "order" + std::to_string(o.order) + ".";
        os << k << "bound=" << num(o.bound) << '\n';
        os << k << "analytic_sup=" << num(o.analytic_sup) << '\n';
        os << k << "analytic_argmax_t=" << num(o.analytic_argmax_t) << '\n';
        if (o.fd_sup) {
            os << k << "fd_sup=" << num(*o.fd_sup) << '\n';
            os << k << "fd_argmax_t=" << num(o.fd_argmax_t) << '\n';
            os << k << "cross_error=" << num(o.cross_error) << '\n';
        }
        os << k << "pass=" << (o.pass ? "true" : "false") << '\n';
        os << k << "fd_pass=" << (o.fd_pass ? "true" : "false") << '\n';
        os << k << "cross_ok=" << (o.cross_ok ? "true" : "false") << '\n';
    }
    os << "bounds_pass=" << (report.pass() ? "true" : "false") << '\n';
    return os.str();
}

}  // namespace pbound
