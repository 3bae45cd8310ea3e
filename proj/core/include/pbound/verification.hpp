#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbound/simulation.hpp"

namespace pbound {

class NestedSatController;
struct SkewController;
class Saturation;

/// Returns U, U', ..., U^(up_to) at a state.
using DerivativeEvaluator = std::function<std::vector<double>(std::span<const double> x, int up_to)>;

DerivativeEvaluator chain_evaluator(const NestedSatController& ctrl);
DerivativeEvaluator skew_evaluator(const SkewController& ctrl);

struct VerifyOptions {
    double fd_slack = 0.02;     // allowance on finite-difference suprema
    double cross_rel = 1e-3;    // relative to the order's analytic sup
    double cross_abs = 1e-6;
    int cross_max_order = 2;
};

struct OrderReport {
    int order = 0;
    double bound = 0.0;
    double analytic_sup = 0.0;
    double analytic_argmax_t = 0.0;
    std::optional<double> fd_sup;  // absent when the trajectory is too short
    double fd_argmax_t = 0.0;
    double cross_error = 0.0;      // max |analytic - fd| on interior samples
    bool cross_ok = true;
    bool pass = false;             // analytic_sup <= bound
    bool fd_pass = true;           // fd_sup <= bound (1 + fd_slack)
};

struct BoundReport {
    std::vector<OrderReport> orders;
    bool pass() const;
    bool cross_check_ok() const;
};

BoundReport verify_bounds(const Trajectory& traj, const DerivativeEvaluator& eval, std::span<const double> R,
                          const VerifyOptions& opts = {});

struct ConvergenceReport {
    bool converged = false;
    double t_eps = 0.0;
    std::size_t index = 0;
    double final_norm = 0.0;
};

/// First grid time after which ||x|| <= eps on every remaining sample.
ConvergenceReport verify_convergence(const Trajectory& traj, double eps);

/// Per level i = 1..n: the time after which |y_{n-i+1}| <= L_{mu_{n-i+1}} / 2 holds on
/// the rest of the horizon. `monotone` is the running maximum of `raw`.
struct EntryTimes {
    std::vector<std::optional<double>> raw;
    std::vector<std::optional<double>> monotone;
    std::vector<double> thresholds;
};

EntryTimes saturation_entry_times(const Trajectory& traj, const NestedSatController& ctrl);

/// max |nu(x) - linear_feedback(x)| over samples with t >= from_time.
double linear_tail_deviation(const Trajectory& traj, const NestedSatController& ctrl, double from_time);

struct LyapunovReport {
    bool pass = true;
    double max_violation = 0.0;    // max of Vdot + ||x||^2/2 - tol
    double max_normalized = 0.0;   // max of (Vdot + ||x||^2/2) / (1 + ||x||^2)
    std::size_t worst_index = 0;
};

/// Exact derivative of V along x' = A x + b nu(x).
double lyapunov_derivative(const SkewController& ctrl, std::span<const double> x);

/// Finite-difference Vdot against -||x||^2/2 + tol_scale (1 + ||x||^2).
LyapunovReport lyapunov_check(const Trajectory& traj, const SkewController& ctrl, double tol_scale = 1e-4);

enum class CounterexampleKind { LinearCombination, PureSaturationOscillator };

struct DemoRow {
    double magnitude = 0.0;
    double u0 = 0.0;
    double udot0 = 0.0;
};

struct DemoTable {
    CounterexampleKind kind{};
    std::vector<DemoRow> rows;
    double slope = 0.0;      // least-squares fit |udot0| ~ slope m + intercept
    double intercept = 0.0;
    double r2 = 0.0;
};

/// LinearCombination: x1' = x2, x2' = u with u = -a s1(b x2) - c s2(d (x1 + x2)),
/// started at x2 = m, x1 = -m. PureSaturationOscillator: x1' = x2, x2' = -x1 + u with
/// u = -s(x2), started at x1 = m, x2 = half the linear zone.
/// Both use the two-quartic saturation and unit gains.
DemoTable counterexample_demo(CounterexampleKind kind, std::span<const double> magnitudes);

const char* to_string(CounterexampleKind kind) noexcept;

/// key=value lines.
std::string format_report(const BoundReport& report);

}  // namespace pbound
