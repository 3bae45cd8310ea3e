#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pbound {

class NestedSatController;
struct SkewController;

/// Uniformly sampled closed-loop run. States are stored row-major.
struct Trajectory {
    int n = 0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> controls;
    std::vector<double> x0;
    std::string meta;

    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> state(std::size_t i) const {
        return {states.data() + i * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    }
    double norm(std::size_t i) const;
};

using Dynamics = std::function<void(std::span<const double> x, double u, std::span<double> dx)>;
using Control = std::function<double(std::span<const double> x)>;

struct SimulationOptions {
    double dt = 1e-3;
    double t_max = 1e4;
    /// Stop once ||x|| <= stop_norm has held for settle_time; 0 disables the early stop.
    double stop_norm = 1e-2;
    double settle_time = 0.0;
    /// Keep every k-th step; the trajectory's dt is dt * record_stride.
    std::size_t record_stride = 1;
};

/// Classical fixed-step RK4 on x' = f(x, control(x)).
/// Throws DivergenceError when the state stops being finite.
Trajectory simulate(const Dynamics& dynamics, const Control& control, std::span<const double> x0,
                    const SimulationOptions& opts = {});

Trajectory simulate_chain(const NestedSatController& ctrl, std::span<const double> x0,
                          const SimulationOptions& opts = {});
Trajectory simulate_skew(const SkewController& ctrl, std::span<const double> x0, const SimulationOptions& opts = {});

/// Central differences of consistency order 2 for 0 <= order <= 4.
/// values[k] estimates the derivative at sample offset + k; endpoints are left out.
struct FiniteDiff {
    std::size_t offset = 0;
    std::vector<double> values;
};

FiniteDiff finite_diff(std::span<const double> signal, double dt, int order);

/// CSV with header t,x1..xn,u and 17 significant digits.
void write_csv(const Trajectory& traj, std::ostream& os);
void write_csv(const Trajectory& traj, const std::string& path);
Trajectory read_csv(std::istream& is);
Trajectory read_csv(const std::string& path);

}  // namespace pbound
