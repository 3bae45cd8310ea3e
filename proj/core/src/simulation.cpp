#include "pbound/simulation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pbound/error.hpp"
#include "pbound/integrator_synthesis.hpp"
#include "pbound/skew_synthesis.hpp"

namespace pbound {

double Trajectory::norm(std::size_t i) const {
    double s = 0.0;
    for (double v : state(i)) {
        s += v * v;
    }
    return std::sqrt(s);
}

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

double norm_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

}  // namespace

Trajectory simulate(const Dynamics& dynamics, const Control& control, std::span<const double> x0,
                    const SimulationOptions& opts) {
    if (!(opts.dt > 0.0) || !std::isfinite(opts.dt)) {
        throw ArgumentError("simulate: dt must be positive");
    }
    if (!(opts.t_max >= opts.dt * (1.0 - 1e-12))) {
        throw ArgumentError("simulate: t_max must be at least dt");
    }
    if (opts.record_stride == 0) {
        throw ArgumentError("simulate: record_stride must be positive");
    }
    if (x0.empty()) {
        throw ArgumentError("simulate: empty initial state");
    }
    if (!all_finite(x0)) {
        throw ArgumentError("simulate: non-finite initial state");
    }
    const std::size_t n = x0.size();
    const double h = opts.dt;
    const auto steps = static_cast<std::size_t>(std::llround(opts.t_max / h));

    Trajectory traj;
    traj.n = static_cast<int>(n);
    traj.dt = h * static_cast<double>(opts.record_stride);
    traj.x0.assign(x0.begin(), x0.end());

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto field = [&](std::span<const double> s, std::span<double> out) { dynamics(s, control(s), out); };
    auto record = [&](std::size_t step) {
        traj.times.push_back(static_cast<double>(step) * h);
        traj.states.insert(traj.states.end(), x.begin(), x.end());
        traj.controls.push_back(control(x));
    };

    record(0);
    double settled_since = norm_of(x) <= opts.stop_norm ? 0.0 : -1.0;
    for (std::size_t step = 1; step <= steps; ++step) {
        if (opts.stop_norm > 0.0 && settled_since >= 0.0 &&
            static_cast<double>(step - 1) * h - settled_since >= opts.settle_time) {
            break;
        }
        field(x, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        field(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        field(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        field(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (!all_finite(x)) {
            throw DivergenceError("simulate: non-finite state at t = " + std::to_string(static_cast<double>(step) * h),
                                  traj.size() - 1);
        }
        if (step % opts.record_stride == 0) {
            record(step);
        }
        if (norm_of(x) <= opts.stop_norm) {
            if (settled_since < 0.0) {
                settled_since = static_cast<double>(step) * h;
            }
        } else {
            settled_since = -1.0;
        }
    }
    return traj;
}

Trajectory simulate_chain(const NestedSatController& ctrl, std::span<const double> x0, const SimulationOptions& opts) {
    if (x0.size() != static_cast<std::size_t>(ctrl.n())) {
        throw ArgumentError("simulate_chain: initial state dimension mismatch");
    }
    Trajectory t = simulate(chain_dynamics, [&ctrl](std::span<const double> x) { return ctrl.feedback(x); }, x0, opts);
    t.meta = "integrator-chain";
    return t;
}

Trajectory simulate_skew(const SkewController& ctrl, std::span<const double> x0, const SimulationOptions& opts) {
    if (x0.size() != static_cast<std::size_t>(ctrl.system.n())) {
        throw ArgumentError("simulate_skew: initial state dimension mismatch");
    }
    const SkewSystem& sys = ctrl.system;
    Trajectory t = simulate([&sys](std::span<const double> x, double u, std::span<double> dx) { skew_dynamics(sys, x, u, dx); },
                            [&ctrl](std::span<const double> x) { return eval_skew_feedback(ctrl, x); }, x0, opts);
    t.meta = "skew";
    return t;
}

FiniteDiff finite_diff(std::span<const double> f, double dt, int order) {
    if (order < 0 || order > 4) {
        throw ArgumentError("finite_diff: order must be in 0..4");
    }
    if (!(dt > 0.0)) {
        throw ArgumentError("finite_diff: dt must be positive");
    }
    FiniteDiff out;
    out.offset = order == 0 ? 0 : (order <= 2 ? 1 : 2);
    const std::size_t w = out.offset;
    if (f.size() < 2 * w + 1) {
        throw ArgumentError("finite_diff: signal too short for the stencil");
    }
    const std::size_t count = f.size() - 2 * w;
    out.values.resize(count);
    const double h = dt;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = k + w;
        double v = 0.0;
        switch (order) {
        case 0: v = f[i]; break;
        case 1: v = (f[i + 1] - f[i - 1]) / (2.0 * h); break;
        case 2: v = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h); break;
        case 3: v = (f[i + 2] - 2.0 * f[i + 1] + 2.0 * f[i - 1] - f[i - 2]) / (2.0 * h * h * h); break;
        default: v = (f[i + 2] - 4.0 * f[i + 1] + 6.0 * f[i] - 4.0 * f[i - 1] + f[i - 2]) / (h * h * h * h); break;
        }
        out.values[k] = v;
    }
    return out;
}

namespace {

void put(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    throw Error(ErrorKind::Parse, "csv line " + std::to_string(line) + ": " + what);
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (int i = 1; i <= traj.n; ++i) {
        os << ",x" << i;
    }
    os << ",u\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        put(os, traj.times[k]);
        for (double v : traj.state(k)) {
            os << ',';
            put(os, v);
        }
        os << ',';
        put(os, traj.controls[k]);
        os << '\n';
    }
}

void write_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw ArgumentError("write_csv: cannot open " + path);
    }
    write_csv(traj, os);
}

Trajectory read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) {
        parse_fail(1, "missing header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    if (header.size() < 3 || header.front() != "t" || header.back() != "u") {
        parse_fail(1, "expected header t,x1..xn,u");
    }
    const int n = static_cast<int>(header.size()) - 2;
    for (int i = 1; i <= n; ++i) {
        if (header[static_cast<std::size_t>(i)] != "x" + std::to_string(i)) {
            parse_fail(1, "unexpected column name " + header[static_cast<std::size_t>(i)]);
        }
    }
    Trajectory traj;
    traj.n = n;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
                parse_fail(lineno, "bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (row.size() != header.size()) {
            parse_fail(lineno, "expected " + std::to_string(header.size()) + " fields");
        }
        traj.times.push_back(row.front());
        traj.states.insert(traj.states.end(), row.begin() + 1, row.end() - 1);
        traj.controls.push_back(row.back());
    }
    if (traj.times.empty()) {
        parse_fail(lineno, "no data rows");
    }
    traj.x0.assign(traj.states.begin(), traj.states.begin() + n);
    if (traj.size() >= 2) {
        traj.dt = traj.times[1] - traj.times[0];
        if (!(traj.dt > 0.0)) {
            parse_fail(3, "time column must increase");
        }
        for (std::size_t k = 1; k < traj.size(); ++k) {
            const double d = traj.times[k] - traj.times[k - 1];
            if (std::abs(d - traj.dt) > 1e-6 * traj.dt + 1e-12 * std::abs(traj.times[k])) {
                parse_fail(k + 2, "time grid is not uniform");
            }
        }
    }
    return traj;
}

Trajectory read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw Error(ErrorKind::Parse, "read_csv: cannot open " + path);
    }
    return read_csv(is);
}

}  // namespace pbound
