#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pbound/error.hpp"
#include "pbound/io.hpp"
#include "pbound/presets.hpp"
#include "pbound/simulation.hpp"
#include "pbound/verification.hpp"

namespace fs = std::filesystem;

namespace pbound::cli {

namespace {

// key=value report builder
class Report {
public:
    template <class T>
    void put(const std::string& key, const T& value) {
        os_ << key << '=' << value << '\n';
    }
    void num(const std::string& key, double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        put(key, buf);
    }
    void flag(const std::string& key, bool v) { put(key, v ? "true" : "false"); }
    void raw(const std::string& text) { os_ << text; }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Argument:
    case ErrorKind::Shape:
    case ErrorKind::Uncontrollable:
        return kConfigError;
    case ErrorKind::Infeasible:
    case ErrorKind::Certification:
    case ErrorKind::Conditioning:
    case ErrorKind::Overflow:
        return kInfeasible;
    case ErrorKind::Divergence:
        return kDivergence;
    case ErrorKind::Parse:
        return kParseError;
    }
    return kFailure;
}

fs::path output_dir(const std::string& flag) {
    if (const char* env = std::getenv("TOOLKIT_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return flag.empty() ? fs::path(".") : fs::path(flag);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) {
        throw ArgumentError("cannot write " + path.string());
    }
    os << text;
}

std::string index_name(const std::string& stem, std::size_t i, const std::string& ext) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    return stem + "_" + buf + ext;
}

ToolkitConfig config_from(const std::string& path, const std::string& preset) {
    if (!path.empty() && !preset.empty()) {
        throw Error(ErrorKind::Config, "give either --config or --preset, not both");
    }
    if (!preset.empty()) {
        return preset_config(preset);
    }
    if (path.empty()) {
        throw Error(ErrorKind::Config, "--config or --preset is required");
    }
    return load_config(path);
}

void chain_log(Report& r, const NestedSatController& c) {
    const ChainSpec& spec = c.spec();
    r.put("kind", "integrator-chain");
    r.put("n", spec.n);
    r.put("p", spec.p);
    for (std::size_t j = 0; j < spec.R.size(); ++j) {
        r.num("R" + std::to_string(j), spec.R[j]);
    }
    for (std::size_t i = 0; i < c.inner().size(); ++i) {
        const std::string k = std::to_string(i + 1);
        r.num("mu" + k + ".max", c.inner().mu_max[i]);
        r.num("mu" + k + ".L", c.inner().L_mu[i]);
        r.num("mu" + k + ".S", c.inner().S_mu[i]);
    }
    r.num("lambda", c.lambda());
    r.num("alpha_tilde", c.alpha_tilde());
    for (std::size_t i = 0; i < c.a().size(); ++i) {
        const std::string k = std::to_string(i + 1);
        r.num("a" + k, c.a()[i]);
        std::ostringstream ks;
        for (Eigen::Index m = 0; m < c.k()[i].size(); ++m) {
            ks << (m ? "," : "") << c.k()[i](m);
        }
        r.put("k" + k, ks.str());
    }
    if (spec.p == 0) {
        return;
    }
    const BoundPolynomials bp = bound_polynomials(spec, c.inner());
    for (std::size_t i = 0; i < bp.aux.b_mu.size(); ++i) {
        r.num("b_mu" + std::to_string(i + 1), bp.aux.b_mu[i]);
    }
    r.num("slope_lower", bp.aux.slope_lower);
    r.num("slope_upper", bp.aux.slope_upper);
    r.num("delta", bp.aux.delta);
    for (int j = 1; j <= spec.p; ++j) {
        const std::string k = "bound" + std::to_string(j);
        const auto& poly = bp.bound[static_cast<std::size_t>(j - 1)];
        for (int d = 1; d <= poly.degree(); ++d) {
            r.num(k + ".coeff_inv_lambda_pow" + std::to_string(d), poly.coeff(d));
        }
        const double v = bp.bound_at(j, c.lambda());
        r.num(k + ".at_lambda", v);
        r.flag(k + ".within_R", v <= spec.R[static_cast<std::size_t>(j)]);
    }
}

void skew_log(Report& r, const SkewController& s, const CertificationOptions& opts) {
    r.put("kind", "skew");
    r.put("n", s.system.n());
    r.put("p", s.system.p);
    for (std::size_t j = 0; j < s.system.R.size(); ++j) {
        r.num("R" + std::to_string(j), s.system.R[j]);
    }
    r.num("alpha", s.system.alpha);
    r.num("beta", s.beta);
    r.num("K", s.K);
    const Eigen::MatrixXd res = s.P * s.A_beta() + s.A_beta().transpose() * s.P +
                                Eigen::MatrixXd::Identity(s.system.n(), s.system.n());
    r.num("lyapunov_residual", res.norm());
    const BetaCheck chk = check_beta(s.system, s.beta, opts);
    r.num("amplitude_bound", chk.amplitude);
    for (std::size_t j = 1; j < chk.sup.size(); ++j) {
        r.num("sampled_sup" + std::to_string(j), chk.sup[j]);
    }
    r.num("certification_margin", opts.margin);
    r.num("worst_ratio", chk.worst_ratio);
    r.flag("certified", chk.ok);
}

std::string synthesis_log(const AnyController& ctrl, const CertificationOptions& opts) {
    Report r;
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        chain_log(r, *c);
    } else {
        skew_log(r, std::get<SkewController>(ctrl), opts);
    }
    return r.str();
}

Trajectory simulate_any(const AnyController& ctrl, std::span<const double> x0, const SimulationOptions& opts) {
    if (const auto* c = std::get_if<NestedSatController>(&ctrl)) {
        return simulate_chain(*c, x0, opts);
    }
    return simulate_skew(std::get<SkewController>(ctrl), x0, opts);
}

// One run per initial condition, in parallel; index i always maps to ics[i].
std::vector<Trajectory> simulate_batch(const AnyController& ctrl, const std::vector<std::vector<double>>& ics,
                                       const SimulationOptions& opts) {
    std::vector<Trajectory> out(ics.size());
    const unsigned threads = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                             static_cast<unsigned>(std::max<std::size_t>(ics.size(), 1))));
    std::vector<std::future<void>> jobs;
    for (unsigned t = 0; t < threads; ++t) {
        jobs.push_back(std::async(std::launch::async, [&, t] {
            for (std::size_t i = t; i < ics.size(); i += threads) {
                out[i] = simulate_any(ctrl, ics[i], opts);
            }
        }));
    }
    // get() rethrows the first failure
    for (auto& j : jobs) {
        j.get();
    }
    return out;
}

std::vector<double> parse_bounds(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || end != cell.c_str() + cell.size() || !(v > 0.0)) {
            throw Error(ErrorKind::Config, "--bounds: '" + cell + "' is not a positive number");
        }
        out.push_back(v);
    }
    return out;
}

struct TrajectoryCheck {
    BoundReport bounds;
    ConvergenceReport convergence;
};

TrajectoryCheck check_trajectory(const AnyController& ctrl, const Trajectory& traj, std::span<const double> R,
                                 double eps) {
    if (traj.n != state_dim(ctrl)) {
        throw Error(ErrorKind::Parse, "trajectory has " + std::to_string(traj.n) + " states, controller expects " +
                                          std::to_string(state_dim(ctrl)));
    }
    const DerivativeEvaluator eval = [&ctrl](std::span<const double> x, int k) { return u_derivatives(ctrl, x, k); };
    return {verify_bounds(traj, eval, R), verify_convergence(traj, eps)};
}

void put_check(Report& r, const std::string& prefix, const TrajectoryCheck& c) {
    for (const auto& o : c.bounds.orders) {
        const std::string k = prefix + "order" + std::to_string(o.order) + ".";
        r.num(k + "bound", o.bound);
        r.num(k + "analytic_sup", o.analytic_sup);
        r.num(k + "analytic_argmax_t", o.analytic_argmax_t);
        if (o.fd_sup) {
            r.num(k + "fd_sup", *o.fd_sup);
            r.num(k + "cross_error", o.cross_error);
        }
        r.flag(k + "pass", o.pass);
        r.flag(k + "fd_pass", o.fd_pass);
        r.flag(k + "cross_ok", o.cross_ok);
    }
    r.flag(prefix + "converged", c.convergence.converged);
    if (c.convergence.converged) {
        r.num(prefix + "t_eps", c.convergence.t_eps);
    }
    r.num(prefix + "final_norm", c.convergence.final_norm);
}

// Plot data: t, states, U and its analytic derivatives up to min(p, 2).
void write_plot_csv(const fs::path& path, const AnyController& ctrl, const Trajectory& traj, std::size_t stride) {
    std::ofstream os(path);
    if (!os) {
        throw ArgumentError("cannot write " + path.string());
    }
    const int q = std::min(derivative_order(ctrl), 2);
    os << "t";
    for (int i = 1; i <= traj.n; ++i) {
        os << ",x" << i;
    }
    os << ",u";
    for (int j = 1; j <= q; ++j) {
        os << ",u" << j;
    }
    os << '\n';
    char buf[40];
    for (std::size_t k = 0; k < traj.size(); k += stride) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
        os << buf;
        for (double v : traj.state(k)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        for (double v : u_derivatives(ctrl, traj.state(k), q)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
}

struct SimFlags {
    std::optional<double> dt;
    std::optional<double> tmax;
    std::optional<double> eps;
};

SimulationOptions sim_options(const ToolkitConfig& cfg, const SimFlags& f) {
    SimulationOptions o;
    o.dt = f.dt.value_or(cfg.simulation.dt);
    o.t_max = f.tmax.value_or(cfg.simulation.t_max);
    o.stop_norm = f.eps.value_or(cfg.simulation.eps);
    if (!(o.dt > 0.0) || !(o.t_max > 0.0) || !(o.stop_norm > 0.0)) {
        throw Error(ErrorKind::Config, "--dt, --tmax and --eps must be positive");
    }
    if (o.t_max < o.dt * (1.0 - 1e-12)) {
        throw Error(ErrorKind::Config, "--tmax must be at least --dt");
    }
    return o;
}

int cmd_synthesize(const std::string& config, const std::string& preset, const std::string& out_flag,
                   std::ostream& out) {
    const ToolkitConfig cfg = config_from(config, preset);
    AnyController ctrl = [&] {
        try {
            return synthesize_from_config(cfg);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string("synthesis: ") + e.what());
        }
    }();
    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);
    save_controller(ctrl, (dir / "controller.json").string());
    const std::string log = synthesis_log(ctrl, cfg.certification);
    write_text(dir / "synthesis.log", log);
    out << log;
    out << "controller=" << (dir / "controller.json").string() << '\n';
    return kOk;
}

int cmd_simulate(const std::string& controller, const std::string& config, const std::string& preset,
                 const std::string& out_flag, std::optional<std::uint64_t> seed, const SimFlags& flags,
                 std::ostream& out) {
    ToolkitConfig cfg = config_from(config, preset);
    if (seed) {
        if (!cfg.random) {
            cfg.random = RandomInitialConditions{};
        }
        cfg.random->seed = *seed;
    }
    const AnyController ctrl = load_controller(controller);
    if (state_dim(ctrl) != cfg.n) {
        throw Error(ErrorKind::Config, "n: config has " + std::to_string(cfg.n) + " states, controller " +
                                           std::to_string(state_dim(ctrl)));
    }
    const auto ics = initial_states(cfg);
    if (ics.empty()) {
        throw Error(ErrorKind::Config, "initial_conditions: no initial states to simulate");
    }
    const SimulationOptions opts = sim_options(cfg, flags);
    const fs::path dir = output_dir(out_flag);
    fs::create_directories(dir);
    std::vector<Trajectory> trajs;
    try {
        trajs = simulate_batch(ctrl, ics, opts);
    } catch (const DivergenceError& e) {
        out << "status=divergence\nmessage=" << e.what() << "\nlast_finite_index=" << e.last_finite_index() << '\n';
        return kDivergence;
    }
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const fs::path path = dir / index_name("traj", i, ".csv");
        write_csv(trajs[i], path.string());
        out << "trajectory" << i << '=' << path.string() << '\n';
        out << "trajectory" << i << ".samples=" << trajs[i].size() << '\n';
    }
    return kOk;
}

int cmd_verify(const std::string& controller, const std::vector<std::string>& csvs, const std::string& out_flag,
               std::optional<double> eps_flag, const std::string& bounds_flag, std::ostream& out) {
    const AnyController ctrl = load_controller(controller);
    std::vector<double> R = bounds_of(ctrl);
    if (!bounds_flag.empty()) {
        R = parse_bounds(bounds_flag);
        if (R.size() != bounds_of(ctrl).size()) {
            throw Error(ErrorKind::Config, "--bounds: expected " + std::to_string(bounds_of(ctrl).size()) + " values");
        }
    }
    const double eps = eps_flag.value_or(1e-2);
    if (!(eps > 0.0)) {
        throw Error(ErrorKind::Config, "--eps must be positive");
    }
    Report r;
    bool bounds_ok = true;
    bool converged = true;
    for (std::size_t i = 0; i < csvs.size(); ++i) {
        const Trajectory traj = read_csv(csvs[i]);
        const TrajectoryCheck c = check_trajectory(ctrl, traj, R, eps);
        const std::string prefix = "trajectory" + std::to_string(i) + ".";
        r.put(prefix + "file", csvs[i]);
        put_check(r, prefix, c);
        bounds_ok = bounds_ok && c.bounds.pass();
        converged = converged && c.convergence.converged;
    }
    r.flag("bounds_pass", bounds_ok);
    r.flag("convergence_pass", converged);
    const fs::path dir = out_flag.empty() && std::getenv("TOOLKIT_OUT") == nullptr
                             ? fs::path(csvs.front()).parent_path()
                             : output_dir(out_flag);
    if (!dir.empty()) {
        fs::create_directories(dir);
    }
    write_text((dir.empty() ? fs::path(".") : dir) / "verify_report.txt", r.str());
    out << r.str();
    if (!bounds_ok) {
        return kBoundFailure;
    }
    return converged ? kOk : kNotConverged;
}

int reproduce_pipeline(const ToolkitConfig& cfg, const std::string& stem, const fs::path& dir, std::size_t stride,
                       std::ostream& out) {
    Report r;
    r.put("example", cfg.name);
    const AnyController ctrl = [&] {
        try {
            return synthesize_from_config(cfg);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string("synthesis: ") + e.what());
        }
    }();
    save_controller(ctrl, (dir / "controller.json").string());
    r.raw(synthesis_log(ctrl, cfg.certification));

    const SimulationOptions opts = sim_options(cfg, {});
    std::vector<Trajectory> trajs;
    try {
        trajs = simulate_batch(ctrl, initial_states(cfg), opts);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("simulation: ") + e.what());
    }
    bool bounds_ok = true;
    bool converged = true;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const std::string prefix = "trajectory" + std::to_string(i) + ".";
        std::ostringstream x0;
        for (std::size_t m = 0; m < trajs[i].x0.size(); ++m) {
            x0 << (m ? "," : "") << trajs[i].x0[m];
        }
        r.put(prefix + "x0", x0.str());
        const TrajectoryCheck c = check_trajectory(ctrl, trajs[i], bounds_of(ctrl), cfg.simulation.eps);
        put_check(r, prefix, c);
        bounds_ok = bounds_ok && c.bounds.pass();
        converged = converged && c.convergence.converged;
        if (const auto* nc = std::get_if<NestedSatController>(&ctrl)) {
            const EntryTimes et = saturation_entry_times(trajs[i], *nc);
            for (std::size_t l = 0; l < et.monotone.size(); ++l) {
                const std::string k = prefix + "entry_time" + std::to_string(l + 1);
                if (et.monotone[l]) {
                    r.num(k, *et.monotone[l]);
                } else {
                    r.put(k, "absent");
                }
            }
            if (et.monotone.back()) {
                r.num(prefix + "linear_tail_deviation", linear_tail_deviation(trajs[i], *nc, *et.monotone.back()));
            }
        } else {
            const LyapunovReport ly = lyapunov_check(trajs[i], std::get<SkewController>(ctrl));
            r.flag(prefix + "lyapunov_pass", ly.pass);
            r.num(prefix + "lyapunov_max_normalized_excess", ly.max_normalized);
        }
        write_plot_csv(dir / index_name(stem, i, ".csv"), ctrl, trajs[i], stride);
    }
    r.flag("bounds_pass", bounds_ok);
    r.flag("convergence_pass", converged);
    write_text(dir / "report.txt", r.str());
    out << r.str();
    if (!bounds_ok) {
        return kBoundFailure;
    }
    return converged ? kOk : kNotConverged;
}

int reproduce_counterexamples(const fs::path& dir, std::ostream& out) {
    std::vector<double> mags;
    for (int i = 0; i <= 6; ++i) {
        mags.push_back(std::pow(10.0, i / 2.0));
    }
    Report r;
    r.put("example", "counterexamples");
    bool ok = true;
    for (auto kind : {CounterexampleKind::LinearCombination, CounterexampleKind::PureSaturationOscillator}) {
        const DemoTable t = counterexample_demo(kind, mags);
        const std::string name = to_string(kind);
        std::ofstream os(dir / ("counterexample_" + name + ".csv"));
        os << "magnitude,u0,udot0\n";
        char buf[128];
        bool increasing = true;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t.rows[i].magnitude, t.rows[i].u0, t.rows[i].udot0);
            os << buf;
            if (i > 0 && !(std::abs(t.rows[i].udot0) > std::abs(t.rows[i - 1].udot0))) {
                increasing = false;
            }
        }
        r.num(name + ".slope", t.slope);
        r.num(name + ".intercept", t.intercept);
        r.num(name + ".r2", t.r2);
        r.flag(name + ".strictly_increasing", increasing);
        ok = ok && increasing && t.slope > 0.0 && t.r2 >= 0.99;
    }
    r.flag("unbounded_growth", ok);
    write_text(dir / "report.txt", r.str());
    out << r.str();
    return ok ? kOk : kFailure;
}

int cmd_reproduce(const std::string& example, const std::string& out_flag, std::size_t stride, std::ostream& out) {
    const fs::path dir = output_dir(out_flag) / example;
    fs::create_directories(dir);
    if (example == "triple-integrator") {
        ToolkitConfig cfg = triple_integrator_config();
        cfg.random = RandomInitialConditions{1, 8, 5.0};
        return reproduce_pipeline(cfg, "plot_traj", dir, stride, out);
    }
    if (example == "harmonic-oscillator") {
        ToolkitConfig cfg = harmonic_oscillator_config();
        cfg.random = RandomInitialConditions{1, 8, 10.0};
        return reproduce_pipeline(cfg, "plot_traj", dir, stride, out);
    }
    if (example == "counterexamples") {
        return reproduce_counterexamples(dir, out);
    }
    throw Error(ErrorKind::Config, "unknown example '" + example +
                                       "' (expected triple-integrator, harmonic-oscillator or counterexamples)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Synthesis, simulation and verification of rate-bounded stabilizing feedback"};
    app.require_subcommand(1);

    std::string config, preset, out_dir, controller, bounds, example;
    std::optional<std::uint64_t> seed;
    SimFlags sim;
    std::optional<double> eps;
    std::vector<std::string> csvs;
    std::size_t stride = 10;

    auto* syn = app.add_subcommand("synthesize", "Build a controller from a config");
    syn->add_option("--config", config, "Config file (JSON)");
    syn->add_option("--preset", preset, "Built-in config: triple-integrator or harmonic-oscillator");
    syn->add_option("--out", out_dir, "Output directory");

    auto* simc = app.add_subcommand("simulate", "Simulate a controller from the config's initial states");
    simc->add_option("--controller", controller, "Controller file")->required();
    simc->add_option("--config", config, "Config file (JSON)");
    simc->add_option("--preset", preset, "Built-in config");
    simc->add_option("--out", out_dir, "Output directory");
    simc->add_option("--seed", seed, "Seed for random initial states");
    simc->add_option("--dt", sim.dt, "Step size");
    simc->add_option("--tmax", sim.tmax, "Horizon");
    simc->add_option("--eps", sim.eps, "Stop once ||x|| <= eps");

    auto* ver = app.add_subcommand("verify", "Check bounds and convergence of trajectory CSVs");
    ver->add_option("--controller", controller, "Controller file")->required();
    ver->add_option("csv", csvs, "Trajectory CSV files")->required();
    ver->add_option("--out", out_dir, "Report directory (default: next to the first CSV)");
    ver->add_option("--eps", eps, "Convergence threshold");
    ver->add_option("--bounds", bounds, "Override R_0..R_p, comma separated");

    auto* rep = app.add_subcommand("reproduce", "Run a built-in example end to end");
    rep->add_option("example", example, "triple-integrator, harmonic-oscillator or counterexamples")->required();
    rep->add_option("--out", out_dir, "Output directory");
    rep->add_option("--stride", stride, "Keep every k-th sample in plot data")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*syn) {
            return cmd_synthesize(config, preset, out_dir, out);
        }
        if (*simc) {
            return cmd_simulate(controller, config, preset, out_dir, seed, sim, out);
        }
        if (*ver) {
            return cmd_verify(controller, csvs, out_dir, eps, bounds, out);
        }
        return cmd_reproduce(example, out_dir, stride, out);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace pbound::cli
