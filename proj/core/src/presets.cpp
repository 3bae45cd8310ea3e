#include "pbound/presets.hpp"

#include <cmath>

#include "pbound/error.hpp"

namespace pbound {

ToolkitConfig triple_integrator_config() {
    ToolkitConfig cfg;
    cfg.name = "triple-integrator";
    cfg.problem = ProblemKind::IntegratorChain;
    cfg.n = 3;
    cfg.p = 2;
    cfg.bounds = {2.0, 0.9, 18.0};
    cfg.saturations.assign(3, make_two_quartic_saturation());
    cfg.mu_max = std::vector<double>{1.0 / 12.0, 2.0 / 5.0};
    cfg.lambda = 6.5;
    cfg.simulation = {1e-3, 2000.0, 1e-2};
    cfg.initial_conditions = {{446.7937, -69.875, 11.05}};
    return cfg;
}

ToolkitConfig harmonic_oscillator_config() {
    ToolkitConfig cfg;
    cfg.name = "harmonic-oscillator";
    cfg.problem = ProblemKind::Skew;
    cfg.n = 2;
    cfg.p = 1;
    cfg.bounds = {2.0, 2.0};
    Eigen::MatrixXd A(2, 2);
    A << 0.0, 5.0, -5.0, 0.0;
    Eigen::VectorXd b(2);
    b << 0.0, 1.0;
    cfg.system = validate_system(A, b, 0.5, cfg.p, cfg.bounds);
    cfg.beta = (-5.0 + std::sqrt(41.0)) / 4.0;
    cfg.simulation = {1e-3, 400.0, 1e-2};
    cfg.initial_conditions = {{2.0, -2.0}};
    return cfg;
}

std::vector<std::string> preset_names() {
    return {"triple-integrator", "harmonic-oscillator"};
}

ToolkitConfig preset_config(const std::string& name) {
    if (name == "triple-integrator") {
        return triple_integrator_config();
    }
    if (name == "harmonic-oscillator") {
        return harmonic_oscillator_config();
    }
    throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
}

}  // namespace pbound
