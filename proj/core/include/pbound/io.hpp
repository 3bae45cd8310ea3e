#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pbound/integrator_synthesis.hpp"
#include "pbound/saturation.hpp"
#include "pbound/skew_synthesis.hpp"

namespace pbound {

enum class ProblemKind { IntegratorChain, Skew };

const char* to_string(ProblemKind kind) noexcept;

struct SimulationSettings {
    double dt = 1e-3;
    double t_max = 1e4;
    double eps = 1e-2;
};

struct RandomInitialConditions {
    std::uint64_t seed = 1;
    std::size_t count = 10;
    double radius = 100.0;  // each coordinate uniform in [-radius, radius]
};

/// Everything a run needs. Parsed from JSON; see README for the schema.
struct ToolkitConfig {
    std::string name;
    ProblemKind problem = ProblemKind::IntegratorChain;
    int n = 0;
    int p = 0;
    std::vector<double> bounds;

    // integrator chain
    std::vector<Saturation> saturations;
    std::optional<std::vector<double>> mu_max;
    std::optional<double> lambda;

    // skew system
    std::optional<SkewSystem> system;
    std::optional<double> beta;
    CertificationOptions certification;

    SimulationSettings simulation;
    std::vector<std::vector<double>> initial_conditions;
    std::optional<RandomInitialConditions> random;

    ChainSpec chain_spec() const;
};

/// Throws Error(Parse) on malformed JSON and Error(Config) with the offending
/// field path on schema violations.
ToolkitConfig parse_config(const std::string& json_text);
ToolkitConfig load_config(const std::string& path);
std::string config_to_json(const ToolkitConfig& cfg);

/// Listed initial conditions followed by the seeded random ones.
std::vector<std::vector<double>> initial_states(const ToolkitConfig& cfg);

using AnyController = std::variant<NestedSatController, SkewController>;

/// Runs the synthesis pipeline the config asks for. A fixed skew beta is
/// checked against the rate bounds and rejected with Error(Certification) if it fails.
AnyController synthesize_from_config(const ToolkitConfig& cfg);

std::string serialize_controller(const AnyController& ctrl);
AnyController deserialize_controller(const std::string& json_text);
void save_controller(const AnyController& ctrl, const std::string& path);
AnyController load_controller(const std::string& path);

/// Feedback, closed-loop U derivatives and simulation for either controller kind.
double eval_feedback(const AnyController& ctrl, std::span<const double> x);
std::vector<double> u_derivatives(const AnyController& ctrl, std::span<const double> x, int up_to);
int state_dim(const AnyController& ctrl);
int derivative_order(const AnyController& ctrl);
const std::vector<double>& bounds_of(const AnyController& ctrl);

}  // namespace pbound
