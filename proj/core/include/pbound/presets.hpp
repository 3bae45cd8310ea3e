#pragma once

#include <string>
#include <vector>

#include "pbound/io.hpp"

namespace pbound {

/// Triple integrator, two-quartic saturations on every level, bounds (2, 0.9, 18),
/// mu^max = (1/12, 2/5) and lambda = 6.5; started at (446.7937, -69.875, 11.05).
ToolkitConfig triple_integrator_config();

/// x1' = 5 x2, x2' = -5 x1 + u with b = e2, alpha = 1/2, p = 1, bounds (2, 2),
/// beta = (-5 + sqrt(41)) / 4; started at (2, -2).
ToolkitConfig harmonic_oscillator_config();

std::vector<std::string> preset_names();

/// Throws Error(Config) for unknown names.
ToolkitConfig preset_config(const std::string& name);

}  // namespace pbound
