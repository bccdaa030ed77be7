#pragma once

#include <string>
#include <vector>

#include "prgp/evaluation.hpp"

namespace prgp {

// Versioned self-describing JSON container with everything prediction
// needs: per-method equations (kind, beta, omega, gamma, shadow kernel) and
// per-vehicle training inputs/outputs plus kernel hyperparameters. Caches
// are rebuilt on load.
void save_methods(const std::string& path, const std::vector<TrainedMethod>& methods);

std::vector<TrainedMethod> load_methods(const std::string& path);

}  // namespace prgp
