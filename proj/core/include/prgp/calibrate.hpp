#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prgp/data.hpp"
#include "prgp/physics.hpp"

namespace prgp {

struct SamplePair {
  KinematicSample sample;
  std::optional<KinematicSample> next;
};

// Consecutive same-vehicle observation pairs in residual-operator units.
// Records without a matched leader produce NaN leader fields, which the
// per-model precondition filter then drops.
std::vector<SamplePair> make_sample_pairs(const std::vector<TrajectoryRecord>& records);

// True when the pair carries finite values for every field the model kind
// reads and satisfies the data-level domain requirements (positive spacing
// under powers, positive dt for difference operators).
bool pair_usable(PhysicsKind kind, const SamplePair& pair);

struct ParamBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

// Wide freeway-scale search boxes per model (feet/seconds units).
ParamBounds default_bounds(PhysicsKind kind);

struct CalibrationOptions {
  int starts = 8;            // Latin-hypercube multistart count
  int max_iterations = 800;  // Nelder-Mead iterations per start
  double f_tol = 1e-14;
  double x_tol = 1e-10;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct StartTrace {
  int start_index = 0;
  double rmse = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CalibrationReport {
  PhysicsModel model;
  // Held-out split metrics (the headline numbers).
  double rmse = 0.0;
  double mape = 0.0;
  double rmse_train = 0.0;
  double mape_train = 0.0;
  long long n_train = 0;
  long long n_holdout = 0;
  long long skipped = 0;
  std::vector<StartTrace> starts;
  std::string notes;
};

// Fits the model parameters by minimizing prediction RMSE with a bounded
// Nelder-Mead multistart (best by RMSE, ties by lowest start index).
// Deterministic in the seed. Zero-parameter kinds skip the search and
// report metrics only.
CalibrationReport calibrate(PhysicsKind kind, const std::vector<SamplePair>& pairs,
                            const ParamBounds& bounds, const CalibrationOptions& options = {});

}  // namespace prgp
