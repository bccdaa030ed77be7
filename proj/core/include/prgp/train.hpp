#pragma once

#include <string>
#include <vector>

#include "prgp/data.hpp"
#include "prgp/inference.hpp"

namespace prgp {

struct TraceRow {
  int iteration = 0;
  double negative_elbo = 0.0;
  double data_term = 0.0;
  Eigen::VectorXd reg_terms;  // unweighted, one per equation
};

struct TrainResult {
  GPModel model;
  ShadowGP shadow;
  std::vector<TraceRow> trace;
  int iterations_run = 0;
  bool plateau_stopped = false;
  bool aborted = false;
  std::string diagnostic;
};

// Stochastic ELBO ascent: per iteration sample pseudo inputs, draw eps,
// estimate the ELBO and its reparameterized gradient, take an Adam step.
// Deterministic in config.seed. On a non-finite ELBO or an unrecoverable
// regularizer failure the last good parameters are restored and the result
// is flagged aborted with a diagnostic.
TrainResult train(const Eigen::VectorXd& inputs, const Eigen::MatrixXd& outputs,
                  const std::vector<ShadowEquation>& equations, const TrainConfig& config);

struct VehicleFit {
  long long vehicle_id = 0;
  double t0 = 0.0;  // time of the first fitted record; inputs are t - t0
  TrainResult result;
};

struct SceneFitSummary {
  std::vector<long long> skipped_vehicles;  // under 3 leader-complete records
};

// One training run per vehicle over its leader-complete records, inputs
// normalized to the vehicle's own start. Seeds derive from
// (config.seed, vehicle_id), so results are independent of scheduling;
// `threads` > 1 runs vehicles in parallel waves.
std::vector<VehicleFit> train_scene(const std::vector<TrajectoryRecord>& records,
                                    const std::vector<ShadowEquation>& equations,
                                    const TrainConfig& config, int threads = 1,
                                    SceneFitSummary* summary = nullptr);

// Per-vehicle design matrices for the 7-output GP; rows lacking leader data
// are dropped.
struct VehicleMatrix {
  long long vehicle_id = 0;
  double t0 = 0.0;
  Eigen::VectorXd inputs;
  Eigen::MatrixXd outputs;  // n x 7
  std::vector<double> times;  // original record times of the kept rows
};

std::vector<VehicleMatrix> vehicle_matrices(const std::vector<TrajectoryRecord>& records,
                                            int min_records = 3);

// Convergence trace CSV: iteration, negative_elbo, data_term, then one
// reg_term_<kind> column per equation.
void write_trace_csv(const std::string& path, const TrainResult& result);

// Method tag for a configured equation set: "GP" for none, otherwise
// "PRGP-<label>" ("PRGP-DEF" when both definition operators are present).
std::string method_tag(const std::vector<ShadowEquation>& equations);

}  // namespace prgp
