#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prgp/calibrate.hpp"
#include "prgp/data.hpp"
#include "prgp/train.hpp"

namespace prgp {

// sqrt(mean(((y - y_hat) / sigma)^2)); the two-argument form uses sigma = 1.
double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);
double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat, const Eigen::VectorXd& sigma);

struct MapeResult {
  double value = 0.0;      // percent
  long long excluded = 0;  // |y| < 1e-9 entries dropped by the division guard
};

MapeResult mape(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

struct EvalCell {
  std::string model;
  std::string dimension;
  long long n = 0;
  double rmse = 0.0;
  std::optional<double> rmse_norm;  // per-dimension-std normalized, when enabled
  double mape = 0.0;
  long long mask_count = 0;  // variance clamps (GP rows) or skipped samples (physics rows)
};

struct EvalReport {
  std::vector<EvalCell> cells;
};

struct EvalOptions {
  bool sigma_normalized = false;
};

struct TrainedMethod {
  std::string name;
  std::vector<VehicleFit> fits;
};

// Predictions aligned with the reference rows that were scored.
struct MethodPredictions {
  std::string name;
  std::vector<long long> vehicle_ids;
  std::vector<double> times;
  Eigen::MatrixXd y_true;  // n x 7
  Eigen::MatrixXd y_hat;   // n x 7
  long long clamp_count = 0;
};

// Posterior-mean reconstruction of each fitted vehicle at the reference
// record times (leader-complete rows only). Vehicles without a fit are
// skipped.
MethodPredictions predict_method(const TrainedMethod& method,
                                 const std::vector<TrajectoryRecord>& reference);

EvalReport build_report(const std::vector<MethodPredictions>& methods,
                        const EvalOptions& options = {});

// One baseline row: the model evaluated on its predicted quantity over
// consecutive-record pairs; domain failures and unusable pairs count as
// masked.
EvalCell physics_baseline_cell(const PhysicsModel& model,
                               const std::vector<TrajectoryRecord>& reference,
                               const EvalOptions& options = {});

// Full harness: GP/PRGP methods over all 7 dimensions plus physics
// baselines on their single predicted quantity. Read-only on its inputs.
EvalReport compare_models(const std::vector<TrainedMethod>& methods,
                          const std::vector<PhysicsModel>& baselines,
                          const std::vector<TrajectoryRecord>& reference,
                          const EvalOptions& options = {});

// CSV with the fixed header model,dimension,n,rmse,mape,mask_count,rmse_norm;
// the trailing rmse_norm stays empty unless sigma normalization was enabled.
void emit_report(const EvalReport& report, const std::string& path);

}  // namespace prgp
