#include "prgp/evaluation.hpp"

#include <cmath>
#include <limits>

#include "prgp/csv.hpp"

namespace prgp {

namespace {
constexpr double kMapeGuard = 1e-9;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double column_std(const Eigen::VectorXd& y) {
  if (y.size() < 2) {
    return 0.0;
  }
  const double mean = y.mean();
  return std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1));
}
}  // namespace

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size() || y.size() == 0) {
    throw InputDomainError("rmse: vectors must be non-empty and equally sized");
  }
  return std::sqrt((y - y_hat).squaredNorm() / static_cast<double>(y.size()));
}

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
            const Eigen::VectorXd& sigma) {
  if (y.size() != y_hat.size() || y.size() != sigma.size() || y.size() == 0) {
    throw InputDomainError("rmse: vectors must be non-empty and equally sized");
  }
  if (!(sigma.array() > 0.0).all()) {
    throw InputDomainError("rmse: sigma entries must be positive");
  }
  return std::sqrt(((y - y_hat).array() / sigma.array()).square().sum() /
                   static_cast<double>(y.size()));
}

MapeResult mape(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size()) {
    throw InputDomainError("mape: vectors must be equally sized");
  }
  MapeResult out;
  double sum = 0.0;
  long long n = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(y[i]) < kMapeGuard) {
      ++out.excluded;
      continue;
    }
    sum += std::abs((y[i] - y_hat[i]) / y[i]);
    ++n;
  }
  if (n == 0) {
    throw EmptyDataError("mape: every entry fell under the division guard");
  }
  out.value = 100.0 * sum / static_cast<double>(n);
  return out;
}

MethodPredictions predict_method(const TrainedMethod& method,
                                 const std::vector<TrajectoryRecord>& reference) {
  std::map<long long, const VehicleFit*> fits;
  for (const VehicleFit& fit : method.fits) {
    fits[fit.vehicle_id] = &fit;
  }
  const std::vector<VehicleMatrix> matrices = vehicle_matrices(reference, /*min_records=*/1);

  std::vector<const VehicleMatrix*> scored;
  Eigen::Index n = 0;
  for (const VehicleMatrix& vm : matrices) {
    if (fits.count(vm.vehicle_id) > 0) {
      scored.push_back(&vm);
      n += vm.inputs.size();
    }
  }

  MethodPredictions out;
  out.name = method.name;
  out.y_true.resize(n, kTrajectoryDims);
  out.y_hat.resize(n, kTrajectoryDims);
  out.vehicle_ids.reserve(static_cast<std::size_t>(n));
  out.times.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (const VehicleMatrix* vm : scored) {
    const VehicleFit& fit = *fits[vm->vehicle_id];
    for (Eigen::Index i = 0; i < vm->inputs.size(); ++i) {
      const double t = vm->times[static_cast<std::size_t>(i)];
      const PosteriorPrediction pred = fit.result.model.posterior_predict(t - fit.t0);
      out.y_true.row(row) = vm->outputs.row(i);
      out.y_hat.row(row) = pred.mean.transpose();
      out.clamp_count += pred.clamp_count;
      out.vehicle_ids.push_back(vm->vehicle_id);
      out.times.push_back(t);
      ++row;
    }
  }
  return out;
}

EvalReport build_report(const std::vector<MethodPredictions>& methods,
                        const EvalOptions& options) {
  EvalReport report;
  for (const MethodPredictions& mp : methods) {
    for (int j = 0; j < kTrajectoryDims; ++j) {
      const Eigen::VectorXd y = mp.y_true.col(j);
      const Eigen::VectorXd y_hat = mp.y_hat.col(j);
      if (y.size() == 0) {
        continue;  // absent cell, not zero
      }
      EvalCell cell;
      cell.model = mp.name;
      cell.dimension = output_dim_name(j);
      cell.n = static_cast<long long>(y.size());
      cell.rmse = rmse(y, y_hat);
      if (options.sigma_normalized) {
        const double sd = column_std(y);
        cell.rmse_norm = sd > 0.0 ? rmse(y, y_hat) / sd : nan();
      }
      try {
        cell.mape = mape(y, y_hat).value;
      } catch (const EmptyDataError&) {
        cell.mape = nan();
      }
      cell.mask_count = mp.clamp_count;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

EvalCell physics_baseline_cell(const PhysicsModel& model,
                               const std::vector<TrajectoryRecord>& reference,
                               const EvalOptions& options) {
  const std::vector<SamplePair> pairs = make_sample_pairs(reference);
  std::vector<double> observed;
  std::vector<double> predicted;
  long long masked = 0;
  for (const SamplePair& pair : pairs) {
    if (!pair_usable(model.kind, pair)) {
      ++masked;
      continue;
    }
    try {
      const double pred = predict_quantity(model, pair.sample, pair.next);
      observed.push_back(observed_quantity(model.kind, pair.sample, pair.next));
      predicted.push_back(pred);
    } catch (const ModelDomainError&) {
      ++masked;
    }
  }
  EvalCell cell;
  cell.model = kind_label(model.kind);
  cell.dimension = quantity_name(predicted_quantity(model.kind));
  cell.mask_count = masked;
  if (observed.empty()) {
    cell.n = 0;
    cell.rmse = nan();
    cell.mape = nan();
    return cell;
  }
  const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(observed.data(),
                                                        static_cast<Eigen::Index>(observed.size()));
  const Eigen::VectorXd y_hat = Eigen::Map<Eigen::VectorXd>(
      predicted.data(), static_cast<Eigen::Index>(predicted.size()));
  cell.n = static_cast<long long>(y.size());
  cell.rmse = rmse(y, y_hat);
  if (options.sigma_normalized) {
    const double sd = column_std(y);
    cell.rmse_norm = sd > 0.0 ? cell.rmse / sd : nan();
  }
  try {
    cell.mape = mape(y, y_hat).value;
  } catch (const EmptyDataError&) {
    cell.mape = nan();
  }
  return cell;
}

EvalReport compare_models(const std::vector<TrainedMethod>& methods,
                          const std::vector<PhysicsModel>& baselines,
                          const std::vector<TrajectoryRecord>& reference,
                          const EvalOptions& options) {
  std::vector<MethodPredictions> predictions;
  predictions.reserve(methods.size());
  for (const TrainedMethod& method : methods) {
    predictions.push_back(predict_method(method, reference));
  }
  EvalReport report = build_report(predictions, options);
  for (const PhysicsModel& model : baselines) {
    report.cells.push_back(physics_baseline_cell(model, reference, options));
  }
  return report;
}

void emit_report(const EvalReport& report, const std::string& path) {
  const std::vector<std::string> header = {"model", "dimension", "n",        "rmse",
                                           "mape",  "mask_count", "rmse_norm"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.cells.size());
  for (const EvalCell& cell : report.cells) {
    rows.push_back({cell.model, cell.dimension, csv::format_int(cell.n),
                    csv::format_double(cell.rmse), csv::format_double(cell.mape),
                    csv::format_int(cell.mask_count),
                    cell.rmse_norm ? csv::format_double(*cell.rmse_norm) : std::string()});
  }
  csv::write_table(path, header, rows);
}

}  // namespace prgp
