#include "prgp/train.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "prgp/csv.hpp"

namespace prgp {

namespace {

constexpr double kVarFloor = 1e-6;

// Hyperparameter initialization from data moments: signal variance at the
// sample variance, noise at a tenth of it, lengthscale at a quarter of the
// input span.
GPModel initial_model(const Eigen::VectorXd& inputs, const Eigen::MatrixXd& outputs,
                      bool center_outputs) {
  const Eigen::Index n = inputs.size();
  const Eigen::Index d = outputs.cols();
  const double span = inputs.maxCoeff() - inputs.minCoeff();
  if (!(span > 0.0)) {
    throw InputDomainError("train: inputs must span a positive time range");
  }
  std::vector<KernelHyperparams> hp(static_cast<std::size_t>(d));
  Eigen::VectorXd log_tau(d);
  Eigen::VectorXd offset(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    offset[j] = center_outputs ? outputs.col(j).mean() : 0.0;
    // Second moment about the model mean, so the prior covers the data scale.
    const double var =
        std::max((outputs.col(j).array() - offset[j]).square().sum() / std::max<double>(1, n - 1),
                 kVarFloor);
    hp[static_cast<std::size_t>(j)].log_lengthscale = std::log(span / 4.0);
    hp[static_cast<std::size_t>(j)].log_signal_variance = std::log(var);
    hp[static_cast<std::size_t>(j)].jitter = 1e-8;
    log_tau[j] = -std::log(0.1 * var);
  }
  return GPModel(inputs, outputs, std::move(hp), std::move(log_tau), std::move(offset));
}

ShadowGP initial_shadow(const std::vector<ShadowEquation>& equations, double span) {
  ShadowGP shadow;
  shadow.equations = equations;
  for (ShadowEquation& eq : shadow.equations) {
    if (eq.shadow_hp.log_lengthscale == 0.0 && eq.shadow_hp.log_signal_variance == 0.0) {
      eq.shadow_hp.log_lengthscale = std::log(span / 4.0);
    }
    if (eq.shadow_hp.jitter <= 0.0) {
      eq.shadow_hp.jitter = 1e-8;
    }
  }
  return shadow;
}

}  // namespace

TrainResult train(const Eigen::VectorXd& inputs, const Eigen::MatrixXd& outputs,
                  const std::vector<ShadowEquation>& equations, const TrainConfig& config) {
  if (inputs.size() < 3) {
    throw InputDomainError("train: need at least 3 records per fitted vehicle");
  }
  if (config.iterations < 1) {
    throw InputDomainError("train: iterations must be at least 1");
  }
  if (config.m < 1) {
    throw InputDomainError("train: m must be at least 1");
  }
  bool any_next = false;
  for (const ShadowEquation& eq : equations) {
    any_next = any_next || needs_next_sample(eq.model.kind);
    if (!(eq.gamma >= 0.0) || !std::isfinite(eq.gamma)) {
      throw InputDomainError("train: gamma must be finite and non-negative");
    }
  }
  if (any_next && config.m < 2) {
    throw InputDomainError("train: m >= 2 required when a t+dt equation is active");
  }

  const double t_min = inputs.minCoeff();
  const double t_max = inputs.maxCoeff();

  TrainResult result{initial_model(inputs, outputs, config.center_outputs),
                     initial_shadow(equations, t_max - t_min),
                     {},
                     0,
                     false,
                     false,
                     {}};
  GPModel& model = result.model;
  ShadowGP& shadow = result.shadow;

  Eigen::VectorXd params = pack_params(model, shadow);
  Eigen::VectorXd last_good = params;
  AdamState adam;
  Rng rng(config.seed);

  const double ema_alpha = 2.0 / (config.plateau_window + 1.0);
  double smoothed = 0.0;
  std::vector<double> smoothed_history;
  smoothed_history.reserve(static_cast<std::size_t>(config.iterations));

  Eigen::MatrixXd eps(config.m, model.dims());
  for (int it = 0; it < config.iterations; ++it) {
    const Eigen::VectorXd z =
        sample_pseudo_inputs(t_min, t_max, config.m, config.z_sampling, rng);
    for (Eigen::Index p = 0; p < eps.rows(); ++p) {
      for (Eigen::Index j = 0; j < eps.cols(); ++j) {
        eps(p, j) = rng.normal();
      }
    }

    ElboEstimate estimate;
    try {
      estimate = elbo_estimate(model, shadow, z, eps, config);
    } catch (const Error& e) {
      result.aborted = true;
      result.diagnostic = std::string("iteration ") + std::to_string(it) + ": " + e.what();
      break;
    }
    if (!std::isfinite(estimate.total)) {
      result.aborted = true;
      result.diagnostic =
          std::string("iteration ") + std::to_string(it) + ": non-finite ELBO";
      break;
    }
    last_good = params;

    TraceRow row;
    row.iteration = it;
    row.negative_elbo = -estimate.total;
    row.data_term = estimate.data_term;
    row.reg_terms = estimate.reg_terms;
    result.trace.push_back(std::move(row));
    result.iterations_run = it + 1;

    smoothed = it == 0 ? -estimate.total
                       : (1.0 - ema_alpha) * smoothed + ema_alpha * (-estimate.total);
    smoothed_history.push_back(smoothed);
    // Non-positive tolerance disables the plateau stop (budget only).
    if (config.plateau_rel_tol > 0.0 && it >= 2 * config.plateau_window) {
      const double before =
          smoothed_history[static_cast<std::size_t>(it - config.plateau_window)];
      const double improvement = before - smoothed;
      if (improvement / std::max(std::abs(smoothed), 1e-12) < config.plateau_rel_tol) {
        result.plateau_stopped = true;
        break;
      }
    }

    adam_step(params, estimate.grad, adam, config.learning_rate);
    try {
      apply_params(params, model, shadow);
    } catch (const Error& e) {
      result.aborted = true;
      result.diagnostic =
          std::string("iteration ") + std::to_string(it) + " (update): " + e.what();
      break;
    }
  }

  if (result.aborted) {
    params = last_good;
    apply_params(params, model, shadow);
  }
  return result;
}

std::vector<VehicleMatrix> vehicle_matrices(const std::vector<TrajectoryRecord>& records,
                                            int min_records) {
  std::map<long long, std::vector<const TrajectoryRecord*>> by_vehicle;
  for (const TrajectoryRecord& rec : records) {
    by_vehicle[rec.vehicle_id].push_back(&rec);
  }
  std::vector<VehicleMatrix> out;
  for (auto& [id, rows] : by_vehicle) {
    std::stable_sort(rows.begin(), rows.end(), [](const TrajectoryRecord* a,
                                                  const TrajectoryRecord* b) {
      return a->time < b->time;
    });
    std::vector<const TrajectoryRecord*> usable;
    for (const TrajectoryRecord* rec : rows) {
      if (rec->preceding_id.has_value() && rec->preceding_velocity.has_value()) {
        usable.push_back(rec);
      }
    }
    if (static_cast<int>(usable.size()) < min_records) {
      continue;
    }
    VehicleMatrix vm;
    vm.vehicle_id = id;
    vm.t0 = usable.front()->time;
    vm.inputs.resize(static_cast<Eigen::Index>(usable.size()));
    vm.outputs.resize(static_cast<Eigen::Index>(usable.size()), kTrajectoryDims);
    for (std::size_t i = 0; i < usable.size(); ++i) {
      const TrajectoryRecord& rec = *usable[i];
      const auto r = static_cast<Eigen::Index>(i);
      vm.inputs[r] = rec.time - vm.t0;
      vm.outputs(r, kPositionX) = rec.local_x;
      vm.outputs(r, kPositionY) = rec.local_y;
      vm.outputs(r, kVelocity) = rec.velocity;
      vm.outputs(r, kAcceleration) = rec.acceleration;
      vm.outputs(r, kPrecedingVelocity) = *rec.preceding_velocity;
      vm.outputs(r, kSpaceHeadway) = rec.space_headway;
      vm.outputs(r, kTimeHeadway) = rec.time_headway;
      vm.times.push_back(rec.time);
    }
    out.push_back(std::move(vm));
  }
  return out;
}

std::vector<VehicleFit> train_scene(const std::vector<TrajectoryRecord>& records,
                                    const std::vector<ShadowEquation>& equations,
                                    const TrainConfig& config, int threads,
                                    SceneFitSummary* summary) {
  const std::vector<VehicleMatrix> matrices = vehicle_matrices(records);
  if (summary != nullptr) {
    std::set<long long> fitted;
    for (const VehicleMatrix& vm : matrices) {
      fitted.insert(vm.vehicle_id);
    }
    std::set<long long> all;
    for (const TrajectoryRecord& rec : records) {
      all.insert(rec.vehicle_id);
    }
    for (long long id : all) {
      if (fitted.count(id) == 0) {
        summary->skipped_vehicles.push_back(id);
      }
    }
  }

  auto fit_one = [&](const VehicleMatrix& vm) {
    TrainConfig per_vehicle = config;
    per_vehicle.seed = mix_seed(config.seed, static_cast<std::uint64_t>(vm.vehicle_id));
    VehicleFit fit{vm.vehicle_id, vm.t0,
                   train(vm.inputs, vm.outputs, equations, per_vehicle)};
    return fit;
  };

  std::vector<VehicleFit> fits;
  fits.reserve(matrices.size());
  if (threads <= 1) {
    for (const VehicleMatrix& vm : matrices) {
      fits.push_back(fit_one(vm));
    }
    return fits;
  }
  // Parallel waves; per-vehicle seeds keep the outcome order-independent.
  for (std::size_t base = 0; base < matrices.size(); base += static_cast<std::size_t>(threads)) {
    std::vector<std::future<VehicleFit>> wave;
    const std::size_t end = std::min(matrices.size(), base + static_cast<std::size_t>(threads));
    for (std::size_t i = base; i < end; ++i) {
      wave.push_back(std::async(std::launch::async, fit_one, std::cref(matrices[i])));
    }
    for (auto& f : wave) {
      fits.push_back(f.get());
    }
  }
  return fits;
}

void write_trace_csv(const std::string& path, const TrainResult& result) {
  std::vector<std::string> header = {"iteration", "negative_elbo", "data_term"};
  for (const ShadowEquation& eq : result.shadow.equations) {
    header.push_back(std::string("reg_term_") + kind_name(eq.model.kind));
  }
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.trace.size());
  for (const TraceRow& row : result.trace) {
    std::vector<std::string> cells = {csv::format_int(row.iteration),
                                      csv::format_double(row.negative_elbo),
                                      csv::format_double(row.data_term)};
    for (Eigen::Index w = 0; w < row.reg_terms.size(); ++w) {
      cells.push_back(csv::format_double(row.reg_terms[w]));
    }
    rows.push_back(std::move(cells));
  }
  csv::write_table(path, header, rows);
}

std::string method_tag(const std::vector<ShadowEquation>& equations) {
  std::vector<const ShadowEquation*> active;
  for (const ShadowEquation& eq : equations) {
    if (eq.gamma != 0.0) {
      active.push_back(&eq);
    }
  }
  if (active.empty()) {
    return "GP";
  }
  bool only_defs = true;
  for (const ShadowEquation* eq : active) {
    only_defs = only_defs && (eq->model.kind == PhysicsKind::kVelDef ||
                              eq->model.kind == PhysicsKind::kAccDef);
  }
  if (only_defs) {
    return "PRGP-DEF";
  }
  std::string tag = "PRGP";
  for (const ShadowEquation* eq : active) {
    tag += "-";
    tag += kind_label(eq->model.kind);
  }
  return tag;
}

}  // namespace prgp
