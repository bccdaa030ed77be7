#include "prgp/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "prgp/rng.hpp"

namespace prgp {

namespace {

constexpr double kInfeasiblePenalty = 1e6;
constexpr double kMapeGuard = 1e-9;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

struct Metrics {
  double rmse = 0.0;
  double mape = 0.0;
  long long n = 0;
  long long infeasible = 0;
  long long mape_excluded = 0;
};

// Prediction error magnitude equals the residual magnitude for every row,
// so the objective runs on the non-throwing residual core.
Metrics eval_metrics(const PhysicsModel& model, const std::vector<SamplePair>& pairs,
                     const std::vector<std::size_t>& subset) {
  Metrics m;
  double sum_sq = 0.0;
  double sum_ape = 0.0;
  long long n_ape = 0;
  for (std::size_t idx : subset) {
    const SamplePair& pair = pairs[idx];
    const ResidualEval eval = residual_eval(
        model, pair.sample, pair.next.has_value() ? &*pair.next : nullptr, /*with_grad=*/false);
    if (!eval.feasible) {
      ++m.infeasible;
      continue;
    }
    const double observed = observed_quantity(model.kind, pair.sample, pair.next);
    sum_sq += eval.value * eval.value;
    ++m.n;
    if (std::abs(observed) >= kMapeGuard) {
      sum_ape += std::abs(eval.value / observed);
      ++n_ape;
    } else {
      ++m.mape_excluded;
    }
  }
  m.rmse = m.n > 0 ? std::sqrt(sum_sq / static_cast<double>(m.n)) : nan();
  m.mape = n_ape > 0 ? 100.0 * sum_ape / static_cast<double>(n_ape) : nan();
  return m;
}

double objective(const PhysicsModel& model, const std::vector<SamplePair>& pairs,
                 const std::vector<std::size_t>& subset) {
  const Metrics m = eval_metrics(model, pairs, subset);
  if (m.n == 0) {
    return kInfeasiblePenalty * 2.0;
  }
  const double frac_bad =
      static_cast<double>(m.infeasible) / static_cast<double>(subset.size());
  return m.rmse + kInfeasiblePenalty * frac_bad;
}

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Bounded Nelder-Mead: every proposed vertex is clamped into the box.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const ParamBounds& bounds,
                             int max_iterations, double f_tol, double x_tol) {
  const int d = static_cast<int>(x0.size());
  auto clamp = [&](Eigen::VectorXd x) {
    for (int i = 0; i < d; ++i) {
      x[i] = std::clamp(x[i], bounds.lower[i], bounds.upper[i]);
    }
    return x;
  };

  std::vector<Eigen::VectorXd> xs;
  std::vector<double> fs;
  xs.push_back(clamp(x0));
  fs.push_back(f(xs[0]));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = xs[0];
    const double span = bounds.upper[i] - bounds.lower[i];
    double step = 0.05 * span;
    if (v[i] + step > bounds.upper[i]) {
      step = -step;
    }
    v[i] += step;
    xs.push_back(clamp(v));
    fs.push_back(f(xs.back()));
  }

  std::vector<std::size_t> order(xs.size());
  NelderMeadResult result;
  for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });

    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double x_spread = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) {
      x_spread = std::max(x_spread, (xs[order[k]] - xs[best]).cwiseAbs().maxCoeff());
    }
    if (std::abs(fs[worst] - fs[best]) < f_tol || x_spread < x_tol) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      centroid += xs[order[k]];
    }
    centroid /= static_cast<double>(order.size() - 1);

    const Eigen::VectorXd reflected = clamp(centroid + (centroid - xs[worst]));
    const double f_reflected = f(reflected);
    if (f_reflected < fs[best]) {
      const Eigen::VectorXd expanded = clamp(centroid + 2.0 * (centroid - xs[worst]));
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        xs[worst] = expanded;
        fs[worst] = f_expanded;
      } else {
        xs[worst] = reflected;
        fs[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < fs[second_worst]) {
      xs[worst] = reflected;
      fs[worst] = f_reflected;
      continue;
    }
    const Eigen::VectorXd contracted = clamp(centroid + 0.5 * (xs[worst] - centroid));
    const double f_contracted = f(contracted);
    if (f_contracted < fs[worst]) {
      xs[worst] = contracted;
      fs[worst] = f_contracted;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t k = 1; k < order.size(); ++k) {
      const std::size_t idx = order[k];
      xs[idx] = clamp(xs[best] + 0.5 * (xs[idx] - xs[best]));
      fs[idx] = f(xs[idx]);
    }
  }

  std::size_t arg_best = 0;
  for (std::size_t k = 1; k < xs.size(); ++k) {
    if (fs[k] < fs[arg_best]) {
      arg_best = k;
    }
  }
  result.x = xs[arg_best];
  result.f = fs[arg_best];
  return result;
}

}  // namespace

std::vector<SamplePair> make_sample_pairs(const std::vector<TrajectoryRecord>& records) {
  auto to_sample = [](const TrajectoryRecord& rec, double dt) {
    KinematicSample s;
    s.velocity = rec.velocity;
    s.acceleration = rec.acceleration;
    s.leader_velocity = rec.preceding_velocity.value_or(nan());
    s.space_headway = rec.preceding_id.has_value() ? rec.space_headway : nan();
    s.time_headway = rec.preceding_id.has_value() ? rec.time_headway : nan();
    s.position_y = rec.local_y;
    s.dt = dt;
    return s;
  };

  std::vector<SamplePair> pairs;
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const TrajectoryRecord& a = records[i];
    const TrajectoryRecord& b = records[i + 1];
    if (a.vehicle_id != b.vehicle_id) {
      continue;
    }
    const double dt = b.time - a.time;
    if (!(dt > 0.0)) {
      continue;
    }
    SamplePair pair;
    pair.sample = to_sample(a, dt);
    pair.next = to_sample(b, dt);
    pairs.push_back(pair);
  }
  return pairs;
}

bool pair_usable(PhysicsKind kind, const SamplePair& pair) {
  const KinematicSample& s = pair.sample;
  const bool has_next = pair.next.has_value();
  auto fin = [](double v) { return std::isfinite(v); };
  switch (kind) {
    case PhysicsKind::kVelDef:
      return has_next && fin(s.position_y) && fin(pair.next->position_y) && fin(s.velocity) &&
             s.dt > 0.0;
    case PhysicsKind::kAccDef:
      return has_next && fin(s.velocity) && fin(pair.next->velocity) && fin(s.acceleration) &&
             s.dt > 0.0;
    case PhysicsKind::kPipes:
      return fin(s.space_headway) && fin(s.velocity);
    case PhysicsKind::kForbes:
      return fin(s.time_headway) && fin(s.space_headway) && fin(s.velocity);
    case PhysicsKind::kGhr:
      return has_next && fin(s.velocity) && fin(s.leader_velocity) && fin(s.space_headway) &&
             fin(pair.next->velocity) && fin(pair.next->acceleration) && s.space_headway > 0.0 &&
             pair.next->velocity > 0.0;
    case PhysicsKind::kNewellNonlinear:
      return has_next && fin(s.space_headway) && fin(pair.next->velocity);
    case PhysicsKind::kNewellLinear:
      return has_next && fin(s.space_headway) && fin(pair.next->velocity) && s.dt > 0.0;
    case PhysicsKind::kGipps:
      return has_next && fin(s.leader_velocity) && fin(s.space_headway) &&
             fin(pair.next->velocity);
    case PhysicsKind::kVanAerde:
      return fin(s.space_headway) && fin(s.velocity);
  }
  return false;
}

ParamBounds default_bounds(PhysicsKind kind) {
  ParamBounds b;
  auto set = [&](std::initializer_list<std::pair<double, double>> ranges) {
    b.lower.resize(static_cast<Eigen::Index>(ranges.size()));
    b.upper.resize(static_cast<Eigen::Index>(ranges.size()));
    Eigen::Index i = 0;
    for (const auto& [lo, hi] : ranges) {
      b.lower[i] = lo;
      b.upper[i] = hi;
      ++i;
    }
  };
  switch (kind) {
    case PhysicsKind::kVelDef:
    case PhysicsKind::kAccDef: set({}); break;
    case PhysicsKind::kPipes: set({{0.05, 20.0}}); break;
    case PhysicsKind::kForbes: set({{0.05, 20.0}}); break;
    case PhysicsKind::kGhr: set({{1e-3, 50.0}, {0.0, 4.0}, {0.0, 4.0}}); break;
    case PhysicsKind::kNewellNonlinear: set({{1.0, 120.0}, {0.01, 20.0}, {1.0, 100.0}}); break;
    case PhysicsKind::kNewellLinear: set({{0.1, 200.0}}); break;
    case PhysicsKind::kGipps: set({{0.0, 50.0}, {1.0, 1e5}, {-10.0, 10.0}}); break;
    case PhysicsKind::kVanAerde: set({{-50.0, 50.0}, {0.0, 10.0}, {0.01, 500.0}, {1.0, 150.0}}); break;
  }
  return b;
}

CalibrationReport calibrate(PhysicsKind kind, const std::vector<SamplePair>& pairs,
                            const ParamBounds& bounds, const CalibrationOptions& options) {
  if (pairs.empty()) {
    throw EmptyDataError("calibrate: empty dataset");
  }
  const int d = beta_size(kind);
  if (bounds.lower.size() != d || bounds.upper.size() != d) {
    throw InputDomainError("calibrate: bounds must match the parameter count");
  }
  for (int i = 0; i < d; ++i) {
    if (!(bounds.lower[i] < bounds.upper[i])) {
      throw InputDomainError("calibrate: each lower bound must lie below its upper bound");
    }
  }

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pair_usable(kind, pairs[i])) {
      usable.push_back(i);
    }
  }
  CalibrationReport report;
  report.skipped = static_cast<long long>(pairs.size() - usable.size());
  if (usable.empty()) {
    throw EmptyDataError("calibrate: every sample was skipped by the preconditions");
  }

  // Deterministic holdout split.
  Rng split_rng(mix_seed(options.seed, 0x484f4c44));
  std::vector<std::size_t> shuffled = usable;
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(split_rng.bounded(i + 1));
    std::swap(shuffled[i], shuffled[j]);
  }
  std::size_t n_holdout =
      static_cast<std::size_t>(std::floor(options.holdout_fraction * shuffled.size()));
  n_holdout = std::min(n_holdout, shuffled.size() - 1);
  std::vector<std::size_t> holdout(shuffled.begin(),
                                   shuffled.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  std::vector<std::size_t> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_holdout),
                                 shuffled.end());
  report.n_train = static_cast<long long>(train.size());
  report.n_holdout = static_cast<long long>(holdout.size());

  PhysicsModel model{kind, Eigen::VectorXd(d)};
  if (d == 0) {
    // Definition operators carry no parameters; report metrics only.
    model.beta.resize(0);
    report.model = model;
    const Metrics train_metrics = eval_metrics(model, pairs, train);
    const Metrics holdout_metrics =
        holdout.empty() ? train_metrics : eval_metrics(model, pairs, holdout);
    report.rmse_train = train_metrics.rmse;
    report.mape_train = train_metrics.mape;
    report.rmse = holdout_metrics.rmse;
    report.mape = holdout_metrics.mape;
    report.notes = "no parameters";
    return report;
  }

  auto f = [&](const Eigen::VectorXd& beta) {
    return objective(PhysicsModel{kind, beta}, pairs, train);
  };

  // Latin hypercube starts: one stratum per start and coordinate, jittered.
  Rng lhs_rng(mix_seed(options.seed, 0x4c485343));
  const int starts = std::max(1, options.starts);
  Eigen::MatrixXd start_points(starts, d);
  for (int j = 0; j < d; ++j) {
    std::vector<int> strata(static_cast<std::size_t>(starts));
    std::iota(strata.begin(), strata.end(), 0);
    for (std::size_t i = strata.size() - 1; i > 0; --i) {
      const std::size_t k = static_cast<std::size_t>(lhs_rng.bounded(i + 1));
      std::swap(strata[i], strata[k]);
    }
    for (int s = 0; s < starts; ++s) {
      const double u = (static_cast<double>(strata[static_cast<std::size_t>(s)]) +
                        lhs_rng.uniform()) /
                       static_cast<double>(starts);
      start_points(s, j) = bounds.lower[j] + u * (bounds.upper[j] - bounds.lower[j]);
    }
  }

  NelderMeadResult best;
  best.f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    // Fresh-simplex restarts un-stall the search along curved valleys.
    NelderMeadResult r = nelder_mead(f, start_points.row(s).transpose(), bounds,
                                     options.max_iterations, options.f_tol, options.x_tol);
    for (int round = 1; round < 5; ++round) {
      const NelderMeadResult again = nelder_mead(f, r.x, bounds, options.max_iterations,
                                                 options.f_tol, options.x_tol);
      const bool improved = again.f < r.f - 1e-12 * (std::abs(r.f) + 1e-12);
      r.iterations += again.iterations;
      if (again.f < r.f) {
        r.x = again.x;
        r.f = again.f;
        r.converged = again.converged;
      }
      if (!improved) {
        break;
      }
    }
    StartTrace trace;
    trace.start_index = s;
    trace.rmse = r.f;
    trace.iterations = r.iterations;
    trace.converged = r.converged;
    report.starts.push_back(trace);
    if (r.f < best.f) {
      best = r;
    }
  }

  bool any_converged = false;
  for (const StartTrace& t : report.starts) {
    any_converged = any_converged || t.converged;
  }
  if (!any_converged) {
    std::string msg = "calibrate: no start converged for ";
    msg += kind_name(kind);
    msg += "; per-start rmse:";
    for (const StartTrace& t : report.starts) {
      msg += " " + std::to_string(t.rmse);
    }
    throw CalibrationError(msg);
  }

  model.beta = best.x;
  report.model = model;
  const Metrics train_metrics = eval_metrics(model, pairs, train);
  const Metrics holdout_metrics =
      holdout.empty() ? train_metrics : eval_metrics(model, pairs, holdout);
  report.rmse_train = train_metrics.rmse;
  report.mape_train = train_metrics.mape;
  report.rmse = holdout_metrics.rmse;
  report.mape = holdout_metrics.mape;
  if (kind == PhysicsKind::kGipps) {
    report.notes =
        "classic-form mapping: beta0=b*tau, beta1~b^2*tau+2l, beta2=-1/B";
  }
  return report;
}

}  // namespace prgp
