#include "prgp/physics.hpp"

#include <cmath>

namespace prgp {

namespace {

constexpr double kVaPoleGuard = 1e-6;
constexpr double kNewellNuGuard = 1e-9;
constexpr double kExpOverflowGuard = 500.0;

bool finite(double v) { return std::isfinite(v); }

void require_finite(bool ok, const char* what) {
  if (!ok) {
    throw InputDomainError(std::string("physics: non-finite ") + what);
  }
}

}  // namespace

const char* kind_name(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef: return "vel_def";
    case PhysicsKind::kAccDef: return "acc_def";
    case PhysicsKind::kPipes: return "pipes";
    case PhysicsKind::kForbes: return "forbes";
    case PhysicsKind::kGhr: return "ghr";
    case PhysicsKind::kNewellNonlinear: return "newell_nonlinear";
    case PhysicsKind::kNewellLinear: return "newell_linear";
    case PhysicsKind::kGipps: return "gipps";
    case PhysicsKind::kVanAerde: return "van_aerde";
  }
  return "unknown";
}

const char* kind_label(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef: return "Vel-DEF";
    case PhysicsKind::kAccDef: return "Acc-DEF";
    case PhysicsKind::kPipes: return "Pipes";
    case PhysicsKind::kForbes: return "Forbes";
    case PhysicsKind::kGhr: return "GHR";
    case PhysicsKind::kNewellNonlinear: return "NN";
    case PhysicsKind::kNewellLinear: return "NL";
    case PhysicsKind::kGipps: return "Gipps";
    case PhysicsKind::kVanAerde: return "VA";
  }
  return "unknown";
}

std::optional<PhysicsKind> kind_from_name(std::string_view name) {
  static constexpr PhysicsKind kAll[kPhysicsKindCount] = {
      PhysicsKind::kVelDef,          PhysicsKind::kAccDef, PhysicsKind::kPipes,
      PhysicsKind::kForbes,          PhysicsKind::kGhr,    PhysicsKind::kNewellNonlinear,
      PhysicsKind::kNewellLinear,    PhysicsKind::kGipps,  PhysicsKind::kVanAerde,
  };
  for (PhysicsKind k : kAll) {
    if (name == kind_name(k) || name == kind_label(k)) {
      return k;
    }
  }
  return std::nullopt;
}

int beta_size(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef:
    case PhysicsKind::kAccDef: return 0;
    case PhysicsKind::kPipes:
    case PhysicsKind::kForbes:
    case PhysicsKind::kNewellLinear: return 1;
    case PhysicsKind::kGhr:
    case PhysicsKind::kNewellNonlinear:
    case PhysicsKind::kGipps: return 3;
    case PhysicsKind::kVanAerde: return 4;
  }
  return 0;
}

PredictedQuantity predicted_quantity(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef:
    case PhysicsKind::kNewellNonlinear:
    case PhysicsKind::kNewellLinear:
    case PhysicsKind::kGipps: return PredictedQuantity::kVelocity;
    case PhysicsKind::kAccDef:
    case PhysicsKind::kGhr: return PredictedQuantity::kAcceleration;
    case PhysicsKind::kPipes:
    case PhysicsKind::kForbes:
    case PhysicsKind::kVanAerde: return PredictedQuantity::kSpaceGap;
  }
  return PredictedQuantity::kVelocity;
}

const char* quantity_name(PredictedQuantity q) {
  switch (q) {
    case PredictedQuantity::kVelocity: return "velocity";
    case PredictedQuantity::kAcceleration: return "acceleration";
    case PredictedQuantity::kSpaceGap: return "space_gap";
  }
  return "unknown";
}

bool needs_next_sample(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef:
    case PhysicsKind::kAccDef:
    case PhysicsKind::kGhr:
    case PhysicsKind::kNewellNonlinear:
    case PhysicsKind::kNewellLinear:
    case PhysicsKind::kGipps: return true;
    default: return false;
  }
}

Eigen::VectorXd default_beta(PhysicsKind kind) {
  switch (kind) {
    case PhysicsKind::kVelDef:
    case PhysicsKind::kAccDef: return Eigen::VectorXd(0);
    case PhysicsKind::kPipes: return Eigen::VectorXd::Constant(1, 3.6);
    case PhysicsKind::kForbes: return Eigen::VectorXd::Constant(1, 0.81);
    case PhysicsKind::kGhr: {
      Eigen::VectorXd b(3);
      b << 0.8, 2.0, 1.5;
      return b;
    }
    case PhysicsKind::kNewellNonlinear: {
      Eigen::VectorXd b(3);
      b << 40.0, 2.49, 33.16;
      return b;
    }
    case PhysicsKind::kNewellLinear: return Eigen::VectorXd::Constant(1, 33.16);
    case PhysicsKind::kGipps: {
      // Mapping from the classic form with (b, tau, B, l) = (1, 0.1, 1, 6):
      // beta0 = b*tau, beta1 ~ b^2*tau + 2l, beta2 = -1/B.
      Eigen::VectorXd b(3);
      b << 0.1, 12.1, -1.0;
      return b;
    }
    case PhysicsKind::kVanAerde:
      return van_aerde_from_macroscopic(11.11, 0.25, 8.33, 0.708).beta;
  }
  return Eigen::VectorXd(0);
}

PhysicsModel make_physics_model(PhysicsKind kind) {
  return PhysicsModel{kind, default_beta(kind)};
}

PhysicsModel make_physics_model(PhysicsKind kind, Eigen::VectorXd beta) {
  if (beta.size() != beta_size(kind)) {
    throw InputDomainError(std::string("physics: ") + kind_name(kind) + " takes " +
                           std::to_string(beta_size(kind)) + " parameters, got " +
                           std::to_string(beta.size()));
  }
  if (!beta.allFinite()) {
    throw InputDomainError("physics: non-finite parameter vector");
  }
  return PhysicsModel{kind, std::move(beta)};
}

VaCoefficients va_coefficients(double v_f, double k_j, double v_m, double q_m) {
  if (!(k_j > 0.0) || !(v_m > 0.0) || !(q_m > 0.0) || !(v_f > v_m)) {
    throw InputDomainError("va_coefficients: require k_j>0, v_m>0, q_m>0, v_f>v_m");
  }
  const double base = v_f / (k_j * v_m * v_m);
  VaCoefficients c;
  c.c1 = base * (2.0 * v_m - v_f);
  c.c2 = base * (v_f - v_m) * (v_f - v_m);
  c.c3 = 1.0 / q_m - base;
  return c;
}

PhysicsModel van_aerde_from_macroscopic(double v_f, double k_j, double v_m, double q_m) {
  const VaCoefficients c = va_coefficients(v_f, k_j, v_m, q_m);
  Eigen::VectorXd beta(4);
  // Residual form s - b0 - b1*v - b2/(b3 - v) against s = c1 + c3*v + c2/(v_f - v).
  beta << c.c1, c.c3, c.c2, v_f;
  return PhysicsModel{PhysicsKind::kVanAerde, beta};
}

ResidualEval residual_eval(const PhysicsModel& model, const KinematicSample& s,
                           const KinematicSample* next, bool with_grad) {
  ResidualEval out;
  out.d_sample.setZero();
  out.d_next.setZero();
  if (with_grad) {
    out.d_beta.setZero(model.beta.size());
  }
  const Eigen::VectorXd& b = model.beta;

  switch (model.kind) {
    case PhysicsKind::kVelDef: {
      if (next == nullptr || !(s.dt > 0.0)) {
        out.domain_error = "vel_def: next sample with positive dt required";
        return out;
      }
      out.value = (next->position_y - s.position_y) / s.dt - s.velocity;
      out.feasible = true;
      if (with_grad) {
        out.d_sample[kPositionY] = -1.0 / s.dt;
        out.d_sample[kVelocity] = -1.0;
        out.d_next[kPositionY] = 1.0 / s.dt;
      }
      return out;
    }
    case PhysicsKind::kAccDef: {
      if (next == nullptr || !(s.dt > 0.0)) {
        out.domain_error = "acc_def: next sample with positive dt required";
        return out;
      }
      out.value = (next->velocity - s.velocity) / s.dt - s.acceleration;
      out.feasible = true;
      if (with_grad) {
        out.d_sample[kVelocity] = -1.0 / s.dt;
        out.d_sample[kAcceleration] = -1.0;
        out.d_next[kVelocity] = 1.0 / s.dt;
      }
      return out;
    }
    case PhysicsKind::kPipes: {
      out.value = s.space_headway - s.velocity * b[0];
      out.feasible = finite(out.value);
      if (with_grad) {
        out.d_sample[kSpaceHeadway] = 1.0;
        out.d_sample[kVelocity] = -b[0];
        out.d_beta[0] = -s.velocity;
      }
      return out;
    }
    case PhysicsKind::kForbes: {
      out.value = s.time_headway - s.space_headway + s.velocity * b[0];
      out.feasible = finite(out.value);
      if (with_grad) {
        out.d_sample[kTimeHeadway] = 1.0;
        out.d_sample[kSpaceHeadway] = -1.0;
        out.d_sample[kVelocity] = b[0];
        out.d_beta[0] = s.velocity;
      }
      return out;
    }
    case PhysicsKind::kGhr: {
      if (next == nullptr) {
        out.domain_error = "ghr: next sample required";
        return out;
      }
      const double v_next = next->velocity;
      const double gap = s.space_headway;
      if (!(v_next > 0.0)) {
        out.domain_error = "ghr: velocity at t+dt must be positive";
        return out;
      }
      if (!(gap > 0.0)) {
        out.domain_error = "ghr: space headway must be positive";
        return out;
      }
      const double dv = s.leader_velocity - s.velocity;
      const double pow_v = std::pow(v_next, b[1]);
      const double pow_s = std::pow(gap, -b[2]);
      const double term = b[0] * pow_v * dv * pow_s;
      out.value = next->acceleration - term;
      out.feasible = finite(out.value);
      if (with_grad && out.feasible) {
        out.d_next[kAcceleration] = 1.0;
        out.d_next[kVelocity] = -term * b[1] / v_next;
        out.d_sample[kPrecedingVelocity] = -b[0] * pow_v * pow_s;
        out.d_sample[kVelocity] = b[0] * pow_v * pow_s;
        out.d_sample[kSpaceHeadway] = term * b[2] / gap;
        out.d_beta[0] = -pow_v * dv * pow_s;
        out.d_beta[1] = -term * std::log(v_next);
        out.d_beta[2] = term * std::log(gap);
      }
      return out;
    }
    case PhysicsKind::kNewellNonlinear: {
      if (next == nullptr) {
        out.domain_error = "newell_nonlinear: next sample required";
        return out;
      }
      const double nu = b[0];
      const double lambda = b[1];
      const double len = b[2];
      if (std::abs(nu) < kNewellNuGuard) {
        out.domain_error = "newell_nonlinear: free-flow speed parameter too close to zero";
        return out;
      }
      const double expo = -(lambda / nu) * (s.space_headway - len);
      if (std::abs(expo) > kExpOverflowGuard) {
        out.domain_error = "newell_nonlinear: exponent overflow";
        return out;
      }
      const double e = std::exp(expo);
      out.value = next->velocity - nu * (1.0 - e);
      out.feasible = finite(out.value);
      if (with_grad && out.feasible) {
        out.d_next[kVelocity] = 1.0;
        out.d_sample[kSpaceHeadway] = -lambda * e;
        out.d_beta[0] = -1.0 + e + e * lambda * (s.space_headway - len) / nu;
        out.d_beta[1] = -e * (s.space_headway - len);
        out.d_beta[2] = lambda * e;
      }
      return out;
    }
    case PhysicsKind::kNewellLinear: {
      if (next == nullptr || !(s.dt > 0.0)) {
        out.domain_error = "newell_linear: next sample with positive dt required";
        return out;
      }
      out.value = next->velocity - (s.space_headway - b[0]) / s.dt;
      out.feasible = finite(out.value);
      if (with_grad) {
        out.d_next[kVelocity] = 1.0;
        out.d_sample[kSpaceHeadway] = -1.0 / s.dt;
        out.d_beta[0] = 1.0 / s.dt;
      }
      return out;
    }
    case PhysicsKind::kGipps: {
      if (next == nullptr) {
        out.domain_error = "gipps: next sample required";
        return out;
      }
      const double lv = s.leader_velocity;
      const double radicand = b[1] + b[2] * lv * lv - 2.0 * s.space_headway;
      if (!(radicand > 0.0)) {
        out.domain_error = "gipps: negative radicand";
        return out;
      }
      const double root = std::sqrt(radicand);
      out.value = next->velocity + b[0] - root;
      out.feasible = finite(out.value);
      if (with_grad && out.feasible) {
        out.d_next[kVelocity] = 1.0;
        out.d_sample[kPrecedingVelocity] = -b[2] * lv / root;
        out.d_sample[kSpaceHeadway] = 1.0 / root;
        out.d_beta[0] = 1.0;
        out.d_beta[1] = -0.5 / root;
        out.d_beta[2] = -0.5 * lv * lv / root;
      }
      return out;
    }
    case PhysicsKind::kVanAerde: {
      const double u = b[3] - s.velocity;
      if (!(u > kVaPoleGuard)) {
        out.domain_error = "van_aerde: velocity at or beyond the free-flow pole";
        return out;
      }
      out.value = s.space_headway - b[0] - b[1] * s.velocity - b[2] / u;
      out.feasible = finite(out.value);
      if (with_grad && out.feasible) {
        out.d_sample[kSpaceHeadway] = 1.0;
        out.d_sample[kVelocity] = -b[1] - b[2] / (u * u);
        out.d_beta[0] = -1.0;
        out.d_beta[1] = -s.velocity;
        out.d_beta[2] = -1.0 / u;
        out.d_beta[3] = b[2] / (u * u);
      }
      return out;
    }
  }
  out.domain_error = "unknown physics kind";
  return out;
}

namespace {

// Finiteness preconditions for the fields each kind actually reads.
void check_inputs(const PhysicsModel& model, const KinematicSample& s,
                  const std::optional<KinematicSample>& next) {
  if (needs_next_sample(model.kind) && !next.has_value()) {
    throw InputDomainError(std::string("physics: ") + kind_name(model.kind) +
                           " needs the sample at t+dt");
  }
  switch (model.kind) {
    case PhysicsKind::kVelDef:
      require_finite(finite(s.position_y) && finite(s.velocity) && finite(s.dt) &&
                         finite(next->position_y),
                     "vel_def inputs");
      break;
    case PhysicsKind::kAccDef:
      require_finite(finite(s.velocity) && finite(s.acceleration) && finite(s.dt) &&
                         finite(next->velocity),
                     "acc_def inputs");
      break;
    case PhysicsKind::kPipes:
      require_finite(finite(s.space_headway) && finite(s.velocity), "pipes inputs");
      break;
    case PhysicsKind::kForbes:
      require_finite(finite(s.time_headway) && finite(s.space_headway) && finite(s.velocity),
                     "forbes inputs");
      break;
    case PhysicsKind::kGhr:
      require_finite(finite(s.velocity) && finite(s.leader_velocity) && finite(s.space_headway) &&
                         finite(next->velocity) && finite(next->acceleration),
                     "ghr inputs");
      break;
    case PhysicsKind::kNewellNonlinear:
    case PhysicsKind::kNewellLinear:
      require_finite(finite(s.space_headway) && finite(next->velocity) && finite(s.dt),
                     "newell inputs");
      break;
    case PhysicsKind::kGipps:
      require_finite(finite(s.leader_velocity) && finite(s.space_headway) &&
                         finite(next->velocity),
                     "gipps inputs");
      break;
    case PhysicsKind::kVanAerde:
      require_finite(finite(s.space_headway) && finite(s.velocity), "van_aerde inputs");
      break;
  }
}

}  // namespace

double residual(const PhysicsModel& model, const KinematicSample& sample,
                const std::optional<KinematicSample>& next) {
  check_inputs(model, sample, next);
  const ResidualEval eval =
      residual_eval(model, sample, next.has_value() ? &*next : nullptr, /*with_grad=*/false);
  if (!eval.feasible) {
    throw ModelDomainError(eval.domain_error != nullptr ? eval.domain_error
                                                        : "physics: infeasible sample");
  }
  return eval.value;
}

double predict_quantity(const PhysicsModel& model, const KinematicSample& sample,
                        const std::optional<KinematicSample>& next) {
  const Eigen::VectorXd& b = model.beta;
  switch (model.kind) {
    case PhysicsKind::kVelDef:
      if (!next.has_value()) {
        throw InputDomainError("predict_quantity: vel_def needs the sample at t+dt");
      }
      require_finite(finite(sample.position_y) && finite(next->position_y), "vel_def inputs");
      if (!(sample.dt > 0.0)) {
        throw ModelDomainError("vel_def: positive dt required");
      }
      return (next->position_y - sample.position_y) / sample.dt;
    case PhysicsKind::kAccDef:
      if (!next.has_value()) {
        throw InputDomainError("predict_quantity: acc_def needs the sample at t+dt");
      }
      require_finite(finite(sample.velocity) && finite(next->velocity), "acc_def inputs");
      if (!(sample.dt > 0.0)) {
        throw ModelDomainError("acc_def: positive dt required");
      }
      return (next->velocity - sample.velocity) / sample.dt;
    case PhysicsKind::kPipes:
      require_finite(finite(sample.velocity), "pipes inputs");
      return sample.velocity * b[0];
    case PhysicsKind::kForbes:
      require_finite(finite(sample.time_headway) && finite(sample.velocity), "forbes inputs");
      return sample.time_headway + sample.velocity * b[0];
    case PhysicsKind::kGhr: {
      // Acceleration at t+dt from the t states and the velocity at t+dt.
      if (!next.has_value()) {
        throw InputDomainError("predict_quantity: ghr needs the sample at t+dt");
      }
      require_finite(finite(sample.velocity) && finite(sample.leader_velocity) &&
                         finite(sample.space_headway) && finite(next->velocity),
                     "ghr inputs");
      if (!(next->velocity > 0.0)) {
        throw ModelDomainError("ghr: velocity at t+dt must be positive");
      }
      if (!(sample.space_headway > 0.0)) {
        throw ModelDomainError("ghr: space headway must be positive");
      }
      return b[0] * std::pow(next->velocity, b[1]) *
             (sample.leader_velocity - sample.velocity) * std::pow(sample.space_headway, -b[2]);
    }
    case PhysicsKind::kNewellNonlinear: {
      require_finite(finite(sample.space_headway), "newell_nonlinear inputs");
      const double nu = b[0];
      if (std::abs(nu) < kNewellNuGuard) {
        throw ModelDomainError("newell_nonlinear: free-flow speed parameter too close to zero");
      }
      const double expo = -(b[1] / nu) * (sample.space_headway - b[2]);
      if (std::abs(expo) > kExpOverflowGuard) {
        throw ModelDomainError("newell_nonlinear: exponent overflow");
      }
      return nu * (1.0 - std::exp(expo));
    }
    case PhysicsKind::kNewellLinear:
      require_finite(finite(sample.space_headway) && finite(sample.dt), "newell_linear inputs");
      if (!(sample.dt > 0.0)) {
        throw ModelDomainError("newell_linear: positive dt required");
      }
      return (sample.space_headway - b[0]) / sample.dt;
    case PhysicsKind::kGipps: {
      require_finite(finite(sample.leader_velocity) && finite(sample.space_headway),
                     "gipps inputs");
      const double lv = sample.leader_velocity;
      const double radicand = b[1] + b[2] * lv * lv - 2.0 * sample.space_headway;
      if (!(radicand > 0.0)) {
        throw ModelDomainError("gipps: negative radicand");
      }
      return std::sqrt(radicand) - b[0];
    }
    case PhysicsKind::kVanAerde: {
      require_finite(finite(sample.velocity), "van_aerde inputs");
      const double u = b[3] - sample.velocity;
      if (!(u > kVaPoleGuard)) {
        throw ModelDomainError("van_aerde: velocity at or beyond the free-flow pole");
      }
      return b[0] + b[1] * sample.velocity + b[2] / u;
    }
  }
  throw InputDomainError("predict_quantity: unknown kind");
}

double observed_quantity(PhysicsKind kind, const KinematicSample& sample,
                         const std::optional<KinematicSample>& next) {
  switch (kind) {
    case PhysicsKind::kVelDef: return sample.velocity;
    case PhysicsKind::kAccDef: return sample.acceleration;
    case PhysicsKind::kPipes:
    case PhysicsKind::kForbes:
    case PhysicsKind::kVanAerde: return sample.space_headway;
    case PhysicsKind::kGhr:
      if (!next.has_value()) {
        throw InputDomainError("observed_quantity: ghr needs the sample at t+dt");
      }
      return next->acceleration;
    case PhysicsKind::kNewellNonlinear:
    case PhysicsKind::kNewellLinear:
    case PhysicsKind::kGipps:
      if (!next.has_value()) {
        throw InputDomainError("observed_quantity: velocity rows need the sample at t+dt");
      }
      return next->velocity;
  }
  throw InputDomainError("observed_quantity: unknown kind");
}

}  // namespace prgp
