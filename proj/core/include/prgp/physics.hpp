#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "prgp/errors.hpp"
#include "prgp/gp.hpp"

namespace prgp {

// The seven closed-form car-following models plus the two kinematic
// definition operators, each usable as a regularizing residual equation.
enum class PhysicsKind {
  kVelDef,
  kAccDef,
  kPipes,
  kForbes,
  kGhr,
  kNewellNonlinear,
  kNewellLinear,
  kGipps,
  kVanAerde,
};

inline constexpr int kPhysicsKindCount = 9;

enum class PredictedQuantity { kVelocity, kAcceleration, kSpaceGap };

// Machine name, e.g. "newell_nonlinear"; accepted by configs and CLI flags.
const char* kind_name(PhysicsKind kind);
// Display label, e.g. "NN"; used in report rows and method tags.
const char* kind_label(PhysicsKind kind);
std::optional<PhysicsKind> kind_from_name(std::string_view name);

int beta_size(PhysicsKind kind);
PredictedQuantity predicted_quantity(PhysicsKind kind);
const char* quantity_name(PredictedQuantity q);

// True for operators that reference t + dt and therefore need the next
// sample (or the next pseudo-observation row).
bool needs_next_sample(PhysicsKind kind);

// Conventional freeway parameter defaults (feet/seconds units).
Eigen::VectorXd default_beta(PhysicsKind kind);

struct PhysicsModel {
  PhysicsKind kind = PhysicsKind::kPipes;
  Eigen::VectorXd beta;
};

PhysicsModel make_physics_model(PhysicsKind kind);
PhysicsModel make_physics_model(PhysicsKind kind, Eigen::VectorXd beta);

// One observation row in the units the residual operators expect.
struct KinematicSample {
  double velocity = 0.0;         // ft/s
  double acceleration = 0.0;     // ft/s^2
  double leader_velocity = 0.0;  // ft/s
  double space_headway = 0.0;    // ft
  double time_headway = 0.0;     // s
  double position_y = 0.0;       // ft, longitudinal
  double dt = 0.0;               // s, gap to the next sample
};

struct VaCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

// Van Aerde coefficients from macroscopic parameters:
//   c1 = v_f (2 v_m - v_f) / (k_j v_m^2)
//   c2 = v_f (v_f - v_m)^2 / (k_j v_m^2)
//   c3 = 1/q_m - v_f / (k_j v_m^2)
VaCoefficients va_coefficients(double v_f, double k_j, double v_m, double q_m);

// Van Aerde residual parameters (beta0..beta3) = (c1, c3, c2, v_f).
PhysicsModel van_aerde_from_macroscopic(double v_f, double k_j, double v_m, double q_m);

// Left-hand residual value g of the model's governing equation on a sample.
// Models with a t+dt term require `next`. Throws ModelDomainError outside
// the equation's domain and InputDomainError on missing/ill-formed inputs.
double residual(const PhysicsModel& model, const KinematicSample& sample,
                const std::optional<KinematicSample>& next = std::nullopt);

// The model equation solved for its predicted quantity.
double predict_quantity(const PhysicsModel& model, const KinematicSample& sample,
                        const std::optional<KinematicSample>& next = std::nullopt);

// The data-side counterpart compared against predict_quantity in
// calibration and baseline evaluation.
double observed_quantity(PhysicsKind kind, const KinematicSample& sample,
                         const std::optional<KinematicSample>& next = std::nullopt);

// Residual value plus partials; the non-throwing core shared by residual()
// and the training-time regularizer. d_sample/d_next are indexed by
// OutputDim (position_x entry always zero).
struct ResidualEval {
  double value = 0.0;
  bool feasible = false;
  const char* domain_error = nullptr;  // set when !feasible
  Eigen::Matrix<double, kTrajectoryDims, 1> d_sample;
  Eigen::Matrix<double, kTrajectoryDims, 1> d_next;
  Eigen::VectorXd d_beta;
};

ResidualEval residual_eval(const PhysicsModel& model, const KinematicSample& sample,
                           const KinematicSample* next, bool with_grad);

}  // namespace prgp
