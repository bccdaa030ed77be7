#pragma once

#include <vector>

#include <Eigen/Dense>

#include "prgp/gp.hpp"
#include "prgp/physics.hpp"
#include "prgp/rng.hpp"

namespace prgp {

// One regularizing equation: a physics residual operator whose values at the
// pseudo observations are modeled by a shadow GP with mean omega.
//
// `noise_floor` is a fixed standard deviation added to the shadow
// covariance diagonal (residual units, never trained). Without it the
// trainable shadow variance lets the regularizer reward exactly
// deterministic residuals without bound, which drags the main GP toward
// confident constant predictions.
struct ShadowEquation {
  PhysicsModel model;
  double omega = 0.0;
  KernelHyperparams shadow_hp;  // kernel over the pseudo-input times
  double gamma = 1.0;           // regularization weight, >= 0
  double noise_floor = 1e-2;
  bool train_beta = true;
};

struct ShadowGP {
  std::vector<ShadowEquation> equations;
};

enum class ZSampling { kUniform, kJitteredGrid };

struct TrainConfig {
  int m = 10;  // pseudo-observation count
  int iterations = 10000;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
  double gamma_default = 1.0;
  ZSampling z_sampling = ZSampling::kJitteredGrid;

  // Stop when the exponentially smoothed negative ELBO improves by less
  // than plateau_rel_tol (relative) over plateau_window iterations.
  int plateau_window = 200;
  double plateau_rel_tol = 1e-6;

  // Fix the GP mean at each dimension's sample average instead of the
  // zero-mean form. Off by default: the zero-mean marginal likelihood is
  // the reference formulation.
  bool center_outputs = false;
};

// Flat layout of every trainable parameter: first the GP block of
// (log_lengthscale, log_signal_variance, log_tau) triples per output
// dimension, then per equation (omega, shadow log_lengthscale, shadow
// log_signal_variance, beta...).
struct ParamLayout {
  int gp_dims = 0;
  std::vector<int> beta_sizes;

  int gp_offset(int dim) const { return 3 * dim; }
  int equation_offset(int w) const;
  int size() const;
};

ParamLayout make_layout(const GPModel& model, const ShadowGP& shadow);
Eigen::VectorXd pack_params(const GPModel& model, const ShadowGP& shadow);
// Writes the flat vector back and refits the GP caches.
void apply_params(const Eigen::VectorXd& params, GPModel& model, ShadowGP& shadow);

// m input locations in [t_min, t_max], strictly increasing. kJitteredGrid
// jitters equispaced cell centers by up to half a spacing, so consecutive
// gaps stay inside (0, 2*(t_max-t_min)/m).
Eigen::VectorXd sample_pseudo_inputs(double t_min, double t_max, int m, ZSampling mode, Rng& rng);

// Residuals of every equation at a posterior sample. Equations with a t+dt
// term difference forward to the next pseudo-point and drop the last row;
// model-domain failures are masked and counted, not fatal.
struct ResidualSample {
  Eigen::MatrixXd values;        // W x m, zeros where invalid
  Eigen::MatrixXi valid;         // 1 where a residual was computed
  Eigen::VectorXi structural_len;  // per equation: m or m-1
  Eigen::VectorXi masked;        // per equation: domain-infeasible count
};

ResidualSample residuals_at_sample(const Eigen::MatrixXd& f_hat, const Eigen::VectorXd& z,
                                   const std::vector<ShadowEquation>& equations);

struct ElboEstimate {
  double total = 0.0;      // data_term + sum_w gamma_w * reg_terms[w]
  double data_term = 0.0;
  Eigen::VectorXd reg_terms;  // per equation, unweighted; NaN when skipped
  Eigen::VectorXd grad;       // ParamLayout order
  Eigen::VectorXi masked_counts;
  int clamp_count = 0;
};

// Single-sample unbiased ELBO estimate at the posterior draw
// f_hat = mu(Z) + sqrt(nu(Z)) * eps, with the full reparameterized gradient.
// Throws RegularizerDegeneracyError when an active equation has more than
// half of its residuals masked.
ElboEstimate elbo_estimate(const GPModel& model, const ShadowGP& shadow, const Eigen::VectorXd& z,
                           const Eigen::MatrixXd& eps, const TrainConfig& config);

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long long step = 0;
};

// Bias-corrected ascent step; moment constants fixed at (0.9, 0.999, 1e-8).
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double learning_rate);

}  // namespace prgp
