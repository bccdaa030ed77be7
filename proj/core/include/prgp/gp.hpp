#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "prgp/kernel.hpp"

namespace prgp {

// Fixed output ordering of the trajectory task (d' = 7).
enum OutputDim : int {
  kPositionX = 0,
  kPositionY = 1,
  kVelocity = 2,
  kAcceleration = 3,
  kPrecedingVelocity = 4,
  kSpaceHeadway = 5,
  kTimeHeadway = 6,
};
inline constexpr int kTrajectoryDims = 7;

// Stable names used in report CSVs and plot file names.
const char* output_dim_name(int dim);

struct PosteriorPrediction {
  Eigen::VectorXd mean;      // one entry per output dimension
  Eigen::VectorXd variance;  // >= 0 after clamping
  int clamp_count = 0;       // dimensions whose raw variance came out negative
};

// Posterior summaries of one output dimension at a batch of query points,
// optionally with sensitivities to that dimension's three trainable
// hyperparameters, ordered (log_lengthscale, log_signal_variance, log_tau).
struct PosteriorBatch {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd d_mean;      // n x 3, empty unless requested
  Eigen::MatrixXd d_variance;  // n x 3, zeroed rows where the clamp engaged
  int clamp_count = 0;
};

// Exact multi-output GP over a shared scalar input: one independent
// single-output GP per column of `outputs`, each with its own kernel
// hyperparameters and noise precision. Once refit, the model is immutable
// for prediction and safe to share across threads.
//
// `output_offset` is a fixed per-dimension constant mean (not trained):
// the model is N(y | c, K + tau^-1 I), i.e. the zero-mean form applied to
// y - c. Defaults to zero. The trainer pins it at the per-dimension sample
// mean so that raw-scale outputs do not force the signal variance to absorb
// a constant offset.
class GPModel {
 public:
  GPModel(Eigen::VectorXd inputs, Eigen::MatrixXd outputs,
          std::vector<KernelHyperparams> hp, Eigen::VectorXd log_tau,
          Eigen::VectorXd output_offset = Eigen::VectorXd());

  // Rebuilds the per-dimension Cholesky factor of (K + tau^-1 I) and the
  // alpha = (K + tau^-1 I)^-1 y solve. Must be called after any
  // hyperparameter mutation and before prediction.
  void refit();

  int dims() const { return static_cast<int>(outputs_.cols()); }
  int size() const { return static_cast<int>(inputs_.size()); }
  const Eigen::VectorXd& inputs() const { return inputs_; }
  const Eigen::MatrixXd& outputs() const { return outputs_; }
  const Eigen::VectorXd& output_offset() const { return offset_; }

  const KernelHyperparams& hyperparams(int dim) const { return hp_[static_cast<std::size_t>(dim)]; }
  KernelHyperparams& hyperparams(int dim) { return hp_[static_cast<std::size_t>(dim)]; }
  double log_tau(int dim) const { return log_tau_[dim]; }
  double& log_tau(int dim) { return log_tau_[dim]; }
  double tau(int dim) const { return std::exp(log_tau_[dim]); }

  // log N(y_dim | 0, K + tau^-1 I) via the cached factorization.
  double log_marginal_likelihood(int dim) const;

  // Gradient of the log marginal likelihood w.r.t.
  // (log_lengthscale, log_signal_variance, log_tau) of `dim`.
  Eigen::Vector3d log_marginal_likelihood_grad(int dim) const;

  PosteriorPrediction posterior_predict(double x_star) const;

  PosteriorBatch posterior_batch(int dim, const Eigen::VectorXd& z, bool with_grad) const;

  // Reparameterized posterior draw at the points z: out(p, j) =
  // mean_j(z_p) + sqrt(var_j(z_p)) * eps(p, j). Deterministic in eps.
  Eigen::MatrixXd sample_posterior(const Eigen::VectorXd& z, const Eigen::MatrixXd& eps) const;

  // Lower-triangular factor of K + tau^-1 I for one dimension.
  const Eigen::MatrixXd& chol(int dim) const;
  const Eigen::VectorXd& alpha(int dim) const;

 private:
  struct DimCache {
    Eigen::MatrixXd l;      // lower Cholesky factor
    Eigen::VectorXd alpha;  // (K + tau^-1 I)^-1 y
    std::uint64_t key = 0;
    double jitter_applied = 0.0;
  };

  std::uint64_t cache_key(int dim) const;
  const DimCache& checked_cache(int dim) const;

  Eigen::VectorXd inputs_;
  Eigen::MatrixXd outputs_;
  std::vector<KernelHyperparams> hp_;
  Eigen::VectorXd log_tau_;
  Eigen::VectorXd offset_;
  std::vector<DimCache> cache_;
};

}  // namespace prgp
