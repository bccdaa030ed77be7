#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "prgp/errors.hpp"

namespace prgp {

// Squared-exponential kernel hyperparameters, stored in log-space so that
// unconstrained gradient steps preserve positivity. `jitter` is a fixed
// relative diagonal regularizer (scaled by the signal variance), never
// trained.
struct KernelHyperparams {
  double log_lengthscale = 0.0;      // log seconds
  double log_signal_variance = 0.0;  // log of output-units^2
  double jitter = 1e-8;

  double lengthscale() const { return std::exp(log_lengthscale); }
  double signal_variance() const { return std::exp(log_signal_variance); }
};

// Dense kernel matrix over one input set, jitter already applied to the
// diagonal and positive definiteness verified by an actual Cholesky attempt.
struct GramMatrix {
  Eigen::MatrixXd entries;
  std::uint64_t inputs_hash = 0;  // cache key over (inputs, hyperparams)
  double jitter_applied = 0.0;    // relative jitter that made the factorization pass
};

struct GramGradients {
  Eigen::MatrixXd d_log_lengthscale;
  // Chain rule on the log parameterization makes this the jitter-free Gram
  // matrix itself.
  Eigen::MatrixXd d_log_signal_variance;
};

// k(x1, x2) = s2 * exp(-(x1-x2)^2 / (2 l^2)). Throws InputDomainError on
// non-finite inputs.
double eval_kernel(double x1, double x2, const KernelHyperparams& hp);

// N x N kernel matrix plus jitter*s2 on the diagonal. On factorization
// failure the jitter escalates tenfold per retry up to 1e-2; past that an
// IllConditionedKernelError carries the final jitter tried.
GramMatrix build_gram(const Eigen::VectorXd& inputs, const KernelHyperparams& hp);

GramGradients grad_gram(const Eigen::VectorXd& inputs, const KernelHyperparams& hp);

std::uint64_t gram_cache_key(const Eigen::VectorXd& inputs, const KernelHyperparams& hp);

}  // namespace prgp
