#include "prgp/kernel.hpp"

#include <Eigen/Cholesky>

namespace prgp {

namespace {

constexpr double kJitterFloor = 1e-8;
constexpr double kJitterCeiling = 1e-2;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

bool cholesky_ok(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

double eval_kernel(double x1, double x2, const KernelHyperparams& hp) {
  if (!std::isfinite(x1) || !std::isfinite(x2)) {
    throw InputDomainError("eval_kernel: non-finite input");
  }
  const double l = hp.lengthscale();
  const double d = x1 - x2;
  return hp.signal_variance() * std::exp(-0.5 * d * d / (l * l));
}

std::uint64_t gram_cache_key(const Eigen::VectorXd& inputs, const KernelHyperparams& hp) {
  std::uint64_t h = 1469598103934665603ULL;
  h = fnv1a(inputs.data(), sizeof(double) * static_cast<std::size_t>(inputs.size()), h);
  const double params[3] = {hp.log_lengthscale, hp.log_signal_variance, hp.jitter};
  return fnv1a(params, sizeof(params), h);
}

GramMatrix build_gram(const Eigen::VectorXd& inputs, const KernelHyperparams& hp) {
  const Eigen::Index n = inputs.size();
  if (n == 0) {
    throw EmptyDataError("build_gram: empty input set");
  }
  if (!inputs.allFinite()) {
    throw InputDomainError("build_gram: non-finite input");
  }
  if (!(hp.jitter >= 0.0)) {
    throw InputDomainError("build_gram: jitter must be non-negative");
  }

  const double s2 = hp.signal_variance();
  const double l = hp.lengthscale();
  const double inv_2l2 = 0.5 / (l * l);

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = inputs[i] - inputs[j];
      const double v = s2 * std::exp(-d * d * inv_2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }

  double jitter = hp.jitter;
  for (;;) {
    Eigen::MatrixXd with_jitter = k;
    with_jitter.diagonal().array() += jitter * s2;
    if (cholesky_ok(with_jitter)) {
      return GramMatrix{std::move(with_jitter), gram_cache_key(inputs, hp), jitter};
    }
    if (jitter >= kJitterCeiling) {
      throw IllConditionedKernelError(
          "build_gram: Gram matrix not positive definite after jitter escalation", jitter);
    }
    jitter = jitter <= 0.0 ? kJitterFloor : jitter * 10.0;
    if (jitter > kJitterCeiling) {
      jitter = kJitterCeiling;
    }
  }
}

GramGradients grad_gram(const Eigen::VectorXd& inputs, const KernelHyperparams& hp) {
  const Eigen::Index n = inputs.size();
  if (n == 0) {
    throw EmptyDataError("grad_gram: empty input set");
  }
  if (!inputs.allFinite()) {
    throw InputDomainError("grad_gram: non-finite input");
  }

  const double s2 = hp.signal_variance();
  const double l = hp.lengthscale();
  const double inv_l2 = 1.0 / (l * l);

  GramGradients g;
  g.d_log_signal_variance.resize(n, n);
  g.d_log_lengthscale.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.d_log_signal_variance(i, i) = s2;
    g.d_log_lengthscale(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = inputs[i] - inputs[j];
      const double r2 = d * d * inv_l2;
      const double k = s2 * std::exp(-0.5 * r2);
      g.d_log_signal_variance(i, j) = k;
      g.d_log_signal_variance(j, i) = k;
      // d/d log l of exp(-d^2/(2 l^2)) brings down +d^2/l^2.
      g.d_log_lengthscale(i, j) = k * r2;
      g.d_log_lengthscale(j, i) = k * r2;
    }
  }
  return g;
}

}  // namespace prgp
