#include "prgp/gp.hpp"

#include <bit>
#include <cmath>

#include <Eigen/Cholesky>

namespace prgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

const char* output_dim_name(int dim) {
  static const char* const kNames[kTrajectoryDims] = {
      "position_x",  "position_y",    "velocity",     "acceleration",
      "preceding_velocity", "space_headway", "time_headway",
  };
  if (dim < 0 || dim >= kTrajectoryDims) {
    throw InputDomainError("output_dim_name: dimension out of range");
  }
  return kNames[dim];
}

GPModel::GPModel(Eigen::VectorXd inputs, Eigen::MatrixXd outputs,
                 std::vector<KernelHyperparams> hp, Eigen::VectorXd log_tau,
                 Eigen::VectorXd output_offset)
    : inputs_(std::move(inputs)),
      outputs_(std::move(outputs)),
      hp_(std::move(hp)),
      log_tau_(std::move(log_tau)),
      offset_(std::move(output_offset)) {
  if (inputs_.size() == 0) {
    throw EmptyDataError("GPModel: no training inputs");
  }
  if (outputs_.rows() != inputs_.size()) {
    throw InputDomainError("GPModel: outputs row count does not match inputs");
  }
  if (static_cast<Eigen::Index>(hp_.size()) != outputs_.cols() ||
      log_tau_.size() != outputs_.cols()) {
    throw InputDomainError("GPModel: one hyperparameter set per output dimension required");
  }
  if (!inputs_.allFinite() || !outputs_.allFinite()) {
    throw InputDomainError("GPModel: non-finite training data");
  }
  if (offset_.size() == 0) {
    offset_ = Eigen::VectorXd::Zero(outputs_.cols());
  }
  if (offset_.size() != outputs_.cols() || !offset_.allFinite()) {
    throw InputDomainError("GPModel: output offset must carry one finite entry per dimension");
  }
  refit();
}

std::uint64_t GPModel::cache_key(int dim) const {
  std::uint64_t h = gram_cache_key(inputs_, hp_[static_cast<std::size_t>(dim)]);
  // Fold the noise precision in as well; the cache covers K + tau^-1 I.
  const auto tau_bits = std::bit_cast<std::uint64_t>(log_tau_[dim]);
  h ^= tau_bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

void GPModel::refit() {
  const int d = dims();
  cache_.assign(static_cast<std::size_t>(d), DimCache{});
  for (int j = 0; j < d; ++j) {
    GramMatrix gram = build_gram(inputs_, hp_[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd c = std::move(gram.entries);
    c.diagonal().array() += std::exp(-log_tau_[j]);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) {
      throw IllConditionedKernelError("GPModel::refit: K + tau^-1 I not positive definite",
                                      gram.jitter_applied);
    }
    auto& entry = cache_[static_cast<std::size_t>(j)];
    entry.l = llt.matrixL();
    entry.alpha = llt.solve((outputs_.col(j).array() - offset_[j]).matrix());
    entry.key = cache_key(j);
    entry.jitter_applied = gram.jitter_applied;
  }
}

const GPModel::DimCache& GPModel::checked_cache(int dim) const {
  if (dim < 0 || dim >= dims()) {
    throw InputDomainError("GPModel: dimension index out of range");
  }
  const auto& entry = cache_[static_cast<std::size_t>(dim)];
  if (entry.key != cache_key(dim)) {
    throw InternalStateError("GPModel: cached factorization is stale; call refit()");
  }
  return entry;
}

const Eigen::MatrixXd& GPModel::chol(int dim) const { return checked_cache(dim).l; }

const Eigen::VectorXd& GPModel::alpha(int dim) const { return checked_cache(dim).alpha; }

double GPModel::log_marginal_likelihood(int dim) const {
  const auto& c = checked_cache(dim);
  const Eigen::VectorXd y = (outputs_.col(dim).array() - offset_[dim]).matrix();
  const double quad = y.dot(c.alpha);
  const double log_det_half = c.l.diagonal().array().log().sum();
  return -0.5 * quad - log_det_half - 0.5 * static_cast<double>(size()) * kLog2Pi;
}

Eigen::Vector3d GPModel::log_marginal_likelihood_grad(int dim) const {
  const auto& c = checked_cache(dim);
  const Eigen::Index n = inputs_.size();
  const GramGradients dk = grad_gram(inputs_, hp_[static_cast<std::size_t>(dim)]);

  // C^-1 once per call; the trace terms need it densely.
  Eigen::MatrixXd cinv = Eigen::MatrixXd::Identity(n, n);
  c.l.triangularView<Eigen::Lower>().solveInPlace(cinv);
  c.l.transpose().triangularView<Eigen::Upper>().solveInPlace(cinv);

  const Eigen::VectorXd& a = c.alpha;
  const double inv_tau = std::exp(-log_tau_[dim]);

  Eigen::Vector3d g;
  g[0] = 0.5 * (a.dot(dk.d_log_lengthscale * a) - cinv.cwiseProduct(dk.d_log_lengthscale).sum());
  g[1] = 0.5 * (a.dot(dk.d_log_signal_variance * a) -
                cinv.cwiseProduct(dk.d_log_signal_variance).sum());
  // dC/dlog_tau = -tau^-1 I.
  g[2] = 0.5 * inv_tau * (cinv.trace() - a.squaredNorm());
  return g;
}

PosteriorBatch GPModel::posterior_batch(int dim, const Eigen::VectorXd& z, bool with_grad) const {
  const auto& c = checked_cache(dim);
  const Eigen::Index n = inputs_.size();
  const Eigen::Index m = z.size();
  const KernelHyperparams& hp = hp_[static_cast<std::size_t>(dim)];
  const double s2 = hp.signal_variance();
  const double l = hp.lengthscale();
  const double inv_l2 = 1.0 / (l * l);
  const double inv_tau = std::exp(-log_tau_[dim]);
  const Eigen::VectorXd& a = c.alpha;

  GramGradients dk;
  Eigen::VectorXd dc_ll_a, dc_sv_a;
  if (with_grad) {
    dk = grad_gram(inputs_, hp);
    dc_ll_a = dk.d_log_lengthscale * a;
    dc_sv_a = dk.d_log_signal_variance * a;
  }

  PosteriorBatch out;
  out.mean.resize(m);
  out.variance.resize(m);
  if (with_grad) {
    out.d_mean.setZero(m, 3);
    out.d_variance.setZero(m, 3);
  }

  Eigen::VectorXd kstar(n), dkstar_dll(n);
  for (Eigen::Index p = 0; p < m; ++p) {
    if (!std::isfinite(z[p])) {
      throw InputDomainError("posterior_batch: non-finite query point");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = z[p] - inputs_[i];
      const double r2 = d * d * inv_l2;
      kstar[i] = s2 * std::exp(-0.5 * r2);
      dkstar_dll[i] = kstar[i] * r2;
    }
    Eigen::VectorXd w = kstar;
    c.l.triangularView<Eigen::Lower>().solveInPlace(w);
    c.l.transpose().triangularView<Eigen::Upper>().solveInPlace(w);  // w = C^-1 k*

    out.mean[p] = offset_[dim] + kstar.dot(a);
    double var = s2 - kstar.dot(w);
    const bool clamped = var < 0.0;
    if (clamped) {
      var = 0.0;
      ++out.clamp_count;
    }
    out.variance[p] = var;

    if (!with_grad) {
      continue;
    }
    // d mean = (dk*)' a - w' (dC) a ; d var = dk(z,z) - 2 (dk*)' w + w' (dC) w.
    out.d_mean(p, 0) = dkstar_dll.dot(a) - w.dot(dc_ll_a);
    out.d_mean(p, 1) = kstar.dot(a) - w.dot(dc_sv_a);
    out.d_mean(p, 2) = inv_tau * w.dot(a);
    if (!clamped) {
      const Eigen::VectorXd dc_ll_w = dk.d_log_lengthscale * w;
      const Eigen::VectorXd dc_sv_w = dk.d_log_signal_variance * w;
      out.d_variance(p, 0) = -2.0 * dkstar_dll.dot(w) + w.dot(dc_ll_w);
      out.d_variance(p, 1) = s2 - 2.0 * kstar.dot(w) + w.dot(dc_sv_w);
      out.d_variance(p, 2) = -inv_tau * w.squaredNorm();
    }
  }
  return out;
}

PosteriorPrediction GPModel::posterior_predict(double x_star) const {
  if (!std::isfinite(x_star)) {
    throw InputDomainError("posterior_predict: non-finite query point");
  }
  const int d = dims();
  PosteriorPrediction out;
  out.mean.resize(d);
  out.variance.resize(d);
  Eigen::VectorXd z(1);
  z[0] = x_star;
  for (int j = 0; j < d; ++j) {
    const PosteriorBatch b = posterior_batch(j, z, /*with_grad=*/false);
    out.mean[j] = b.mean[0];
    out.variance[j] = b.variance[0];
    out.clamp_count += b.clamp_count;
  }
  return out;
}

Eigen::MatrixXd GPModel::sample_posterior(const Eigen::VectorXd& z,
                                          const Eigen::MatrixXd& eps) const {
  const int d = dims();
  if (eps.rows() != z.size() || eps.cols() != d) {
    throw InputDomainError("sample_posterior: eps must be (pseudo-points x output dims)");
  }
  Eigen::MatrixXd f_hat(z.size(), d);
  for (int j = 0; j < d; ++j) {
    const PosteriorBatch b = posterior_batch(j, z, /*with_grad=*/false);
    f_hat.col(j) = b.mean.array() + b.variance.array().sqrt() * eps.col(j).array();
  }
  return f_hat;
}

}  // namespace prgp
