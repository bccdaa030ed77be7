#include "prgp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace prgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kDegenerateMaskFraction = 0.5;

KinematicSample sample_from_row(const Eigen::MatrixXd& f_hat, Eigen::Index p, double dt) {
  KinematicSample s;
  s.position_y = f_hat(p, kPositionY);
  s.velocity = f_hat(p, kVelocity);
  s.acceleration = f_hat(p, kAcceleration);
  s.leader_velocity = f_hat(p, kPrecedingVelocity);
  s.space_headway = f_hat(p, kSpaceHeadway);
  s.time_headway = f_hat(p, kTimeHeadway);
  s.dt = dt;
  return s;
}

}  // namespace

int ParamLayout::equation_offset(int w) const {
  int offset = 3 * gp_dims;
  for (int i = 0; i < w; ++i) {
    offset += 3 + beta_sizes[static_cast<std::size_t>(i)];
  }
  return offset;
}

int ParamLayout::size() const { return equation_offset(static_cast<int>(beta_sizes.size())); }

ParamLayout make_layout(const GPModel& model, const ShadowGP& shadow) {
  ParamLayout layout;
  layout.gp_dims = model.dims();
  layout.beta_sizes.reserve(shadow.equations.size());
  for (const ShadowEquation& eq : shadow.equations) {
    layout.beta_sizes.push_back(static_cast<int>(eq.model.beta.size()));
  }
  return layout;
}

Eigen::VectorXd pack_params(const GPModel& model, const ShadowGP& shadow) {
  const ParamLayout layout = make_layout(model, shadow);
  Eigen::VectorXd params(layout.size());
  for (int j = 0; j < model.dims(); ++j) {
    const int at = layout.gp_offset(j);
    params[at + 0] = model.hyperparams(j).log_lengthscale;
    params[at + 1] = model.hyperparams(j).log_signal_variance;
    params[at + 2] = model.log_tau(j);
  }
  for (std::size_t w = 0; w < shadow.equations.size(); ++w) {
    const ShadowEquation& eq = shadow.equations[w];
    const int at = layout.equation_offset(static_cast<int>(w));
    params[at + 0] = eq.omega;
    params[at + 1] = eq.shadow_hp.log_lengthscale;
    params[at + 2] = eq.shadow_hp.log_signal_variance;
    params.segment(at + 3, eq.model.beta.size()) = eq.model.beta;
  }
  return params;
}

void apply_params(const Eigen::VectorXd& params, GPModel& model, ShadowGP& shadow) {
  const ParamLayout layout = make_layout(model, shadow);
  if (params.size() != layout.size()) {
    throw InputDomainError("apply_params: parameter vector does not match the layout");
  }
  for (int j = 0; j < model.dims(); ++j) {
    const int at = layout.gp_offset(j);
    model.hyperparams(j).log_lengthscale = params[at + 0];
    model.hyperparams(j).log_signal_variance = params[at + 1];
    model.log_tau(j) = params[at + 2];
  }
  for (std::size_t w = 0; w < shadow.equations.size(); ++w) {
    ShadowEquation& eq = shadow.equations[w];
    const int at = layout.equation_offset(static_cast<int>(w));
    eq.omega = params[at + 0];
    eq.shadow_hp.log_lengthscale = params[at + 1];
    eq.shadow_hp.log_signal_variance = params[at + 2];
    eq.model.beta = params.segment(at + 3, eq.model.beta.size());
  }
  model.refit();
}

Eigen::VectorXd sample_pseudo_inputs(double t_min, double t_max, int m, ZSampling mode, Rng& rng) {
  if (m < 1) {
    throw InputDomainError("sample_pseudo_inputs: m must be at least 1");
  }
  if (!(t_min < t_max)) {
    throw InputDomainError("sample_pseudo_inputs: t_min must lie below t_max");
  }
  Eigen::VectorXd z(m);
  if (mode == ZSampling::kUniform) {
    for (int i = 0; i < m; ++i) {
      z[i] = rng.uniform(t_min, t_max);
    }
    std::sort(z.data(), z.data() + m);
    for (int i = 1; i < m; ++i) {
      if (!(z[i] > z[i - 1])) {
        z[i] = std::nextafter(z[i - 1], t_max + 1.0);
      }
    }
  } else {
    const double h = (t_max - t_min) / static_cast<double>(m);
    for (int i = 0; i < m; ++i) {
      z[i] = t_min + (static_cast<double>(i) + 0.5) * h + rng.uniform(-0.5 * h, 0.5 * h);
    }
  }
  return z;
}

ResidualSample residuals_at_sample(const Eigen::MatrixXd& f_hat, const Eigen::VectorXd& z,
                                   const std::vector<ShadowEquation>& equations) {
  const Eigen::Index m = z.size();
  if (f_hat.rows() != m) {
    throw InputDomainError("residuals_at_sample: f_hat rows must match the pseudo inputs");
  }
  const auto w_count = static_cast<Eigen::Index>(equations.size());
  ResidualSample out;
  out.values.setZero(w_count, m);
  out.valid.setZero(w_count, m);
  out.structural_len.setZero(w_count);
  out.masked.setZero(w_count);
  if (w_count == 0) {
    return out;
  }
  if (f_hat.cols() != kTrajectoryDims) {
    throw InputDomainError("residuals_at_sample: output sample must have the 7 trajectory dims");
  }
  for (Eigen::Index i = 1; i < m; ++i) {
    if (!(z[i] > z[i - 1])) {
      throw InputDomainError("residuals_at_sample: pseudo inputs must be strictly increasing");
    }
  }

  for (Eigen::Index w = 0; w < w_count; ++w) {
    const ShadowEquation& eq = equations[static_cast<std::size_t>(w)];
    const bool uses_next = needs_next_sample(eq.model.kind);
    const Eigen::Index len = uses_next ? m - 1 : m;
    if (len < 1) {
      throw InputDomainError(
          "residuals_at_sample: at least 2 pseudo inputs required for t+dt equations");
    }
    out.structural_len[w] = static_cast<int>(len);
    for (Eigen::Index p = 0; p < len; ++p) {
      const double dt = p + 1 < m ? z[p + 1] - z[p] : 0.0;
      const KinematicSample s = sample_from_row(f_hat, p, dt);
      KinematicSample s_next;
      if (uses_next) {
        s_next = sample_from_row(f_hat, p + 1, 0.0);
      }
      const ResidualEval eval =
          residual_eval(eq.model, s, uses_next ? &s_next : nullptr, /*with_grad=*/false);
      if (eval.feasible) {
        out.values(w, p) = eval.value;
        out.valid(w, p) = 1;
      } else {
        ++out.masked[w];
      }
    }
  }
  return out;
}

ElboEstimate elbo_estimate(const GPModel& model, const ShadowGP& shadow, const Eigen::VectorXd& z,
                           const Eigen::MatrixXd& eps, const TrainConfig& config) {
  const Eigen::Index m = z.size();
  const int d = model.dims();
  if (eps.rows() != m || eps.cols() != d) {
    throw InputDomainError("elbo_estimate: eps must be (pseudo-points x output dims)");
  }
  if (m != config.m) {
    throw InputDomainError("elbo_estimate: pseudo-input count differs from config.m");
  }
  const auto w_count = static_cast<Eigen::Index>(shadow.equations.size());
  if (w_count > 0 && d != kTrajectoryDims) {
    throw InputDomainError("elbo_estimate: physics equations need the 7 trajectory dims");
  }

  const ParamLayout layout = make_layout(model, shadow);
  ElboEstimate out;
  out.reg_terms.setConstant(w_count, std::numeric_limits<double>::quiet_NaN());
  out.masked_counts.setZero(w_count);
  out.grad.setZero(layout.size());

  // Data term: sum of per-dimension log marginal likelihoods.
  for (int j = 0; j < d; ++j) {
    out.data_term += model.log_marginal_likelihood(j);
    out.grad.segment<3>(layout.gp_offset(j)) += model.log_marginal_likelihood_grad(j);
  }
  out.total = out.data_term;
  if (w_count == 0) {
    return out;
  }

  // Posterior batches with hyperparameter sensitivities, and the draw
  // f_hat = mu + sqrt(nu) * eps.
  std::vector<PosteriorBatch> batches;
  batches.reserve(static_cast<std::size_t>(d));
  Eigen::MatrixXd f_hat(m, d);
  Eigen::MatrixXd sdev(m, d);
  for (int j = 0; j < d; ++j) {
    batches.push_back(model.posterior_batch(j, z, /*with_grad=*/true));
    const PosteriorBatch& b = batches.back();
    out.clamp_count += b.clamp_count;
    for (Eigen::Index p = 0; p < m; ++p) {
      sdev(p, j) = std::sqrt(b.variance[p]);
      f_hat(p, j) = b.mean[p] + sdev(p, j) * eps(p, j);
    }
  }

  // d f_hat(p, j) / d theta_{j,k}; zero where the variance clamp engaged.
  auto dfhat = [&](Eigen::Index p, int j, int k) {
    const PosteriorBatch& b = batches[static_cast<std::size_t>(j)];
    double g = b.d_mean(p, k);
    if (sdev(p, j) > 1e-150) {
      g += eps(p, j) * b.d_variance(p, k) / (2.0 * sdev(p, j));
    }
    return g;
  };

  // Gradient of the weighted regularizer w.r.t. the f_hat entries.
  Eigen::MatrixXd g_fhat = Eigen::MatrixXd::Zero(m, d);

  for (Eigen::Index w = 0; w < w_count; ++w) {
    const ShadowEquation& eq = shadow.equations[static_cast<std::size_t>(w)];
    const bool uses_next = needs_next_sample(eq.model.kind);
    const Eigen::Index len = uses_next ? m - 1 : m;
    if (len < 1) {
      throw InputDomainError("elbo_estimate: need m >= 2 for t+dt equations");
    }
    const bool active = eq.gamma != 0.0;

    std::vector<Eigen::Index> rows;
    std::vector<double> values;
    std::vector<ResidualEval> evals;
    rows.reserve(static_cast<std::size_t>(len));
    for (Eigen::Index p = 0; p < len; ++p) {
      const double dt = p + 1 < m ? z[p + 1] - z[p] : 0.0;
      const KinematicSample s = sample_from_row(f_hat, p, dt);
      KinematicSample s_next;
      if (uses_next) {
        s_next = sample_from_row(f_hat, p + 1, 0.0);
      }
      ResidualEval eval =
          residual_eval(eq.model, s, uses_next ? &s_next : nullptr, /*with_grad=*/active);
      if (eval.feasible) {
        rows.push_back(p);
        values.push_back(eval.value);
        if (active) {
          evals.push_back(std::move(eval));
        }
      } else {
        ++out.masked_counts[w];
      }
    }

    const double masked_fraction =
        static_cast<double>(out.masked_counts[w]) / static_cast<double>(len);
    if (active && masked_fraction > kDegenerateMaskFraction) {
      throw RegularizerDegeneracyError(
          std::string("elbo_estimate: over half the residuals of ") + kind_name(eq.model.kind) +
          " are infeasible at the current sample");
    }
    if (rows.empty()) {
      // Inactive equation with nothing computable; leave the NaN marker.
      continue;
    }

    const auto n_w = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd z_active(n_w);
    Eigen::VectorXd r(n_w);
    for (Eigen::Index i = 0; i < n_w; ++i) {
      z_active[i] = z[rows[static_cast<std::size_t>(i)]];
      r[i] = values[static_cast<std::size_t>(i)];
    }

    double reg = 0.0;
    Eigen::VectorXd beta_hat;
    Eigen::MatrixXd khat_inv;
    try {
      GramMatrix gram = build_gram(z_active, eq.shadow_hp);
      gram.entries.diagonal().array() += eq.noise_floor * eq.noise_floor;
      Eigen::LLT<Eigen::MatrixXd> llt(gram.entries);
      if (llt.info() != Eigen::Success) {
        throw IllConditionedKernelError("elbo_estimate: shadow Gram factorization failed",
                                        gram.jitter_applied);
      }
      const Eigen::VectorXd centered = r.array() - eq.omega;
      beta_hat = llt.solve(centered);
      const Eigen::MatrixXd l = llt.matrixL();
      reg = -0.5 * centered.dot(beta_hat) - l.diagonal().array().log().sum() -
            0.5 * static_cast<double>(n_w) * kLog2Pi;
      if (active) {
        khat_inv = llt.solve(Eigen::MatrixXd::Identity(n_w, n_w));
      }
    } catch (const Error&) {
      if (active) {
        throw;
      }
      continue;  // monitoring-only equation; keep the NaN marker
    }
    out.reg_terms[w] = reg;
    if (!active) {
      continue;
    }
    out.total += eq.gamma * reg;

    const int at = layout.equation_offset(static_cast<int>(w));
    // d reg / d omega = 1' Khat^-1 (r - omega 1).
    out.grad[at + 0] += eq.gamma * beta_hat.sum();

    // Shadow kernel hyperparameters.
    const GramGradients dkhat = grad_gram(z_active, eq.shadow_hp);
    out.grad[at + 1] +=
        eq.gamma * 0.5 *
        (beta_hat.dot(dkhat.d_log_lengthscale * beta_hat) -
         khat_inv.cwiseProduct(dkhat.d_log_lengthscale).sum());
    out.grad[at + 2] +=
        eq.gamma * 0.5 *
        (beta_hat.dot(dkhat.d_log_signal_variance * beta_hat) -
         khat_inv.cwiseProduct(dkhat.d_log_signal_variance).sum());

    // Physics parameters and the pathway through the posterior sample.
    for (Eigen::Index i = 0; i < n_w; ++i) {
      const double dreg_dr = -eq.gamma * beta_hat[i];  // d(weighted reg)/d r_i
      const ResidualEval& eval = evals[static_cast<std::size_t>(i)];
      const Eigen::Index p = rows[static_cast<std::size_t>(i)];
      if (eq.train_beta && eval.d_beta.size() > 0) {
        out.grad.segment(at + 3, eval.d_beta.size()) += dreg_dr * eval.d_beta;
      }
      for (int j = 0; j < kTrajectoryDims; ++j) {
        if (eval.d_sample[j] != 0.0) {
          g_fhat(p, j) += dreg_dr * eval.d_sample[j];
        }
        if (uses_next && eval.d_next[j] != 0.0) {
          g_fhat(p + 1, j) += dreg_dr * eval.d_next[j];
        }
      }
    }
  }

  // Chain the f_hat gradient back to the GP hyperparameters.
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (Eigen::Index p = 0; p < m; ++p) {
        if (g_fhat(p, j) != 0.0) {
          acc += g_fhat(p, j) * dfhat(p, j, k);
        }
      }
      out.grad[layout.gp_offset(j) + k] += acc;
    }
  }
  return out;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               double learning_rate) {
  if (grad.size() != params.size()) {
    throw InputDomainError("adam_step: gradient and parameter sizes differ");
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.setZero(params.size());
    state.second_moment.setZero(params.size());
    state.step = 0;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEpsilon = 1e-8;
  ++state.step;
  state.first_moment = kBeta1 * state.first_moment + (1.0 - kBeta1) * grad;
  state.second_moment =
      kBeta2 * state.second_moment.array() + (1.0 - kBeta2) * grad.array().square();
  const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  // Ascent on the ELBO.
  params.array() += learning_rate * (state.first_moment.array() / bias1) /
                    ((state.second_moment.array() / bias2).sqrt() + kEpsilon);
}

}  // namespace prgp
