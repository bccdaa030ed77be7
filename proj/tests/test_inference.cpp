#include "prgp/inference.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include <gtest/gtest.h>

#include "prgp/synth.hpp"
#include "prgp/train.hpp"

namespace prgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

TEST(SamplePseudoInputs, BoundsContainmentSinglePoint) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd z = sample_pseudo_inputs(2.0, 5.0, 1, ZSampling::kUniform, rng);
    ASSERT_EQ(z.size(), 1);
    EXPECT_GE(z[0], 2.0);
    EXPECT_LE(z[0], 5.0);
  }
}

TEST(SamplePseudoInputs, JitteredGridGapBound) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd z =
        sample_pseudo_inputs(0.0, 10.0, 10, ZSampling::kJitteredGrid, rng);
    for (int i = 1; i < 10; ++i) {
      const double gap = z[i] - z[i - 1];
      EXPECT_GT(gap, 0.0);
      EXPECT_LT(gap, 2.0);
    }
    EXPECT_GE(z[0], 0.0);
    EXPECT_LE(z[9], 10.0);
  }
}

TEST(SamplePseudoInputs, DeterministicGivenSeed) {
  Rng a(42), b(42);
  const Eigen::VectorXd za = sample_pseudo_inputs(0.0, 30.0, 10, ZSampling::kUniform, a);
  const Eigen::VectorXd zb = sample_pseudo_inputs(0.0, 30.0, 10, ZSampling::kUniform, b);
  EXPECT_TRUE(za.isApprox(zb, 0.0));
}

TEST(SamplePseudoInputs, StrictlyIncreasingUniform) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd z = sample_pseudo_inputs(0.0, 1.0, 25, ZSampling::kUniform, rng);
    for (int i = 1; i < z.size(); ++i) {
      EXPECT_GT(z[i], z[i - 1]);
    }
  }
}

TEST(SamplePseudoInputs, InvalidArgsThrow) {
  Rng rng(4);
  EXPECT_THROW(sample_pseudo_inputs(0.0, 1.0, 0, ZSampling::kUniform, rng), InputDomainError);
  EXPECT_THROW(sample_pseudo_inputs(1.0, 1.0, 3, ZSampling::kUniform, rng), InputDomainError);
}

ShadowEquation equation(PhysicsKind kind, double gamma) {
  ShadowEquation eq;
  eq.model = make_physics_model(kind);
  eq.gamma = gamma;
  eq.shadow_hp.log_lengthscale = std::log(5.0);
  eq.shadow_hp.log_signal_variance = 0.0;
  eq.shadow_hp.jitter = 1e-8;
  return eq;
}

TEST(ResidualsAtSample, VelDefHandArithmetic) {
  Eigen::MatrixXd f_hat = Eigen::MatrixXd::Zero(2, kTrajectoryDims);
  f_hat(0, kPositionY) = 0.0;
  f_hat(1, kPositionY) = 1.0;
  f_hat(0, kVelocity) = 10.0;
  f_hat(1, kVelocity) = 10.0;
  Eigen::VectorXd z(2);
  z << 0.0, 0.1;
  const ResidualSample rs =
      residuals_at_sample(f_hat, z, {equation(PhysicsKind::kVelDef, 1.0)});
  ASSERT_EQ(rs.values.rows(), 1);
  EXPECT_EQ(rs.structural_len[0], 1);  // last row dropped
  EXPECT_EQ(rs.valid(0, 0), 1);
  EXPECT_NEAR(rs.values(0, 0), (1.0 - 0.0) / 0.1 - 10.0, 1e-12);
}

TEST(ResidualsAtSample, NoEquationsGivesEmptyMatrix) {
  Eigen::MatrixXd f_hat = Eigen::MatrixXd::Zero(3, kTrajectoryDims);
  Eigen::VectorXd z(3);
  z << 0.0, 1.0, 2.0;
  const ResidualSample rs = residuals_at_sample(f_hat, z, {});
  EXPECT_EQ(rs.values.rows(), 0);
  EXPECT_EQ(rs.values.cols(), 3);
}

TEST(ResidualsAtSample, PipesConsistencyOnSimulatedSample) {
  // f_hat filled with exact Pipes data: gap == beta0 * velocity.
  const double beta0 = 3.6;
  Eigen::MatrixXd f_hat = Eigen::MatrixXd::Zero(5, kTrajectoryDims);
  Eigen::VectorXd z(5);
  for (int p = 0; p < 5; ++p) {
    z[p] = 0.5 * p;
    const double v = 20.0 + p;
    f_hat(p, kVelocity) = v;
    f_hat(p, kSpaceHeadway) = beta0 * v;
  }
  ShadowEquation eq = equation(PhysicsKind::kPipes, 1.0);
  eq.model.beta[0] = beta0;
  const ResidualSample rs = residuals_at_sample(f_hat, z, {eq});
  EXPECT_EQ(rs.structural_len[0], 5);
  EXPECT_EQ(rs.masked[0], 0);
  for (int p = 0; p < 5; ++p) {
    EXPECT_LE(std::abs(rs.values(0, p)), 1e-10);
  }
}

TEST(ResidualsAtSample, InfeasibleEntriesMaskedAndCounted) {
  ShadowEquation gipps = equation(PhysicsKind::kGipps, 1.0);
  gipps.model.beta << 2.0, 264.0, 1.0;
  Eigen::MatrixXd f_hat = Eigen::MatrixXd::Zero(4, kTrajectoryDims);
  Eigen::VectorXd z(4);
  for (int p = 0; p < 4; ++p) {
    z[p] = static_cast<double>(p);
    f_hat(p, kVelocity) = 30.0;
    f_hat(p, kPrecedingVelocity) = 30.0;
    f_hat(p, kSpaceHeadway) = p < 2 ? 70.0 : 5000.0;  // large gap kills the radicand
  }
  const ResidualSample rs = residuals_at_sample(f_hat, z, {gipps});
  EXPECT_EQ(rs.structural_len[0], 3);
  EXPECT_EQ(rs.masked[0], 1);
  EXPECT_EQ(rs.valid(0, 2), 0);
  // Masking removes entries; computed residual signs are untouched.
  for (int p = 0; p < 2; ++p) {
    ASSERT_EQ(rs.valid(0, p), 1);
  }
}

// A small trained state over synthetic traffic for ELBO-level tests.
struct Fixture {
  explicit Fixture(std::vector<ShadowEquation> equations, int m = 6,
                   std::uint64_t seed = 9) {
    SynthSpec spec;
    spec.follower = make_physics_model(PhysicsKind::kNewellNonlinear);
    spec.n_vehicles = 2;
    spec.horizon_s = 25.0;
    spec.dt = 0.5;
    spec.initial_gap_ft = 70.0;
    spec.noise_fraction = 0.05;
    spec.seed = seed;
    const SynthScene scene = synth_generate(spec);
    const std::vector<VehicleMatrix> matrices = vehicle_matrices(scene.observed);
    config.m = m;
    config.seed = seed;
    TrainConfig init_config = config;
    init_config.iterations = 1;
    init_config.learning_rate = 0.0;
    // One zero-length-rate iteration builds an initialized state.
    TrainResult r = train(matrices[0].inputs, matrices[0].outputs, equations, init_config);
    model = std::make_unique<GPModel>(std::move(r.model));
    shadow = r.shadow;

    Rng rng(seed + 1);
    z = sample_pseudo_inputs(matrices[0].inputs.minCoeff(), matrices[0].inputs.maxCoeff(),
                             config.m, ZSampling::kJitteredGrid, rng);
    eps.resize(config.m, kTrajectoryDims);
    for (int p = 0; p < config.m; ++p) {
      for (int j = 0; j < kTrajectoryDims; ++j) {
        eps(p, j) = rng.normal();
      }
    }
  }

  TrainConfig config;
  std::unique_ptr<GPModel> model;
  ShadowGP shadow;
  Eigen::VectorXd z;
  Eigen::MatrixXd eps;
};

TEST(ElboEstimate, GammaZeroReducesToMarginalLikelihood) {
  Fixture fx({equation(PhysicsKind::kPipes, 0.0), equation(PhysicsKind::kVelDef, 0.0)});
  const ElboEstimate est = elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config);
  double lml = 0.0;
  for (int j = 0; j < fx.model->dims(); ++j) {
    lml += fx.model->log_marginal_likelihood(j);
  }
  EXPECT_EQ(est.total, lml);  // exact; inactive terms contribute literally nothing
  EXPECT_EQ(est.data_term, lml);
  // Zero-gamma gradients over omega/shadow/beta blocks stay zero.
  const ParamLayout layout = make_layout(*fx.model, fx.shadow);
  for (int at = layout.equation_offset(0); at < layout.size(); ++at) {
    EXPECT_EQ(est.grad[at], 0.0);
  }
}

TEST(ElboEstimate, TotalDecomposition) {
  Fixture fx({equation(PhysicsKind::kPipes, 0.7), equation(PhysicsKind::kNewellNonlinear, 1.3)});
  const ElboEstimate est = elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config);
  double expected = est.data_term;
  for (Eigen::Index w = 0; w < est.reg_terms.size(); ++w) {
    expected += fx.shadow.equations[static_cast<std::size_t>(w)].gamma * est.reg_terms[w];
  }
  EXPECT_NEAR(est.total, expected, 1e-10);
}

TEST(ElboEstimate, SinglePointScalarGaussianRegTerm) {
  // One same-time equation, one pseudo point, unit shadow kernel, omega 0:
  // reg = -r^2/2 - log(2 pi)/2.
  Fixture fx({equation(PhysicsKind::kPipes, 1.0)}, /*m=*/1);
  fx.shadow.equations[0].shadow_hp.log_signal_variance = 0.0;
  fx.shadow.equations[0].shadow_hp.jitter = 0.0;
  fx.shadow.equations[0].noise_floor = 0.0;
  fx.shadow.equations[0].omega = 0.0;
  const ElboEstimate est = elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config);

  const Eigen::MatrixXd f_hat = fx.model->sample_posterior(fx.z, fx.eps);
  const double r = f_hat(0, kSpaceHeadway) - fx.shadow.equations[0].model.beta[0] *
                                                 f_hat(0, kVelocity);
  EXPECT_NEAR(est.reg_terms[0], -0.5 * r * r - 0.5 * kLog2Pi, 1e-10);
}

TEST(ElboEstimate, DegenerateMaskingThrowsOnlyWhenActive) {
  ShadowEquation gipps = equation(PhysicsKind::kGipps, 1.0);
  gipps.model.beta << 2.0, -1000.0, 0.0;  // radicand always negative
  Fixture fx({gipps});
  EXPECT_THROW(elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config),
               RegularizerDegeneracyError);
  fx.shadow.equations[0].gamma = 0.0;
  ElboEstimate est;
  ASSERT_NO_THROW(est = elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config));
  EXPECT_GT(est.masked_counts[0], 0);
}

TEST(ElboEstimate, EpsShapeMismatchThrows) {
  Fixture fx({equation(PhysicsKind::kPipes, 1.0)});
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(fx.config.m, 2);
  EXPECT_THROW(elbo_estimate(*fx.model, fx.shadow, fx.z, bad, fx.config), InputDomainError);
}

TEST(ElboEstimate, ReparameterizedGradientMatchesFiniteDifferences) {
  // Frozen (Z, eps) common random numbers; central differences, step 1e-5.
  std::vector<ShadowEquation> equations = {
      equation(PhysicsKind::kVelDef, 0.8),
      equation(PhysicsKind::kPipes, 1.2),
      equation(PhysicsKind::kNewellNonlinear, 0.6),
  };
  Fixture fx(equations, /*m=*/6);
  const ElboEstimate est = elbo_estimate(*fx.model, fx.shadow, fx.z, fx.eps, fx.config);

  const Eigen::VectorXd params = pack_params(*fx.model, fx.shadow);
  const double step = 1e-5;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    auto eval_at = [&](double delta) {
      GPModel model_copy = *fx.model;
      ShadowGP shadow_copy = fx.shadow;
      Eigen::VectorXd p = params;
      p[i] += delta;
      apply_params(p, model_copy, shadow_copy);
      return elbo_estimate(model_copy, shadow_copy, fx.z, fx.eps, fx.config).total;
    };
    const double fd = (eval_at(step) - eval_at(-step)) / (2.0 * step);
    const double scale = std::max({std::abs(fd), std::abs(est.grad[i]), 1e-6});
    EXPECT_LT(std::abs(fd - est.grad[i]) / scale, 1e-3) << "param " << i;
  }
}

TEST(ElboEstimate, RegTermMonteCarloMatchesQuadrature) {
  // One Pipes equation, two pseudo points. The residual depends on the
  // velocity and space-headway draws at both points, so the expectation
  // over eps is a 4-dimensional Gaussian integral; tensorized 16-node
  // Gauss-Hermite quadrature is the oracle.
  ShadowEquation pipes = equation(PhysicsKind::kPipes, 1.0);
  Fixture fx({pipes}, /*m=*/2);

  const double omega = fx.shadow.equations[0].omega;
  const double beta0 = fx.shadow.equations[0].model.beta[0];

  // Posterior moments at the two points for the two dims involved.
  const PosteriorBatch bv = fx.model->posterior_batch(kVelocity, fx.z, false);
  const PosteriorBatch bs = fx.model->posterior_batch(kSpaceHeadway, fx.z, false);

  const GramMatrix khat = build_gram(fx.z, fx.shadow.equations[0].shadow_hp);
  const Eigen::Matrix2d khat_m = khat.entries;
  const Eigen::Matrix2d kinv = khat_m.inverse();
  const double logdet = std::log(khat_m.determinant());

  auto log_density = [&](double r0, double r1) {
    Eigen::Vector2d c(r0 - omega, r1 - omega);
    return -0.5 * c.dot(kinv * c) - 0.5 * logdet - kLog2Pi;
  };

  static const double nodes[16] = {
      -6.6308781983931295, -5.472225705949343,  -4.492955302520012, -3.6008736241715487,
      -2.760245047630702,  -1.9519803457163336, -1.1638291005549648, -0.3867606045005574,
      0.3867606045005574,  1.1638291005549648,  1.9519803457163336,  2.760245047630702,
      3.6008736241715487,  4.492955302520012,   5.472225705949343,   6.6308781983931295};
  static const double weights[16] = {
      1.4978147231618314e-10, 1.3094732162868187e-07, 1.5300032162487316e-05,
      0.0005259849265739094,  0.007266937601184743,   0.04728475235401403,
      0.15833837275094964,    0.28656852123801213,    0.28656852123801213,
      0.15833837275094964,    0.04728475235401403,    0.007266937601184743,
      0.0005259849265739094,  1.5300032162487316e-05, 1.3094732162868187e-07,
      1.4978147231618314e-10};

  double quadrature = 0.0;
  for (int a = 0; a < 16; ++a) {
    const double v0 = bv.mean[0] + std::sqrt(bv.variance[0]) * nodes[a];
    for (int b = 0; b < 16; ++b) {
      const double v1 = bv.mean[1] + std::sqrt(bv.variance[1]) * nodes[b];
      for (int c = 0; c < 16; ++c) {
        const double s0 = bs.mean[0] + std::sqrt(bs.variance[0]) * nodes[c];
        for (int d = 0; d < 16; ++d) {
          const double s1 = bs.mean[1] + std::sqrt(bs.variance[1]) * nodes[d];
          quadrature += weights[a] * weights[b] * weights[c] * weights[d] *
                        log_density(s0 - beta0 * v0, s1 - beta0 * v1);
        }
      }
    }
  }

  Rng rng(12345);
  const int draws = 10000;
  double sum = 0.0;
  double sum_sq = 0.0;
  Eigen::MatrixXd eps(2, kTrajectoryDims);
  for (int i = 0; i < draws; ++i) {
    for (int p = 0; p < 2; ++p) {
      for (int j = 0; j < kTrajectoryDims; ++j) {
        eps(p, j) = rng.normal();
      }
    }
    const ElboEstimate est = elbo_estimate(*fx.model, fx.shadow, fx.z, eps, fx.config);
    sum += est.reg_terms[0];
    sum_sq += est.reg_terms[0] * est.reg_terms[0];
  }
  const double mc_mean = sum / draws;
  const double mc_var = sum_sq / draws - mc_mean * mc_mean;
  const double se = std::sqrt(mc_var / draws);
  EXPECT_NEAR(mc_mean, quadrature, 4.0 * se);
}

TEST(ResidualsAtSample, MaskCountMonotoneAsFeasibilityWidens) {
  // Widening the Gipps radicand (larger beta1) can only unmask entries, and
  // entries that stay computed keep their values bit-exactly.
  Eigen::MatrixXd f_hat = Eigen::MatrixXd::Zero(6, kTrajectoryDims);
  Eigen::VectorXd z(6);
  for (int p = 0; p < 6; ++p) {
    z[p] = static_cast<double>(p);
    f_hat(p, kVelocity) = 30.0;
    f_hat(p, kPrecedingVelocity) = 30.0;
    f_hat(p, kSpaceHeadway) = 60.0 + 45.0 * p;  // growing gap strains the radicand
  }
  int last_masked = std::numeric_limits<int>::max();
  for (double beta1 : {150.0, 250.0, 400.0, 800.0}) {
    ShadowEquation gipps = equation(PhysicsKind::kGipps, 1.0);
    gipps.model.beta << 2.0, beta1, 1.0;
    const ResidualSample rs = residuals_at_sample(f_hat, z, {gipps});
    EXPECT_LE(rs.masked[0], last_masked) << "beta1 " << beta1;
    // Masking drops entries; it never alters a computed one. Every valid
    // entry equals the direct evaluation bit-exactly.
    for (int p = 0; p < 5; ++p) {
      KinematicSample s;
      s.velocity = f_hat(p, kVelocity);
      s.leader_velocity = f_hat(p, kPrecedingVelocity);
      s.space_headway = f_hat(p, kSpaceHeadway);
      s.dt = z[p + 1] - z[p];
      KinematicSample next;
      next.velocity = f_hat(p + 1, kVelocity);
      const ResidualEval direct = residual_eval(gipps.model, s, &next, false);
      EXPECT_EQ(rs.valid(0, p) == 1, direct.feasible);
      if (direct.feasible) {
        EXPECT_EQ(rs.values(0, p), direct.value);
      }
    }
    last_masked = rs.masked[0];
  }
  EXPECT_EQ(last_masked, 0);
}

TEST(AdamStep, ZeroGradientIsFixedPoint) {
  Eigen::VectorXd params = Eigen::VectorXd::Constant(3, 1.5);
  const Eigen::VectorXd before = params;
  AdamState state;
  for (int i = 0; i < 10; ++i) {
    adam_step(params, Eigen::VectorXd::Zero(3), state, 0.1);
  }
  EXPECT_TRUE(params.isApprox(before, 0.0));
}

TEST(AdamStep, FirstStepMagnitude) {
  Eigen::VectorXd params = Eigen::VectorXd::Zero(1);
  AdamState state;
  adam_step(params, Eigen::VectorXd::Constant(1, 1.0), state, 0.1);
  EXPECT_NEAR(params[0], 0.1 / (1.0 + 1e-8), 1e-12);
}

TEST(AdamStep, StepLinearInLearningRateAtStepOne) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd grad(2);
  grad << 0.3, -2.0;
  AdamState sa, sb;
  adam_step(a, grad, sa, 0.1);
  adam_step(b, grad, sb, 0.025);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(a[i] / b[i], 4.0, 1e-9);
  }
}

TEST(ParamLayout, PackApplyRoundTrip) {
  Fixture fx({equation(PhysicsKind::kPipes, 1.0), equation(PhysicsKind::kGhr, 0.5)});
  Eigen::VectorXd params = pack_params(*fx.model, fx.shadow);
  params.array() += 0.01;
  apply_params(params, *fx.model, fx.shadow);
  const Eigen::VectorXd back = pack_params(*fx.model, fx.shadow);
  EXPECT_TRUE(back.isApprox(params, 0.0));
  EXPECT_THROW(apply_params(Eigen::VectorXd::Zero(3), *fx.model, fx.shadow), InputDomainError);
}

}  // namespace
}  // namespace prgp
