#include <benchmark/benchmark.h>

#include "prgp/inference.hpp"
#include "prgp/synth.hpp"
#include "prgp/train.hpp"

namespace {

using namespace prgp;

KernelHyperparams bench_hp() {
  KernelHyperparams hp;
  hp.log_lengthscale = std::log(3.0);
  hp.log_signal_variance = std::log(2.0);
  return hp;
}

Eigen::VectorXd bench_inputs(int n) {
  Rng rng(5);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform(0.0, 60.0);
  }
  std::sort(x.data(), x.data() + n);
  return x;
}

void BM_BuildGram(benchmark::State& state) {
  const Eigen::VectorXd x = bench_inputs(static_cast<int>(state.range(0)));
  const KernelHyperparams hp = bench_hp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_gram(x, hp));
  }
}
BENCHMARK(BM_BuildGram)->Arg(50)->Arg(200)->Arg(500);

void BM_GradGram(benchmark::State& state) {
  const Eigen::VectorXd x = bench_inputs(static_cast<int>(state.range(0)));
  const KernelHyperparams hp = bench_hp();
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_gram(x, hp));
  }
}
BENCHMARK(BM_GradGram)->Arg(50)->Arg(200);

GPModel bench_model(int n) {
  Rng rng(7);
  const Eigen::VectorXd x = bench_inputs(n);
  Eigen::MatrixXd y(n, 1);
  for (int i = 0; i < n; ++i) {
    y(i, 0) = std::sin(0.3 * x[i]) + 0.1 * rng.normal();
  }
  return GPModel(x, y, {bench_hp()}, Eigen::VectorXd::Constant(1, 2.0));
}

void BM_GPRefit(benchmark::State& state) {
  GPModel model = bench_model(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    model.refit();
    benchmark::DoNotOptimize(model.alpha(0));
  }
}
BENCHMARK(BM_GPRefit)->Arg(50)->Arg(200);

void BM_LogMarginalLikelihoodGrad(benchmark::State& state) {
  const GPModel model = bench_model(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_marginal_likelihood_grad(0));
  }
}
BENCHMARK(BM_LogMarginalLikelihoodGrad)->Arg(50)->Arg(200);

void BM_PosteriorPredict(benchmark::State& state) {
  const GPModel model = bench_model(static_cast<int>(state.range(0)));
  double x_star = 10.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.posterior_predict(x_star));
    x_star += 0.01;
  }
}
BENCHMARK(BM_PosteriorPredict)->Arg(50)->Arg(200);

void BM_ResidualEval(benchmark::State& state) {
  const PhysicsModel model = make_physics_model(PhysicsKind::kNewellNonlinear);
  KinematicSample s;
  s.velocity = 28.0;
  s.space_headway = 72.0;
  s.dt = 0.5;
  KinematicSample next = s;
  next.velocity = 28.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(residual_eval(model, s, &next, true));
  }
}
BENCHMARK(BM_ResidualEval);

// One training iteration's worth of ELBO + full gradient on a PRGP state.
void BM_ElboEstimate(benchmark::State& state) {
  SynthSpec spec;
  spec.follower = make_physics_model(PhysicsKind::kPipes);
  spec.n_vehicles = 2;
  spec.horizon_s = 45.0;
  spec.dt = static_cast<double>(state.range(0)) / 100.0;
  spec.initial_gap_ft = 110.0;
  spec.noise_fraction = 0.05;
  spec.seed = 3;
  const SynthScene scene = synth_generate(spec);
  const std::vector<VehicleMatrix> matrices = vehicle_matrices(scene.observed);

  ShadowEquation eq;
  eq.model = make_physics_model(PhysicsKind::kPipes);
  TrainConfig config;
  config.m = 10;
  config.iterations = 1;
  config.learning_rate = 0.0;
  const TrainResult fitted = train(matrices[0].inputs, matrices[0].outputs, {eq}, config);

  Rng rng(11);
  const Eigen::VectorXd z =
      sample_pseudo_inputs(matrices[0].inputs.minCoeff(), matrices[0].inputs.maxCoeff(),
                           config.m, ZSampling::kJitteredGrid, rng);
  Eigen::MatrixXd eps(config.m, kTrajectoryDims);
  for (Eigen::Index p = 0; p < eps.rows(); ++p) {
    for (Eigen::Index j = 0; j < eps.cols(); ++j) {
      eps(p, j) = rng.normal();
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(elbo_estimate(fitted.model, fitted.shadow, z, eps, config));
  }
  state.SetLabel(std::to_string(matrices[0].inputs.size()) + " records");
}
BENCHMARK(BM_ElboEstimate)->Arg(200)->Arg(50);  // observation steps of 2.0 s and 0.5 s

}  // namespace

BENCHMARK_MAIN();
