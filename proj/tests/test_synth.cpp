#include "prgp/synth.hpp"

#include <gtest/gtest.h>

#include "prgp/calibrate.hpp"

namespace prgp {
namespace {

SynthSpec spec_for(PhysicsKind kind) {
  SynthSpec spec;
  spec.follower = make_physics_model(kind);
  spec.n_vehicles = 3;
  spec.horizon_s = 30.0;
  spec.dt = 0.1;
  spec.seed = 5;
  switch (kind) {
    case PhysicsKind::kPipes:
      spec.initial_gap_ft = 110.0;
      break;
    case PhysicsKind::kVanAerde:
      // Table-3 macroscopic parameters put the free-flow speed at 11.11 ft/s.
      spec.lead_speed_mean = 7.0;
      spec.lead_speed_amplitude = 1.5;
      spec.initial_gap_ft = 12.0;
      break;
    case PhysicsKind::kGipps:
      spec.follower = make_physics_model(kind, [] {
        Eigen::VectorXd b(3);
        b << 2.0, 264.0, 1.0;
        return b;
      }());
      spec.initial_gap_ft = 70.0;
      break;
    case PhysicsKind::kNewellLinear:
      // Equilibrium spacing for the linear rule is l + v dt.
      spec.lead_speed_amplitude = 1.0;
      spec.initial_gap_ft = 33.16 + 30.0 * 0.1;
      break;
    case PhysicsKind::kGhr:
      spec.initial_gap_ft = 60.0;
      break;
    default:
      break;
  }
  return spec;
}

TEST(SynthGenerate, SelfConsistencyResidualsVanish) {
  const std::vector<PhysicsKind> kinds = {
      PhysicsKind::kPipes,          PhysicsKind::kForbes,       PhysicsKind::kGhr,
      PhysicsKind::kNewellNonlinear, PhysicsKind::kNewellLinear, PhysicsKind::kGipps,
      PhysicsKind::kVanAerde,
  };
  for (PhysicsKind kind : kinds) {
    const SynthSpec spec = spec_for(kind);
    const SynthScene scene = synth_generate(spec);
    const std::vector<SamplePair> pairs = make_sample_pairs(scene.ground_truth);
    ASSERT_GT(pairs.size(), 100u) << kind_name(kind);
    long long checked = 0;
    for (const SamplePair& pair : pairs) {
      if (!pair_usable(kind, pair)) {
        continue;  // lead vehicle rows carry no leader fields
      }
      const double r = residual(spec.follower, pair.sample, pair.next);
      EXPECT_LE(std::abs(r), 1e-9) << kind_name(kind);
      ++checked;
    }
    EXPECT_GT(checked, 50) << kind_name(kind);
  }
}

TEST(SynthGenerate, DefinitionResidualsVanishByConstruction) {
  SynthSpec spec = spec_for(PhysicsKind::kNewellNonlinear);
  const SynthScene scene = synth_generate(spec);
  const PhysicsModel vel_def = make_physics_model(PhysicsKind::kVelDef);
  const PhysicsModel acc_def = make_physics_model(PhysicsKind::kAccDef);
  for (const SamplePair& pair : make_sample_pairs(scene.ground_truth)) {
    EXPECT_LE(std::abs(residual(vel_def, pair.sample, pair.next)), 1e-9);
    EXPECT_LE(std::abs(residual(acc_def, pair.sample, pair.next)), 1e-9);
  }
}

TEST(SynthGenerate, PipesGapConvergesToFixedPoint) {
  SynthSpec spec;
  spec.follower = make_physics_model(PhysicsKind::kPipes, Eigen::VectorXd::Constant(1, 3.6));
  spec.n_vehicles = 2;
  spec.horizon_s = 240.0;
  spec.dt = 0.1;
  spec.lead_speed_mean = 30.0;
  spec.lead_speed_amplitude = 0.0;  // constant-speed leader
  spec.initial_gap_ft = 150.0;
  const SynthScene scene = synth_generate(spec);
  double last_gap = 0.0;
  for (const TrajectoryRecord& rec : scene.ground_truth) {
    if (rec.vehicle_id == 2) {
      last_gap = rec.space_headway;
    }
  }
  EXPECT_NEAR(last_gap, 30.0 * 3.6, 1e-6);
}

TEST(SynthGenerate, DeterministicGivenSeed) {
  SynthSpec spec = spec_for(PhysicsKind::kNewellNonlinear);
  spec.noise_fraction = 0.1;
  const SynthScene a = synth_generate(spec);
  const SynthScene b = synth_generate(spec);
  ASSERT_EQ(a.observed.size(), b.observed.size());
  for (std::size_t i = 0; i < a.observed.size(); ++i) {
    EXPECT_EQ(a.observed[i].velocity, b.observed[i].velocity);
    EXPECT_EQ(a.observed[i].local_y, b.observed[i].local_y);
  }
  spec.seed = 6;
  const SynthScene c = synth_generate(spec);
  EXPECT_NE(a.observed[10].velocity, c.observed[10].velocity);
}

TEST(SynthGenerate, NoiseFractionScalesOffGroundTruthStd) {
  SynthSpec spec = spec_for(PhysicsKind::kNewellNonlinear);
  spec.noise_fraction = 0.1;
  const SynthScene scene = synth_generate(spec);
  const Eigen::VectorXd sd = dimension_std(scene.ground_truth);
  for (int j = 0; j < kTrajectoryDims; ++j) {
    EXPECT_NEAR(scene.noise_std_used[j], 0.1 * sd[j], 1e-12);
  }
  // Noise-free copy retained for evaluation.
  ASSERT_EQ(scene.observed.size(), scene.ground_truth.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < scene.observed.size(); ++i) {
    any_differs = any_differs || scene.observed[i].velocity != scene.ground_truth[i].velocity;
  }
  EXPECT_TRUE(any_differs);
}

TEST(SynthGenerate, GapClosureTruncatesWithWarning) {
  SynthSpec spec;
  spec.follower = make_physics_model(PhysicsKind::kNewellLinear,
                                     Eigen::VectorXd::Constant(1, 33.16));
  spec.n_vehicles = 2;
  spec.horizon_s = 30.0;
  spec.dt = 0.1;
  // Start far above equilibrium: the linear rule commands a huge catch-up
  // speed and the follower slams into the minimum-gap guard.
  spec.initial_gap_ft = 400.0;
  const SynthScene scene = synth_generate(spec);
  EXPECT_FALSE(scene.warnings.empty());
  long long follower_rows = 0;
  long long lead_rows = 0;
  for (const TrajectoryRecord& rec : scene.ground_truth) {
    (rec.vehicle_id == 2 ? follower_rows : lead_rows) += 1;
  }
  EXPECT_LT(follower_rows, lead_rows);
}

TEST(SynthGenerate, InvalidSpecThrows) {
  SynthSpec spec;
  spec.dt = 0.0;
  EXPECT_THROW(synth_generate(spec), InputDomainError);
  spec.dt = 0.1;
  spec.n_vehicles = 1;
  EXPECT_THROW(synth_generate(spec), InputDomainError);
}

}  // namespace
}  // namespace prgp
