#include "prgp/physics.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "prgp/rng.hpp"

namespace prgp {
namespace {

KinematicSample sample(double v, double a, double lv, double gap, double th, double y,
                       double dt) {
  KinematicSample s;
  s.velocity = v;
  s.acceleration = a;
  s.leader_velocity = lv;
  s.space_headway = gap;
  s.time_headway = th;
  s.position_y = y;
  s.dt = dt;
  return s;
}

TEST(VaCoefficients, DegenerateFactors) {
  // v_f = 2 v_m kills the (2 v_m - v_f) factor.
  EXPECT_NEAR(va_coefficients(20.0, 0.2, 10.0, 0.5).c1, 0.0, 1e-12);
  // v_f = v_m is outside the precondition (v_f > v_m), so approach it.
  EXPECT_NEAR(va_coefficients(10.0 + 1e-9, 0.2, 10.0, 0.5).c2, 0.0, 1e-12);
}

TEST(VaCoefficients, CongestedFreewayMacroscopicParameters) {
  const VaCoefficients c = va_coefficients(11.11, 0.25, 8.33, 0.708);
  EXPECT_NEAR(c.c1, 3.5544878215391797, 1e-9);
  EXPECT_NEAR(c.c2, 4.9496403026997084, 1e-9);
  EXPECT_NEAR(c.c3, 0.7719811223978881, 1e-9);
}

TEST(VaCoefficients, PreconditionViolationsThrow) {
  EXPECT_THROW(va_coefficients(5.0, 0.25, 8.33, 0.708), InputDomainError);  // v_f <= v_m
  EXPECT_THROW(va_coefficients(11.11, 0.0, 8.33, 0.708), InputDomainError);
  EXPECT_THROW(va_coefficients(11.11, 0.25, 8.33, 0.0), InputDomainError);
}

TEST(VaCoefficients, ConsistentParametersReproduceJamSpacing) {
  // With q_m = k_m * v_m and k_m = k_j / 2 (Greenshields), plugging v = v_m
  // into the gap relation recovers 1 / k_m.
  const double v_f = 60.0;
  const double k_j = 0.1;
  const double v_m = 30.0;
  const double k_m = k_j / 2.0;
  const double q_m = k_m * v_m;
  const VaCoefficients c = va_coefficients(v_f, k_j, v_m, q_m);
  const double gap_at_vm = c.c1 + c.c3 * v_m + c.c2 / (v_f - v_m);
  EXPECT_NEAR(gap_at_vm, 1.0 / k_m, 1e-9);
}

TEST(Residual, PipesExactDatum) {
  const PhysicsModel pipes = make_physics_model(PhysicsKind::kPipes,
                                                Eigen::VectorXd::Constant(1, 3.6));
  EXPECT_NEAR(residual(pipes, sample(10.0, 0, 0, 36.0, 0, 0, 0.1)), 0.0, 1e-12);
  EXPECT_NEAR(residual(pipes, sample(10.0, 0, 0, 37.0, 0, 0, 0.1)), 1.0, 1e-12);
}

TEST(Residual, NewellLinearVanishesOnModelConsistentData) {
  const PhysicsModel nl =
      make_physics_model(PhysicsKind::kNewellLinear, Eigen::VectorXd::Constant(1, 33.16));
  const double dt = 0.1;
  const double gap = 36.0;
  const double v_next = (gap - 33.16) / dt;
  const KinematicSample s = sample(28.0, 0, 28.0, gap, 0, 0, dt);
  const KinematicSample next = sample(v_next, 0, 0, 0, 0, 0, dt);
  EXPECT_NEAR(residual(nl, s, next), 0.0, 1e-12);
}

TEST(Residual, VanAerdeForwardEvaluationOracle) {
  const PhysicsModel va = van_aerde_from_macroscopic(11.11, 0.25, 8.33, 0.708);
  const double xdot = 5.0;
  // Forward-evaluate the gap relation as the oracle.
  const double gap = 3.5544878215391797 + 0.7719811223978881 * xdot +
                     4.9496403026997084 / (11.11 - xdot);
  EXPECT_NEAR(residual(va, sample(xdot, 0, 0, gap, 0, 0, 0.1)), 0.0, 1e-10);
  EXPECT_NEAR(residual(va, sample(xdot, 0, 0, gap + 1.0, 0, 0, 0.1)), 1.0, 1e-10);
}

TEST(Residual, VelocityDefinition) {
  const PhysicsModel vel_def = make_physics_model(PhysicsKind::kVelDef);
  const KinematicSample s = sample(10.0, 0, 0, 0, 0, 100.0, 0.1);
  const KinematicSample next = sample(10.0, 0, 0, 0, 0, 101.0, 0.1);
  EXPECT_NEAR(residual(vel_def, s, next), 0.0, 1e-12);
  EXPECT_THROW(residual(vel_def, s), InputDomainError);  // missing next
}

TEST(Residual, ForbesLinearizedGapForm) {
  const PhysicsModel forbes =
      make_physics_model(PhysicsKind::kForbes, Eigen::VectorXd::Constant(1, 0.81));
  // q_t - q_x + v * beta0.
  EXPECT_NEAR(residual(forbes, sample(10.0, 0, 0, 30.0, 25.0, 0, 0.1)),
              25.0 - 30.0 + 8.1, 1e-12);
}

TEST(Residual, DomainErrors) {
  const PhysicsModel gipps = make_physics_model(PhysicsKind::kGipps);
  KinematicSample s = sample(30.0, 0, 30.0, 500.0, 0, 0, 0.1);  // radicand < 0
  const KinematicSample next = sample(30.0, 0, 0, 0, 0, 0, 0.1);
  EXPECT_THROW(residual(gipps, s, next), ModelDomainError);

  const PhysicsModel va = make_physics_model(PhysicsKind::kVanAerde);
  KinematicSample at_pole = sample(11.11, 0, 0, 30.0, 0, 0, 0.1);  // beta3 - v <= 1e-6
  EXPECT_THROW(residual(va, at_pole), ModelDomainError);

  const PhysicsModel ghr = make_physics_model(PhysicsKind::kGhr);
  KinematicSample bad_gap = sample(30.0, 0, 31.0, -1.0, 0, 0, 0.1);
  EXPECT_THROW(residual(ghr, bad_gap, next), ModelDomainError);

  const PhysicsModel pipes = make_physics_model(PhysicsKind::kPipes);
  KinematicSample non_finite = sample(std::nan(""), 0, 0, 30.0, 0, 0, 0.1);
  EXPECT_THROW(residual(pipes, non_finite), InputDomainError);
}

TEST(PredictQuantity, DirectFormulaOracles) {
  const PhysicsModel pipes =
      make_physics_model(PhysicsKind::kPipes, Eigen::VectorXd::Constant(1, 3.6));
  EXPECT_DOUBLE_EQ(predict_quantity(pipes, sample(10.0, 0, 0, 0, 0, 0, 0.1)), 36.0);

  const PhysicsModel vel_def = make_physics_model(PhysicsKind::kVelDef);
  const KinematicSample s = sample(0.0, 0, 0, 0, 0, 100.0, 0.1);
  const KinematicSample next = sample(0.0, 0, 0, 0, 0, 101.0, 0.1);
  EXPECT_NEAR(predict_quantity(vel_def, s, next), 10.0, 1e-12);

  // VA at zero speed: gap = c1 + c2 / v_f.
  const PhysicsModel va = van_aerde_from_macroscopic(11.11, 0.25, 8.33, 0.708);
  EXPECT_NEAR(predict_quantity(va, sample(0.0, 0, 0, 0, 0, 0, 0.1)),
              3.5544878215391797 + 4.9496403026997084 / 11.11, 1e-10);
}

TEST(PredictQuantity, ConsistentWithResidualOnSolvableRows) {
  Rng rng(17);
  const std::vector<PhysicsKind> solvable = {
      PhysicsKind::kPipes,       PhysicsKind::kForbes, PhysicsKind::kNewellLinear,
      PhysicsKind::kVanAerde,    PhysicsKind::kVelDef, PhysicsKind::kAccDef,
  };
  for (PhysicsKind kind : solvable) {
    const PhysicsModel model = make_physics_model(kind);
    for (int trial = 0; trial < 50; ++trial) {
      const double dt = 0.1;
      const KinematicSample s = sample(rng.uniform(1.0, 9.0), rng.uniform(-3.0, 3.0),
                                       rng.uniform(1.0, 9.0), rng.uniform(20.0, 80.0),
                                       rng.uniform(0.5, 4.0), rng.uniform(0.0, 500.0), dt);
      const KinematicSample next = sample(rng.uniform(1.0, 9.0), rng.uniform(-3.0, 3.0),
                                          rng.uniform(1.0, 9.0), rng.uniform(20.0, 80.0),
                                          rng.uniform(0.5, 4.0),
                                          s.position_y + s.velocity * dt + rng.normal(), dt);
      const double r = residual(model, s, next);
      const double observed = observed_quantity(kind, s, next);
      const double predicted = predict_quantity(model, s, next);
      // residual == observed - predicted up to the row's sign convention.
      EXPECT_NEAR(std::abs(r), std::abs(observed - predicted), 1e-9)
          << kind_name(kind) << " trial " << trial;
    }
  }
}

TEST(ResidualEval, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  const double step = 1e-6;
  const std::vector<PhysicsKind> kinds = {
      PhysicsKind::kVelDef,        PhysicsKind::kAccDef,       PhysicsKind::kPipes,
      PhysicsKind::kForbes,        PhysicsKind::kGhr,          PhysicsKind::kNewellNonlinear,
      PhysicsKind::kNewellLinear,  PhysicsKind::kGipps,        PhysicsKind::kVanAerde,
  };
  for (PhysicsKind kind : kinds) {
    PhysicsModel model = make_physics_model(kind);
    if (kind == PhysicsKind::kGipps) {
      model.beta << 2.0, 5000.0, 1.0;  // feasible radicand at freeway scales
    }
    for (int trial = 0; trial < 20; ++trial) {
      KinematicSample s = sample(rng.uniform(15.0, 35.0), rng.uniform(-2.0, 2.0),
                                 rng.uniform(15.0, 35.0), rng.uniform(40.0, 120.0),
                                 rng.uniform(1.0, 4.0), rng.uniform(0.0, 800.0), 0.1);
      KinematicSample next = s;
      next.velocity = rng.uniform(15.0, 35.0);
      next.acceleration = rng.uniform(-2.0, 2.0);
      next.position_y = s.position_y + rng.uniform(1.0, 4.0);
      if (kind == PhysicsKind::kVanAerde) {
        s.velocity = rng.uniform(1.0, 9.0);  // keep clear of the free-flow pole
      }

      const ResidualEval eval = residual_eval(model, s, &next, /*with_grad=*/true);
      ASSERT_TRUE(eval.feasible) << kind_name(kind);

      auto fd_member = [&](double KinematicSample::* member, bool in_next) {
        KinematicSample hi_s = s, lo_s = s, hi_n = next, lo_n = next;
        if (in_next) {
          hi_n.*member += step;
          lo_n.*member -= step;
        } else {
          hi_s.*member += step;
          lo_s.*member -= step;
        }
        const ResidualEval a = residual_eval(model, hi_s, &hi_n, false);
        const ResidualEval b = residual_eval(model, lo_s, &lo_n, false);
        EXPECT_TRUE(a.feasible && b.feasible);
        return (a.value - b.value) / (2.0 * step);
      };

      struct FieldMap {
        double KinematicSample::* member;
        int dim;
      };
      const FieldMap fields[] = {
          {&KinematicSample::velocity, kVelocity},
          {&KinematicSample::acceleration, kAcceleration},
          {&KinematicSample::leader_velocity, kPrecedingVelocity},
          {&KinematicSample::space_headway, kSpaceHeadway},
          {&KinematicSample::time_headway, kTimeHeadway},
          {&KinematicSample::position_y, kPositionY},
      };
      for (const FieldMap& fm : fields) {
        const double fd_s = fd_member(fm.member, false);
        const double fd_n = fd_member(fm.member, true);
        const double tol_s = 1e-4 * std::max(1.0, std::abs(fd_s));
        const double tol_n = 1e-4 * std::max(1.0, std::abs(fd_n));
        EXPECT_NEAR(eval.d_sample[fm.dim], fd_s, tol_s) << kind_name(kind);
        EXPECT_NEAR(eval.d_next[fm.dim], fd_n, tol_n) << kind_name(kind);
      }
      for (Eigen::Index b = 0; b < model.beta.size(); ++b) {
        PhysicsModel hi = model, lo = model;
        hi.beta[b] += step;
        lo.beta[b] -= step;
        const double fd = (residual_eval(hi, s, &next, false).value -
                           residual_eval(lo, s, &next, false).value) /
                          (2.0 * step);
        EXPECT_NEAR(eval.d_beta[b], fd, 1e-4 * std::max(1.0, std::abs(fd)))
            << kind_name(kind) << " beta " << b;
      }
    }
  }
}

TEST(PhysicsModel, BetaSizeValidation) {
  EXPECT_THROW(make_physics_model(PhysicsKind::kPipes, Eigen::VectorXd::Zero(2)),
               InputDomainError);
  EXPECT_THROW(make_physics_model(PhysicsKind::kGhr, Eigen::VectorXd::Zero(1)),
               InputDomainError);
  EXPECT_NO_THROW(make_physics_model(PhysicsKind::kVelDef, Eigen::VectorXd(0)));
}

TEST(PhysicsModel, NamesRoundTrip) {
  for (int k = 0; k < kPhysicsKindCount; ++k) {
    const auto kind = static_cast<PhysicsKind>(k);
    const auto parsed = kind_from_name(kind_name(kind));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, kind);
  }
  EXPECT_FALSE(kind_from_name("idm").has_value());
}

TEST(PhysicsModel, PredictedQuantityAssignments) {
  EXPECT_EQ(predicted_quantity(PhysicsKind::kVelDef), PredictedQuantity::kVelocity);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kAccDef), PredictedQuantity::kAcceleration);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kPipes), PredictedQuantity::kSpaceGap);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kForbes), PredictedQuantity::kSpaceGap);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kGhr), PredictedQuantity::kAcceleration);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kGipps), PredictedQuantity::kVelocity);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kNewellNonlinear), PredictedQuantity::kVelocity);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kNewellLinear), PredictedQuantity::kVelocity);
  EXPECT_EQ(predicted_quantity(PhysicsKind::kVanAerde), PredictedQuantity::kSpaceGap);
}

}  // namespace
}  // namespace prgp
