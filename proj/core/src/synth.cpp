#include "prgp/synth.hpp"

#include <algorithm>
#include <cmath>

#include "prgp/rng.hpp"

namespace prgp {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMinGap = 0.5;       // ft; truncate a follower that closes below this
constexpr double kMinTimeHeadwayV = 0.5;  // ft/s floor for the gap/speed ratio

// Solve s = b0 + b1 v + b2/(b3 - v) for v on the congested branch (v < b3).
bool va_invert(const Eigen::VectorXd& b, double gap, double& v_out) {
  const double c = gap - b[0] - b[1] * b[3];
  // b1 u^2 + (gap - b0 - b1 b3) u - b2 = 0 with u = b3 - v > 0.
  if (!(b[1] > 0.0)) {
    return false;
  }
  const double disc = c * c + 4.0 * b[1] * b[2];
  if (!(disc >= 0.0)) {
    return false;
  }
  const double u = (-c + std::sqrt(disc)) / (2.0 * b[1]);
  if (!(u > 1e-6)) {
    return false;
  }
  v_out = b[3] - u;
  return std::isfinite(v_out) && v_out >= 0.0;
}

struct VehicleState {
  std::vector<double> y;   // position per frame
  std::vector<double> v;   // velocity per frame
  std::vector<double> a;   // acceleration per frame
  std::size_t frames = 0;  // valid frame count (truncation point)
};

}  // namespace

Eigen::VectorXd dimension_std(const std::vector<TrajectoryRecord>& records) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kTrajectoryDims);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(kTrajectoryDims);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(kTrajectoryDims);
  auto accumulate = [&](int dim, double value) {
    count[dim] += 1.0;
    const double delta = value - mean[dim];
    mean[dim] += delta / count[dim];
    m2[dim] += delta * (value - mean[dim]);
  };
  for (const TrajectoryRecord& rec : records) {
    accumulate(kPositionX, rec.local_x);
    accumulate(kPositionY, rec.local_y);
    accumulate(kVelocity, rec.velocity);
    accumulate(kAcceleration, rec.acceleration);
    if (rec.preceding_velocity) {
      accumulate(kPrecedingVelocity, *rec.preceding_velocity);
    }
    if (rec.preceding_id) {
      accumulate(kSpaceHeadway, rec.space_headway);
      accumulate(kTimeHeadway, rec.time_headway);
    }
  }
  Eigen::VectorXd sd(kTrajectoryDims);
  for (int j = 0; j < kTrajectoryDims; ++j) {
    sd[j] = count[j] > 1.0 ? std::sqrt(m2[j] / (count[j] - 1.0)) : 0.0;
  }
  return sd;
}

SynthScene synth_generate(const SynthSpec& spec) {
  if (!(spec.dt > 0.0)) {
    throw InputDomainError("synth_generate: dt must be positive");
  }
  if (spec.n_vehicles < 2) {
    throw InputDomainError("synth_generate: need a lead vehicle and at least one follower");
  }
  const std::size_t frames =
      static_cast<std::size_t>(std::floor(spec.horizon_s / spec.dt)) + 1;
  if (frames < 3) {
    throw InputDomainError("synth_generate: horizon too short for the time step");
  }
  const PhysicsKind kind = spec.follower.kind;
  const Eigen::VectorXd& b = spec.follower.beta;

  SynthScene out;
  Rng rng(mix_seed(spec.seed, 0x53594e54));

  const int n = spec.n_vehicles;
  std::vector<VehicleState> veh(static_cast<std::size_t>(n));
  std::vector<double> wander_phase(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    wander_phase[static_cast<std::size_t>(i)] = rng.uniform(0.0, kTwoPi);
  }

  auto lead_speed = [&](double t) {
    return spec.lead_speed_mean +
           spec.lead_speed_amplitude * std::sin(kTwoPi * t / spec.lead_speed_period_s);
  };

  // Lead vehicle: prescribed speed profile, Euler position integration.
  {
    VehicleState& lead = veh[0];
    lead.y.resize(frames);
    lead.v.resize(frames);
    lead.a.resize(frames);
    lead.frames = frames;
    lead.y[0] = static_cast<double>(n - 1) * spec.initial_gap_ft;
    for (std::size_t k = 0; k < frames; ++k) {
      const double t = static_cast<double>(k) * spec.dt;
      lead.v[k] = lead_speed(t);
      if (k + 1 < frames) {
        lead.y[k + 1] = lead.y[k] + lead.v[k] * spec.dt;
      }
    }
    for (std::size_t k = 0; k + 1 < frames; ++k) {
      lead.a[k] = (lead.v[k + 1] - lead.v[k]) / spec.dt;
    }
    lead.a[frames - 1] = frames >= 2 ? lead.a[frames - 2] : 0.0;
  }

  for (int i = 1; i < n; ++i) {
    VehicleState& self = veh[static_cast<std::size_t>(i)];
    const VehicleState& lead = veh[static_cast<std::size_t>(i - 1)];
    self.y.assign(frames, 0.0);
    self.v.assign(frames, 0.0);
    self.a.assign(frames, 0.0);
    self.y[0] = static_cast<double>(n - 1 - i) * spec.initial_gap_ft;
    self.v[0] = lead_speed(0.0);
    std::size_t valid = 0;

    for (std::size_t k = 0; k < frames; ++k) {
      if (k >= lead.frames) {
        break;  // leader truncated; no reference ahead
      }
      const double gap = lead.y[k] - self.y[k];
      if (!(gap > kMinGap) || !std::isfinite(gap)) {
        out.warnings.push_back("synth: vehicle " + std::to_string(i + 1) +
                               " truncated at frame " + std::to_string(k) +
                               " (gap closed)");
        break;
      }

      // Same-time relations pin the velocity to the current gap.
      if (kind == PhysicsKind::kPipes) {
        self.v[k] = gap / b[0];
      } else if (kind == PhysicsKind::kVanAerde) {
        double v = 0.0;
        if (!va_invert(b, gap, v)) {
          out.warnings.push_back("synth: vehicle " + std::to_string(i + 1) +
                                 " truncated at frame " + std::to_string(k) +
                                 " (van_aerde infeasible)");
          break;
        }
        self.v[k] = v;
      }
      if (!(self.v[k] >= 0.0) || !std::isfinite(self.v[k])) {
        out.warnings.push_back("synth: vehicle " + std::to_string(i + 1) +
                               " truncated at frame " + std::to_string(k) +
                               " (velocity left the feasible range)");
        break;
      }
      valid = k + 1;
      if (k + 1 >= lead.frames) {
        break;
      }

      // Position integration consistent with the velocity definition.
      self.y[k + 1] = self.y[k] + self.v[k] * spec.dt;

      // Next-step velocity per model.
      bool ok = true;
      switch (kind) {
        case PhysicsKind::kNewellNonlinear: {
          const double nu = b[0];
          const double expo = -(b[1] / nu) * (gap - b[2]);
          ok = std::abs(expo) < 500.0;
          if (ok) {
            self.v[k + 1] = nu * (1.0 - std::exp(expo));
          }
          break;
        }
        case PhysicsKind::kNewellLinear:
          self.v[k + 1] = (gap - b[0]) / spec.dt;
          break;
        case PhysicsKind::kGipps: {
          const double lv = lead.v[k];
          const double radicand = b[1] + b[2] * lv * lv - 2.0 * gap;
          ok = radicand > 0.0;
          if (ok) {
            self.v[k + 1] = std::sqrt(radicand) - b[0];
          }
          break;
        }
        case PhysicsKind::kGhr: {
          // v advances on the current acceleration; the model pins a(t+dt).
          self.v[k + 1] = self.v[k] + self.a[k] * spec.dt;
          ok = self.v[k + 1] > 0.0 && gap > 0.0;
          if (ok) {
            self.a[k + 1] = b[0] * std::pow(self.v[k + 1], b[1]) *
                            (lead.v[k] - self.v[k]) * std::pow(gap, -b[2]);
          }
          break;
        }
        case PhysicsKind::kPipes:
        case PhysicsKind::kVanAerde:
          // Velocity is set from the gap at the next step.
          break;
        default:
          // Definition operators and Forbes: pursue the leader's speed.
          self.v[k + 1] = self.v[k] + 0.4 * (lead.v[k] - self.v[k]) * spec.dt;
          break;
      }
      if (!ok || !std::isfinite(self.v[k + 1])) {
        out.warnings.push_back("synth: vehicle " + std::to_string(i + 1) +
                               " truncated at frame " + std::to_string(k + 1) +
                               " (model domain)");
        break;
      }
    }
    self.frames = valid;
    if (kind != PhysicsKind::kGhr) {
      for (std::size_t k = 0; k + 1 < self.frames; ++k) {
        self.a[k] = (self.v[k + 1] - self.v[k]) / spec.dt;
      }
      if (self.frames >= 2) {
        self.a[self.frames - 1] = self.a[self.frames - 2];
      }
    }
  }

  // Assemble ground-truth records. Vehicle ids are 1-based, id 1 leads.
  for (int i = 0; i < n; ++i) {
    const VehicleState& self = veh[static_cast<std::size_t>(i)];
    const VehicleState* lead = i > 0 ? &veh[static_cast<std::size_t>(i - 1)] : nullptr;
    for (std::size_t k = 0; k < self.frames; ++k) {
      const double t = static_cast<double>(k) * spec.dt;
      TrajectoryRecord rec;
      rec.time = t;
      rec.vehicle_id = i + 1;
      rec.local_x = spec.lane_center_ft +
                    spec.lateral_wander_ft *
                        std::sin(kTwoPi * t / spec.wander_period_s +
                                 wander_phase[static_cast<std::size_t>(i)]);
      rec.local_y = self.y[k];
      rec.velocity = self.v[k];
      rec.acceleration = self.a[k];
      if (lead != nullptr && k < lead->frames) {
        rec.preceding_id = i;  // the vehicle ahead has id i (1-based i-1 index)
        rec.preceding_velocity = lead->v[k];
        rec.space_headway = lead->y[k] - self.y[k];
        if (kind == PhysicsKind::kForbes) {
          // The Forbes relation defines the temporal gap field.
          rec.time_headway = rec.space_headway - rec.velocity * b[0];
        } else {
          rec.time_headway = rec.space_headway / std::max(rec.velocity, kMinTimeHeadwayV);
        }
      }
      out.ground_truth.push_back(rec);
    }
  }

  // Observation noise.
  Eigen::VectorXd sigma = spec.noise_std;
  if (sigma.size() == 0) {
    sigma = Eigen::VectorXd::Zero(kTrajectoryDims);
  }
  if (sigma.size() != kTrajectoryDims) {
    throw InputDomainError("synth_generate: noise_std must have one entry per output dimension");
  }
  if (spec.noise_fraction > 0.0) {
    sigma = spec.noise_fraction * dimension_std(out.ground_truth);
  }
  out.noise_std_used = sigma;

  Rng noise_rng(mix_seed(spec.seed, 0x4e4f4953));
  out.observed = out.ground_truth;
  for (TrajectoryRecord& rec : out.observed) {
    rec.local_x += sigma[kPositionX] * noise_rng.normal();
    rec.local_y += sigma[kPositionY] * noise_rng.normal();
    rec.velocity = std::max(0.0, rec.velocity + sigma[kVelocity] * noise_rng.normal());
    rec.acceleration += sigma[kAcceleration] * noise_rng.normal();
    if (rec.preceding_velocity) {
      rec.preceding_velocity =
          std::max(0.0, *rec.preceding_velocity + sigma[kPrecedingVelocity] * noise_rng.normal());
    }
    if (rec.preceding_id) {
      rec.space_headway = std::max(0.0, rec.space_headway + sigma[kSpaceHeadway] * noise_rng.normal());
      rec.time_headway += sigma[kTimeHeadway] * noise_rng.normal();
    }
  }
  return out;
}

}  // namespace prgp
