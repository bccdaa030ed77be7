#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prgp/errors.hpp"

namespace prgp {

class Rng;

// One timestamped observation of one vehicle, units per the NGSIM
// convention: feet and seconds, velocities in ft/s.
struct TrajectoryRecord {
  double time = 0.0;  // seconds from dataset start
  long long vehicle_id = 0;
  double local_x = 0.0;  // horizontal (lateral)
  double local_y = 0.0;  // longitudinal
  double velocity = 0.0;
  double acceleration = 0.0;
  std::optional<long long> preceding_id;
  double space_headway = 0.0;
  double time_headway = 0.0;
  std::optional<double> preceding_velocity;
};

struct ParseOptions {
  // Logical name -> CSV header name. Logical names: vehicle_id, time, frame,
  // local_x, local_y, velocity, acceleration, preceding, space_headway,
  // time_headway, preceding_velocity.
  std::map<std::string, std::string> column_map;
  // Unit of the `time` column: "ms" (epoch milliseconds, the NGSIM
  // Global_Time convention) or "s".
  std::string time_unit = "ms";
  // Used when only a frame column is present.
  double frame_period_s = 0.1;
  // Inclusive feasible band for local_y; violations are rejected with a
  // count rather than an error.
  std::optional<std::pair<double, double>> road_bounds;
};

struct IngestSummary {
  long long rows_read = 0;
  long long records = 0;
  long long vehicles = 0;
  std::map<std::string, long long> skipped;  // reason -> count
  double preceding_fill_rate = 0.0;          // set by attach_preceding_velocity
  long long lane_change_vehicles = -1;       // set by the CLI when labeling runs
};

struct ParseResult {
  std::vector<TrajectoryRecord> records;  // ordered by (vehicle_id, time)
  IngestSummary summary;
  // True when the file carried its own preceding-velocity column (canonical
  // exports); downstream then skips the frame join.
  bool preceding_velocity_column = false;
};

// NGSIM-format ingestion. Time is normalized to seconds from the dataset
// start. Malformed rows are skipped with per-reason counts; a missing
// required column raises SchemaError naming it.
ParseResult parse_ngsim_csv(const std::string& path, const ParseOptions& options = {});

// Fills preceding_velocity by matching the preceding vehicle id within the
// same time frame. Returns the fill rate over records that have a leader.
double attach_preceding_velocity(std::vector<TrajectoryRecord>& records);

// Records indexed by vehicle and by time frame, plus the leader-search
// thresholds xi (lateral) and delta (minimal longitudinal gap).
class Scene {
 public:
  explicit Scene(std::vector<TrajectoryRecord> records, double xi = 6.0, double delta = 1.0);

  static long long time_key(double time_s);

  const std::vector<TrajectoryRecord>& records() const { return records_; }
  std::vector<long long> vehicle_ids() const;
  // Indices into records() for one vehicle, time-ordered.
  const std::vector<std::size_t>& vehicle_rows(long long vehicle_id) const;
  bool has_vehicle(long long vehicle_id) const;
  // Indices into records() sharing one time frame.
  const std::vector<std::size_t>& frame_rows(long long key) const;
  bool has_frame(long long key) const;

  double xi() const { return xi_; }
  double delta() const { return delta_; }

 private:
  std::vector<TrajectoryRecord> records_;
  std::map<long long, std::vector<std::size_t>> by_vehicle_;
  std::map<long long, std::vector<std::size_t>> by_frame_;
  double xi_;
  double delta_;
};

// First vehicle in front: the candidate minimizing the longitudinal gap
// subject to |lateral offset| <= xi and gap > delta; ties go to the lower
// vehicle id. Returns nullopt when no candidate qualifies.
std::optional<long long> identify_leader(const Scene& scene, long long vehicle_id, double time_s);

struct SplitResult {
  std::vector<TrajectoryRecord> train;
  std::vector<TrajectoryRecord> test;
  std::vector<long long> train_vehicles;
  std::vector<long long> test_vehicles;
};

// Vehicle-granularity shuffle split; deterministic in the seed. The test
// side receives round(test_fraction * vehicles), clamped to [1, V-1].
SplitResult shuffle_split(const std::vector<TrajectoryRecord>& records, double test_fraction,
                          std::uint64_t seed);

// Vehicles whose lane index (floor(local_x / lane_width)) changes at least
// once; used to stratify datasets into lane-keeping / lane-changing subsets.
std::set<long long> label_lane_changes(const std::vector<TrajectoryRecord>& records,
                                       double lane_width_ft = 12.0);

// Canonical export; parse_ngsim_csv reads it back with canonical_columns().
void export_canonical_csv(const std::string& path, const std::vector<TrajectoryRecord>& records);

// Column map + options matching export_canonical_csv output.
ParseOptions canonical_parse_options();

}  // namespace prgp
