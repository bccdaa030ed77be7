#include "prgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "prgp/csv.hpp"
#include "prgp/rng.hpp"

namespace prgp {

namespace {

const std::map<std::string, std::string> kDefaultColumns = {
    {"vehicle_id", "Vehicle_ID"},       {"time", "Global_Time"},
    {"frame", "Frame_ID"},              {"local_x", "Local_X"},
    {"local_y", "Local_Y"},             {"velocity", "v_Vel"},
    {"acceleration", "v_Acc"},          {"preceding", "Preceding"},
    {"space_headway", "Space_Headway"}, {"time_headway", "Time_Headway"},
    {"preceding_velocity", "Preceding_Velocity"},
};

std::string mapped_name(const ParseOptions& options, const std::string& logical) {
  auto it = options.column_map.find(logical);
  if (it != options.column_map.end()) {
    return it->second;
  }
  return kDefaultColumns.at(logical);
}

bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last && std::isfinite(out);
}

bool parse_ll(const std::string& cell, long long& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

ParseResult parse_ngsim_csv(const std::string& path, const ParseOptions& options) {
  const csv::Table table = csv::read_table(path);
  if (table.rows.empty()) {
    throw EmptyDataError("parse_ngsim_csv: no data rows in " + path);
  }

  auto col = [&](const std::string& logical) { return table.column(mapped_name(options, logical)); };

  // Either a time column or a frame column must exist; everything else in
  // the required set is mandatory.
  const auto time_col = col("time");
  const auto frame_col = col("frame");
  if (!time_col && !frame_col) {
    throw SchemaError("parse_ngsim_csv: missing required column " + mapped_name(options, "time") +
                      " (or " + mapped_name(options, "frame") + ")");
  }
  const char* required[] = {"vehicle_id",   "local_x",       "local_y",     "velocity",
                            "acceleration", "preceding",     "space_headway", "time_headway"};
  for (const char* logical : required) {
    if (!col(logical)) {
      throw SchemaError("parse_ngsim_csv: missing required column " +
                        mapped_name(options, logical));
    }
  }
  const auto pv_col = col("preceding_velocity");

  ParseResult out;
  out.preceding_velocity_column = pv_col.has_value();
  out.summary.rows_read = static_cast<long long>(table.rows.size());

  struct Raw {
    TrajectoryRecord rec;
    double raw_time;  // source units; scaled only after the origin shift
  };
  std::vector<Raw> raws;
  raws.reserve(table.rows.size());

  // One time source per file. Raw values are normalized first and scaled
  // second, so epoch-scale magnitudes cannot eat the sub-second precision.
  const bool use_time_col = time_col.has_value();
  const double time_scale =
      use_time_col ? (options.time_unit == "s" ? 1.0 : 1e-3) : options.frame_period_s;

  for (const auto& row : table.rows) {
    auto cell = [&](std::optional<std::size_t> idx) -> const std::string& {
      static const std::string empty;
      if (!idx || *idx >= row.size()) {
        return empty;
      }
      return row[*idx];
    };

    Raw raw;
    TrajectoryRecord& rec = raw.rec;
    bool ok = parse_ll(cell(col("vehicle_id")), rec.vehicle_id);
    double raw_time = 0.0;
    if (ok && parse_double(cell(use_time_col ? time_col : frame_col), raw_time)) {
      raw.raw_time = raw_time;
    } else {
      ok = false;
    }
    ok = ok && parse_double(cell(col("local_x")), rec.local_x);
    ok = ok && parse_double(cell(col("local_y")), rec.local_y);
    ok = ok && parse_double(cell(col("velocity")), rec.velocity);
    ok = ok && parse_double(cell(col("acceleration")), rec.acceleration);
    ok = ok && parse_double(cell(col("space_headway")), rec.space_headway);
    ok = ok && parse_double(cell(col("time_headway")), rec.time_headway);
    if (ok) {
      const std::string& pre = cell(col("preceding"));
      long long pid = 0;
      if (pre.empty() || pre == "\r") {
        rec.preceding_id.reset();
      } else if (parse_ll(pre, pid)) {
        // NGSIM encodes "no leader" as 0.
        if (pid > 0) {
          rec.preceding_id = pid;
        }
      } else {
        ok = false;
      }
    }
    if (ok && pv_col) {
      const std::string& pv = cell(pv_col);
      double v = 0.0;
      if (!pv.empty() && pv != "\r") {
        if (parse_double(pv, v)) {
          rec.preceding_velocity = v;
        } else {
          ok = false;
        }
      }
    }
    if (!ok) {
      ++out.summary.skipped["parse"];
      continue;
    }
    if (rec.velocity < 0.0) {
      ++out.summary.skipped["negative_velocity"];
      continue;
    }
    if (rec.preceding_id.has_value() && rec.space_headway < 0.0) {
      ++out.summary.skipped["negative_space_headway"];
      continue;
    }
    if (options.road_bounds.has_value() &&
        (rec.local_y < options.road_bounds->first || rec.local_y > options.road_bounds->second)) {
      ++out.summary.skipped["road_bounds"];
      continue;
    }
    raws.push_back(std::move(raw));
  }

  if (raws.empty()) {
    throw EmptyDataError("parse_ngsim_csv: every row was skipped in " + path);
  }

  double t0 = raws.front().raw_time;
  for (const Raw& r : raws) {
    t0 = std::min(t0, r.raw_time);
  }
  for (Raw& r : raws) {
    r.rec.time = (r.raw_time - t0) * time_scale;
  }

  std::stable_sort(raws.begin(), raws.end(), [](const Raw& a, const Raw& b) {
    if (a.rec.vehicle_id != b.rec.vehicle_id) {
      return a.rec.vehicle_id < b.rec.vehicle_id;
    }
    return a.rec.time < b.rec.time;
  });

  std::set<long long> vehicles;
  out.records.reserve(raws.size());
  for (Raw& r : raws) {
    vehicles.insert(r.rec.vehicle_id);
    out.records.push_back(std::move(r.rec));
  }
  out.summary.records = static_cast<long long>(out.records.size());
  out.summary.vehicles = static_cast<long long>(vehicles.size());
  return out;
}

double attach_preceding_velocity(std::vector<TrajectoryRecord>& records) {
  std::map<std::pair<long long, long long>, double> velocity_at;  // (vehicle, frame) -> v
  for (const TrajectoryRecord& rec : records) {
    velocity_at[{rec.vehicle_id, Scene::time_key(rec.time)}] = rec.velocity;
  }
  long long with_leader = 0;
  long long filled = 0;
  for (TrajectoryRecord& rec : records) {
    if (!rec.preceding_id.has_value()) {
      rec.preceding_velocity.reset();
      continue;
    }
    ++with_leader;
    auto it = velocity_at.find({*rec.preceding_id, Scene::time_key(rec.time)});
    if (it == velocity_at.end()) {
      rec.preceding_velocity.reset();
    } else {
      rec.preceding_velocity = it->second;
      ++filled;
    }
  }
  return with_leader == 0 ? 0.0
                          : static_cast<double>(filled) / static_cast<double>(with_leader);
}

Scene::Scene(std::vector<TrajectoryRecord> records, double xi, double delta)
    : records_(std::move(records)), xi_(xi), delta_(delta) {
  if (!(xi_ > 0.0) || !(delta_ > 0.0)) {
    throw InputDomainError("Scene: xi and delta must be positive");
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    by_vehicle_[records_[i].vehicle_id].push_back(i);
    by_frame_[time_key(records_[i].time)].push_back(i);
  }
}

long long Scene::time_key(double time_s) {
  return static_cast<long long>(std::llround(time_s * 1e6));
}

std::vector<long long> Scene::vehicle_ids() const {
  std::vector<long long> ids;
  ids.reserve(by_vehicle_.size());
  for (const auto& [id, rows] : by_vehicle_) {
    ids.push_back(id);
  }
  return ids;
}

bool Scene::has_vehicle(long long vehicle_id) const { return by_vehicle_.count(vehicle_id) > 0; }

const std::vector<std::size_t>& Scene::vehicle_rows(long long vehicle_id) const {
  auto it = by_vehicle_.find(vehicle_id);
  if (it == by_vehicle_.end()) {
    throw InputDomainError("Scene: unknown vehicle " + std::to_string(vehicle_id));
  }
  return it->second;
}

bool Scene::has_frame(long long key) const { return by_frame_.count(key) > 0; }

const std::vector<std::size_t>& Scene::frame_rows(long long key) const {
  auto it = by_frame_.find(key);
  if (it == by_frame_.end()) {
    throw InputDomainError("Scene: unknown frame");
  }
  return it->second;
}

std::optional<long long> identify_leader(const Scene& scene, long long vehicle_id, double time_s) {
  const long long key = Scene::time_key(time_s);
  if (!scene.has_frame(key)) {
    throw InputDomainError("identify_leader: no records at the requested time");
  }
  const auto& rows = scene.frame_rows(key);
  const TrajectoryRecord* self = nullptr;
  for (std::size_t idx : rows) {
    if (scene.records()[idx].vehicle_id == vehicle_id) {
      self = &scene.records()[idx];
      break;
    }
  }
  if (self == nullptr) {
    throw InputDomainError("identify_leader: vehicle " + std::to_string(vehicle_id) +
                           " absent from the frame");
  }

  std::optional<long long> best;
  double best_gap = 0.0;
  for (std::size_t idx : rows) {
    const TrajectoryRecord& cand = scene.records()[idx];
    if (cand.vehicle_id == vehicle_id) {
      continue;
    }
    const double lateral = std::abs(cand.local_x - self->local_x);
    const double gap = cand.local_y - self->local_y;
    if (lateral > scene.xi() || !(gap > scene.delta())) {
      continue;
    }
    if (!best || gap < best_gap || (gap == best_gap && cand.vehicle_id < *best)) {
      best = cand.vehicle_id;
      best_gap = gap;
    }
  }
  return best;
}

SplitResult shuffle_split(const std::vector<TrajectoryRecord>& records, double test_fraction,
                          std::uint64_t seed) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    throw InputDomainError("shuffle_split: test_fraction must lie strictly in (0, 1)");
  }
  std::set<long long> id_set;
  for (const TrajectoryRecord& rec : records) {
    id_set.insert(rec.vehicle_id);
  }
  if (id_set.size() < 2) {
    throw InputDomainError("shuffle_split: need at least 2 vehicles");
  }
  std::vector<long long> ids(id_set.begin(), id_set.end());

  // Fisher-Yates with the project Rng; std::shuffle is not pinned across
  // library versions.
  Rng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(i + 1));
    std::swap(ids[i], ids[j]);
  }

  std::size_t n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(ids.size())));
  n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);

  SplitResult out;
  std::set<long long> test_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  for (const TrajectoryRecord& rec : records) {
    if (test_ids.count(rec.vehicle_id) > 0) {
      out.test.push_back(rec);
    } else {
      out.train.push_back(rec);
    }
  }
  for (long long id : ids) {
    if (test_ids.count(id) > 0) {
      out.test_vehicles.push_back(id);
    } else {
      out.train_vehicles.push_back(id);
    }
  }
  std::sort(out.train_vehicles.begin(), out.train_vehicles.end());
  std::sort(out.test_vehicles.begin(), out.test_vehicles.end());
  return out;
}

std::set<long long> label_lane_changes(const std::vector<TrajectoryRecord>& records,
                                       double lane_width_ft) {
  if (!(lane_width_ft > 0.0)) {
    throw InputDomainError("label_lane_changes: lane width must be positive");
  }
  std::map<long long, long long> last_lane;
  std::set<long long> changed;
  for (const TrajectoryRecord& rec : records) {
    const long long lane = static_cast<long long>(std::floor(rec.local_x / lane_width_ft));
    auto it = last_lane.find(rec.vehicle_id);
    if (it != last_lane.end() && it->second != lane) {
      changed.insert(rec.vehicle_id);
    }
    last_lane[rec.vehicle_id] = lane;
  }
  return changed;
}

void export_canonical_csv(const std::string& path, const std::vector<TrajectoryRecord>& records) {
  std::vector<std::string> header = {
      "vehicle_id",        "time_s",       "local_x_ft",   "local_y_ft",
      "velocity_fps",      "acceleration_fps2", "preceding_id", "preceding_velocity_fps",
      "space_headway_ft",  "time_headway_s"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const TrajectoryRecord& rec : records) {
    rows.push_back({
        csv::format_int(rec.vehicle_id),
        csv::format_double(rec.time),
        csv::format_double(rec.local_x),
        csv::format_double(rec.local_y),
        csv::format_double(rec.velocity),
        csv::format_double(rec.acceleration),
        rec.preceding_id ? csv::format_int(*rec.preceding_id) : std::string(),
        rec.preceding_velocity ? csv::format_double(*rec.preceding_velocity) : std::string(),
        csv::format_double(rec.space_headway),
        csv::format_double(rec.time_headway),
    });
  }
  csv::write_table(path, header, rows);
}

ParseOptions canonical_parse_options() {
  ParseOptions options;
  options.column_map = {
      {"vehicle_id", "vehicle_id"},
      {"time", "time_s"},
      {"frame", "__absent__"},
      {"local_x", "local_x_ft"},
      {"local_y", "local_y_ft"},
      {"velocity", "velocity_fps"},
      {"acceleration", "acceleration_fps2"},
      {"preceding", "preceding_id"},
      {"space_headway", "space_headway_ft"},
      {"time_headway", "time_headway_s"},
      {"preceding_velocity", "preceding_velocity_fps"},
  };
  options.time_unit = "s";
  return options;
}

}  // namespace prgp
