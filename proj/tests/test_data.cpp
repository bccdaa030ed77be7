#include "prgp/data.hpp"

#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "prgp/csv.hpp"
#include "prgp/rng.hpp"

namespace prgp {
namespace {

class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    path_ = testing::TempDir() + "prgp_data_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".csv";
    std::ofstream out(path_);
    out << contents;
  }
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

const char kHeader[] =
    "Vehicle_ID,Global_Time,Local_X,Local_Y,v_Vel,v_Acc,Preceding,Space_Headway,Time_Headway\n";

TEST(ParseNgsim, SingleRowNormalizesToOrigin) {
  TempFile file(std::string(kHeader) + "7,1113433135300,6.3,100.5,30.2,0.1,0,0,0\n");
  const ParseResult result = parse_ngsim_csv(file.path());
  ASSERT_EQ(result.records.size(), 1u);
  EXPECT_DOUBLE_EQ(result.records[0].time, 0.0);
  EXPECT_EQ(result.records[0].vehicle_id, 7);
  EXPECT_FALSE(result.records[0].preceding_id.has_value());  // 0 means no leader
  EXPECT_EQ(result.summary.vehicles, 1);
}

TEST(ParseNgsim, EpochMillisecondsBecomeSecondOffsets) {
  TempFile file(std::string(kHeader) +
                "1,1113433135300,6.3,100.0,30.0,0.0,0,0,0\n"
                "1,1113433135400,6.3,103.0,30.0,0.0,0,0,0\n"
                "1,1113433135500,6.3,106.0,30.0,0.0,0,0,0\n");
  const ParseResult result = parse_ngsim_csv(file.path());
  ASSERT_EQ(result.records.size(), 3u);
  EXPECT_DOUBLE_EQ(result.records[0].time, 0.0);
  EXPECT_NEAR(result.records[1].time, 0.1, 1e-12);
  EXPECT_NEAR(result.records[2].time, 0.2, 1e-12);
}

TEST(ParseNgsim, MalformedRowSkippedWithReason) {
  TempFile file(std::string(kHeader) +
                "1,1113433135300,6.3,100.0,30.0,0.0,0,0,0\n"
                "2,1113433135300,6.3,100.0,not_a_number,0.0,0,0,0\n");
  const ParseResult result = parse_ngsim_csv(file.path());
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.summary.skipped.at("parse"), 1);
}

TEST(ParseNgsim, MissingColumnNamesIt) {
  TempFile file("Vehicle_ID,Global_Time,Local_X,Local_Y,v_Vel,v_Acc,Preceding,Space_Headway\n"
                "1,0,0,0,0,0,0,0\n");
  try {
    parse_ngsim_csv(file.path());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("Time_Headway"), std::string::npos);
  }
}

TEST(ParseNgsim, EmptyFileThrows) {
  TempFile file(kHeader);
  EXPECT_THROW(parse_ngsim_csv(file.path()), EmptyDataError);
}

TEST(ParseNgsim, RoadBoundsRejectWithCount) {
  ParseOptions options;
  options.road_bounds = {{0.0, 200.0}};
  TempFile file(std::string(kHeader) +
                "1,1000,6.3,100.0,30.0,0.0,0,0,0\n"
                "1,1100,6.3,250.0,30.0,0.0,0,0,0\n");
  const ParseResult result = parse_ngsim_csv(file.path(), options);
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.summary.skipped.at("road_bounds"), 1);
}

TEST(ParseNgsim, StableOrderingByVehicleThenTime) {
  TempFile file(std::string(kHeader) +
                "2,1200,6.3,100.0,30.0,0.0,0,0,0\n"
                "1,1100,6.3,100.0,30.0,0.0,0,0,0\n"
                "1,1000,6.3,90.0,30.0,0.0,0,0,0\n");
  const ParseResult result = parse_ngsim_csv(file.path());
  ASSERT_EQ(result.records.size(), 3u);
  EXPECT_EQ(result.records[0].vehicle_id, 1);
  EXPECT_LT(result.records[0].time, result.records[1].time);
  EXPECT_EQ(result.records[2].vehicle_id, 2);
}

TEST(AttachPrecedingVelocity, DirectJoin) {
  std::vector<TrajectoryRecord> records(2);
  records[0].vehicle_id = 1;
  records[0].time = 0.5;
  records[0].velocity = 20.0;
  records[1].vehicle_id = 2;
  records[1].time = 0.5;
  records[1].velocity = 15.0;
  records[1].preceding_id = 1;
  const double fill = attach_preceding_velocity(records);
  EXPECT_DOUBLE_EQ(fill, 1.0);
  ASSERT_TRUE(records[1].preceding_velocity.has_value());
  EXPECT_DOUBLE_EQ(*records[1].preceding_velocity, 20.0);
  EXPECT_FALSE(records[0].preceding_velocity.has_value());
}

TEST(AttachPrecedingVelocity, LeaderAbsentFromFrame) {
  std::vector<TrajectoryRecord> records(1);
  records[0].vehicle_id = 2;
  records[0].time = 0.5;
  records[0].preceding_id = 99;
  const double fill = attach_preceding_velocity(records);
  EXPECT_DOUBLE_EQ(fill, 0.0);
  EXPECT_FALSE(records[0].preceding_velocity.has_value());
}

TEST(AttachPrecedingVelocity, MatchesBruteForceJoin) {
  Rng rng(77);
  std::vector<TrajectoryRecord> records;
  for (int frame = 0; frame < 20; ++frame) {
    for (long long vid = 1; vid <= 3; ++vid) {
      TrajectoryRecord rec;
      rec.vehicle_id = vid;
      rec.time = 0.1 * frame;
      rec.velocity = rng.uniform(10.0, 40.0);
      if (vid > 1 && rng.uniform() < 0.8) {
        rec.preceding_id = vid - 1;
      }
      records.push_back(rec);
    }
  }
  std::vector<TrajectoryRecord> expected = records;
  // Brute-force nested-loop join oracle.
  for (TrajectoryRecord& rec : expected) {
    rec.preceding_velocity.reset();
    if (!rec.preceding_id) {
      continue;
    }
    for (const TrajectoryRecord& other : records) {
      if (other.vehicle_id == *rec.preceding_id &&
          Scene::time_key(other.time) == Scene::time_key(rec.time)) {
        rec.preceding_velocity = other.velocity;
      }
    }
  }
  attach_preceding_velocity(records);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].preceding_velocity.has_value(),
              expected[i].preceding_velocity.has_value());
    if (records[i].preceding_velocity) {
      EXPECT_DOUBLE_EQ(*records[i].preceding_velocity, *expected[i].preceding_velocity);
    }
  }
}

std::vector<TrajectoryRecord> three_vehicle_frame() {
  std::vector<TrajectoryRecord> records(3);
  for (int i = 0; i < 3; ++i) {
    records[static_cast<std::size_t>(i)].vehicle_id = i + 1;
    records[static_cast<std::size_t>(i)].time = 0.0;
    records[static_cast<std::size_t>(i)].local_x = 6.0;
  }
  records[0].local_y = 0.0;
  records[1].local_y = 50.0;
  records[2].local_y = 120.0;
  return records;
}

TEST(IdentifyLeader, NearestAheadWins) {
  const Scene scene(three_vehicle_frame(), 6.0, 1.0);
  const auto leader = identify_leader(scene, 1, 0.0);
  ASSERT_TRUE(leader.has_value());
  EXPECT_EQ(*leader, 2);
}

TEST(IdentifyLeader, SingleVehicleHasNone) {
  std::vector<TrajectoryRecord> records(1);
  records[0].vehicle_id = 5;
  records[0].time = 0.0;
  const Scene scene(records);
  EXPECT_FALSE(identify_leader(scene, 5, 0.0).has_value());
}

TEST(IdentifyLeader, LateralThresholdIsInclusive) {
  std::vector<TrajectoryRecord> records = three_vehicle_frame();
  records[1].local_x = 12.0;  // exactly xi away from 6.0
  const Scene scene(records, 6.0, 1.0);
  const auto leader = identify_leader(scene, 1, 0.0);
  ASSERT_TRUE(leader.has_value());
  EXPECT_EQ(*leader, 2);
}

TEST(IdentifyLeader, MinimalGapIsStrict) {
  std::vector<TrajectoryRecord> records = three_vehicle_frame();
  records[1].local_y = 1.0;  // gap == delta, excluded by the strict inequality
  const Scene scene(records, 6.0, 1.0);
  const auto leader = identify_leader(scene, 1, 0.0);
  ASSERT_TRUE(leader.has_value());
  EXPECT_EQ(*leader, 3);
}

TEST(IdentifyLeader, UnknownVehicleThrows) {
  const Scene scene(three_vehicle_frame());
  EXPECT_THROW(identify_leader(scene, 42, 0.0), InputDomainError);
  EXPECT_THROW(identify_leader(scene, 1, 99.0), InputDomainError);
}

TEST(IdentifyLeader, MatchesBruteForceOnRandomScenes) {
  Rng rng(123);
  for (int scene_idx = 0; scene_idx < 1000; ++scene_idx) {
    const int n = 2 + static_cast<int>(rng.bounded(9));
    std::vector<TrajectoryRecord> records(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      records[static_cast<std::size_t>(i)].vehicle_id = i + 1;
      records[static_cast<std::size_t>(i)].time = 0.0;
      records[static_cast<std::size_t>(i)].local_x = rng.uniform(0.0, 24.0);
      records[static_cast<std::size_t>(i)].local_y = rng.uniform(0.0, 300.0);
    }
    const double xi = rng.uniform(2.0, 10.0);
    const double delta = rng.uniform(0.5, 5.0);
    const Scene scene(records, xi, delta);
    const long long query = 1 + static_cast<long long>(rng.bounded(static_cast<std::uint64_t>(n)));

    // O(V^2)-style brute force oracle.
    const TrajectoryRecord* self = nullptr;
    for (const auto& rec : records) {
      if (rec.vehicle_id == query) {
        self = &rec;
      }
    }
    std::optional<long long> expected;
    double best_gap = 0.0;
    for (const auto& cand : records) {
      if (cand.vehicle_id == query) {
        continue;
      }
      const double gap = cand.local_y - self->local_y;
      if (std::abs(cand.local_x - self->local_x) <= xi && gap > delta) {
        if (!expected || gap < best_gap ||
            (gap == best_gap && cand.vehicle_id < *expected)) {
          expected = cand.vehicle_id;
          best_gap = gap;
        }
      }
    }
    EXPECT_EQ(identify_leader(scene, query, 0.0), expected) << "scene " << scene_idx;
  }
}

std::vector<TrajectoryRecord> multi_vehicle_records(int vehicles, int frames) {
  std::vector<TrajectoryRecord> records;
  for (int v = 1; v <= vehicles; ++v) {
    for (int f = 0; f < frames; ++f) {
      TrajectoryRecord rec;
      rec.vehicle_id = v;
      rec.time = 0.1 * f;
      rec.local_y = 10.0 * v + f;
      records.push_back(rec);
    }
  }
  return records;
}

TEST(ShuffleSplit, FiftyVehiclesFraction02GivesTenTest) {
  const auto records = multi_vehicle_records(50, 3);
  const SplitResult split = shuffle_split(records, 0.2, 1);
  EXPECT_EQ(split.test_vehicles.size(), 10u);
  EXPECT_EQ(split.train_vehicles.size(), 40u);
}

TEST(ShuffleSplit, DeterministicGivenSeed) {
  const auto records = multi_vehicle_records(20, 2);
  const SplitResult a = shuffle_split(records, 0.3, 99);
  const SplitResult b = shuffle_split(records, 0.3, 99);
  EXPECT_EQ(a.test_vehicles, b.test_vehicles);
  const SplitResult c = shuffle_split(records, 0.3, 100);
  EXPECT_NE(a.test_vehicles, c.test_vehicles);  // overwhelmingly likely
}

TEST(ShuffleSplit, PartitionProperty) {
  const auto records = multi_vehicle_records(13, 4);
  const SplitResult split = shuffle_split(records, 0.25, 7);
  EXPECT_EQ(split.train.size() + split.test.size(), records.size());
  std::set<long long> train_ids(split.train_vehicles.begin(), split.train_vehicles.end());
  for (const auto& rec : split.test) {
    EXPECT_EQ(train_ids.count(rec.vehicle_id), 0u);
  }
  std::set<long long> all_ids(split.train_vehicles.begin(), split.train_vehicles.end());
  all_ids.insert(split.test_vehicles.begin(), split.test_vehicles.end());
  EXPECT_EQ(all_ids.size(), 13u);
}

TEST(ShuffleSplit, DegenerateFractionThrows) {
  const auto records = multi_vehicle_records(5, 2);
  EXPECT_THROW(shuffle_split(records, 0.0, 1), InputDomainError);
  EXPECT_THROW(shuffle_split(records, 1.0, 1), InputDomainError);
}

TEST(LaneChanges, BucketedByLaneWidth) {
  std::vector<TrajectoryRecord> records(4);
  for (int i = 0; i < 4; ++i) {
    records[static_cast<std::size_t>(i)].time = 0.1 * i;
  }
  records[0].vehicle_id = 1;
  records[0].local_x = 6.0;
  records[1].vehicle_id = 1;
  records[1].local_x = 18.0;  // lane 0 -> lane 1
  records[2].vehicle_id = 2;
  records[2].local_x = 6.0;
  records[3].vehicle_id = 2;
  records[3].local_x = 9.0;  // same lane
  const auto changed = label_lane_changes(records, 12.0);
  EXPECT_EQ(changed.count(1), 1u);
  EXPECT_EQ(changed.count(2), 0u);
}

TEST(CanonicalExport, RoundTripsLosslessly) {
  TempFile file(std::string(kHeader) +
                "1,1000,6.25,100.125,30.5,0.25,0,0,0\n"
                "1,1100,6.25,103.0625,30.5,0.25,0,0,0\n"
                "2,1000,6.5,60.03125,28.25,-0.125,1,40.09375,1.4190625\n"
                "2,1100,6.5,62.875,28.25,-0.125,1,40.1875,1.421875\n");
  ParseResult parsed = parse_ngsim_csv(file.path());
  attach_preceding_velocity(parsed.records);

  const std::string out_path = testing::TempDir() + "prgp_canonical_roundtrip.csv";
  export_canonical_csv(out_path, parsed.records);
  const ParseResult reparsed = parse_ngsim_csv(out_path, canonical_parse_options());
  std::remove(out_path.c_str());

  ASSERT_EQ(reparsed.records.size(), parsed.records.size());
  for (std::size_t i = 0; i < parsed.records.size(); ++i) {
    const TrajectoryRecord& a = parsed.records[i];
    const TrajectoryRecord& b = reparsed.records[i];
    EXPECT_EQ(a.vehicle_id, b.vehicle_id);
    EXPECT_DOUBLE_EQ(a.time, b.time);
    EXPECT_DOUBLE_EQ(a.local_x, b.local_x);
    EXPECT_DOUBLE_EQ(a.local_y, b.local_y);
    EXPECT_DOUBLE_EQ(a.velocity, b.velocity);
    EXPECT_DOUBLE_EQ(a.acceleration, b.acceleration);
    EXPECT_EQ(a.preceding_id, b.preceding_id);
    EXPECT_EQ(a.preceding_velocity.has_value(), b.preceding_velocity.has_value());
    if (a.preceding_velocity) {
      EXPECT_DOUBLE_EQ(*a.preceding_velocity, *b.preceding_velocity);
    }
    EXPECT_DOUBLE_EQ(a.space_headway, b.space_headway);
    EXPECT_DOUBLE_EQ(a.time_headway, b.time_headway);
  }
}

}  // namespace
}  // namespace prgp
