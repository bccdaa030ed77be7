#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "prgp/csv.hpp"
#include "prgp/evaluation.hpp"
#include "prgp/plot.hpp"
#include "prgp/serialize.hpp"
#include "prgp/train.hpp"

namespace prgp::cli {

namespace fs = std::filesystem;

namespace {

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("PRGP_LOG");
    if (env == nullptr) {
      return 1;
    }
    const std::string value(env);
    if (value == "quiet") {
      return 0;
    }
    if (value == "debug") {
      return 2;
    }
    return 1;
  }();
  return level;
}

void ensure_out_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + config.out_dir + ": " + ec.message());
  }
}

// Loads the configured dataset: CSV when a path is given, otherwise the
// synthetic scene (observed side).
struct Dataset {
  std::vector<TrajectoryRecord> records;
  IngestSummary summary;
  bool preceding_velocity_from_file = false;
};

Dataset load_dataset(const RunConfig& config) {
  Dataset out;
  if (config.data_path.empty()) {
    SynthSpec spec = config.synth;
    spec.seed = config.seed;
    SynthScene scene = synth_generate(spec);
    for (const std::string& warning : scene.warnings) {
      log_info(warning);
    }
    out.records = std::move(scene.observed);
    out.summary.records = static_cast<long long>(out.records.size());
    std::set<long long> ids;
    for (const auto& rec : out.records) {
      ids.insert(rec.vehicle_id);
    }
    out.summary.vehicles = static_cast<long long>(ids.size());
    out.preceding_velocity_from_file = true;
    return out;
  }
  ParseOptions options = config.parse_options;
  if (config.data_format == "canonical") {
    ParseOptions canonical = canonical_parse_options();
    canonical.road_bounds = options.road_bounds;
    for (const auto& [key, value] : options.column_map) {
      canonical.column_map[key] = value;
    }
    options = canonical;
  }
  ParseResult parsed = parse_ngsim_csv(config.data_path, options);
  out.records = std::move(parsed.records);
  out.summary = parsed.summary;
  out.preceding_velocity_from_file = parsed.preceding_velocity_column;
  if (!out.preceding_velocity_from_file) {
    out.summary.preceding_fill_rate = attach_preceding_velocity(out.records);
  }
  return out;
}

std::vector<TrajectoryRecord> apply_lane_filter(const RunConfig& config,
                                                std::vector<TrajectoryRecord> records,
                                                long long* lane_change_count) {
  const std::set<long long> changers = label_lane_changes(records, config.lane_width_ft);
  if (lane_change_count != nullptr) {
    *lane_change_count = static_cast<long long>(changers.size());
  }
  if (config.lane_filter == "all") {
    return records;
  }
  const bool keep_changers = config.lane_filter == "keep_changers";
  if (!keep_changers && config.lane_filter != "drop_changers") {
    throw SchemaError("config: lane_filter must be all, keep_changers, or drop_changers");
  }
  std::vector<TrajectoryRecord> filtered;
  for (TrajectoryRecord& rec : records) {
    if ((changers.count(rec.vehicle_id) > 0) == keep_changers) {
      filtered.push_back(std::move(rec));
    }
  }
  return filtered;
}

std::vector<TrajectoryRecord> select_split(const RunConfig& config,
                                           const std::vector<TrajectoryRecord>& records) {
  if (config.train_split == "all") {
    return records;
  }
  const SplitResult split =
      shuffle_split(records, config.test_fraction, mix_seed(config.seed, 0x53504c54));
  if (config.train_split == "train") {
    return split.train;
  }
  if (config.train_split == "test") {
    return split.test;
  }
  throw SchemaError("config: train.split must be all, train, or test");
}

std::string quantity_label(PredictedQuantity q) { return quantity_name(q); }

ParamBounds bounds_for(const RunConfig& config, PhysicsKind kind) {
  const auto it = config.calibrate_bounds.find(kind_name(kind));
  if (it != config.calibrate_bounds.end()) {
    if (it->second.lower.size() != beta_size(kind)) {
      throw SchemaError(std::string("config: bounds for ") + kind_name(kind) +
                        " must list " + std::to_string(beta_size(kind)) + " ranges");
    }
    return it->second;
  }
  return default_bounds(kind);
}

std::vector<PhysicsModel> resolve_baselines(const RunConfig& config) {
  std::map<std::string, Eigen::VectorXd> calibrated;
  if (!config.baseline_params_path.empty()) {
    const csv::Table table = csv::read_table(config.baseline_params_path);
    const auto model_col = table.column("model");
    const auto index_col = table.column("param_index");
    const auto value_col = table.column("value");
    if (!model_col || !index_col || !value_col) {
      throw SchemaError("baseline_params: expected columns model,param_index,value");
    }
    std::map<std::string, std::vector<double>> values;
    for (const auto& row : table.rows) {
      values[row[*model_col]].push_back(std::stod(row[*value_col]));
    }
    for (auto& [name, v] : values) {
      calibrated[name] =
          Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  }
  std::vector<PhysicsModel> baselines;
  for (PhysicsKind kind : config.baselines) {
    const auto it = calibrated.find(kind_name(kind));
    if (it != calibrated.end()) {
      baselines.push_back(make_physics_model(kind, it->second));
    } else {
      baselines.push_back(make_physics_model(kind));
    }
  }
  return baselines;
}

void print_summary(const Dataset& dataset, long long lane_changers) {
  std::printf("records: %lld\n", dataset.summary.records);
  std::printf("vehicles: %lld\n", dataset.summary.vehicles);
  for (const auto& [reason, count] : dataset.summary.skipped) {
    std::printf("skipped[%s]: %lld\n", reason.c_str(), count);
  }
  if (!dataset.preceding_velocity_from_file) {
    std::printf("preceding_velocity_fill_rate: %s\n",
                csv::format_double(dataset.summary.preceding_fill_rate).c_str());
  }
  if (lane_changers >= 0) {
    std::printf("lane_change_vehicles: %lld\n", lane_changers);
  }
}

}  // namespace

bool log_enabled(int level) { return log_level() >= level; }

void log_info(const std::string& message) {
  if (log_enabled(1)) {
    std::fprintf(stderr, "[prgp] %s\n", message.c_str());
  }
}

void log_debug(const std::string& message) {
  if (log_enabled(2)) {
    std::fprintf(stderr, "[prgp:debug] %s\n", message.c_str());
  }
}

int cmd_ingest(const RunConfig& config) {
  ensure_out_dir(config);
  Dataset dataset = load_dataset(config);
  long long lane_changers = 0;
  dataset.records = apply_lane_filter(config, std::move(dataset.records), &lane_changers);
  if (dataset.records.empty()) {
    throw EmptyDataError("ingest: no records left after filtering");
  }

  // Validate the dataset's preceding column against the leader search.
  long long checked = 0;
  long long agreed = 0;
  const Scene scene(dataset.records, config.xi_ft, config.delta_ft);
  for (const TrajectoryRecord& rec : dataset.records) {
    if (checked >= 2000) {
      break;
    }
    if (!rec.preceding_id.has_value()) {
      continue;
    }
    ++checked;
    const auto found = identify_leader(scene, rec.vehicle_id, rec.time);
    if (found.has_value() && *found == *rec.preceding_id) {
      ++agreed;
    }
  }

  const std::string out_path = config.out_dir + "/canonical.csv";
  export_canonical_csv(out_path, dataset.records);
  print_summary(dataset, lane_changers);
  if (checked > 0) {
    std::printf("leader_validation_agreement: %s (n=%lld)\n",
                csv::format_double(static_cast<double>(agreed) / checked).c_str(), checked);
  }
  std::printf("wrote: %s\n", out_path.c_str());
  return 0;
}

int cmd_synth(const RunConfig& config) {
  ensure_out_dir(config);
  SynthSpec spec = config.synth;
  spec.seed = config.seed;
  const SynthScene scene = synth_generate(spec);
  for (const std::string& warning : scene.warnings) {
    log_info(warning);
  }
  const std::string observed_path = config.out_dir + "/synth_observed.csv";
  const std::string truth_path = config.out_dir + "/synth_ground_truth.csv";
  export_canonical_csv(observed_path, scene.observed);
  export_canonical_csv(truth_path, scene.ground_truth);
  std::printf("model: %s\n", kind_name(spec.follower.kind));
  std::printf("records: %zu\n", scene.observed.size());
  std::printf("noise_std:");
  for (int j = 0; j < kTrajectoryDims; ++j) {
    std::printf(" %s=%s", output_dim_name(j),
                csv::format_double(scene.noise_std_used[j]).c_str());
  }
  std::printf("\nwrote: %s\nwrote: %s\n", observed_path.c_str(), truth_path.c_str());
  return 0;
}

int cmd_calibrate(const RunConfig& config) {
  ensure_out_dir(config);
  if (config.calibrate_models.empty()) {
    throw InputDomainError("calibrate: no models listed under calibrate.models");
  }
  Dataset dataset = load_dataset(config);
  std::vector<TrajectoryRecord> records = dataset.records;
  if (config.train_split != "all") {
    records = select_split(config, records);
  }
  const std::vector<SamplePair> pairs = make_sample_pairs(records);

  std::vector<std::vector<std::string>> param_rows;
  std::vector<std::vector<std::string>> perf_rows;
  for (PhysicsKind kind : config.calibrate_models) {
    CalibrationOptions options = config.calibrate_options;
    options.seed = mix_seed(config.seed, 0x43414c49 + static_cast<int>(kind));
    const CalibrationReport report = calibrate(kind, pairs, bounds_for(config, kind), options);
    for (Eigen::Index i = 0; i < report.model.beta.size(); ++i) {
      param_rows.push_back({kind_label(kind), kind_name(kind), csv::format_int(i),
                            csv::format_double(report.model.beta[i])});
    }
    long long converged = 0;
    for (const StartTrace& t : report.starts) {
      converged += t.converged ? 1 : 0;
    }
    perf_rows.push_back({kind_label(kind),
                         quantity_label(predicted_quantity(kind)),
                         csv::format_double(report.rmse),
                         csv::format_double(report.mape),
                         csv::format_double(report.rmse_train),
                         csv::format_double(report.mape_train),
                         csv::format_int(report.n_train),
                         csv::format_int(report.n_holdout),
                         csv::format_int(report.skipped),
                         csv::format_int(converged),
                         report.notes});
    std::printf("%-8s %-13s rmse=%-12s mape=%-12s skipped=%lld\n", kind_label(kind),
                quantity_label(predicted_quantity(kind)).c_str(),
                csv::format_double(report.rmse).c_str(),
                csv::format_double(report.mape).c_str(), report.skipped);
  }

  const std::string params_path = config.out_dir + "/calibration_params.csv";
  const std::string perf_path = config.out_dir + "/calibration_performance.csv";
  csv::write_table(params_path, {"label", "model", "param_index", "value"}, param_rows);
  csv::write_table(perf_path,
                   {"model", "predicted_quantity", "rmse", "mape", "rmse_train", "mape_train",
                    "n_train", "n_holdout", "skipped", "converged_starts", "notes"},
                   perf_rows);
  std::printf("wrote: %s\nwrote: %s\n", params_path.c_str(), perf_path.c_str());
  return 0;
}

int cmd_train(const RunConfig& config) {
  ensure_out_dir(config);
  Dataset dataset = load_dataset(config);
  const std::vector<TrajectoryRecord> records = select_split(config, dataset.records);
  const std::vector<ShadowEquation> equations = resolve_equations(config);
  const std::string tag = method_tag(equations);

  TrainConfig train_config = config.train;
  train_config.seed = mix_seed(config.seed, 0x5452414e);
  SceneFitSummary summary;
  const std::vector<VehicleFit> fits =
      train_scene(records, equations, train_config, config.threads, &summary);
  if (fits.empty()) {
    throw EmptyDataError("train: no vehicle had enough leader-complete records");
  }

  const std::string models_path = config.out_dir + "/models.json";
  save_methods(models_path, {TrainedMethod{tag, fits}});

  std::printf("method: %s\n", tag.c_str());
  for (const VehicleFit& fit : fits) {
    const std::string trace_path = config.out_dir + "/trace_" + tag + "_v" +
                                   std::to_string(fit.vehicle_id) + ".csv";
    write_trace_csv(trace_path, fit.result);
    std::printf("vehicle %lld: iterations=%d%s final_negative_elbo=%s\n", fit.vehicle_id,
                fit.result.iterations_run, fit.result.aborted ? " (aborted)" : "",
                fit.result.trace.empty()
                    ? "n/a"
                    : csv::format_double(fit.result.trace.back().negative_elbo).c_str());
    if (fit.result.aborted) {
      log_info("vehicle " + std::to_string(fit.vehicle_id) +
               " aborted: " + fit.result.diagnostic);
    }
  }
  for (long long id : summary.skipped_vehicles) {
    log_info("vehicle " + std::to_string(id) + " skipped (needs 3 leader-complete records)");
  }
  std::printf("wrote: %s\n", models_path.c_str());
  return 0;
}

int cmd_evaluate(const RunConfig& config) {
  ensure_out_dir(config);
  std::vector<std::string> model_files = config.model_files;
  if (model_files.empty()) {
    model_files.push_back(config.out_dir + "/models.json");
  }
  std::vector<TrainedMethod> methods;
  for (const std::string& file : model_files) {
    for (TrainedMethod& method : load_methods(file)) {
      methods.push_back(std::move(method));
    }
  }

  std::vector<TrajectoryRecord> reference;
  if (!config.reference_path.empty()) {
    ParseResult parsed = parse_ngsim_csv(config.reference_path, canonical_parse_options());
    reference = std::move(parsed.records);
  } else {
    reference = load_dataset(config).records;
  }

  const std::vector<PhysicsModel> baselines = resolve_baselines(config);
  EvalOptions options;
  options.sigma_normalized = config.sigma_normalized;

  std::vector<MethodPredictions> predictions;
  for (const TrainedMethod& method : methods) {
    predictions.push_back(predict_method(method, reference));
  }
  EvalReport report = build_report(predictions, options);
  for (const PhysicsModel& model : baselines) {
    report.cells.push_back(physics_baseline_cell(model, reference, options));
  }

  const std::string report_path = config.out_dir + "/report.csv";
  emit_report(report, report_path);

  // Long-format predictions for the report command's scatters.
  std::vector<std::vector<std::string>> rows;
  for (const MethodPredictions& mp : predictions) {
    for (Eigen::Index i = 0; i < mp.y_true.rows(); ++i) {
      for (int j = 0; j < kTrajectoryDims; ++j) {
        rows.push_back({mp.name, csv::format_int(mp.vehicle_ids[static_cast<std::size_t>(i)]),
                        csv::format_double(mp.times[static_cast<std::size_t>(i)]),
                        output_dim_name(j), csv::format_double(mp.y_true(i, j)),
                        csv::format_double(mp.y_hat(i, j))});
      }
    }
  }
  const std::string predictions_path = config.out_dir + "/predictions.csv";
  csv::write_table(predictions_path,
                   {"model", "vehicle_id", "time_s", "dimension", "y_true", "y_hat"}, rows);

  for (const EvalCell& cell : report.cells) {
    std::printf("%-12s %-20s n=%-6lld rmse=%-12s mape=%s\n", cell.model.c_str(),
                cell.dimension.c_str(), cell.n, csv::format_double(cell.rmse).c_str(),
                csv::format_double(cell.mape).c_str());
  }
  std::printf("wrote: %s\nwrote: %s\n", report_path.c_str(), predictions_path.c_str());
  return 0;
}

int cmd_report(const RunConfig& config) {
  ensure_out_dir(config);
  const std::string report_path = config.out_dir + "/report.csv";
  const csv::Table report_table = csv::read_table(report_path);
  EvalReport report;
  {
    const auto model = report_table.column("model");
    const auto dimension = report_table.column("dimension");
    const auto n = report_table.column("n");
    const auto rmse_col = report_table.column("rmse");
    const auto mape_col = report_table.column("mape");
    const auto mask = report_table.column("mask_count");
    if (!model || !dimension || !n || !rmse_col || !mape_col || !mask) {
      throw SchemaError("report: unrecognized report.csv header");
    }
    for (const auto& row : report_table.rows) {
      EvalCell cell;
      cell.model = row[*model];
      cell.dimension = row[*dimension];
      cell.n = std::stoll(row[*n]);
      cell.rmse = std::stod(row[*rmse_col]);
      cell.mape = std::stod(row[*mape_col]);
      cell.mask_count = std::stoll(row[*mask]);
      report.cells.push_back(std::move(cell));
    }
  }

  // Rebuild per-method prediction matrices from the long format.
  std::vector<MethodPredictions> predictions;
  const std::string predictions_path = config.out_dir + "/predictions.csv";
  if (fs::exists(predictions_path)) {
    const csv::Table table = csv::read_table(predictions_path);
    const auto model = table.column("model");
    const auto vehicle = table.column("vehicle_id");
    const auto time = table.column("time_s");
    const auto dimension = table.column("dimension");
    const auto y_true = table.column("y_true");
    const auto y_hat = table.column("y_hat");
    if (!model || !vehicle || !time || !dimension || !y_true || !y_hat) {
      throw SchemaError("report: unrecognized predictions.csv header");
    }
    std::map<std::string, std::map<std::pair<long long, long long>,
                                   std::array<std::pair<double, double>, kTrajectoryDims>>>
        grouped;
    for (const auto& row : table.rows) {
      int dim = -1;
      for (int j = 0; j < kTrajectoryDims; ++j) {
        if (row[*dimension] == output_dim_name(j)) {
          dim = j;
        }
      }
      if (dim < 0) {
        continue;
      }
      const auto key = std::make_pair(std::stoll(row[*vehicle]),
                                      Scene::time_key(std::stod(row[*time])));
      grouped[row[*model]][key][static_cast<std::size_t>(dim)] = {std::stod(row[*y_true]),
                                                                  std::stod(row[*y_hat])};
    }
    for (const auto& [name, by_row] : grouped) {
      MethodPredictions mp;
      mp.name = name;
      mp.y_true.resize(static_cast<Eigen::Index>(by_row.size()), kTrajectoryDims);
      mp.y_hat.resize(static_cast<Eigen::Index>(by_row.size()), kTrajectoryDims);
      Eigen::Index r = 0;
      for (const auto& [key, dims] : by_row) {
        mp.vehicle_ids.push_back(key.first);
        mp.times.push_back(static_cast<double>(key.second) / 1e6);
        for (int j = 0; j < kTrajectoryDims; ++j) {
          mp.y_true(r, j) = dims[static_cast<std::size_t>(j)].first;
          mp.y_hat(r, j) = dims[static_cast<std::size_t>(j)].second;
        }
        ++r;
      }
      predictions.push_back(std::move(mp));
    }
  }

  // Convergence traces written by the train command.
  std::vector<NamedTrace> traces;
  for (const auto& entry : fs::directory_iterator(config.out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("trace_", 0) != 0 || entry.path().extension() != ".csv") {
      continue;
    }
    const csv::Table table = csv::read_table(entry.path().string());
    const auto iteration = table.column("iteration");
    const auto neg_elbo = table.column("negative_elbo");
    const auto data_term = table.column("data_term");
    if (!iteration || !neg_elbo || !data_term) {
      continue;
    }
    NamedTrace trace;
    trace.model = name.substr(6, name.size() - 6 - 4);
    for (const auto& row : table.rows) {
      TraceRow tr;
      tr.iteration = std::stoi(row[*iteration]);
      tr.negative_elbo = std::stod(row[*neg_elbo]);
      tr.data_term = std::stod(row[*data_term]);
      trace.rows.push_back(tr);
    }
    traces.push_back(std::move(trace));
  }
  std::sort(traces.begin(), traces.end(),
            [](const NamedTrace& a, const NamedTrace& b) { return a.model < b.model; });

  const std::vector<std::string> files =
      emit_plots(report, traces, predictions, config.out_dir, config.case_name);
  for (const std::string& file : files) {
    std::printf("wrote: %s\n", file.c_str());
  }
  return 0;
}

}  // namespace prgp::cli
