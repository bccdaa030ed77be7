#include "run_config.hpp"

#include <fstream>

#include <json.hpp>

namespace prgp::cli {

namespace {

using nlohmann::json;

Eigen::VectorXd vector_from(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

PhysicsKind kind_or_throw(const std::string& name) {
  const auto kind = kind_from_name(name);
  if (!kind) {
    throw SchemaError("config: unknown physics model \"" + name + "\"");
  }
  return *kind;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  RunConfig config;
  if (path.empty()) {
    return config;
  }
  std::ifstream in(path);
  if (!in) {
    throw IoError("config: cannot open " + path);
  }
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: invalid JSON: ") + e.what());
  }

  config.case_name = root.value("case", config.case_name);
  config.seed = root.value("seed", config.seed);
  config.out_dir = root.value("out", config.out_dir);

  if (root.contains("data")) {
    const json& data = root["data"];
    config.data_path = data.value("path", config.data_path);
    config.data_format = data.value("format", config.data_format);
    if (data.contains("column_map")) {
      for (const auto& [key, value] : data["column_map"].items()) {
        config.parse_options.column_map[key] = value.get<std::string>();
      }
    }
    config.parse_options.time_unit = data.value("time_unit", config.parse_options.time_unit);
    config.parse_options.frame_period_s =
        data.value("frame_period_s", config.parse_options.frame_period_s);
    if (data.contains("road_bounds")) {
      const auto& bounds = data["road_bounds"];
      if (!bounds.is_array() || bounds.size() != 2) {
        throw SchemaError("config: data.road_bounds must be [min, max]");
      }
      config.parse_options.road_bounds = {{bounds[0].get<double>(), bounds[1].get<double>()}};
    }
    config.xi_ft = data.value("xi_ft", config.xi_ft);
    config.delta_ft = data.value("delta_ft", config.delta_ft);
    config.lane_width_ft = data.value("lane_width_ft", config.lane_width_ft);
    config.lane_filter = data.value("lane_filter", config.lane_filter);
  }

  if (root.contains("synth")) {
    const json& synth = root["synth"];
    if (synth.contains("model")) {
      const PhysicsKind kind = kind_or_throw(synth["model"].get<std::string>());
      if (synth.contains("beta")) {
        config.synth.follower = make_physics_model(kind, vector_from(synth["beta"]));
      } else {
        config.synth.follower = make_physics_model(kind);
      }
    }
    config.synth.n_vehicles = synth.value("n_vehicles", config.synth.n_vehicles);
    config.synth.horizon_s = synth.value("horizon_s", config.synth.horizon_s);
    config.synth.dt = synth.value("dt", config.synth.dt);
    config.synth.lead_speed_mean = synth.value("lead_speed_mean", config.synth.lead_speed_mean);
    config.synth.lead_speed_amplitude =
        synth.value("lead_speed_amplitude", config.synth.lead_speed_amplitude);
    config.synth.lead_speed_period_s =
        synth.value("lead_speed_period_s", config.synth.lead_speed_period_s);
    config.synth.initial_gap_ft = synth.value("initial_gap_ft", config.synth.initial_gap_ft);
    config.synth.lane_center_ft = synth.value("lane_center_ft", config.synth.lane_center_ft);
    config.synth.lateral_wander_ft =
        synth.value("lateral_wander_ft", config.synth.lateral_wander_ft);
    config.synth.noise_fraction = synth.value("noise_fraction", config.synth.noise_fraction);
    if (synth.contains("noise_std")) {
      config.synth.noise_std = vector_from(synth["noise_std"]);
    }
  }

  if (root.contains("split")) {
    config.test_fraction = root["split"].value("test_fraction", config.test_fraction);
  }

  if (root.contains("equations")) {
    for (const json& ej : root["equations"]) {
      RunConfig::EquationSpec spec;
      if (ej.is_string()) {
        spec.kind = kind_or_throw(ej.get<std::string>());
      } else {
        spec.kind = kind_or_throw(ej.at("kind").get<std::string>());
        if (ej.contains("beta")) {
          spec.beta = vector_from(ej["beta"]);
        }
        if (ej.contains("gamma")) {
          spec.gamma = ej["gamma"].get<double>();
        }
      }
      config.equations.push_back(std::move(spec));
    }
  }

  if (root.contains("train")) {
    const json& train = root["train"];
    config.train.m = train.value("m", config.train.m);
    config.train.iterations = train.value("iterations", config.train.iterations);
    config.train.learning_rate = train.value("learning_rate", config.train.learning_rate);
    config.train.gamma_default = train.value("gamma_default", config.train.gamma_default);
    const std::string sampling = train.value("z_sampling", std::string("jittered_grid"));
    if (sampling == "uniform") {
      config.train.z_sampling = ZSampling::kUniform;
    } else if (sampling == "jittered_grid") {
      config.train.z_sampling = ZSampling::kJitteredGrid;
    } else {
      throw SchemaError("config: train.z_sampling must be uniform or jittered_grid");
    }
    config.train.plateau_window = train.value("plateau_window", config.train.plateau_window);
    config.train.plateau_rel_tol = train.value("plateau_rel_tol", config.train.plateau_rel_tol);
    config.train_split = train.value("split", config.train_split);
    config.threads = train.value("threads", config.threads);
  }

  if (root.contains("calibrate")) {
    const json& cal = root["calibrate"];
    if (cal.contains("models")) {
      for (const json& name : cal["models"]) {
        config.calibrate_models.push_back(kind_or_throw(name.get<std::string>()));
      }
    }
    if (cal.contains("bounds")) {
      for (const auto& [name, ranges] : cal["bounds"].items()) {
        const PhysicsKind kind = kind_or_throw(name);
        ParamBounds bounds;
        bounds.lower.resize(static_cast<Eigen::Index>(ranges.size()));
        bounds.upper.resize(static_cast<Eigen::Index>(ranges.size()));
        for (std::size_t i = 0; i < ranges.size(); ++i) {
          bounds.lower[static_cast<Eigen::Index>(i)] = ranges[i][0].get<double>();
          bounds.upper[static_cast<Eigen::Index>(i)] = ranges[i][1].get<double>();
        }
        config.calibrate_bounds[kind_name(kind)] = std::move(bounds);
      }
    }
    config.calibrate_options.starts = cal.value("starts", config.calibrate_options.starts);
    config.calibrate_options.max_iterations =
        cal.value("max_iterations", config.calibrate_options.max_iterations);
    config.calibrate_options.holdout_fraction =
        cal.value("holdout_fraction", config.calibrate_options.holdout_fraction);
  }

  if (root.contains("evaluate")) {
    const json& ev = root["evaluate"];
    if (ev.contains("model_files")) {
      for (const json& f : ev["model_files"]) {
        config.model_files.push_back(f.get<std::string>());
      }
    }
    config.reference_path = ev.value("reference", config.reference_path);
    if (ev.contains("baselines")) {
      for (const json& name : ev["baselines"]) {
        config.baselines.push_back(kind_or_throw(name.get<std::string>()));
      }
    }
    config.baseline_params_path = ev.value("baseline_params", config.baseline_params_path);
    config.sigma_normalized = ev.value("sigma_normalized", config.sigma_normalized);
  }
  return config;
}

void apply_overrides(RunConfig& config, const Overrides& overrides) {
  if (overrides.seed) {
    config.seed = *overrides.seed;
  }
  if (overrides.out_dir) {
    config.out_dir = *overrides.out_dir;
  }
  if (overrides.data_path) {
    config.data_path = *overrides.data_path;
  }
  if (overrides.equations) {
    config.equations.clear();
    std::string names = *overrides.equations;
    std::size_t start = 0;
    while (start <= names.size()) {
      const std::size_t comma = names.find(',', start);
      const std::string name =
          names.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!name.empty()) {
        RunConfig::EquationSpec spec;
        spec.kind = kind_or_throw(name);
        config.equations.push_back(spec);
      }
      if (comma == std::string::npos) {
        break;
      }
      start = comma + 1;
    }
  }
  if (overrides.gamma) {
    config.train.gamma_default = *overrides.gamma;
    for (auto& eq : config.equations) {
      eq.gamma = *overrides.gamma;
    }
  }
  if (overrides.iterations) {
    config.train.iterations = *overrides.iterations;
  }
  if (overrides.m) {
    config.train.m = *overrides.m;
  }
  if (overrides.learning_rate) {
    config.train.learning_rate = *overrides.learning_rate;
  }
  if (overrides.test_fraction) {
    config.test_fraction = *overrides.test_fraction;
  }
}

std::vector<ShadowEquation> resolve_equations(const RunConfig& config) {
  std::vector<ShadowEquation> equations;
  for (const RunConfig::EquationSpec& spec : config.equations) {
    ShadowEquation eq;
    eq.model = spec.beta ? make_physics_model(spec.kind, *spec.beta)
                         : make_physics_model(spec.kind);
    eq.gamma = spec.gamma.value_or(config.train.gamma_default);
    equations.push_back(std::move(eq));
  }
  return equations;
}

}  // namespace prgp::cli
