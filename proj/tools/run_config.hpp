#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prgp/calibrate.hpp"
#include "prgp/data.hpp"
#include "prgp/inference.hpp"
#include "prgp/synth.hpp"

namespace prgp::cli {

// Everything a run needs, loaded from a JSON config file and overridable by
// command-line flags. Every field has a default.
struct RunConfig {
  std::string case_name = "case";
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // Data source: a CSV path ("ngsim" or "canonical" format) or, when the
  // path is empty, the synthetic scene below.
  std::string data_path;
  std::string data_format = "ngsim";
  ParseOptions parse_options;
  double xi_ft = 6.0;
  double delta_ft = 1.0;
  double lane_width_ft = 12.0;
  std::string lane_filter = "all";  // all | drop_changers | keep_changers

  SynthSpec synth;

  double test_fraction = 0.2;

  struct EquationSpec {
    PhysicsKind kind = PhysicsKind::kPipes;
    std::optional<Eigen::VectorXd> beta;  // default_beta(kind) when absent
    std::optional<double> gamma;          // train.gamma_default when absent
  };
  std::vector<EquationSpec> equations;

  TrainConfig train;
  std::string train_split = "all";  // all | train | test
  int threads = 2;

  std::vector<PhysicsKind> calibrate_models;
  std::map<std::string, ParamBounds> calibrate_bounds;  // by kind_name
  CalibrationOptions calibrate_options;

  std::vector<std::string> model_files;  // evaluate inputs; default out/models.json
  std::string reference_path;            // evaluate ground truth; default data source
  std::vector<PhysicsKind> baselines;
  std::string baseline_params_path;  // optional calibration_params.csv
  bool sigma_normalized = false;
};

RunConfig load_config(const std::string& path);

// Flag overrides applied after loading.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> equations;  // comma-separated kind names
  std::optional<double> gamma;
  std::optional<int> iterations;
  std::optional<int> m;
  std::optional<double> learning_rate;
  std::optional<double> test_fraction;
  std::optional<std::string> data_path;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

// Resolves equation specs into shadow equations with beta and gamma filled.
std::vector<ShadowEquation> resolve_equations(const RunConfig& config);

}  // namespace prgp::cli
