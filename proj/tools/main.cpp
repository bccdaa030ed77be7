#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "prgp/errors.hpp"
#include "run_config.hpp"

namespace {

using prgp::cli::Overrides;
using prgp::cli::RunConfig;

const char* error_kind(const prgp::Error& e) {
  if (dynamic_cast<const prgp::SchemaError*>(&e) != nullptr) return "schema";
  if (dynamic_cast<const prgp::InputDomainError*>(&e) != nullptr) return "input";
  if (dynamic_cast<const prgp::ModelDomainError*>(&e) != nullptr) return "model-domain";
  if (dynamic_cast<const prgp::EmptyDataError*>(&e) != nullptr) return "empty-data";
  if (dynamic_cast<const prgp::IllConditionedKernelError*>(&e) != nullptr) {
    return "ill-conditioned-kernel";
  }
  if (dynamic_cast<const prgp::InternalStateError*>(&e) != nullptr) return "internal-state";
  if (dynamic_cast<const prgp::CalibrationError*>(&e) != nullptr) return "calibration";
  if (dynamic_cast<const prgp::RegularizerDegeneracyError*>(&e) != nullptr) {
    return "regularizer-degeneracy";
  }
  if (dynamic_cast<const prgp::IoError*>(&e) != nullptr) return "io";
  return "error";
}

struct FlagValues {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  std::string equations;
  double gamma = 0.0;
  bool gamma_set = false;
  int iterations = 0;
  bool iterations_set = false;
  int m = 0;
  bool m_set = false;
  double learning_rate = 0.0;
  bool lr_set = false;
  double test_fraction = 0.0;
  bool test_fraction_set = false;
  std::string data_path;
};

void add_common_flags(CLI::App* cmd, FlagValues& flags) {
  cmd->add_option("--config", flags.config_path, "JSON run configuration");
  cmd->add_option("--seed", flags.seed, "Master seed override")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--out", flags.out_dir, "Output directory override");
  cmd->add_option("--equations", flags.equations,
                  "Comma-separated physics equations (e.g. pipes,vel_def)");
  cmd->add_option("--gamma", flags.gamma, "Regularization weight for every equation")
      ->each([&flags](const std::string&) { flags.gamma_set = true; });
  cmd->add_option("--iterations", flags.iterations, "Training iteration budget")
      ->each([&flags](const std::string&) { flags.iterations_set = true; });
  cmd->add_option("--m", flags.m, "Pseudo-observation count")
      ->each([&flags](const std::string&) { flags.m_set = true; });
  cmd->add_option("--lr", flags.learning_rate, "Adam learning rate")
      ->each([&flags](const std::string&) { flags.lr_set = true; });
  cmd->add_option("--test-fraction", flags.test_fraction, "Vehicle-level test fraction")
      ->each([&flags](const std::string&) { flags.test_fraction_set = true; });
  cmd->add_option("--input", flags.data_path, "Input CSV path override");
}

RunConfig make_config(const FlagValues& flags) {
  RunConfig config = prgp::cli::load_config(flags.config_path);
  Overrides overrides;
  if (flags.seed_set) overrides.seed = flags.seed;
  if (!flags.out_dir.empty()) overrides.out_dir = flags.out_dir;
  if (!flags.equations.empty()) overrides.equations = flags.equations;
  if (flags.gamma_set) overrides.gamma = flags.gamma;
  if (flags.iterations_set) overrides.iterations = flags.iterations;
  if (flags.m_set) overrides.m = flags.m;
  if (flags.lr_set) overrides.learning_rate = flags.learning_rate;
  if (flags.test_fraction_set) overrides.test_fraction = flags.test_fraction;
  if (!flags.data_path.empty()) overrides.data_path = flags.data_path;
  prgp::cli::apply_overrides(config, overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-regularized Gaussian process toolkit for vehicle trajectories"};
  app.require_subcommand(1);

  FlagValues flags;
  int (*handler)(const RunConfig&) = nullptr;

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Sub subs[] = {
      {"ingest", "Parse a trajectory CSV into the canonical format", prgp::cli::cmd_ingest},
      {"synth", "Generate a synthetic platoon scene", prgp::cli::cmd_synth},
      {"calibrate", "Calibrate car-following models on the dataset", prgp::cli::cmd_calibrate},
      {"train", "Train the (PR)GP per vehicle", prgp::cli::cmd_train},
      {"evaluate", "Score trained models against a reference dataset", prgp::cli::cmd_evaluate},
      {"report", "Render plots from evaluation artifacts", prgp::cli::cmd_report},
  };
  for (const Sub& sub : subs) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_common_flags(cmd, flags);
    cmd->callback([&handler, fn = sub.fn] { handler = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig config = make_config(flags);
    return handler(config);
  } catch (const prgp::Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", error_kind(e), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 2;
  }
}
