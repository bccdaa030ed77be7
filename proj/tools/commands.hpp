#pragma once

#include "run_config.hpp"

namespace prgp::cli {

int cmd_ingest(const RunConfig& config);
int cmd_synth(const RunConfig& config);
int cmd_calibrate(const RunConfig& config);
int cmd_train(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_report(const RunConfig& config);

// PRGP_LOG-gated logging: quiet < info < debug (default info).
bool log_enabled(int level);
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace prgp::cli
