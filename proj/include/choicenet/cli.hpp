#pragma once

#include <string>

#include "json.hpp"

namespace choicenet::cli {

/// Exit codes: 0 success, 1 validation error, 2 numerical failure.
constexpr int kOk = 0;
constexpr int kValidationExit = 1;
constexpr int kNumericalExit = 2;

/// Each command takes its parsed JSON config. Commands throw; run() maps
/// exceptions to exit codes.
int cmd_gen_synth(const nlohmann::json& config);
int cmd_grid_search(const nlohmann::json& config);
int cmd_train(const nlohmann::json& config);
int cmd_mnl(const nlohmann::json& config);
int cmd_welfare(const nlohmann::json& config);
int cmd_report(const nlohmann::json& config);

/// Full argv entry point used by the binary and by tests.
int run(int argc, const char* const* argv);

} // namespace choicenet::cli
