#pragma once

#include <string>

#include "stmgnn/config.hpp"

namespace stmgnn {

/// Command implementations shared by the CLI binary and the test suites.
/// Each writes its artifacts plus the resolved config echo into `out_dir`
/// and throws UsageError / DataError / NumericError on failure; the binary
/// maps those onto exit codes 2 / 3 / 4.

void cmd_ingest(const RunConfig& cfg, const std::string& events_path,
                const std::string& out_dir);

void cmd_synth(const RunConfig& cfg, const std::string& out_dir);

/// Returns false when training stopped on divergence (the last finite
/// checkpoint is still written).
bool cmd_train(const RunConfig& cfg, const std::string& tensor_path,
               const std::string& out_dir);

/// `weights_path` may be empty when a baseline evaluation was requested.
void cmd_evaluate(const RunConfig& cfg, const std::string& tensor_path,
                  const std::string& weights_path, const std::string& out_dir);

void cmd_predict(const RunConfig& cfg, const std::string& tensor_path,
                 const std::string& weights_path, const std::string& out_dir);

void cmd_export_pi(const RunConfig& cfg, const std::string& tensor_path,
                   const std::string& weights_path, const std::string& out_dir);

void cmd_stats(const std::string& tensor_path, const std::string& out_dir);

}  // namespace stmgnn
