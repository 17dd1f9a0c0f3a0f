#include <CLI11.hpp>
#include <optional>
#include <iostream>

#include "stmgnn/cli_commands.hpp"
#include "stmgnn/errors.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

stmgnn::RunConfig resolve_config(const CommonOptions& opts) {
  stmgnn::RunConfig cfg = opts.config_path.empty()
                              ? stmgnn::RunConfig()
                              : stmgnn::RunConfig::from_file(opts.config_path);
  if (opts.seed) cfg.override_seed(*opts.seed);
  return cfg;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool out_required = true) {
  cmd->add_option("--config", opts.config_path, "run configuration file");
  auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse spatial-temporal count forecasting toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string events_path, tensor_path, weights_path;

  CLI::App* ingest = app.add_subcommand("ingest", "rasterize an event log");
  add_common(ingest, opts);
  ingest->add_option("--events", events_path, "delimited event log")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate calibration data");
  add_common(synth, opts);

  CLI::App* train = app.add_subcommand("train", "fit model weights");
  add_common(train, opts);
  train->add_option("--tensor", tensor_path, "count tensor file")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score the test split");
  add_common(evaluate, opts);
  evaluate->add_option("--tensor", tensor_path, "count tensor file")->required();
  evaluate->add_option("--weights", weights_path, "trained weights file");

  CLI::App* predict = app.add_subcommand("predict", "forecast from the last window");
  add_common(predict, opts);
  predict->add_option("--tensor", tensor_path, "count tensor file")->required();
  predict->add_option("--weights", weights_path, "trained weights file")->required();

  CLI::App* export_pi = app.add_subcommand("export-pi", "write pi surfaces");
  add_common(export_pi, opts);
  export_pi->add_option("--tensor", tensor_path, "count tensor file")->required();
  export_pi->add_option("--weights", weights_path, "trained weights file")->required();

  CLI::App* stats = app.add_subcommand("stats", "dataset statistics");
  stats->add_option("--tensor", tensor_path, "count tensor file")->required();
  stats->add_option("--out", opts.out_dir, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest) {
      stmgnn::cmd_ingest(resolve_config(opts), events_path, opts.out_dir);
    } else if (*synth) {
      stmgnn::cmd_synth(resolve_config(opts), opts.out_dir);
    } else if (*train) {
      if (!stmgnn::cmd_train(resolve_config(opts), tensor_path, opts.out_dir)) {
        return kExitNumeric;
      }
    } else if (*evaluate) {
      stmgnn::cmd_evaluate(resolve_config(opts), tensor_path, weights_path,
                           opts.out_dir);
    } else if (*predict) {
      stmgnn::cmd_predict(resolve_config(opts), tensor_path, weights_path,
                          opts.out_dir);
    } else if (*export_pi) {
      stmgnn::cmd_export_pi(resolve_config(opts), tensor_path, weights_path,
                            opts.out_dir);
    } else if (*stats) {
      stmgnn::cmd_stats(tensor_path, opts.out_dir);
    }
  } catch (const stmgnn::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const stmgnn::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const stmgnn::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
