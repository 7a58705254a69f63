// Command-line front end: maskbank, datagen, train, infer, eval.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include "sainet/sainet.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo-aware inpainting behind objects"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  bool square_masks = false;
  std::string scope;
  bool resume = false;
  bool dump_config = false;

  app.add_option("--config", config_path, "run config file (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_flag("--deterministic", deterministic, "single-threaded, bitwise reproducible run");
  app.add_flag("--square-masks", square_masks, "square context/synthesis masks instead of the mask bank");
  app.add_option("--scope", scope, "evaluation scope")->check(CLI::IsMember({"full", "synthesis"}));
  app.add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto* maskbank = app.add_subcommand("maskbank", "build the mask bank from a dataset");
  auto* datagen = app.add_subcommand("datagen", "generate a stereo-aware training set");
  auto* train = app.add_subcommand("train", "train the inpainting network");
  train->add_flag("--resume", resume, "continue from the last checkpoint");
  auto* infer = app.add_subcommand("infer", "inpaint every sample of the test set");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    sainet::RunConfig cfg = config_path.empty() ? sainet::RunConfig{} : sainet::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (deterministic) cfg.deterministic = true;
    if (square_masks) cfg.square_masks = true;
    if (!scope.empty()) cfg.scope = scope;
    cfg.validate();
    if (dump_config) {
      std::cout << sainet::serialize_config(cfg);
      return kOk;
    }

    if (maskbank->parsed()) {
      sainet::cmd_maskbank(cfg);
    } else if (datagen->parsed()) {
      sainet::cmd_datagen(cfg);
    } else if (train->parsed()) {
      if (cfg.learning_rate >= 0.05)
        std::cerr << "notice: learning_rate " << cfg.learning_rate << " is far above the 2e-4 default for Adam\n";
      sainet::cmd_train(cfg, resume);
    } else if (infer->parsed()) {
      sainet::cmd_infer(cfg);
    } else if (eval->parsed()) {
      sainet::cmd_eval(cfg);
    }
  } catch (const sainet::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const sainet::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
