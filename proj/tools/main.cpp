#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sam3unet/config.hpp"
#include "sam3unet/data.hpp"
#include "sam3unet/image_io.hpp"
#include "sam3unet/metrics.hpp"
#include "sam3unet/trainer.hpp"

namespace fs = std::filesystem;
using namespace sam3unet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + s + "' must look like key=value");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

fs::path default_run_dir(const std::string& hint) {
  const char* root = std::getenv("SAM3UNET_RUN_ROOT");
  return fs::path(root ? root : "runs") / hint;
}

int cmd_train(const std::string& config_path, const std::string& run_dir_opt,
              const std::vector<std::string>& sets) {
  RunConfig cfg = load_run_config(config_path, parse_overrides(sets));
  if (cfg.data.root.empty()) throw ConfigError("data.root is required for training");
  fs::path run_dir = run_dir_opt.empty()
                         ? default_run_dir(config_path.empty()
                                               ? "run"
                                               : fs::path(config_path).stem().string())
                         : fs::path(run_dir_opt);

  IndexResult index = index_dataset(cfg.data);
  if (index.pairs.empty()) throw ConfigError("dataset at " + cfg.data.root + " is empty");
  std::cout << "dataset: " << index.pairs.size() << " pairs";
  if (!index.orphans.empty()) std::cout << " (" << index.orphans.size() << " orphans skipped)";
  std::cout << "\n";

  Sam3UNet model(make_model_config(cfg), cfg.train.seed);
  TrainResult result = train(model, index.pairs, cfg, run_dir);
  std::cout << "done: " << result.epochs_run << " epochs, checkpoint "
            << result.final_checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_root,
             const std::string& out_dir_opt, const std::vector<std::string>& sets) {
  if (!fs::exists(checkpoint)) {
    std::cerr << "error: checkpoint not found: " << checkpoint << "\n";
    return kExitUsage;
  }
  LoadedModel lm = load_model(checkpoint);
  // Dataset location comes from the command line; other settings may be
  // overridden on top of the stored snapshot.
  auto overrides = parse_overrides(sets);
  overrides.emplace_back("data.root", data_root);
  fs::path tmp = fs::temp_directory_path() / "s3u_eval_base.cfg";
  {
    std::ofstream f(tmp);
    f << render_run_config(lm.config);
  }
  RunConfig cfg = load_run_config(tmp, overrides);
  fs::remove(tmp);

  fs::path out_dir = out_dir_opt.empty() ? default_run_dir("eval") : fs::path(out_dir_opt);
  fs::path pred_dir = out_dir / "pred";
  fs::create_directories(pred_dir);

  IndexResult index = index_dataset(cfg.data);
  if (index.pairs.empty()) throw ConfigError("dataset at " + cfg.data.root + " is empty");
  for (const auto& pair : index.pairs)
    predict_image(lm.model, cfg, pair.image_path, pred_dir / (pair.id + ".png"));

  DatasetMetrics m = evaluate_folder(pred_dir, fs::path(cfg.data.root) / cfg.data.mask_subdir,
                                     cfg.metrics.f_mode, cfg.metrics.strict);
  MetricsReport report;
  std::string name = fs::path(cfg.data.root).filename().string();
  if (name.empty()) name = "dataset";
  report.datasets[name] = m;
  report.write(out_dir);
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& input,
                const std::string& out_dir) {
  if (!fs::exists(checkpoint)) {
    std::cerr << "error: checkpoint not found: " << checkpoint << "\n";
    return kExitUsage;
  }
  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      std::string ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg"))
        inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
  } else if (fs::exists(input)) {
    inputs.push_back(input);
  }
  if (inputs.empty()) {
    std::cerr << "error: no input images at " << input << "\n";
    return kExitUsage;
  }
  LoadedModel lm = load_model(checkpoint);
  fs::create_directories(out_dir);
  for (const auto& in : inputs) {
    fs::path out = fs::path(out_dir) / (in.stem().string() + ".png");
    predict_image(lm.model, lm.config, in, out);
    std::cout << in.string() << " -> " << out.string() << "\n";
  }
  return kExitOk;
}

int cmd_synth(int n, int size, uint64_t seed, const std::string& out_dir) {
  make_synthetic(n, size, seed, out_dir);
  DataConfig dc;
  dc.root = out_dir;
  dc.strict = true;
  IndexResult index = index_dataset(dc);
  std::cout << "wrote " << index.pairs.size() << " image/mask pairs (" << size << "x"
            << size << ", seed " << seed << ") to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAM3-UNet segmentation fine-tuning framework"};
  app.require_subcommand(1);

  std::string config_path, run_dir, checkpoint, data_root, out_dir, input;
  std::vector<std::string> sets;
  int n = 4, size = 84;
  uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "Train from a config file");
  train_cmd->add_option("--config", config_path, "Config file (dotted keys)");
  train_cmd->add_option("--run-dir", run_dir, "Output directory for this run");
  train_cmd->add_option("--set", sets, "Override: --set section.key=value");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data_root, "Dataset root (image/ + mask/)")->required();
  eval_cmd->add_option("--out", out_dir, "Output directory");
  eval_cmd->add_option("--set", sets, "Override: --set section.key=value");

  auto* predict_cmd = app.add_subcommand("predict", "Predict masks for images");
  predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--input", input, "Image file or directory")->required();
  predict_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--out", out_dir, "Output dataset root")->required();
  synth_cmd->add_option("--n", n, "Number of images");
  synth_cmd->add_option("--size", size, "Image side length in pixels");
  synth_cmd->add_option("--seed", seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, run_dir, sets);
    if (*eval_cmd) return cmd_eval(checkpoint, data_root, out_dir, sets);
    if (*predict_cmd) return cmd_predict(checkpoint, input, out_dir);
    if (*synth_cmd) return cmd_synth(n, size, seed, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainAbort& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
