#pragma once

#include <filesystem>
#include <vector>

#include "sam3unet/config.hpp"
#include "sam3unet/model.hpp"

namespace sam3unet {

/// Cosine decay from cfg.lr at step 0 to cfg.lr_floor at total_steps.
double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg);

/// Decoupled weight-decay Adam over an explicit parameter list.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);
  void zero_grad();
  /// Global gradient-norm clipping; no-op when max_norm <= 0.
  void clip_gradients(double max_norm);

  int64_t step_count() const { return t_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<double>& moment1(size_t i) { return m_[i]; }
  std::vector<double>& moment2(size_t i) { return v_[i]; }
  void set_state(int64_t t, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double wd_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct StepLog {
  int64_t step;
  double lr;
  double loss;
};

struct TrainResult {
  std::vector<StepLog> history;
  std::filesystem::path final_checkpoint;
  int64_t steps_per_epoch = 0;
  int64_t epochs_run = 0;
};

/// Full training loop: AdamW over the trainable parameters only, per-step
/// cosine schedule, per-epoch checkpointing, loss CSV ("step,lr,loss")
/// under run_dir. Aborts with TrainAbort on a non-finite loss. Honors
/// cfg.train.resume by continuing from the stored epoch.
TrainResult train(Sam3UNet& model, const std::vector<SamplePair>& pairs,
                  const RunConfig& cfg, const std::filesystem::path& run_dir);

/// Checkpoint for the full model + optimizer + config snapshot.
CheckpointData snapshot(const Sam3UNet& model, const AdamW& opt, const RunConfig& cfg,
                        int64_t epoch, const std::string& rng_state);

/// Rebuilds a model from the config stored in a checkpoint file.
struct LoadedModel {
  RunConfig config;
  Sam3UNet model;
  int64_t epoch;
};
LoadedModel load_model(const std::filesystem::path& checkpoint_path);

/// Runs one image through the model (inference head = finest path), writes
/// an 8-bit grayscale mask of the original image size.
void predict_image(const Sam3UNet& model, const RunConfig& cfg,
                   const std::filesystem::path& image_path,
                   const std::filesystem::path& out_path);

/// Prediction map in [0,1] at the image's native resolution.
Tensor predict_map(const Sam3UNet& model, const RunConfig& cfg,
                   const std::filesystem::path& image_path);

}  // namespace sam3unet
