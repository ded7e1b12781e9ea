#include "sam3unet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "sam3unet/checkpoint.hpp"
#include "sam3unet/image_io.hpp"
#include "sam3unet/losses.hpp"
#include "sam3unet/ops.hpp"

namespace sam3unet {

namespace fs = std::filesystem;

double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) return cfg.lr;
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  frac = std::clamp(frac, 0.0, 1.0);
  return cfg.lr_floor +
         0.5 * (cfg.lr - cfg.lr_floor) * (1.0 + std::cos(3.14159265358979323846 * frac));
}

AdamW::AdamW(std::vector<NamedTensor> params, double weight_decay, double beta1,
             double beta2, double eps)
    : params_(std::move(params)), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) const_cast<Tensor&>(p.tensor).zero_grad();
}

void AdamW::clip_gradients(double max_norm) {
  if (max_norm <= 0) return;
  double sq = 0.0;
  for (auto& p : params_)
    for (double g : p.tensor.grad()) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (auto& p : params_)
    for (double& g : const_cast<Tensor&>(p.tensor).grad()) g *= scale;
}

void AdamW::step(double lr) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = const_cast<Tensor&>(params_[i].tensor);
    p.ensure_grad();
    double* w = p.data();
    const DVec& g = p.grad();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      w[j] -= lr * wd_ * w[j];
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamW::set_state(int64_t t, std::vector<std::vector<double>> m,
                      std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw LoadError("optimizer state does not match parameter list");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

CheckpointData snapshot(const Sam3UNet& model, const AdamW& opt, const RunConfig& cfg,
                        int64_t epoch, const std::string& rng_state) {
  CheckpointData ckpt;
  ckpt.epoch = epoch;
  ckpt.config_text = render_run_config(cfg);
  ckpt.rng_state = rng_state;
  model.save_state(ckpt);
  ckpt.opt_step = opt.step_count();
  for (size_t i = 0; i < opt.params().size(); ++i) {
    ckpt.opt_names.push_back(opt.params()[i].name);
    ckpt.opt_m.push_back(const_cast<AdamW&>(opt).moment1(i));
    ckpt.opt_v.push_back(const_cast<AdamW&>(opt).moment2(i));
  }
  return ckpt;
}

LoadedModel load_model(const fs::path& checkpoint_path) {
  CheckpointData ckpt = load_checkpoint(checkpoint_path);
  // Reconstruct the configuration from the stored snapshot.
  fs::path tmp = fs::temp_directory_path() /
                 ("s3u_cfg_" + std::to_string(mix_seed(
                      std::hash<std::string>{}(checkpoint_path.string()))) + ".cfg");
  {
    std::ofstream f(tmp);
    f << ckpt.config_text;
  }
  RunConfig cfg = load_run_config(tmp);
  fs::remove(tmp);

  LoadedModel lm{cfg, Sam3UNet(make_model_config(cfg), cfg.train.seed), ckpt.epoch};
  lm.model.load_state(ckpt);
  return lm;
}

namespace {

void restore_optimizer(AdamW& opt, const CheckpointData& ckpt) {
  if (ckpt.opt_names.empty()) return;
  std::vector<std::vector<double>> m(opt.params().size()), v(opt.params().size());
  for (size_t i = 0; i < opt.params().size(); ++i) {
    const std::string& name = opt.params()[i].name;
    auto it = std::find(ckpt.opt_names.begin(), ckpt.opt_names.end(), name);
    if (it == ckpt.opt_names.end())
      throw LoadError("checkpoint optimizer state missing parameter '" + name + "'");
    size_t idx = static_cast<size_t>(it - ckpt.opt_names.begin());
    m[i] = ckpt.opt_m[idx];
    v[i] = ckpt.opt_v[idx];
  }
  opt.set_state(ckpt.opt_step, std::move(m), std::move(v));
}

std::string format_csv_row(int64_t step, double lr, double loss) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(step), lr,
                loss);
  return buf;
}

}  // namespace

TrainResult train(Sam3UNet& model, const std::vector<SamplePair>& pairs,
                  const RunConfig& cfg, const fs::path& run_dir) {
  cfg.train.validate();
  if (pairs.empty()) throw ConfigError("train: dataset is empty");

  fs::create_directories(run_dir);
  fs::path ckpt_dir = cfg.train.checkpoint_dir.empty()
                          ? run_dir / "checkpoints"
                          : fs::path(cfg.train.checkpoint_dir);
  fs::create_directories(ckpt_dir);

  {
    std::ofstream snap(run_dir / "config.resolved.cfg");
    if (!snap) throw IoError("cannot write config snapshot in " + run_dir.string());
    snap << render_run_config(cfg);
  }

  auto trainable = model.trainable_parameters();
  {
    // The optimizer must never see a base-encoder parameter.
    Registry base;
    model.encoder().collect_base("encoder.", base);
    for (const auto& p : trainable)
      if (base.find(p.name))
        throw ConfigError("frozen parameter leaked into optimizer: " + p.name);
  }
  AdamW opt(trainable, cfg.train.weight_decay);

  int64_t n = static_cast<int64_t>(pairs.size());
  int64_t bs = std::min<int64_t>(cfg.train.batch_size, n);
  int64_t steps_per_epoch = (n + bs - 1) / bs;
  int64_t total_steps = cfg.train.epochs * steps_per_epoch;

  int64_t start_epoch = 0;
  if (!cfg.train.resume.empty()) {
    CheckpointData ckpt = load_checkpoint(cfg.train.resume);
    model.load_state(ckpt);
    restore_optimizer(opt, ckpt);
    start_epoch = ckpt.epoch;
    if (start_epoch >= cfg.train.epochs)
      throw ConfigError("resume checkpoint is already at epoch " +
                        std::to_string(start_epoch) + " of " +
                        std::to_string(cfg.train.epochs));
  }

  Census census = model_census(make_model_config(cfg));
  MemoryReport mem = memory_report(census);
  std::cout << "parameters: " << census.total() << " total, " << census.trainable_count()
            << " trainable (" << mem.trainable_param_bytes / 1024 << " KiB; optimizer state "
            << mem.optimizer_state_bytes / 1024 << " KiB)\n";

  std::ofstream csv;
  fs::path csv_path = run_dir / "loss.csv";
  bool resuming = start_epoch > 0 && fs::exists(csv_path);
  csv.open(csv_path, resuming ? std::ios::app : std::ios::out);
  if (!csv) throw IoError("cannot write loss history: " + csv_path.string());
  if (!resuming) csv << "step,lr,loss\n";

  TrainResult result;
  result.steps_per_epoch = steps_per_epoch;
  Rng shuffle_rng;  // re-seeded per epoch below

  int64_t global_step = start_epoch * steps_per_epoch;
  for (int64_t epoch = start_epoch; epoch < cfg.train.epochs; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng = Rng(mix_seed(cfg.data.seed, static_cast<uint64_t>(epoch), 0x5u));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

    double epoch_loss = 0.0;
    for (int64_t b0 = 0; b0 < n; b0 += bs) {
      int64_t bcount = std::min(bs, n - b0);
      std::vector<Sample> batch;
      batch.reserve(static_cast<size_t>(bcount));
      for (int64_t k = 0; k < bcount; ++k) {
        int64_t idx = order[static_cast<size_t>(b0 + k)];
        Rng aug = sample_rng(cfg.data.seed, epoch, idx);
        batch.push_back(preprocess(pairs[static_cast<size_t>(idx)], cfg.data, true, aug));
      }
      Tensor images = stack_images(batch);
      Tensor masks = stack_masks(batch);

      DecoderOutput out = model.forward(images, /*training=*/true);
      Tensor loss = total_loss(out, masks, cfg.loss);
      double loss_v = loss.item();
      double lr = lr_at(global_step, total_steps, cfg.train);
      if (!std::isfinite(loss_v)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "non-finite loss %.6g at step %lld (lr %.6g); aborting", loss_v,
                      static_cast<long long>(global_step), lr);
        throw TrainAbort(msg);
      }

      opt.zero_grad();
      loss.backward();
      opt.clip_gradients(cfg.train.clip_grad);
      opt.step(lr);

      csv << format_csv_row(global_step, lr, loss_v);
      result.history.push_back({global_step, lr, loss_v});
      epoch_loss += loss_v;
      ++global_step;
    }
    csv.flush();
    std::cout << "epoch " << (epoch + 1) << "/" << cfg.train.epochs << "  loss "
              << epoch_loss / static_cast<double>(steps_per_epoch) << "\n";

    std::string rng_state = shuffle_rng.state();
    CheckpointData ckpt = snapshot(model, opt, cfg, epoch + 1, rng_state);
    char name[48];
    std::snprintf(name, sizeof(name), "epoch_%04lld.ckpt",
                  static_cast<long long>(epoch + 1));
    save_checkpoint(ckpt, ckpt_dir / name);
    save_checkpoint(ckpt, ckpt_dir / "last.ckpt");
    result.final_checkpoint = ckpt_dir / "last.ckpt";
    ++result.epochs_run;

    if (cfg.train.eval_every > 0 && (epoch + 1) % cfg.train.eval_every == 0) {
      // Quick training-set check on the frozen snapshot (inference mode).
      double mean_mae = 0.0;
      NoGradGuard ng;
      for (const auto& pair : pairs) {
        Rng aug(0);
        Sample s = preprocess(pair, cfg.data, false, aug);
        std::vector<Sample> one{s};
        DecoderOutput out = model.forward(stack_images(one), false);
        Tensor prob = sigmoid(out.logits.back());
        double acc = 0.0;
        for (int64_t i = 0; i < prob.numel(); ++i)
          acc += std::abs(prob.data()[i] - s.mask.data()[i]);
        mean_mae += acc / static_cast<double>(prob.numel());
      }
      std::cout << "  eval: train MAE " << mean_mae / static_cast<double>(n) << "\n";
    }
  }
  return result;
}

Tensor predict_map(const Sam3UNet& model, const RunConfig& cfg,
                   const fs::path& image_path) {
  Tensor img = load_image_rgb(image_path);  // (3,H,W)
  int64_t orig_h = img.dim(1), orig_w = img.dim(2);

  NoGradGuard ng;
  Tensor img4 = reshape(img, {1, 3, orig_h, orig_w});
  img4 = bilinear_resize(img4, cfg.data.input_h, cfg.data.input_w);
  int64_t hw = cfg.data.input_h * cfg.data.input_w;
  for (int ch = 0; ch < 3; ++ch) {
    double mean = cfg.data.normalize_mean[static_cast<size_t>(ch)];
    double stdv = cfg.data.normalize_std[static_cast<size_t>(ch)];
    double* p = img4.data() + ch * hw;
    for (int64_t i = 0; i < hw; ++i) p[i] = (p[i] - mean) / stdv;
  }
  DecoderOutput out = model.forward(img4, /*training=*/false);
  Tensor prob = sigmoid(out.logits.back());  // finest head
  prob = bilinear_resize(prob, orig_h, orig_w);
  return reshape(prob, {orig_h, orig_w});
}

void predict_image(const Sam3UNet& model, const RunConfig& cfg,
                   const fs::path& image_path, const fs::path& out_path) {
  save_image_gray(out_path, predict_map(model, cfg, image_path));
}

}  // namespace sam3unet
