#include "sam3unet/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace sam3unet {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_real_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_real(v[i]);
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_schema() {
  RunConfig d;  // defaults
  return {
      {"encoder.patch_size", std::to_string(d.encoder.patch_size)},
      {"encoder.embed_dim", std::to_string(d.encoder.embed_dim)},
      {"encoder.depth", std::to_string(d.encoder.depth)},
      {"encoder.num_heads", std::to_string(d.encoder.num_heads)},
      {"encoder.mlp_ratio", fmt_real(d.encoder.mlp_ratio)},
      {"encoder.adapter_bottleneck", std::to_string(d.encoder.adapter_bottleneck)},
      {"encoder.pretrained_path", d.encoder.pretrained_path},
      {"encoder.strict_load", d.encoder.strict_load ? "true" : "false"},
      {"data.root", d.data.root},
      {"data.image_subdir", d.data.image_subdir},
      {"data.mask_subdir", d.data.mask_subdir},
      {"data.input_h", std::to_string(d.data.input_h)},
      {"data.input_w", std::to_string(d.data.input_w)},
      {"data.normalize_mean", fmt_real_list({d.data.normalize_mean.begin(),
                                             d.data.normalize_mean.end()})},
      {"data.normalize_std", fmt_real_list({d.data.normalize_std.begin(),
                                            d.data.normalize_std.end()})},
      {"data.flip_prob", fmt_real(d.data.flip_prob)},
      {"data.seed", std::to_string(d.data.seed)},
      {"data.strict", d.data.strict ? "true" : "false"},
      {"train.lr", fmt_real(d.train.lr)},
      {"train.weight_decay", fmt_real(d.train.weight_decay)},
      {"train.epochs", std::to_string(d.train.epochs)},
      {"train.batch_size", std::to_string(d.train.batch_size)},
      {"train.lr_floor", fmt_real(d.train.lr_floor)},
      {"train.seed", std::to_string(d.train.seed)},
      {"train.eval_every", std::to_string(d.train.eval_every)},
      {"train.checkpoint_dir", d.train.checkpoint_dir},
      {"train.clip_grad", fmt_real(d.train.clip_grad)},
      {"train.resume", d.train.resume},
      {"loss.pool_kernel", std::to_string(d.loss.pool_kernel)},
      {"loss.weight_gain", fmt_real(d.loss.weight_gain)},
      {"loss.epsilon", fmt_real(d.loss.epsilon)},
      {"loss.head_weights", fmt_real_list(d.loss.head_weights)},
      {"loss.strict_binary", d.loss.strict_binary ? "true" : "false"},
      {"metrics.f_mode", "adaptive"},
      {"metrics.strict", "false"},
  };
}

RunConfig load_run_config(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : config_schema()) kv[k] = v;

  auto apply = [&](const std::string& key, const std::string& value,
                   const std::string& origin) {
    if (!kv.count(key))
      throw ConfigError("unknown config key '" + key + "' (" + origin + ")");
    kv[key] = value;
  };

  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected 'key = value', got '" + line + "'");
      apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
            path.string() + ":" + std::to_string(lineno));
    }
  }
  for (const auto& [k, v] : overrides) apply(k, v, "command line");

  RunConfig cfg;
  cfg.encoder.patch_size = parse_int("encoder.patch_size", kv["encoder.patch_size"]);
  cfg.encoder.embed_dim = parse_int("encoder.embed_dim", kv["encoder.embed_dim"]);
  cfg.encoder.depth = parse_int("encoder.depth", kv["encoder.depth"]);
  cfg.encoder.num_heads = parse_int("encoder.num_heads", kv["encoder.num_heads"]);
  cfg.encoder.mlp_ratio = parse_real("encoder.mlp_ratio", kv["encoder.mlp_ratio"]);
  cfg.encoder.adapter_bottleneck =
      parse_int("encoder.adapter_bottleneck", kv["encoder.adapter_bottleneck"]);
  cfg.encoder.pretrained_path = kv["encoder.pretrained_path"];
  cfg.encoder.strict_load = parse_bool("encoder.strict_load", kv["encoder.strict_load"]);

  cfg.data.root = kv["data.root"];
  cfg.data.image_subdir = kv["data.image_subdir"];
  cfg.data.mask_subdir = kv["data.mask_subdir"];
  cfg.data.input_h = parse_int("data.input_h", kv["data.input_h"]);
  cfg.data.input_w = parse_int("data.input_w", kv["data.input_w"]);
  auto mean = parse_real_list("data.normalize_mean", kv["data.normalize_mean"]);
  auto stdv = parse_real_list("data.normalize_std", kv["data.normalize_std"]);
  if (mean.size() != 3 || stdv.size() != 3)
    throw ConfigError("data.normalize_mean/std must have 3 entries");
  std::copy(mean.begin(), mean.end(), cfg.data.normalize_mean.begin());
  std::copy(stdv.begin(), stdv.end(), cfg.data.normalize_std.begin());
  cfg.data.flip_prob = parse_real("data.flip_prob", kv["data.flip_prob"]);
  cfg.data.seed = static_cast<uint64_t>(parse_int("data.seed", kv["data.seed"]));
  cfg.data.strict = parse_bool("data.strict", kv["data.strict"]);

  cfg.train.lr = parse_real("train.lr", kv["train.lr"]);
  cfg.train.weight_decay = parse_real("train.weight_decay", kv["train.weight_decay"]);
  cfg.train.epochs = parse_int("train.epochs", kv["train.epochs"]);
  cfg.train.batch_size = parse_int("train.batch_size", kv["train.batch_size"]);
  cfg.train.lr_floor = parse_real("train.lr_floor", kv["train.lr_floor"]);
  cfg.train.seed = static_cast<uint64_t>(parse_int("train.seed", kv["train.seed"]));
  cfg.train.eval_every = parse_int("train.eval_every", kv["train.eval_every"]);
  cfg.train.checkpoint_dir = kv["train.checkpoint_dir"];
  cfg.train.clip_grad = parse_real("train.clip_grad", kv["train.clip_grad"]);
  cfg.train.resume = kv["train.resume"];

  cfg.loss.pool_kernel = static_cast<int>(parse_int("loss.pool_kernel", kv["loss.pool_kernel"]));
  cfg.loss.weight_gain = parse_real("loss.weight_gain", kv["loss.weight_gain"]);
  cfg.loss.epsilon = parse_real("loss.epsilon", kv["loss.epsilon"]);
  cfg.loss.head_weights = parse_real_list("loss.head_weights", kv["loss.head_weights"]);
  cfg.loss.strict_binary = parse_bool("loss.strict_binary", kv["loss.strict_binary"]);

  const std::string& fm = kv["metrics.f_mode"];
  if (fm == "adaptive")
    cfg.metrics.f_mode = FMode::kAdaptive;
  else if (fm == "max")
    cfg.metrics.f_mode = FMode::kMax;
  else
    throw ConfigError("config key 'metrics.f_mode': expected adaptive|max, got '" + fm +
                      "'");
  cfg.metrics.strict = parse_bool("metrics.strict", kv["metrics.strict"]);

  cfg.train.validate();
  cfg.loss.validate();
  cfg.data.validate();
  return cfg;
}

std::string render_run_config(const RunConfig& cfg) {
  std::ostringstream os;
  auto line = [&](const std::string& k, const std::string& v) {
    os << k << " = " << v << "\n";
  };
  line("encoder.patch_size", std::to_string(cfg.encoder.patch_size));
  line("encoder.embed_dim", std::to_string(cfg.encoder.embed_dim));
  line("encoder.depth", std::to_string(cfg.encoder.depth));
  line("encoder.num_heads", std::to_string(cfg.encoder.num_heads));
  line("encoder.mlp_ratio", fmt_real(cfg.encoder.mlp_ratio));
  line("encoder.adapter_bottleneck", std::to_string(cfg.encoder.adapter_bottleneck));
  line("encoder.pretrained_path", cfg.encoder.pretrained_path);
  line("encoder.strict_load", cfg.encoder.strict_load ? "true" : "false");
  line("data.root", cfg.data.root);
  line("data.image_subdir", cfg.data.image_subdir);
  line("data.mask_subdir", cfg.data.mask_subdir);
  line("data.input_h", std::to_string(cfg.data.input_h));
  line("data.input_w", std::to_string(cfg.data.input_w));
  line("data.normalize_mean", fmt_real_list({cfg.data.normalize_mean.begin(),
                                             cfg.data.normalize_mean.end()}));
  line("data.normalize_std", fmt_real_list({cfg.data.normalize_std.begin(),
                                            cfg.data.normalize_std.end()}));
  line("data.flip_prob", fmt_real(cfg.data.flip_prob));
  line("data.seed", std::to_string(cfg.data.seed));
  line("data.strict", cfg.data.strict ? "true" : "false");
  line("train.lr", fmt_real(cfg.train.lr));
  line("train.weight_decay", fmt_real(cfg.train.weight_decay));
  line("train.epochs", std::to_string(cfg.train.epochs));
  line("train.batch_size", std::to_string(cfg.train.batch_size));
  line("train.lr_floor", fmt_real(cfg.train.lr_floor));
  line("train.seed", std::to_string(cfg.train.seed));
  line("train.eval_every", std::to_string(cfg.train.eval_every));
  line("train.checkpoint_dir", cfg.train.checkpoint_dir);
  line("train.clip_grad", fmt_real(cfg.train.clip_grad));
  line("train.resume", cfg.train.resume);
  line("loss.pool_kernel", std::to_string(cfg.loss.pool_kernel));
  line("loss.weight_gain", fmt_real(cfg.loss.weight_gain));
  line("loss.epsilon", fmt_real(cfg.loss.epsilon));
  line("loss.head_weights", fmt_real_list(cfg.loss.head_weights));
  line("loss.strict_binary", cfg.loss.strict_binary ? "true" : "false");
  line("metrics.f_mode", cfg.metrics.f_mode == FMode::kAdaptive ? "adaptive" : "max");
  line("metrics.strict", cfg.metrics.strict ? "true" : "false");
  return os.str();
}

ModelConfig make_model_config(const RunConfig& cfg) {
  ModelConfig mc;
  mc.encoder = cfg.encoder;
  mc.encoder.img_size = {cfg.data.input_h, cfg.data.input_w};
  mc.encoder.validate();
  return mc;
}

}  // namespace sam3unet
