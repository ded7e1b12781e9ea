#include "sam3unet/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sam3unet/checkpoint.hpp"

namespace sam3unet {

void EncoderConfig::validate() const {
  if (patch_size < 1) throw ConfigError("encoder.patch_size must be >= 1");
  if (embed_dim < 1) throw ConfigError("encoder.embed_dim must be >= 1");
  if (depth < 1) throw ConfigError("encoder.depth must be >= 1");
  if (img_size.first <= 0 || img_size.first % patch_size != 0)
    throw ConfigError("encoder.img_size.h (" + std::to_string(img_size.first) +
                      ") must be a positive multiple of patch_size");
  if (img_size.second <= 0 || img_size.second % patch_size != 0)
    throw ConfigError("encoder.img_size.w (" + std::to_string(img_size.second) +
                      ") must be a positive multiple of patch_size");
  if (adapter_bottleneck < 1 || adapter_bottleneck > embed_dim)
    throw ConfigError("encoder.adapter_bottleneck (" +
                      std::to_string(adapter_bottleneck) + ") must be in [1, embed_dim]");
  if (num_heads < 1 || embed_dim % num_heads != 0)
    throw ConfigError("encoder.num_heads must divide embed_dim");
  if (mlp_hidden() < 1) throw ConfigError("encoder.mlp_ratio too small");
}

Tensor Adapter::forward(const Tensor& x) const {
  return add(x, gelu(up.forward(gelu(down.forward(x)))));
}

Tensor Attention::forward(const Tensor& x) const {
  int64_t bsz = x.dim(0), n = x.dim(1), dim = x.dim(2);
  int64_t dh = dim / heads;
  Tensor qkv_out = qkv.forward(x);  // (B,N,3D)
  Tensor q = slice_lastdim(qkv_out, 0, dim);
  Tensor k = slice_lastdim(qkv_out, dim, 2 * dim);
  Tensor v = slice_lastdim(qkv_out, 2 * dim, 3 * dim);

  auto to_heads = [&](const Tensor& t) {
    return reshape(permute(reshape(t, {bsz, n, heads, dh}), {0, 2, 1, 3}),
                   {bsz * heads, n, dh});
  };
  Tensor qh = to_heads(q);
  Tensor vh = to_heads(v);
  Tensor kt = reshape(permute(reshape(k, {bsz, n, heads, dh}), {0, 2, 3, 1}),
                      {bsz * heads, dh, n});

  Tensor scores = mul_scalar(bmm(qh, kt), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor att = softmax_lastdim(scores);
  Tensor ctx = bmm(att, vh);  // (B*H, N, dh)
  Tensor merged = reshape(permute(reshape(ctx, {bsz, heads, n, dh}), {0, 2, 1, 3}),
                          {bsz, n, dim});
  return proj.forward(merged);
}

AdaptedEncoder::AdaptedEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  int64_t d = cfg_.embed_dim;
  patch_embed_ = Linear(3 * cfg_.patch_size * cfg_.patch_size, d, rng);
  pos_embed_ = Tensor::randn({1, cfg_.grid_h() * cfg_.grid_w(), d}, rng, 0.02);
  norm_ = LayerNorm(d);
  blocks_.reserve(static_cast<size_t>(cfg_.depth));
  adapters_.reserve(static_cast<size_t>(cfg_.depth));
  for (int64_t i = 0; i < cfg_.depth; ++i)
    blocks_.emplace_back(d, cfg_.num_heads, cfg_.mlp_hidden(), rng);
  for (int64_t i = 0; i < cfg_.depth; ++i)
    adapters_.emplace_back(d, cfg_.adapter_bottleneck, rng);

  // Base stays frozen; only adapters train.
  Registry base;
  collect_base("", base);
  for (const auto& it : base.items())
    const_cast<Tensor&>(it.tensor).set_requires_grad(false);
}

Tensor AdaptedEncoder::encode(const Tensor& images) const {
  if (images.ndim() != 4 || images.dim(1) != 3)
    throw ShapeError("encode: expected (B,3,H,W), got " + shape_str(images.shape()));
  int64_t h = images.dim(2), w = images.dim(3), p = cfg_.patch_size;
  if (h % p != 0 || w % p != 0)
    throw ShapeError("encode: input " + shape_str({h, w}) +
                     " is not a multiple of patch size " + std::to_string(p));
  int64_t bsz = images.dim(0), gh = h / p, gw = w / p, d = cfg_.embed_dim;

  Tensor tokens = reshape(patch_embed_.forward(unfold_patches(images, p)), {bsz, gh * gw, d});

  Tensor pos = pos_embed_;
  if (gh != cfg_.grid_h() || gw != cfg_.grid_w()) {
    // Resample the positional grid per channel; the base is frozen so this
    // stays outside the autodiff graph.
    int64_t src_n = cfg_.grid_h() * cfg_.grid_w();
    std::vector<double> plane(static_cast<size_t>(src_n));
    Tensor resized({1, gh * gw, d});
    for (int64_t ch = 0; ch < d; ++ch) {
      for (int64_t i = 0; i < src_n; ++i) plane[static_cast<size_t>(i)] = pos_embed_.data()[i * d + ch];
      auto out = bicubic_resize_plane(plane, cfg_.grid_h(), cfg_.grid_w(), gh, gw);
      for (int64_t i = 0; i < gh * gw; ++i) resized.data()[i * d + ch] = out[static_cast<size_t>(i)];
    }
    pos = resized;
  }
  tokens = add_batch_broadcast(tokens, pos);

  for (size_t i = 0; i < blocks_.size(); ++i) {
    if (adapters_enabled_) tokens = adapters_[i].forward(tokens);
    tokens = blocks_[i].forward(tokens);
  }
  tokens = norm_.forward(tokens);
  return reshape(permute(tokens, {0, 2, 1}), {bsz, d, gh, gw});
}

void AdaptedEncoder::collect_base(const std::string& prefix, Registry& reg) const {
  patch_embed_.collect(prefix + "patch_embed", reg);
  reg.add(prefix + "pos_embed", pos_embed_);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(prefix + "blocks." + std::to_string(i), reg);
  norm_.collect(prefix + "norm", reg);
}

void AdaptedEncoder::collect_adapters(const std::string& prefix, Registry& reg) const {
  for (size_t i = 0; i < adapters_.size(); ++i)
    adapters_[i].collect(prefix + "adapters." + std::to_string(i), reg);
}

void AdaptedEncoder::collect(const std::string& prefix, Registry& reg) const {
  collect_base(prefix, reg);
  collect_adapters(prefix, reg);
}

std::vector<NamedTensor> AdaptedEncoder::trainable_parameters() const {
  Registry reg;
  collect_adapters("", reg);
  return reg.trainable();
}

std::string LoadReport::summary() const {
  std::ostringstream os;
  os << matched.size() << " matched, " << missing.size() << " missing, "
     << unexpected.size() << " unexpected";
  return os.str();
}

namespace {

std::map<std::string, std::string> read_key_mapping(const std::filesystem::path& path) {
  std::map<std::string, std::string> mapping;
  if (path.empty()) return mapping;
  std::ifstream f(path);
  if (!f) throw IoError("cannot open key mapping file: " + path.string());
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream is(line);
    std::string from, arrow, to;
    if (!(is >> from)) continue;
    if (from == "version") continue;  // header line
    if (!(is >> arrow >> to) || arrow != "->")
      throw IoError("malformed mapping line: " + line);
    mapping[from] = to;
  }
  return mapping;
}

}  // namespace

LoadReport AdaptedEncoder::load_pretrained(const std::filesystem::path& path,
                                           const std::filesystem::path& mapping_path,
                                           bool strict) {
  if (!std::filesystem::exists(path))
    throw IoError("pretrained weights not found: " + path.string());
  CheckpointData ckpt = load_checkpoint(path);
  auto mapping = read_key_mapping(mapping_path);

  Registry base;
  collect_base("", base);

  LoadReport report;
  std::vector<bool> covered(base.items().size(), false);
  for (const auto& entry : ckpt.tensors) {
    std::string target = entry.name;
    auto it = mapping.find(entry.name);
    if (it != mapping.end()) target = it->second;
    const NamedTensor* dst = nullptr;
    size_t dst_idx = 0;
    for (size_t i = 0; i < base.items().size(); ++i)
      if (base.items()[i].name == target) {
        dst = &base.items()[i];
        dst_idx = i;
        break;
      }
    if (!dst) {
      report.unexpected.push_back(entry.name);
      continue;
    }
    if (dst->tensor.shape() != entry.shape)
      throw LoadError("shape mismatch for parameter '" + target + "': file " +
                      shape_str(entry.shape) + " vs model " +
                      shape_str(dst->tensor.shape()));
    std::copy(entry.data.begin(), entry.data.end(),
              const_cast<Tensor&>(dst->tensor).data());
    covered[dst_idx] = true;
    report.matched.push_back(target);
  }
  for (size_t i = 0; i < base.items().size(); ++i)
    if (!covered[i]) report.missing.push_back(base.items()[i].name);

  if (strict && !report.clean()) {
    std::ostringstream os;
    os << "strict pretrained load failed (" << report.summary() << ")";
    for (const auto& n : report.missing) os << "\n  missing: " << n;
    for (const auto& n : report.unexpected) os << "\n  unexpected: " << n;
    throw LoadError(os.str());
  }
  return report;
}

AdaptedEncoder build_encoder(const EncoderConfig& cfg, uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5a33u));
  AdaptedEncoder enc(cfg, rng);
  if (!cfg.pretrained_path.empty())
    enc.load_pretrained(cfg.pretrained_path, {}, cfg.strict_load);
  return enc;
}

int64_t Census::total() const {
  int64_t n = 0;
  for (const auto& e : entries) n += shape_numel(e.shape);
  return n;
}

int64_t Census::trainable_count() const {
  int64_t n = 0;
  for (const auto& e : entries)
    if (e.trainable) n += shape_numel(e.shape);
  return n;
}

int64_t Census::frozen_count() const { return total() - trainable_count(); }

Census encoder_census(const EncoderConfig& cfg) {
  cfg.validate();
  Census c;
  int64_t d = cfg.embed_dim, p = cfg.patch_size, hid = cfg.mlp_hidden();
  auto base = [&](const std::string& n, Shape s) { c.entries.push_back({n, std::move(s), false}); };
  auto train = [&](const std::string& n, Shape s) { c.entries.push_back({n, std::move(s), true}); };

  base("patch_embed.weight", {d, 3 * p * p});
  base("patch_embed.bias", {d});
  base("pos_embed", {1, cfg.grid_h() * cfg.grid_w(), d});
  for (int64_t i = 0; i < cfg.depth; ++i) {
    std::string b = "blocks." + std::to_string(i);
    base(b + ".norm1.weight", {d});
    base(b + ".norm1.bias", {d});
    base(b + ".attn.qkv.weight", {3 * d, d});
    base(b + ".attn.qkv.bias", {3 * d});
    base(b + ".attn.proj.weight", {d, d});
    base(b + ".attn.proj.bias", {d});
    base(b + ".norm2.weight", {d});
    base(b + ".norm2.bias", {d});
    base(b + ".mlp.fc1.weight", {hid, d});
    base(b + ".mlp.fc1.bias", {hid});
    base(b + ".mlp.fc2.weight", {d, hid});
    base(b + ".mlp.fc2.bias", {d});
  }
  base("norm.weight", {d});
  base("norm.bias", {d});
  for (int64_t i = 0; i < cfg.depth; ++i) {
    std::string a = "adapters." + std::to_string(i);
    train(a + ".down.weight", {cfg.adapter_bottleneck, d});
    train(a + ".down.bias", {cfg.adapter_bottleneck});
    train(a + ".up.weight", {d, cfg.adapter_bottleneck});
    train(a + ".up.bias", {d});
  }
  return c;
}

}  // namespace sam3unet
