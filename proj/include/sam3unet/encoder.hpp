#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sam3unet/nn.hpp"

namespace sam3unet {

struct EncoderConfig {
  int64_t patch_size = 14;
  int64_t embed_dim = 1024;
  int64_t depth = 32;
  int64_t num_heads = 16;
  std::pair<int64_t, int64_t> img_size{336, 336};
  double mlp_ratio = 4.0;
  int64_t adapter_bottleneck = 32;
  std::string pretrained_path;
  bool strict_load = false;

  int64_t mlp_hidden() const {
    return static_cast<int64_t>(static_cast<double>(embed_dim) * mlp_ratio);
  }
  int64_t grid_h() const { return img_size.first / patch_size; }
  int64_t grid_w() const { return img_size.second / patch_size; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Bottleneck adapter: x + GELU(up(GELU(down(x)))). The up projection is
/// zero initialized so a fresh adapter is an exact identity.
struct Adapter {
  Linear down, up;

  Adapter() = default;
  Adapter(int64_t dim, int64_t bottleneck, Rng& rng)
      : down(dim, bottleneck, rng), up(bottleneck, dim, rng, /*zero_init=*/true) {}

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& p, Registry& reg) const {
    down.collect(p + ".down", reg);
    up.collect(p + ".up", reg);
  }
};

struct Attention {
  Linear qkv;   // dim -> 3*dim
  Linear proj;  // dim -> dim
  int64_t heads = 1;

  Attention() = default;
  Attention(int64_t dim, int64_t num_heads, Rng& rng)
      : qkv(dim, 3 * dim, rng), proj(dim, dim, rng), heads(num_heads) {}
  Tensor forward(const Tensor& x) const;  // (B,N,D)
  void collect(const std::string& p, Registry& reg) const {
    qkv.collect(p + ".qkv", reg);
    proj.collect(p + ".proj", reg);
  }
};

struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(int64_t dim, int64_t hidden, Rng& rng) : fc1(dim, hidden, rng), fc2(hidden, dim, rng) {}
  Tensor forward(const Tensor& x) const { return fc2.forward(gelu(fc1.forward(x))); }
  void collect(const std::string& p, Registry& reg) const {
    fc1.collect(p + ".fc1", reg);
    fc2.collect(p + ".fc2", reg);
  }
};

/// Pre-norm transformer block.
struct Block {
  LayerNorm norm1, norm2;
  Attention attn;
  Mlp mlp;

  Block() = default;
  Block(int64_t dim, int64_t heads, int64_t hidden, Rng& rng)
      : norm1(dim), norm2(dim), attn(dim, heads, rng), mlp(dim, hidden, rng) {}
  Tensor forward(const Tensor& x) const {
    Tensor h = add(x, attn.forward(norm1.forward(x)));
    return add(h, mlp.forward(norm2.forward(h)));
  }
  void collect(const std::string& p, Registry& reg) const {
    norm1.collect(p + ".norm1", reg);
    attn.collect(p + ".attn", reg);
    norm2.collect(p + ".norm2", reg);
    mlp.collect(p + ".mlp", reg);
  }
};

struct LoadReport {
  std::vector<std::string> matched;
  std::vector<std::string> missing;     // base parameters absent from the file
  std::vector<std::string> unexpected;  // file keys that map to nothing
  bool clean() const { return missing.empty() && unexpected.empty(); }
  std::string summary() const;
};

/// ViT-style encoder with a frozen base (patch embedding, positional grid,
/// transformer blocks, final norm) and one trainable adapter in front of
/// each block.
class AdaptedEncoder {
 public:
  AdaptedEncoder(const EncoderConfig& cfg, Rng& rng);

  /// images: (B,3,H,W) with H, W positive multiples of patch_size.
  /// Returns the token grid (B, embed_dim, H/patch, W/patch). When the
  /// input grid differs from the configured one, the positional grid is
  /// resampled bicubically.
  Tensor encode(const Tensor& images) const;

  const EncoderConfig& config() const { return cfg_; }
  int64_t num_adapters() const { return static_cast<int64_t>(adapters_.size()); }
  bool adapters_enabled() const { return adapters_enabled_; }
  void set_adapters_enabled(bool v) { adapters_enabled_ = v; }

  /// Full registry under the given prefix; base entries first.
  void collect(const std::string& prefix, Registry& reg) const;
  void collect_base(const std::string& prefix, Registry& reg) const;
  void collect_adapters(const std::string& prefix, Registry& reg) const;

  /// Exactly the adapter parameters.
  std::vector<NamedTensor> trainable_parameters() const;

  /// Applies a named-parameter container to the base. Keys are translated
  /// through the optional mapping file (lines "external -> internal"),
  /// then matched against base names. Strict mode throws LoadError on any
  /// missing or unexpected name; shape mismatches always throw.
  LoadReport load_pretrained(const std::filesystem::path& path,
                             const std::filesystem::path& mapping_path = {},
                             bool strict = false);

 private:
  EncoderConfig cfg_;
  Linear patch_embed_;  // (embed_dim, 3*p*p)
  Tensor pos_embed_;    // (1, grid_h*grid_w, embed_dim)
  std::vector<Block> blocks_;
  LayerNorm norm_;
  std::vector<Adapter> adapters_;
  bool adapters_enabled_ = true;
};

AdaptedEncoder build_encoder(const EncoderConfig& cfg, uint64_t seed);

/// Shape-level parameter enumeration computed from the config alone
/// (nothing is allocated); used for trainable-fraction reporting at sizes
/// that are never instantiated.
struct CensusEntry {
  std::string name;
  Shape shape;
  bool trainable = false;
};

struct Census {
  std::vector<CensusEntry> entries;
  int64_t total() const;
  int64_t trainable_count() const;
  int64_t frozen_count() const;
};

Census encoder_census(const EncoderConfig& cfg);

}  // namespace sam3unet
