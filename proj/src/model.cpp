#include "sam3unet/model.hpp"

#include <algorithm>

#include "sam3unet/checkpoint.hpp"

namespace sam3unet {

namespace {

Rng make_rng(uint64_t seed, uint64_t salt) { return Rng(mix_seed(seed, salt)); }

}  // namespace

Sam3UNet::Sam3UNet(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), encoder_(build_encoder(cfg.encoder, seed)) {
  Rng rng_pyr = make_rng(seed, 0x9122u);
  pyramid_ = PyramidProjector(cfg.encoder.embed_dim, rng_pyr);
  Rng rng_dec = make_rng(seed, 0xdec0u);
  decoder_ = Decoder(rng_dec);
}

DecoderOutput Sam3UNet::forward(const Tensor& images, bool training) const {
  Tensor grid = encoder_.encode(images);
  FeaturePyramid pyr = pyramid_.project(grid, images.dim(2), images.dim(3));
  return decoder_.decode(pyr, training);
}

Registry Sam3UNet::registry() const {
  Registry reg;
  encoder_.collect("encoder.", reg);
  pyramid_.collect("pyramid.", reg);
  decoder_.collect("decoder.", reg);
  return reg;
}

std::vector<NamedTensor> Sam3UNet::trainable_parameters() const {
  return registry().trainable();
}

void Sam3UNet::save_state(CheckpointData& ckpt) const {
  Registry reg = registry();
  for (const auto& it : reg.items()) {
    TensorEntry e;
    e.name = it.name;
    e.shape = it.tensor.shape();
    e.data.assign(it.tensor.values().begin(), it.tensor.values().end());
    e.trainable = it.tensor.requires_grad();
    e.is_param = it.is_param;
    ckpt.tensors.push_back(std::move(e));
  }
}

void Sam3UNet::load_state(const CheckpointData& ckpt) {
  Registry reg = registry();
  for (const auto& it : reg.items()) {
    const TensorEntry* e = ckpt.find(it.name);
    if (!e) throw LoadError("checkpoint is missing tensor '" + it.name + "'");
    if (e->shape != it.tensor.shape())
      throw LoadError("checkpoint tensor '" + it.name + "' has shape " +
                      shape_str(e->shape) + ", model expects " +
                      shape_str(it.tensor.shape()));
    std::copy(e->data.begin(), e->data.end(), const_cast<Tensor&>(it.tensor).data());
  }
}

namespace {

// Running statistics are buffers, not parameters; the census counts
// parameters only.
void lightweight_block_census(Census& c, const std::string& p, int64_t cin, int64_t cout) {
  auto t = [&](const std::string& n, Shape s) { c.entries.push_back({n, std::move(s), true}); };
  int64_t red = cin / 4, br = cin / 8, cat = cin / 2;
  t(p + ".reduce.conv.weight", {red, cin});
  t(p + ".reduce.conv.bias", {red});
  t(p + ".reduce.bn.weight", {red});
  t(p + ".reduce.bn.bias", {red});
  for (const char* dw : {".dw1", ".dw2"}) {
    t(p + dw + std::string(".conv.weight"), {br, 3, 3});
    t(p + dw + std::string(".conv.bias"), {br});
    t(p + dw + std::string(".bn.weight"), {br});
    t(p + dw + std::string(".bn.bias"), {br});
  }
  t(p + ".expand.conv.weight", {cout, cat});
  t(p + ".expand.conv.bias", {cout});
  t(p + ".expand.bn.weight", {cout});
  t(p + ".expand.bn.bias", {cout});
}

}  // namespace

Census model_census(const ModelConfig& cfg) {
  Census c;
  for (auto& e : encoder_census(cfg.encoder).entries) {
    e.name = "encoder." + e.name;
    c.entries.push_back(e);
  }
  for (int k = 1; k <= 4; ++k) {
    c.entries.push_back({"pyramid.proj" + std::to_string(k) + ".weight",
                         {kPyramidChannels, cfg.encoder.embed_dim},
                         true});
    c.entries.push_back({"pyramid.proj" + std::to_string(k) + ".bias", {kPyramidChannels}, true});
  }
  const int64_t pc = kPyramidChannels;
  lightweight_block_census(c, "decoder.stem", pc, pc);
  lightweight_block_census(c, "decoder.fuse3", 2 * pc, pc);
  lightweight_block_census(c, "decoder.fuse2", 2 * pc, pc);
  lightweight_block_census(c, "decoder.fuse1", 2 * pc, pc);
  for (const char* h : {"head3", "head2", "head1"}) {
    c.entries.push_back({std::string("decoder.") + h + ".weight", {1, pc}, true});
    c.entries.push_back({std::string("decoder.") + h + ".bias", {1}, true});
  }
  return c;
}

MemoryReport memory_report(const Census& census) {
  MemoryReport r;
  r.total_param_bytes = census.total() * static_cast<int64_t>(sizeof(double));
  r.trainable_param_bytes = census.trainable_count() * static_cast<int64_t>(sizeof(double));
  r.optimizer_state_bytes = 2 * r.trainable_param_bytes;
  r.trainable_fraction =
      census.total() > 0
          ? static_cast<double>(census.trainable_count()) / static_cast<double>(census.total())
          : 0.0;
  return r;
}

}  // namespace sam3unet
