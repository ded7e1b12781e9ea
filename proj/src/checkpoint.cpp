#include "sam3unet/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace sam3unet {

namespace {
constexpr char kMagic[8] = {'S', '3', 'U', 'N', 'E', 'T', 'C', 'K'};
}

void save_checkpoint(const CheckpointData& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["version"] = ckpt.version;
  header["epoch"] = ckpt.epoch;
  header["config"] = ckpt.config_text;
  header["rng_state"] = ckpt.rng_state;

  uint64_t offset = 0;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    e["count"] = t.data.size();
    e["trainable"] = t.trainable;
    e["param"] = t.is_param;
    tensors.push_back(e);
    offset += t.data.size();
  }
  header["tensors"] = tensors;

  nlohmann::json opt;
  opt["step"] = ckpt.opt_step;
  nlohmann::json slots = nlohmann::json::array();
  for (size_t i = 0; i < ckpt.opt_names.size(); ++i) {
    nlohmann::json s;
    s["name"] = ckpt.opt_names[i];
    s["m_offset"] = offset;
    offset += ckpt.opt_m[i].size();
    s["v_offset"] = offset;
    offset += ckpt.opt_v[i].size();
    s["count"] = ckpt.opt_m[i].size();
    slots.push_back(s);
  }
  opt["slots"] = slots;
  header["optimizer"] = opt;

  std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path.string());
  f.write(kMagic, sizeof(kMagic));
  uint32_t ver = ckpt.version;
  f.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& t : ckpt.tensors)
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  for (size_t i = 0; i < ckpt.opt_names.size(); ++i) {
    f.write(reinterpret_cast<const char*>(ckpt.opt_m[i].data()),
            static_cast<std::streamsize>(ckpt.opt_m[i].size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(ckpt.opt_v[i].data()),
            static_cast<std::streamsize>(ckpt.opt_v[i].size() * sizeof(double)));
  }
  if (!f) throw IoError("short write on checkpoint: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw LoadError("not a checkpoint file: " + path.string());
  uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (ver != kCheckpointVersion)
    throw LoadError("checkpoint version " + std::to_string(ver) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + "): " + path.string());
  uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw LoadError("truncated checkpoint header: " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("corrupt checkpoint header: " + std::string(e.what()));
  }

  CheckpointData ckpt;
  ckpt.version = ver;
  ckpt.epoch = header.value("epoch", int64_t{0});
  ckpt.config_text = header.value("config", std::string{});
  ckpt.rng_state = header.value("rng_state", std::string{});

  std::streampos payload_start = f.tellg();
  auto read_block = [&](uint64_t offset, size_t count) {
    std::vector<double> out(count);
    f.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(double)));
    f.read(reinterpret_cast<char*>(out.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw LoadError("truncated checkpoint payload: " + path.string());
    return out;
  };

  for (const auto& e : header["tensors"]) {
    TensorEntry t;
    t.name = e["name"].get<std::string>();
    t.shape = e["shape"].get<Shape>();
    t.trainable = e.value("trainable", false);
    t.is_param = e.value("param", true);
    t.data = read_block(e["offset"].get<uint64_t>(), e["count"].get<size_t>());
    if (static_cast<int64_t>(t.data.size()) != shape_numel(t.shape))
      throw LoadError("tensor " + t.name + " payload does not match shape");
    ckpt.tensors.push_back(std::move(t));
  }
  if (header.contains("optimizer")) {
    const auto& opt = header["optimizer"];
    ckpt.opt_step = opt.value("step", int64_t{0});
    for (const auto& s : opt["slots"]) {
      ckpt.opt_names.push_back(s["name"].get<std::string>());
      size_t count = s["count"].get<size_t>();
      ckpt.opt_m.push_back(read_block(s["m_offset"].get<uint64_t>(), count));
      ckpt.opt_v.push_back(read_block(s["v_offset"].get<uint64_t>(), count));
    }
  }
  return ckpt;
}

}  // namespace sam3unet
