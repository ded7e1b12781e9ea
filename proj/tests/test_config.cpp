#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sam3unet/config.hpp"

using namespace sam3unet;
namespace fs = std::filesystem;

namespace {

fs::path write_cfg(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p);
  f << body;
  return p;
}

}  // namespace

TEST_CASE("defaults load without a file") {
  RunConfig cfg = load_run_config("");
  CHECK(cfg.train.lr == doctest::Approx(2e-4));
  CHECK(cfg.train.epochs == 20);
  CHECK(cfg.train.batch_size == 12);
  CHECK(cfg.encoder.embed_dim == 1024);
  CHECK(cfg.encoder.adapter_bottleneck == 32);
  CHECK(cfg.data.input_h == 336);
  CHECK(cfg.loss.pool_kernel == 31);
  CHECK(cfg.loss.weight_gain == 5.0);
  CHECK(cfg.loss.head_weights == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("file values and comments parse") {
  fs::path p = write_cfg("s3u_cfg1.cfg",
                         "# comment line\n"
                         "train.lr = 0.001   # trailing comment\n"
                         "encoder.depth = 3\n"
                         "loss.head_weights = 0.5, 0.25, 0.25\n"
                         "\n"
                         "data.image_subdir = imgs\n");
  RunConfig cfg = load_run_config(p);
  CHECK(cfg.train.lr == doctest::Approx(1e-3));
  CHECK(cfg.encoder.depth == 3);
  CHECK(cfg.loss.head_weights == std::vector<double>{0.5, 0.25, 0.25});
  CHECK(cfg.data.image_subdir == "imgs");
  fs::remove(p);
}

TEST_CASE("unknown keys are rejected by name") {
  fs::path p = write_cfg("s3u_cfg2.cfg", "train.lrr = 0.001\n");
  CHECK_THROWS_WITH_AS(load_run_config(p), doctest::Contains("train.lrr"), ConfigError);
  fs::remove(p);

  CHECK_THROWS_WITH_AS(load_run_config("", {{"nope.key", "1"}}),
                       doctest::Contains("nope.key"), ConfigError);
}

TEST_CASE("type errors name the key") {
  fs::path p = write_cfg("s3u_cfg3.cfg", "train.epochs = soon\n");
  CHECK_THROWS_WITH_AS(load_run_config(p), doctest::Contains("train.epochs"), ConfigError);
  fs::remove(p);

  CHECK_THROWS_WITH_AS(load_run_config("", {{"data.strict", "yes"}}),
                       doctest::Contains("data.strict"), ConfigError);
  CHECK_THROWS_WITH_AS(load_run_config("", {{"metrics.f_mode", "median"}}),
                       doctest::Contains("f_mode"), ConfigError);
}

TEST_CASE("overrides take precedence over file values") {
  fs::path p = write_cfg("s3u_cfg4.cfg", "train.lr = 0.001\ntrain.epochs = 7\n");
  RunConfig cfg = load_run_config(p, {{"train.lr", "0.5"}});
  CHECK(cfg.train.lr == doctest::Approx(0.5));
  CHECK(cfg.train.epochs == 7);
  fs::remove(p);
}

TEST_CASE("validation errors surface as ConfigError") {
  CHECK_THROWS_AS(load_run_config("", {{"train.lr", "0"}}), ConfigError);
  CHECK_THROWS_AS(load_run_config("", {{"loss.pool_kernel", "4"}}), ConfigError);
  CHECK_THROWS_AS(load_run_config("", {{"data.flip_prob", "1.5"}}), ConfigError);
}

TEST_CASE("render + reload is a fixed point") {
  RunConfig cfg = load_run_config("", {{"train.lr", "0.00123"},
                                       {"encoder.depth", "5"},
                                       {"loss.head_weights", "2,3,4"},
                                       {"metrics.f_mode", "max"}});
  fs::path p = write_cfg("s3u_cfg5.cfg", render_run_config(cfg));
  RunConfig cfg2 = load_run_config(p);
  CHECK(render_run_config(cfg2) == render_run_config(cfg));
  CHECK(cfg2.metrics.f_mode == FMode::kMax);
  fs::remove(p);
}

TEST_CASE("model config ties encoder image size to data input size") {
  RunConfig cfg = load_run_config("", {{"data.input_h", "84"},
                                       {"data.input_w", "84"},
                                       {"encoder.embed_dim", "64"},
                                       {"encoder.depth", "2"},
                                       {"encoder.num_heads", "4"}});
  ModelConfig mc = make_model_config(cfg);
  CHECK(mc.encoder.img_size.first == 84);
  CHECK(mc.encoder.img_size.second == 84);

  // Input size not divisible by the patch size fails validation.
  CHECK_THROWS_AS(make_model_config(load_run_config("", {{"data.input_h", "80"}})),
                  ConfigError);
}

TEST_CASE("schema covers every rendered key") {
  RunConfig cfg = load_run_config("");
  std::string rendered = render_run_config(cfg);
  for (const auto& [key, value] : config_schema())
    CHECK(rendered.find(key + " = ") != std::string::npos);
}
