#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sam3unet/data.hpp"
#include "sam3unet/image_io.hpp"
#include "testutil.hpp"

using namespace sam3unet;
namespace fs = std::filesystem;

namespace {

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("make_synthetic is deterministic and masks are valid") {
  TempDir a("s3u_synth_a"), b("s3u_synth_b");
  make_synthetic(4, 48, 123, a.path);
  make_synthetic(4, 48, 123, b.path);

  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%03d.png", i);
    CHECK(read_bytes(a.path / "image" / name) == read_bytes(b.path / "image" / name));
    CHECK(read_bytes(a.path / "mask" / name) == read_bytes(b.path / "mask" / name));

    Tensor mask = load_image_gray(a.path / "mask" / name);
    int64_t fg = 0;
    for (int64_t j = 0; j < mask.numel(); ++j) {
      CHECK((mask.data()[j] == 0.0 || mask.data()[j] == 1.0));
      fg += mask.data()[j] != 0.0;
    }
    double frac = static_cast<double>(fg) / static_cast<double>(mask.numel());
    CHECK(fg > 0);
    CHECK(frac >= 0.10);
    CHECK(frac <= 0.60);
  }

  // A different seed changes the bytes.
  TempDir c("s3u_synth_c");
  make_synthetic(4, 48, 124, c.path);
  CHECK(read_bytes(a.path / "image" / "sample_000.png") !=
        read_bytes(c.path / "image" / "sample_000.png"));
}

TEST_CASE("index_dataset pairing and strict mode") {
  TempDir t("s3u_index");
  make_synthetic(3, 32, 5, t.path);
  DataConfig cfg;
  cfg.root = t.path.string();

  IndexResult r = index_dataset(cfg);
  CHECK(r.pairs.size() == 3);
  CHECK(r.orphans.empty());
  CHECK(r.pairs[0].id == "sample_000");
  CHECK(r.pairs[2].id == "sample_002");
  CHECK(std::is_sorted(r.pairs.begin(), r.pairs.end(),
                       [](const auto& a, const auto& b) { return a.id < b.id; }));

  // Orphan image: listed in non-strict, fatal in strict.
  fs::remove(t.path / "mask" / "sample_001.png");
  IndexResult r2 = index_dataset(cfg);
  CHECK(r2.pairs.size() == 2);
  REQUIRE(r2.orphans.size() == 1);
  CHECK(r2.orphans[0].find("sample_001") != std::string::npos);

  cfg.strict = true;
  CHECK_THROWS_WITH_AS(index_dataset(cfg), doctest::Contains("sample_001"), ConfigError);

  // Strict mode also rejects non-binary masks.
  fs::remove(t.path / "image" / "sample_001.png");
  Tensor gray(Shape{32, 32}, 0.5);
  save_image_gray(t.path / "mask" / "sample_000.png", gray);
  CHECK_THROWS_WITH_AS(index_dataset(cfg), doctest::Contains("not binary"), ConfigError);
}

TEST_CASE("preprocess: determinism, joint flips, normalization") {
  TempDir t("s3u_prep");
  make_synthetic(1, 40, 9, t.path);
  DataConfig cfg;
  cfg.root = t.path.string();
  cfg.input_h = 28;
  cfg.input_w = 28;
  IndexResult idx = index_dataset(cfg);
  REQUIRE(idx.pairs.size() == 1);

  SUBCASE("inference preprocessing is deterministic") {
    Rng r1(0), r2(0);
    Sample s1 = preprocess(idx.pairs[0], cfg, false, r1);
    Sample s2 = preprocess(idx.pairs[0], cfg, false, r2);
    CHECK(testutil::max_abs_diff(s1.image, s2.image) == 0.0);
    CHECK(testutil::max_abs_diff(s1.mask, s2.mask) == 0.0);
    for (int64_t i = 0; i < s1.mask.numel(); ++i)
      CHECK((s1.mask.data()[i] == 0.0 || s1.mask.data()[i] == 1.0));
  }

  SUBCASE("flips transform image and mask jointly") {
    cfg.flip_prob = 1.0;  // both flips always applied
    Rng rng(7);
    Sample flipped = preprocess(idx.pairs[0], cfg, true, rng);
    Rng rng2(7);
    cfg.flip_prob = 0.0;
    Sample plain = preprocess(idx.pairs[0], cfg, true, rng2);
    // A marker position (y,x) in the flipped sample equals (H-1-y, W-1-x)
    // in the unflipped one, for image and mask alike.
    int64_t h = cfg.input_h, w = cfg.input_w;
    bool all_match = true;
    for (int64_t y = 0; y < h && all_match; ++y)
      for (int64_t x = 0; x < w && all_match; ++x) {
        if (flipped.mask.data()[y * w + x] !=
            plain.mask.data()[(h - 1 - y) * w + (w - 1 - x)])
          all_match = false;
        if (flipped.image.data()[y * w + x] !=
            plain.image.data()[(h - 1 - y) * w + (w - 1 - x)])
          all_match = false;
      }
    CHECK(all_match);
  }

  SUBCASE("channel normalization applies (v - mean) / std") {
    // Constant gray input: write a uniform image and check the value.
    Tensor gray(Shape{3, 16, 16}, 0.5);
    save_image_rgb(t.path / "image" / "flat.png", gray);
    Tensor m(Shape{16, 16}, 1.0);
    save_image_gray(t.path / "mask" / "flat.png", m);
    cfg.input_h = cfg.input_w = 16;
    SamplePair pair{t.path / "image" / "flat.png", t.path / "mask" / "flat.png", "flat"};
    const double v = 128.0 / 255.0;  // 0.5 quantized to 8 bits and back
    Rng rng(0);
    Sample s = preprocess(pair, cfg, false, rng);
    for (int ch = 0; ch < 3; ++ch) {
      double expect = (v - cfg.normalize_mean[static_cast<size_t>(ch)]) /
                      cfg.normalize_std[static_cast<size_t>(ch)];
      CHECK(s.image.data()[ch * 256] == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("unreadable file raises IoError with the path") {
    SamplePair pair{t.path / "image" / "missing.png", idx.pairs[0].mask_path, "missing"};
    Rng rng(0);
    CHECK_THROWS_WITH_AS(preprocess(pair, cfg, false, rng),
                         doctest::Contains("missing.png"), IoError);
  }
}

TEST_CASE("sample_rng derives independent deterministic streams") {
  Rng a = sample_rng(1, 2, 3);
  Rng b = sample_rng(1, 2, 3);
  Rng c = sample_rng(1, 2, 4);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("stack builds batch tensors") {
  std::vector<Sample> samples(2);
  samples[0].image = Tensor(Shape{3, 4, 4}, 1.0);
  samples[0].mask = Tensor(Shape{1, 4, 4}, 0.0);
  samples[1].image = Tensor(Shape{3, 4, 4}, 2.0);
  samples[1].mask = Tensor(Shape{1, 4, 4}, 1.0);
  Tensor imgs = stack_images(samples);
  Tensor masks = stack_masks(samples);
  CHECK(imgs.shape() == Shape{2, 3, 4, 4});
  CHECK(masks.shape() == Shape{2, 1, 4, 4});
  CHECK(imgs.data()[0] == 1.0);
  CHECK(imgs.data()[3 * 16] == 2.0);
  CHECK(masks.data()[16] == 1.0);
}
