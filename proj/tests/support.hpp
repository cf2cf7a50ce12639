#pragma once

// Shared helpers for the test suites: seeded generators, temporary
// directories and the synthetic constant-disparity stereo rig.

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "stereokit/stereokit.hpp"

namespace stereokit::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("stereokit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline Image random_image(int h, int w, int c, UniformSource& rng) {
  Image img(h, w, c);
  for (auto& v : img.data()) v = rng.unit();
  return img;
}

inline FloatMap random_map(int h, int w, UniformSource& rng, double lo, double hi) {
  FloatMap m(h, w);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline FeatureMap random_features(int h, int w, int c, UniformSource& rng, double lo = -1.0,
                                  double hi = 1.0) {
  FeatureMap f(h, w, c);
  for (auto& v : f.data()) v = rng.uniform(lo, hi);
  return f;
}

inline DisparityVolume random_logits(int planes, int h, int w, UniformSource& rng, double amp = 3.0) {
  DisparityVolume v(planes, h, w, VolumeKind::logits);
  for (auto& x : v.data()) x = rng.uniform(-amp, amp);
  return v;
}

inline DisparityVolume one_hot(int planes, int h, int w, int hot) {
  DisparityVolume v(planes, h, w, VolumeKind::probabilities, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) v(hot, y, x) = 1.0;
  return v;
}

// Piecewise-constant colour blocks over an extended canvas plus a gentle
// ramp. The right view samples the same texture at x + shift, so
// I_R(x) = I_L(x + shift) and both true disparities equal `shift`.
struct SyntheticRig {
  StereoSample sample;
  FloatMap true_left;
  FloatMap true_right;
};

inline double rig_texture(int x, int y, int k, std::uint64_t seed) {
  // 6-pixel-wide column blocks, 5-row bands, each a seeded colour.
  const int bx = x / 6, by = y / 5;
  UniformSource cell(seed * 1000003ULL + static_cast<std::uint64_t>(bx) * 7919ULL +
                     static_cast<std::uint64_t>(by) * 104729ULL + static_cast<std::uint64_t>(k));
  return 0.15 + 0.7 * cell.unit() + 0.002 * x;
}

inline SyntheticRig make_rig(int h, int w, int shift, double noise, std::uint64_t seed,
                             bool quantize8 = false) {
  auto q = [&](double v) { return quantize8 ? std::round(v * 255.0) / 255.0 : v; };
  SyntheticRig rig;
  rig.sample.img_left = Image(h, w, 3);
  rig.sample.img_right = Image(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) {
        rig.sample.img_left(y, x, k) = q(rig_texture(x, y, k, seed));
        rig.sample.img_right(y, x, k) = q(rig_texture(x + shift, y, k, seed));
      }
  rig.true_left = FloatMap(h, w, 1, static_cast<double>(shift));
  rig.true_right = FloatMap(h, w, 1, static_cast<double>(shift));
  UniformSource rng(seed ^ 0x9e3779b97f4a7c15ULL);
  rig.sample.disp_left = FloatMap(h, w);
  rig.sample.disp_right = FloatMap(h, w);
  for (auto& v : rig.sample.disp_left.data()) v = shift + rng.uniform(-noise, noise);
  for (auto& v : rig.sample.disp_right.data()) v = shift + rng.uniform(-noise, noise);
  return rig;
}

// Parameters of the bundled fixture under tests/data/fixture.
struct FixtureSample {
  int height;
  int width;
  int shift;
  double noise;
  std::uint64_t seed;
};
inline constexpr FixtureSample kFixtureSamples[2] = {{32, 64, 5, 1.5, 2024}, {32, 64, 8, 1.5, 2025}};

// Writes a rig's images as 8-bit PNGs and its disparities as PFMs under dir
// (images should come from make_rig(..., quantize8 = true) to round-trip).
inline ManifestEntry write_sample(const StereoSample& s, const fs::path& dir, const std::string& name) {
  auto png = [&](const Image& img, const fs::path& path) {
    std::vector<std::uint8_t> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
      bytes[i] = static_cast<std::uint8_t>(std::lround(img[i] * 255.0));
    store_png_rgb8(bytes, img.height(), img.width(), path);
  };
  ManifestEntry e{dir / (name + "_left.png"), dir / (name + "_right.png"),
                  dir / (name + "_left_disp.pfm"), dir / (name + "_right_disp.pfm")};
  png(s.img_left, e.left_img);
  png(s.img_right, e.right_img);
  store_floatmap(s.disp_left, e.left_disp);
  store_floatmap(s.disp_right, e.right_disp);
  return e;
}

inline double mean_abs_deviation(const FloatMap& a, const FloatMap& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace stereokit::testing
