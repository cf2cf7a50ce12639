#pragma once

// Dense raster types shared by every module. Pixels are stored row-major with
// channels interleaved: index = (y * width + x) * channels + c.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stereokit/error.hpp"

namespace stereokit {

template <typename T, typename Tag>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1)
      throw Error("grid dimensions must be non-negative with at least one channel");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  Grid(int height, int width, int channels, std::vector<T> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 0 || width < 0 || channels < 1)
      throw Error("grid dimensions must be non-negative with at least one channel");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
      throw ShapeError("grid data length " + std::to_string(data_.size()) +
                       " does not match shape " + std::to_string(height) + "x" +
                       std::to_string(width) + "x" + std::to_string(channels));
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  bool contains(int y, int x) const noexcept {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }

  template <typename U, typename OtherTag>
  bool same_extent(const Grid<U, OtherTag>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

struct ImageTag {};
struct FloatMapTag {};
struct BitMaskTag {};
struct FeatureTag {};

// Photometric image, 1 or 3 channels, values in [0,1].
using Image = Grid<double, ImageTag>;
// Single-channel real-valued map (disparity, depth, confidence).
using FloatMap = Grid<double, FloatMapTag>;
// Single-channel {0,1} mask.
using BitMask = Grid<std::uint8_t, BitMaskTag>;
// Multi-channel feature tensor, channels interleaved per pixel.
using FeatureMap = Grid<double, FeatureTag>;

template <typename A, typename B>
void require_same_extent(const A& a, const B& b, const char* what) {
  if (!a.same_extent(b))
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) +
                     "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                     "x" + std::to_string(b.width()) + ")");
}

template <typename G>
void require_finite(const G& g, const char* what) {
  for (auto v : g.data())
    if (!std::isfinite(static_cast<double>(v)))
      throw Error(std::string(what) + ": non-finite value");
}

// Builds an Image, rejecting non-finite values and clamping the rest to [0,1].
inline Image make_image(int height, int width, int channels, std::vector<double> data) {
  if (channels != 1 && channels != 3) throw Error("image must have 1 or 3 channels");
  Image img(height, width, channels, std::move(data));
  require_finite(img, "image");
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline FloatMap make_floatmap(int height, int width, std::vector<double> data) {
  FloatMap map(height, width, 1, std::move(data));
  require_finite(map, "float map");
  return map;
}

inline BitMask make_bitmask(int height, int width, std::vector<std::uint8_t> data) {
  BitMask mask(height, width, 1, std::move(data));
  for (auto v : mask.data())
    if (v > 1) throw Error("bit mask values must be 0 or 1");
  return mask;
}

inline FloatMap to_floatmap(const BitMask& mask) {
  FloatMap out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i];
  return out;
}

inline BitMask to_bitmask(const FloatMap& map) {
  BitMask out(map.height(), map.width());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] != 0.0 && map[i] != 1.0) throw Error("mask map values must be exactly 0 or 1");
    out[i] = map[i] == 1.0 ? 1 : 0;
  }
  return out;
}

// Per-pixel channel mean as a single-channel map.
inline FloatMap channel_mean(const Image& img) {
  FloatMap out(img.height(), img.width());
  const int c = img.channels();
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += img[p * c + k];
    out[p] = s / c;
  }
  return out;
}

template <typename T, typename Tag>
Grid<T, Tag> flip_horizontal(const Grid<T, Tag>& g) {
  Grid<T, Tag> out(g.height(), g.width(), g.channels());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < g.channels(); ++c) out(y, x, c) = g(y, g.width() - 1 - x, c);
  return out;
}

inline double max_value(const FloatMap& map) {
  if (map.empty()) throw Error("max of empty map");
  return *std::max_element(map.data().begin(), map.data().end());
}

}  // namespace stereokit
