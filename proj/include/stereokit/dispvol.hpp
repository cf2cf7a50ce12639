#pragma once

// Disparity probability volumes: exponential plane quantization, channel
// softmax, horizontal backward warping, right-view projection, view
// synthesis and expected-disparity extraction.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "stereokit/grid.hpp"
#include "stereokit/imgio.hpp"

namespace stereokit {

// Plane disparities d_n = d_max * exp(ln(d_max/d_min) * (n/N - 1)), n = 0..N.
struct QuantSchedule {
  double d_min = 2.0;
  double d_max = 300.0;
  std::vector<double> d;

  int n_planes() const noexcept { return static_cast<int>(d.size()); }
  // Index of the last plane, N.
  int last() const noexcept { return n_planes() - 1; }
};

inline QuantSchedule make_schedule(double d_min, double d_max, int n) {
  if (!(d_min > 0.0) || !(d_min < d_max) || !std::isfinite(d_max))
    throw Error("make_schedule: requires 0 < d_min < d_max");
  if (n < 1) throw Error("make_schedule: requires N >= 1");
  QuantSchedule s{d_min, d_max, std::vector<double>(static_cast<std::size_t>(n) + 1)};
  const double log_ratio = std::log(d_max / d_min);
  for (int i = 0; i <= n; ++i)
    s.d[i] = d_max * std::exp(log_ratio * (static_cast<double>(i) / n - 1.0));
  s.d[n] = d_max;
  return s;
}

enum class VolumeKind { logits, probabilities };

// Plane-major volume: value(n, y, x) = data[(n * height + y) * width + x].
class DisparityVolume {
 public:
  DisparityVolume() = default;
  DisparityVolume(int n_planes, int height, int width, VolumeKind kind, double fill = 0.0)
      : n_planes_(n_planes), height_(height), width_(width), kind_(kind) {
    if (n_planes < 1 || height < 0 || width < 0) throw Error("invalid volume dimensions");
    data_.assign(static_cast<std::size_t>(n_planes) * height * width, fill);
  }

  int n_planes() const noexcept { return n_planes_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  VolumeKind kind() const noexcept { return kind_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  double& operator()(int n, int y, int x) noexcept { return data_[offset(n, y, x)]; }
  double operator()(int n, int y, int x) const noexcept { return data_[offset(n, y, x)]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  FloatMap plane(int n) const {
    FloatMap out(height_, width_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(n * plane_size()), plane_size(),
                out.data().begin());
    return out;
  }

  void set_plane(int n, const FloatMap& map) {
    if (map.height() != height_ || map.width() != width_)
      throw ShapeError("set_plane: shape mismatch");
    std::copy(map.data().begin(), map.data().end(),
              data_.begin() + static_cast<std::ptrdiff_t>(n * plane_size()));
  }

  template <typename G>
  bool same_extent(const G& g) const noexcept {
    return height_ == g.height() && width_ == g.width();
  }

 private:
  std::size_t offset(int n, int y, int x) const noexcept {
    return (static_cast<std::size_t>(n) * height_ + y) * width_ + x;
  }

  int n_planes_ = 0;
  int height_ = 0;
  int width_ = 0;
  VolumeKind kind_ = VolumeKind::logits;
  std::vector<double> data_;
};

// Channel-wise softmax per pixel, max-subtracted.
inline DisparityVolume softmax_volume(const DisparityVolume& logits) {
  if (logits.kind() != VolumeKind::logits) throw Error("softmax_volume: expected logits");
  DisparityVolume out(logits.n_planes(), logits.height(), logits.width(),
                      VolumeKind::probabilities);
  const int planes = logits.n_planes();
  for (int y = 0; y < logits.height(); ++y)
    for (int x = 0; x < logits.width(); ++x) {
      double peak = logits(0, y, x);
      for (int n = 1; n < planes; ++n) peak = std::max(peak, logits(n, y, x));
      double sum = 0.0;
      for (int n = 0; n < planes; ++n) {
        const double e = std::exp(logits(n, y, x) - peak);
        out(n, y, x) = e;
        sum += e;
      }
      for (int n = 0; n < planes; ++n) out(n, y, x) /= sum;
    }
  return out;
}

// Direction of the content shift. `left` samples src at x + d (builds the
// right view from the left one); `right` samples at x - d.
enum class Shift { left, right };

template <typename G>
struct WarpResult {
  G image;
  BitMask valid;
};

namespace detail {

// Linear interpolation along row y at fractional column xs. Returns false
// (and writes zeros) when xs lies outside [0, width-1].
template <typename G>
bool sample_row(const G& src, int y, double xs, double* out) {
  const int c = src.channels();
  if (!(xs >= 0.0) || xs > src.width() - 1) {
    for (int k = 0; k < c; ++k) out[k] = 0.0;
    return false;
  }
  const int x0 = static_cast<int>(std::floor(xs));
  const double f = xs - x0;
  if (x0 >= src.width() - 1 || f == 0.0) {
    for (int k = 0; k < c; ++k) out[k] = src(y, x0, k);
    return true;
  }
  for (int k = 0; k < c; ++k) out[k] = src(y, x0, k) * (1.0 - f) + src(y, x0 + 1, k) * f;
  return true;
}

inline double shift_sign(Shift s) { return s == Shift::left ? 1.0 : -1.0; }

template <typename G>
WarpResult<G> warp_constant(const G& src, double disp, Shift shift) {
  WarpResult<G> r{G(src.height(), src.width(), src.channels()),
                  BitMask(src.height(), src.width())};
  const double sign = shift_sign(shift);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      r.valid(y, x) = sample_row(src, y, x + sign * disp, &r.image(y, x)) ? 1 : 0;
  return r;
}

}  // namespace detail

// Backward warp along rows: out(x, y) = src(x -/+ disp(x, y), y) with linear
// interpolation. Samples outside the frame are 0 and flagged invalid.
template <typename G>
WarpResult<G> warp_horizontal(const G& src, const FloatMap& disp, Shift shift) {
  require_same_extent(src, disp, "warp_horizontal");
  WarpResult<G> r{G(src.height(), src.width(), src.channels()),
                  BitMask(src.height(), src.width())};
  const double sign = detail::shift_sign(shift);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      r.valid(y, x) = detail::sample_row(src, y, x + sign * disp(y, x), &r.image(y, x)) ? 1 : 0;
  return r;
}

// Shifts logit plane n left by d_n (out-of-frame logits become 0) and
// softmaxes across planes. Every plane takes part in the normalization,
// including ones whose sample fell outside the frame.
inline DisparityVolume project_logits_to_right(const DisparityVolume& logits,
                                               const QuantSchedule& sched) {
  if (logits.kind() != VolumeKind::logits)
    throw Error("project_logits_to_right: expected logits");
  if (logits.n_planes() != sched.n_planes())
    throw Error("project_logits_to_right: volume has " + std::to_string(logits.n_planes()) +
                " planes, schedule has " + std::to_string(sched.n_planes()));
  DisparityVolume shifted(logits.n_planes(), logits.height(), logits.width(),
                          VolumeKind::logits);
  for (int n = 0; n < logits.n_planes(); ++n)
    shifted.set_plane(n, detail::warp_constant(logits.plane(n), sched.d[n], Shift::left).image);
  return softmax_volume(shifted);
}

// I'_R = sum_n shift_left(I_L, d_n) * P_n, clamped to [0,1].
inline Image synthesize_right(const Image& img_left, const DisparityVolume& probs_right,
                              const QuantSchedule& sched) {
  if (probs_right.kind() != VolumeKind::probabilities)
    throw Error("synthesize_right: expected probabilities");
  if (!probs_right.same_extent(img_left)) throw ShapeError("synthesize_right: shape mismatch");
  if (probs_right.n_planes() != sched.n_planes())
    throw Error("synthesize_right: plane count does not match schedule");
  const int c = img_left.channels();
  Image out(img_left.height(), img_left.width(), c);
  for (int n = 0; n < sched.n_planes(); ++n) {
    const Image shifted = detail::warp_constant(img_left, sched.d[n], Shift::left).image;
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) {
        const double p = probs_right(n, y, x);
        for (int k = 0; k < c; ++k) out(y, x, k) += shifted(y, x, k) * p;
      }
  }
  for (auto& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// Per-pixel expected disparity sum_n d_n * P_n.
inline FloatMap extract_disparity(const DisparityVolume& probs_left, const QuantSchedule& sched) {
  if (probs_left.kind() != VolumeKind::probabilities)
    throw Error("extract_disparity: expected probabilities");
  if (probs_left.n_planes() != sched.n_planes())
    throw Error("extract_disparity: plane count does not match schedule");
  FloatMap out(probs_left.height(), probs_left.width());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      double e = 0.0;
      for (int n = 0; n < sched.n_planes(); ++n) e += sched.d[n] * probs_left(n, y, x);
      out(y, x) = std::clamp(e, sched.d_min, sched.d_max);
    }
  return out;
}

// Flip-and-fuse: mean of the plain prediction and the re-flipped prediction
// of the flipped input.
inline FloatMap postprocess_flip(const FloatMap& disp_plain, const FloatMap& disp_from_flipped) {
  require_same_extent(disp_plain, disp_from_flipped, "postprocess_flip");
  FloatMap out(disp_plain.height(), disp_plain.width());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * (disp_plain[i] + disp_from_flipped[i]);
  return out;
}

// Volumes are exchanged as one single-channel PFM per plane named
// <prefix>_000.pfm, <prefix>_001.pfm, ...
inline std::filesystem::path volume_plane_path(const std::filesystem::path& prefix, int n) {
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "_%03d.pfm", n);
  std::filesystem::path p = prefix;
  p += suffix;
  return p;
}

inline void store_volume(const DisparityVolume& vol, const std::filesystem::path& prefix) {
  for (int n = 0; n < vol.n_planes(); ++n) store_floatmap(vol.plane(n), volume_plane_path(prefix, n));
}

inline DisparityVolume load_volume(const std::filesystem::path& prefix, VolumeKind kind) {
  std::vector<FloatMap> planes;
  while (std::filesystem::exists(volume_plane_path(prefix, static_cast<int>(planes.size()))))
    planes.push_back(load_floatmap(volume_plane_path(prefix, static_cast<int>(planes.size()))));
  if (planes.empty()) throw IoError("no volume planes found at " + prefix.string() + "_000.pfm");
  DisparityVolume vol(static_cast<int>(planes.size()), planes[0].height(), planes[0].width(), kind);
  for (int n = 0; n < vol.n_planes(); ++n) vol.set_plane(n, planes[n]);
  if (kind == VolumeKind::probabilities) {
    for (int y = 0; y < vol.height(); ++y)
      for (int x = 0; x < vol.width(); ++x) {
        double s = 0.0;
        for (int n = 0; n < vol.n_planes(); ++n) {
          if (vol(n, y, x) < 0.0) throw Error("probability volume has negative entries");
          s += vol(n, y, x);
        }
        if (std::abs(s - 1.0) > 1e-5) throw Error("probability volume does not sum to 1");
      }
  }
  return vol;
}

}  // namespace stereokit
