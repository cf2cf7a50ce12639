#pragma once

// Self-supervision loss terms and their stage-wise combinations. Every term
// is a pure reduction; sums run in row-major order.

#include <cmath>
#include <cstdint>
#include <vector>

#include "stereokit/grid.hpp"
#include "stereokit/random.hpp"

namespace stereokit {

struct LossWeights {
  double alpha_p = 0.01;
  double alpha_ds = 0.0004;
  double alpha_dm = 0.25;
  double alpha_dc = 0.01;

  void validate() const {
    if (alpha_p < 0 || alpha_ds < 0 || alpha_dm < 0 || alpha_dc < 0)
      throw Error("loss weights must be >= 0");
  }
};

// Masked mean absolute error over valid pixels and all channels; 0 when no
// pixel is valid.
inline double loss_l1(const Image& pred, const Image& target, const BitMask& valid) {
  require_same_extent(pred, target, "loss_l1");
  require_same_extent(pred, valid, "loss_l1 mask");
  if (pred.channels() != target.channels()) throw ShapeError("loss_l1: channel mismatch");
  const int c = pred.channels();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < pred.pixels(); ++p) {
    if (!valid[p]) continue;
    for (int k = 0; k < c; ++k) sum += std::abs(pred[p * c + k] - target[p * c + k]);
    count += c;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

inline double loss_l1(const Image& pred, const Image& target) {
  return loss_l1(pred, target, BitMask(pred.height(), pred.width(), 1, 1));
}

namespace detail {

template <typename G>
double mean_abs_diff(const G& a, const G& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return a.size() ? sum / static_cast<double>(a.size()) : 0.0;
}

}  // namespace detail

// Mean over feature levels of the per-level mean absolute difference.
inline double loss_perceptual(const std::vector<FeatureMap>& pred_feats,
                              const std::vector<FeatureMap>& target_feats) {
  if (pred_feats.size() != target_feats.size())
    throw ShapeError("loss_perceptual: level count mismatch");
  if (pred_feats.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 0; l < pred_feats.size(); ++l) {
    require_same_extent(pred_feats[l], target_feats[l], "loss_perceptual");
    if (pred_feats[l].channels() != target_feats[l].channels())
      throw ShapeError("loss_perceptual: channel mismatch at level " + std::to_string(l));
    sum += detail::mean_abs_diff(pred_feats[l], target_feats[l]);
  }
  return sum / static_cast<double>(pred_feats.size());
}

// Edge-aware first-order smoothness on the mean-normalized disparity:
//   mean_x(|dx d^| e^-|dx I|) + mean_y(|dy d^| e^-|dy I|)
// with |dI| averaged over channels.
inline double loss_smoothness(const FloatMap& disp, const Image& guide) {
  require_same_extent(disp, guide, "loss_smoothness");
  if (disp.empty()) return 0.0;
  double mean = 0.0;
  for (double v : disp.data()) mean += v;
  mean /= static_cast<double>(disp.size());
  const double scale = mean != 0.0 ? 1.0 / mean : 1.0;
  const int c = guide.channels();
  auto edge = [&](int y0, int x0, int y1, int x1) {
    double g = 0.0;
    for (int k = 0; k < c; ++k) g += std::abs(guide(y1, x1, k) - guide(y0, x0, k));
    return std::exp(-g / c);
  };

  double sx = 0.0, sy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (int y = 0; y < disp.height(); ++y)
    for (int x = 0; x + 1 < disp.width(); ++x, ++nx)
      sx += std::abs(disp(y, x + 1) - disp(y, x)) * scale * edge(y, x, y, x + 1);
  for (int y = 0; y + 1 < disp.height(); ++y)
    for (int x = 0; x < disp.width(); ++x, ++ny)
      sy += std::abs(disp(y + 1, x) - disp(y, x)) * scale * edge(y, x, y + 1, x);
  return (nx ? sx / static_cast<double>(nx) : 0.0) + (ny ? sy / static_cast<double>(ny) : 0.0);
}

inline constexpr double kAutocorrGuard = 1e-8;

// Cosine auto-correlation over a k x k neighbourhood. Output channel
// (dy + r) * k + (dx + r) holds <f(p), f(p+o)> / (|f(p)| |f(p+o)| + 1e-8);
// offsets leaving the frame give 0.
inline FeatureMap autocorr(const FeatureMap& feats, int k) {
  if (k < 1 || k % 2 == 0) throw Error("autocorr: window size must be odd and >= 1");
  const int r = k / 2;
  const int c = feats.channels();
  const int h = feats.height();
  const int w = feats.width();
  std::vector<double> norms(feats.pixels());
  for (std::size_t p = 0; p < feats.pixels(); ++p) {
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch) s += feats[p * c + ch] * feats[p * c + ch];
    norms[p] = std::sqrt(s);
  }
  FeatureMap out(h, w, k * k);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int qy = y + dy, qx = x + dx;
          if (qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
          const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
          double d = 0.0;
          for (int ch = 0; ch < c; ++ch) d += feats[p * c + ch] * feats[q * c + ch];
          out(y, x, (dy + r) * k + (dx + r)) = d / (norms[p] * norms[q] + kAutocorrGuard);
        }
    }
  return out;
}

// Mean absolute difference between the auto-correlations of the disparity
// features and the image features.
inline double loss_deep_corr(const FeatureMap& feats_disp, const FeatureMap& feats_img, int k = 3) {
  require_same_extent(feats_disp, feats_img, "loss_deep_corr");
  return detail::mean_abs_diff(autocorr(feats_disp, k), autocorr(feats_img, k));
}

// mean(mask * |disp - matted|) / max(disp)
inline double loss_distilled_matting(const FloatMap& disp, const FloatMap& matted,
                                     const BitMask& mask) {
  require_same_extent(disp, matted, "loss_distilled_matting");
  require_same_extent(disp, mask, "loss_distilled_matting mask");
  const double peak = max_value(disp);
  if (!(peak > 0.0)) throw Error("loss_distilled_matting: max disparity must be > 0");
  double sum = 0.0;
  for (std::size_t i = 0; i < disp.size(); ++i)
    if (mask[i]) sum += std::abs(disp[i] - matted[i]);
  return sum / static_cast<double>(disp.size()) / peak;
}

struct Stage1Parts {
  double l1 = 0.0;
  double lp = 0.0;
  double lds = 0.0;
};

struct Stage2Parts {
  double ls1 = 0.0;
  double lm = 0.0;  // mirror loss, computed elsewhere
  double ldm = 0.0;
  double ldc = 0.0;
};

inline double stage1_total(const Stage1Parts& p, const LossWeights& w = {}) {
  return p.l1 + w.alpha_p * p.lp + w.alpha_ds * p.lds;
}

inline double stage2_total(const Stage2Parts& p, const LossWeights& w = {}) {
  return p.ls1 + p.lm + w.alpha_dm * p.ldm + w.alpha_dc * p.ldc;
}

// Final objective of the second stage: mean of the left- and right-view totals.
inline double two_view_mean(double left, double right) { return 0.5 * (left + right); }

// ---------------------------------------------------------------------------
// Stand-in feature extractor: three seeded 3x3 convolutions, stride 2, ELU.
// It lets the pipeline run end to end without external network weights; real
// features are supplied as PFM stacks.

class RandomConvExtractor {
 public:
  struct Layer {
    int in_ch;
    int out_ch;
    std::vector<double> weights;  // [out][in][3][3]
    std::vector<double> bias;
  };

  explicit RandomConvExtractor(int in_channels, std::uint64_t seed = 0x5eed,
                               std::vector<int> widths = {8, 16, 16}) {
    UniformSource rng(seed);
    int in = in_channels;
    for (int out : widths) {
      Layer l{in, out, std::vector<double>(static_cast<std::size_t>(out) * in * 9),
              std::vector<double>(out)};
      const double bound = 1.0 / std::sqrt(9.0 * in);
      for (auto& v : l.weights) v = rng.uniform(-bound, bound);
      for (auto& v : l.bias) v = rng.uniform(-bound, bound);
      layers_.push_back(std::move(l));
      in = out;
    }
  }

  int in_channels() const { return layers_.front().in_ch; }

  // Returns the activation after every layer.
  std::vector<FeatureMap> extract(const FeatureMap& input) const {
    if (input.channels() != in_channels())
      throw ShapeError("feature extractor: expected " + std::to_string(in_channels()) +
                       " input channels");
    std::vector<FeatureMap> levels;
    levels.reserve(layers_.size());  // keeps `cur` valid across push_back
    const FeatureMap* cur = &input;
    for (const auto& l : layers_) {
      levels.push_back(apply(l, *cur));
      cur = &levels.back();
    }
    return levels;
  }

  template <typename G>
  std::vector<FeatureMap> extract_grid(const G& g) const {
    return extract(FeatureMap(g.height(), g.width(), g.channels(), g.values()));
  }

 private:
  static FeatureMap apply(const Layer& l, const FeatureMap& in) {
    const int h = (in.height() + 1) / 2;
    const int w = (in.width() + 1) / 2;
    FeatureMap out(h, w, l.out_ch);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int o = 0; o < l.out_ch; ++o) {
          double s = l.bias[o];
          for (int i = 0; i < l.in_ch; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int sy = 2 * y + ky - 1, sx = 2 * x + kx - 1;
                if (!in.contains(sy, sx)) continue;
                s += l.weights[((static_cast<std::size_t>(o) * l.in_ch + i) * 3 + ky) * 3 + kx] *
                     in(sy, sx, i);
              }
          out(y, x, o) = s >= 0.0 ? s : std::expm1(s);
        }
    return out;
  }

  std::vector<Layer> layers_;
};

}  // namespace stereokit
