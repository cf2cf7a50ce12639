#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "stereokit/grid.hpp"

namespace stereokit {

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t n_valid = 0;
};

struct EvalOptions {
  double cap = 80.0;  // meters
  bool median_scale = false;
  double min_depth = 1e-3;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Depth metrics over pixels with 0 < gt <= cap. With median scaling, pred is
// multiplied by median(gt) / median(pred) over that set; pred is then clamped
// to [min_depth, cap].
inline MetricReport eval_depth(const FloatMap& pred, const FloatMap& gt,
                               const EvalOptions& opts = {}) {
  require_same_extent(pred, gt, "eval_depth");
  std::vector<double> p, g;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i] > 0.0 && gt[i] <= opts.cap) {
      p.push_back(pred[i]);
      g.push_back(gt[i]);
    }
  if (g.empty()) throw Error("eval_depth: no valid ground-truth pixels");

  if (opts.median_scale) {
    const double mp = detail::median(p);
    if (!(mp > 0.0)) throw Error("eval_depth: median prediction must be > 0 for median scaling");
    const double ratio = detail::median(g) / mp;
    for (auto& v : p) v *= ratio;
  }
  for (auto& v : p) v = std::clamp(v, opts.min_depth, opts.cap);

  MetricReport r;
  r.n_valid = g.size();
  double d1 = 0, d2 = 0, d3 = 0, sq = 0, sq_log = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double diff = p[i] - g[i];
    r.abs_rel += std::abs(diff) / g[i];
    r.sq_rel += diff * diff / g[i];
    sq += diff * diff;
    const double dl = std::log(p[i]) - std::log(g[i]);
    sq_log += dl * dl;
    const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double n = static_cast<double>(g.size());
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(sq / n);
  r.rmse_log = std::sqrt(sq_log / n);
  r.delta1 = d1 / n;
  r.delta2 = d2 / n;
  r.delta3 = d3 / n;
  return r;
}

// depth = focal * baseline / disp; non-positive disparities map to 0.
inline FloatMap disparity_to_depth(const FloatMap& disp, double focal, double baseline) {
  FloatMap out(disp.height(), disp.width());
  for (std::size_t i = 0; i < disp.size(); ++i)
    out[i] = disp[i] > 0.0 ? focal * baseline / disp[i] : 0.0;
  return out;
}

// Same reciprocal law in the other direction.
inline FloatMap depth_to_disparity(const FloatMap& depth, double focal, double baseline) {
  return disparity_to_depth(depth, focal, baseline);
}

}  // namespace stereokit
