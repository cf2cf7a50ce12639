#pragma once

// Neural positional encoding: a two-layer ELU MLP evaluated on absolute pixel
// coordinates of a patch inside its original image.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "stereokit/grid.hpp"
#include "stereokit/imgio.hpp"
#include "stereokit/random.hpp"

namespace stereokit {

inline double elu(double z) { return z >= 0.0 ? z : std::expm1(z); }
inline double elu_grad(double z) { return z >= 0.0 ? 1.0 : std::exp(z); }

// F(p) = elu(w2 elu(w1 p + b1) + b2); w1 is hidden x 2, w2 is out x hidden,
// both row-major.
struct NpeParams {
  int hidden = 16;
  int out = 16;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  static std::size_t count(int hidden, int out) {
    return static_cast<std::size_t>(hidden) * 2 + hidden + static_cast<std::size_t>(out) * hidden +
           out;
  }
  std::size_t count() const { return count(hidden, out); }

  void validate() const {
    if (hidden < 1 || out < 1) throw Error("npe: hidden and out must be >= 1");
    if (w1.size() != static_cast<std::size_t>(hidden) * 2 || b1.size() != static_cast<std::size_t>(hidden) ||
        w2.size() != static_cast<std::size_t>(out) * hidden || b2.size() != static_cast<std::size_t>(out))
      throw ShapeError("npe: parameter dimensions inconsistent with hidden/out");
    for (const auto* v : {&w1, &b1, &w2, &b2})
      for (double x : *v)
        if (!std::isfinite(x)) throw Error("npe: non-finite parameter");
  }

  // Flat order: w1, b1, w2, b2.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for (const auto* v : {&w1, &b1, &w2, &b2}) flat.insert(flat.end(), v->begin(), v->end());
    return flat;
  }

  static NpeParams unflatten(int hidden, int out, std::span<const double> flat) {
    if (hidden < 1 || out < 1) throw Error("npe: hidden and out must be >= 1");
    if (flat.size() != count(hidden, out))
      throw ShapeError("npe: flat parameter vector has " + std::to_string(flat.size()) +
                       " entries, expected " + std::to_string(count(hidden, out)));
    NpeParams p{hidden, out, {}, {}, {}, {}};
    auto it = flat.begin();
    auto take = [&](std::vector<double>& dst, std::size_t n) {
      dst.assign(it, it + static_cast<std::ptrdiff_t>(n));
      it += static_cast<std::ptrdiff_t>(n);
    };
    take(p.w1, static_cast<std::size_t>(hidden) * 2);
    take(p.b1, hidden);
    take(p.w2, static_cast<std::size_t>(out) * hidden);
    take(p.b2, out);
    return p;
  }

  static NpeParams zeros(int hidden, int out) {
    return unflatten(hidden, out, std::vector<double>(count(hidden, out), 0.0));
  }

  // Seeded uniform draw in [lo, hi].
  static NpeParams random(int hidden, int out, std::uint64_t seed, double lo = -0.5,
                          double hi = 0.5) {
    UniformSource rng(seed);
    std::vector<double> flat(count(hidden, out));
    for (auto& v : flat) v = rng.uniform(lo, hi);
    return unflatten(hidden, out, flat);
  }
};

struct PatchOrigin {
  int x0 = 0;
  int y0 = 0;
  int patch_h = 0;
  int patch_w = 0;
  int full_h = 0;
  int full_w = 0;

  void validate() const {
    if (patch_h < 1 || patch_w < 1 || full_h < 1 || full_w < 1)
      throw Error("npe: patch and image sizes must be >= 1");
    if (x0 < 0 || y0 < 0 || x0 + patch_w > full_w || y0 + patch_h > full_h)
      throw Error("npe: patch does not lie inside the original image");
  }
};

// Maps pixel index 0..full-1 onto [-1, 1].
inline double normalize_coordinate(int index, int full) {
  return full > 1 ? 2.0 * index / (full - 1) - 1.0 : 0.0;
}

namespace detail {

struct NpeActivations {
  std::vector<double> z1, h, z2, f;
};

inline NpeActivations npe_eval(const NpeParams& p, double px, double py) {
  NpeActivations a;
  a.z1.resize(p.hidden);
  a.h.resize(p.hidden);
  for (int j = 0; j < p.hidden; ++j) {
    a.z1[j] = p.w1[2 * j] * px + p.w1[2 * j + 1] * py + p.b1[j];
    a.h[j] = elu(a.z1[j]);
  }
  a.z2.resize(p.out);
  a.f.resize(p.out);
  for (int o = 0; o < p.out; ++o) {
    double s = p.b2[o];
    for (int j = 0; j < p.hidden; ++j) s += p.w2[static_cast<std::size_t>(o) * p.hidden + j] * a.h[j];
    a.z2[o] = s;
    a.f[o] = elu(s);
  }
  return a;
}

}  // namespace detail

inline std::vector<double> npe_at(const NpeParams& params, double px, double py) {
  return detail::npe_eval(params, px, py).f;
}

// Feature map of size patch_h x patch_w x out; pixel (i, j) of the patch is
// encoded from its absolute position (x0 + j, y0 + i) in the original image.
inline FeatureMap npe_forward(const NpeParams& params, const PatchOrigin& origin) {
  params.validate();
  origin.validate();
  FeatureMap out(origin.patch_h, origin.patch_w, params.out);
  for (int i = 0; i < origin.patch_h; ++i) {
    const double py = normalize_coordinate(origin.y0 + i, origin.full_h);
    for (int j = 0; j < origin.patch_w; ++j) {
      const double px = normalize_coordinate(origin.x0 + j, origin.full_w);
      const auto f = npe_at(params, px, py);
      for (int o = 0; o < params.out; ++o) out(i, j, o) = f[o];
    }
  }
  return out;
}

// dF_o / d(theta) at one coordinate, as an out x count() row-major matrix with
// columns in flatten() order.
inline std::vector<double> npe_param_jacobian(const NpeParams& p, double px, double py) {
  const auto a = detail::npe_eval(p, px, py);
  const std::size_t n = p.count();
  const std::size_t off_b1 = static_cast<std::size_t>(p.hidden) * 2;
  const std::size_t off_w2 = off_b1 + p.hidden;
  const std::size_t off_b2 = off_w2 + static_cast<std::size_t>(p.out) * p.hidden;
  std::vector<double> jac(static_cast<std::size_t>(p.out) * n, 0.0);
  for (int o = 0; o < p.out; ++o) {
    double* row = jac.data() + static_cast<std::size_t>(o) * n;
    const double g2 = elu_grad(a.z2[o]);
    row[off_b2 + o] = g2;
    for (int j = 0; j < p.hidden; ++j) {
      const double w2 = p.w2[static_cast<std::size_t>(o) * p.hidden + j];
      row[off_w2 + static_cast<std::size_t>(o) * p.hidden + j] = g2 * a.h[j];
      const double g1 = g2 * w2 * elu_grad(a.z1[j]);
      row[off_b1 + j] = g1;
      row[2 * j] = g1 * px;
      row[2 * j + 1] = g1 * py;
    }
  }
  return jac;
}

struct JacobianReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int probes = 0;
  std::size_t entries = 0;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Compares the analytic parameter Jacobian with central differences at
// `probe_count` random pixels of the patch. Relative error per entry is
// |a - n| / max(|a|, |n|, 1).
inline JacobianReport npe_jacobian_check(const NpeParams& params, const PatchOrigin& origin,
                                         int probe_count, std::uint64_t seed = 1,
                                         double step = kFiniteDifferenceStep) {
  params.validate();
  origin.validate();
  if (probe_count < 1) throw Error("npe_jacobian_check: probe_count must be >= 1");
  UniformSource rng(seed);
  JacobianReport report;
  report.probes = probe_count;
  const std::vector<double> base = params.flatten();
  const std::size_t n = base.size();
  for (int probe = 0; probe < probe_count; ++probe) {
    const int i = std::min(origin.patch_h - 1, static_cast<int>(rng.unit() * origin.patch_h));
    const int j = std::min(origin.patch_w - 1, static_cast<int>(rng.unit() * origin.patch_w));
    const double py = normalize_coordinate(origin.y0 + i, origin.full_h);
    const double px = normalize_coordinate(origin.x0 + j, origin.full_w);
    const auto analytic = npe_param_jacobian(params, px, py);
    std::vector<double> theta = base;
    for (std::size_t k = 0; k < n; ++k) {
      theta[k] = base[k] + step;
      const auto plus = npe_at(NpeParams::unflatten(params.hidden, params.out, theta), px, py);
      theta[k] = base[k] - step;
      const auto minus = npe_at(NpeParams::unflatten(params.hidden, params.out, theta), px, py);
      theta[k] = base[k];
      for (int o = 0; o < params.out; ++o) {
        const double numeric = (plus[o] - minus[o]) / (2.0 * step);
        const double a = analytic[static_cast<std::size_t>(o) * n + k];
        const double err = std::abs(a - numeric);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
        report.max_abs_error = std::max(report.max_abs_error, err);
        report.max_rel_error = std::max(report.max_rel_error, err / denom);
        ++report.entries;
      }
    }
  }
  return report;
}

// Parameters travel as <stem>.pfm (1 x count() float map in flatten() order)
// plus <stem>.txt holding "hidden out".
inline void store_npe_params(const NpeParams& params, const std::filesystem::path& stem) {
  params.validate();
  const auto flat = params.flatten();
  store_floatmap(FloatMap(1, static_cast<int>(flat.size()), 1, flat),
                 std::filesystem::path(stem).concat(".pfm"));
  const std::string header = std::to_string(params.hidden) + " " + std::to_string(params.out) + "\n";
  write_file_atomic(std::filesystem::path(stem).concat(".txt"),
                    std::span<const char>(header.data(), header.size()));
}

inline NpeParams load_npe_params(const std::filesystem::path& stem) {
  std::ifstream in(std::filesystem::path(stem).concat(".txt"));
  int hidden = 0, out = 0;
  if (!in || !(in >> hidden >> out))
    throw IoError("cannot read NPE header " + stem.string() + ".txt");
  const FloatMap flat = load_floatmap(std::filesystem::path(stem).concat(".pfm"));
  if (flat.height() != 1) throw IoError("NPE parameter PFM must be a single row");
  NpeParams p = NpeParams::unflatten(hidden, out, flat.data());
  p.validate();
  return p;
}

}  // namespace stereokit
