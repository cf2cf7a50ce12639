#pragma once

// Closed-form matting Laplacian over (2r+1)x(2r+1) windows, its
// confidence-regularized solve by Jacobi-preconditioned conjugate gradient,
// and local window mean scaling of the solution.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "stereokit/grid.hpp"

namespace stereokit {

struct MattingParams {
  int window_radius = 1;
  double eps = 1e-7;
  double lambda = 100.0;
  double cg_tol = 1e-8;
  int cg_max_iter = 2000;

  void validate() const {
    if (window_radius < 1) throw Error("matting: window_radius must be >= 1");
    if (!(eps > 0.0)) throw Error("matting: eps must be > 0");
    if (!(lambda > 0.0)) throw Error("matting: lambda must be > 0");
    if (!(cg_tol > 0.0)) throw Error("matting: cg_tol must be > 0");
    if (cg_max_iter < 1) throw Error("matting: cg_max_iter must be >= 1");
  }
};

struct Triplet {
  int row;
  int col;
  double value;
};

// Symmetric sparse matrix in CSR form (columns sorted within each row) plus
// a right-hand side. Unknowns are pixels in row-major order.
struct SparseSystem {
  int height = 0;
  int width = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
  std::vector<double> rhs;

  int dim() const noexcept { return height * width; }

  // y = A x, rows accumulated left to right.
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < dim(); ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(dim());
    multiply(x, y);
    return y;
  }

  double at(int i, int j) const {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      if (col[k] == j) return val[k];
    return 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(dim());
    for (int i = 0; i < dim(); ++i) d[i] = at(i, i);
    return d;
  }

  std::vector<Triplet> entries() const {
    std::vector<Triplet> out;
    out.reserve(val.size());
    for (int i = 0; i < dim(); ++i)
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) out.push_back({i, col[k], val[k]});
    return out;
  }
};

namespace detail {

// Inverse of a symmetric positive definite 1x1 or 3x3 matrix (row-major).
inline std::array<double, 9> invert_small(const std::array<double, 9>& a, int n) {
  std::array<double, 9> inv{};
  if (n == 1) {
    inv[0] = 1.0 / a[0];
    return inv;
  }
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
  const double s = 1.0 / det;
  inv[0] = c00 * s;
  inv[1] = (a[2] * a[7] - a[1] * a[8]) * s;
  inv[2] = (a[1] * a[5] - a[2] * a[4]) * s;
  inv[3] = c01 * s;
  inv[4] = (a[0] * a[8] - a[2] * a[6]) * s;
  inv[5] = (a[2] * a[3] - a[0] * a[5]) * s;
  inv[6] = c02 * s;
  inv[7] = (a[1] * a[6] - a[0] * a[7]) * s;
  inv[8] = (a[0] * a[4] - a[1] * a[3]) * s;
  return inv;
}

}  // namespace detail

// For every window w_k fully inside the image, adds
//   delta_ij - (1/|w|) (1 + (I_i - mu_k)^T (Sigma_k + eps/|w| Id)^-1 (I_j - mu_k))
// to L_ij for all i, j in w_k. Windows are visited in row-major order of their
// centers, so assembly is deterministic. rhs is zero.
inline SparseSystem build_laplacian(const Image& guide, const MattingParams& params) {
  params.validate();
  const int r = params.window_radius;
  const int side = 2 * r + 1;
  const int c = guide.channels();
  if (c != 1 && c != 3) throw Error("build_laplacian: guide must have 1 or 3 channels");
  if (guide.height() < side || guide.width() < side)
    throw Error("build_laplacian: image smaller than the " + std::to_string(side) + "x" +
                std::to_string(side) + " window");

  const int h = guide.height();
  const int w = guide.width();
  const int m = side * side;
  // Each row couples to neighbours within 2r in both directions.
  const int reach = 2 * r;
  const int span = 2 * reach + 1;
  const std::size_t slots = static_cast<std::size_t>(span) * span;
  std::vector<double> dense(static_cast<std::size_t>(h) * w * slots, 0.0);
  auto slot = [&](int py, int px, int qy, int qx) -> double& {
    const std::size_t i = static_cast<std::size_t>(py) * w + px;
    return dense[i * slots + static_cast<std::size_t>(qy - py + reach) * span + (qx - px + reach)];
  };

  std::vector<std::array<double, 3>> centered(m);
  std::vector<std::array<double, 3>> projected(m);
  std::vector<std::array<int, 2>> coords(m);
  for (int cy = r; cy < h - r; ++cy)
    for (int cx = r; cx < w - r; ++cx) {
      std::array<double, 3> mean{};
      int t = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx, ++t) {
          coords[t] = {cy + dy, cx + dx};
          for (int k = 0; k < c; ++k) {
            centered[t][k] = guide(cy + dy, cx + dx, k);
            mean[k] += centered[t][k];
          }
        }
      for (int k = 0; k < c; ++k) mean[k] /= m;
      std::array<double, 9> cov{};
      for (int i = 0; i < m; ++i) {
        for (int k = 0; k < c; ++k) centered[i][k] -= mean[k];
        for (int a = 0; a < c; ++a)
          for (int b = 0; b < c; ++b) cov[a * c + b] += centered[i][a] * centered[i][b];
      }
      for (int a = 0; a < c; ++a) {
        for (int b = 0; b < c; ++b) cov[a * c + b] /= m;
        cov[a * c + a] += params.eps / m;
      }
      const auto inv = detail::invert_small(cov, c);
      for (int i = 0; i < m; ++i)
        for (int a = 0; a < c; ++a) {
          double s = 0.0;
          for (int b = 0; b < c; ++b) s += inv[a * c + b] * centered[i][b];
          projected[i][a] = s;
        }
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          double dot = 0.0;
          for (int k = 0; k < c; ++k) dot += projected[i][k] * centered[j][k];
          const double v = (i == j ? 1.0 : 0.0) - (1.0 + dot) / m;
          slot(coords[i][0], coords[i][1], coords[j][0], coords[j][1]) += v;
          if (i != j) slot(coords[j][0], coords[j][1], coords[i][0], coords[i][1]) += v;
        }
    }

  SparseSystem sys;
  sys.height = h;
  sys.width = w;
  sys.row_ptr.reserve(static_cast<std::size_t>(h) * w + 1);
  sys.row_ptr.push_back(0);
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      for (int qy = py - reach; qy <= py + reach; ++qy)
        for (int qx = px - reach; qx <= px + reach; ++qx) {
          if (qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
          sys.col.push_back(qy * w + qx);
          sys.val.push_back(slot(py, px, qy, qx));
        }
      sys.row_ptr.push_back(sys.col.size());
    }
  sys.rhs.assign(static_cast<std::size_t>(h) * w, 0.0);
  return sys;
}

// Returns L + lambda * diag(confidence) with rhs = lambda * confidence * target.
inline SparseSystem attach_targets(SparseSystem system, const FloatMap& target,
                                   const FloatMap& confidence, double lambda) {
  if (target.height() != system.height || target.width() != system.width)
    throw ShapeError("attach_targets: target shape does not match system");
  require_same_extent(target, confidence, "attach_targets");
  for (int i = 0; i < system.dim(); ++i) {
    const double conf = confidence[i];
    if (!(conf >= 0.0)) throw Error("attach_targets: confidence must be >= 0");
    for (std::size_t k = system.row_ptr[i]; k < system.row_ptr[i + 1]; ++k)
      if (system.col[k] == i) system.val[k] += lambda * conf;
    system.rhs[i] = lambda * conf * target[i];
  }
  return system;
}

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0.0;  // final ||b - Ax|| (recurrence)
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// Jacobi-preconditioned conjugate gradient on A x = b, stopping once
// ||r|| <= tol * ||b||. Inner products run in index order.
inline CgResult conjugate_gradient(const SparseSystem& a, std::span<const double> b,
                                   std::vector<double> x0, double tol, int max_iter) {
  const int n = a.dim();
  if (static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
    throw ShapeError("conjugate_gradient: vector length does not match system");
  CgResult res{std::move(x0), 0, 0.0};
  std::vector<double> inv_diag = a.diagonal();
  for (auto& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;

  const double b_norm = std::sqrt(detail::dot(b, b));
  if (b_norm == 0.0) {
    std::fill(res.x.begin(), res.x.end(), 0.0);
    return res;
  }
  const double threshold = tol * b_norm;

  std::vector<double> r(n), z(n), p(n), q(n);
  a.multiply(res.x, q);
  for (int i = 0; i < n; ++i) r[i] = b[i] - q[i];
  res.residual = std::sqrt(detail::dot(r, r));
  if (res.residual <= threshold) return res;

  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = detail::dot(r, z);
  while (res.iterations < max_iter) {
    ++res.iterations;
    a.multiply(p, q);
    const double pq = detail::dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    res.residual = std::sqrt(detail::dot(r, r));
    if (res.residual <= threshold) return res;
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("conjugate gradient did not converge: residual " +
                        std::to_string(res.residual) + " after " +
                        std::to_string(res.iterations) + " iterations (target " +
                        std::to_string(threshold) + ")",
                    res.residual, res.iterations);
}

// Solves (L + lambda diag(conf)) x = lambda diag(conf) target, starting from
// the target itself.
inline FloatMap solve_matted(const SparseSystem& laplacian, const FloatMap& target,
                             const FloatMap& confidence, const MattingParams& params) {
  params.validate();
  const SparseSystem sys = attach_targets(laplacian, target, confidence, params.lambda);
  CgResult res = conjugate_gradient(sys, sys.rhs, target.values(), params.cg_tol,
                                    params.cg_max_iter);
  return FloatMap(target.height(), target.width(), 1, std::move(res.x));
}

namespace detail {

// Mean over the (2r+1)^2 window around each pixel, clipped to the image.
inline FloatMap box_mean(const FloatMap& in, int r) {
  FloatMap out(in.height(), in.width());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x) {
      double s = 0.0;
      int count = 0;
      for (int qy = std::max(0, y - r); qy <= std::min(in.height() - 1, y + r); ++qy)
        for (int qx = std::max(0, x - r); qx <= std::min(in.width() - 1, x + r); ++qx) {
          s += in(qy, qx);
          ++count;
        }
      out(y, x) = s / count;
    }
  return out;
}

}  // namespace detail

inline constexpr int kMeanScaleRadius = 2;  // 5x5 window
inline constexpr double kMeanScaleGuard = 1e-8;

// out(p) = matted(p) * mean5x5(reference)(p) / (mean5x5(matted)(p) + 1e-8)
inline FloatMap local_mean_scale(const FloatMap& matted, const FloatMap& reference) {
  require_same_extent(matted, reference, "local_mean_scale");
  const FloatMap mean_ref = detail::box_mean(reference, kMeanScaleRadius);
  const FloatMap mean_mat = detail::box_mean(matted, kMeanScaleRadius);
  FloatMap out(matted.height(), matted.width());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = matted[i] * mean_ref[i] / (mean_mat[i] + kMeanScaleGuard);
  return out;
}

}  // namespace stereokit
