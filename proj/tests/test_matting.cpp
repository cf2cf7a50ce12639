#include <gtest/gtest.h>

#include "oracles.hpp"

namespace stereokit {
namespace {

using testing::random_image;
using testing::random_map;
using namespace oracle;

template <class G>
G transpose_grid(const G& g) {
  G out(g.width(), g.height(), g.channels());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int k = 0; k < g.channels(); ++k) out(x, y, k) = g(y, x, k);
  return out;
}

TEST(Laplacian, ConstantGuideHasZeroRowSums) {
  const Image guide(7, 9, 3, 0.4);
  const SparseSystem l = build_laplacian(guide, MattingParams{});
  const auto y = l.multiply(std::vector<double>(l.dim(), 3.7));
  for (double v : y) EXPECT_NEAR(v, 0.0, 1e-8);
  for (double v : l.rhs) EXPECT_EQ(v, 0.0);
}

TEST(Laplacian, MatchesDenseAssemblyOracle) {
  UniformSource rng(21);
  for (int c : {1, 3}) {
    const Image guide = random_image(4, 4, c, rng);
    const Dense got = to_dense(build_laplacian(guide, MattingParams{}));
    const Dense want = dense_laplacian(guide, 1e-7);
    EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10) << "channels " << c;
  }
}

TEST(Laplacian, SymmetricZeroRowSumPositiveSemidefinite) {
  UniformSource rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const Image guide = random_image(6, 6, 3, rng);
    const SparseSystem l = build_laplacian(guide, MattingParams{});
    const Dense d = to_dense(l);
    for (const auto& t : l.entries()) EXPECT_NEAR(d(t.col, t.row), t.value, 1e-10);
    EXPECT_LT(d.rowwise().sum().cwiseAbs().maxCoeff(), 1e-8);
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd x(l.dim());
      for (auto& v : x) v = rng.uniform(-1, 1);
      EXPECT_GE(x.dot(d * x), -1e-8);
    }
    const Eigen::SelfAdjointEigenSolver<Dense> eig(d);
    // Relative to the spectrum: entries scale with 1/eps on flat windows.
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8 * std::max(1.0, eig.eigenvalues().maxCoeff()));
  }
}

TEST(Laplacian, RejectsSmallImagesAndBadChannels) {
  EXPECT_THROW(build_laplacian(Image(2, 5, 3), MattingParams{}), Error);
  EXPECT_THROW(build_laplacian(Image(5, 2, 1), MattingParams{}), Error);
  EXPECT_THROW(build_laplacian(Image(5, 5, 2), MattingParams{}), Error);
}

TEST(MattingParams, Validation) {
  MattingParams p;
  EXPECT_NO_THROW(p.validate());
  for (auto mutate : {+[](MattingParams& q) { q.eps = 0; }, +[](MattingParams& q) { q.lambda = -1; },
                      +[](MattingParams& q) { q.cg_tol = 0; }}) {
    MattingParams q;
    mutate(q);
    EXPECT_THROW(q.validate(), Error);
  }
}

TEST(SolveMatted, LargeLambdaReproducesTarget) {
  UniformSource rng(23);
  const Image guide = random_image(8, 8, 3, rng);
  const FloatMap target = random_map(8, 8, rng, 0.0, 1.0);
  MattingParams p;
  p.lambda = 1e6;
  const FloatMap x = solve_matted(build_laplacian(guide, p), target, FloatMap(8, 8, 1, 1.0), p);
  EXPECT_LT(testing::max_abs_diff(x.data(), target.data()), 1e-3);
}

TEST(SolveMatted, ConstantGuideMatchesDenseLu) {
  UniformSource rng(24);
  const Image guide(8, 8, 3, 0.5);
  const FloatMap target = random_map(8, 8, rng, 0.0, 1.0);
  const FloatMap conf(8, 8, 1, 1.0);
  const MattingParams p;
  const FloatMap x = solve_matted(build_laplacian(guide, p), target, conf, p);
  const Eigen::VectorXd want = dense_solve(guide, target, conf, p);
  EXPECT_LT((to_vec(x) - want).cwiseAbs().maxCoeff(), 1e-6);
  // Smoothing never leaves the target's range.
  for (double v : x.data()) {
    EXPECT_GE(v, *std::min_element(target.data().begin(), target.data().end()) - 1e-9);
    EXPECT_LE(v, *std::max_element(target.data().begin(), target.data().end()) + 1e-9);
  }
}

TEST(SolveMatted, RandomFixturesMatchDenseLuRelative) {
  UniformSource rng(25);
  for (int size : {3, 5, 8, 10}) {
    const Image guide = random_image(size, size + (size < 10 ? 1 : 0), 3, rng);
    const FloatMap target = random_map(guide.height(), guide.width(), rng, 0.0, 1.0);
    const FloatMap conf = random_map(guide.height(), guide.width(), rng, 0.1, 1.0);
    const MattingParams p;
    const FloatMap x = solve_matted(build_laplacian(guide, p), target, conf, p);
    const Eigen::VectorXd want = dense_solve(guide, target, conf, p);
    EXPECT_LT((to_vec(x) - want).norm() / want.norm(), 1e-6) << size;
  }
}

TEST(SolveMatted, SingleAnchorYieldsConstant) {
  UniformSource rng(26);
  const Image guide = random_image(6, 7, 3, rng);
  const MattingParams p;
  FloatMap conf(6, 7, 1, 0.0);
  conf(3, 4) = 1.0;
  const FloatMap target(6, 7, 1, 0.625);
  const SparseSystem sys = attach_targets(build_laplacian(guide, p), target, conf, p.lambda);
  // The constant vector satisfies the system exactly.
  const auto ax = sys.multiply(std::vector<double>(sys.dim(), 0.625));
  double r2 = 0.0;
  for (int i = 0; i < sys.dim(); ++i) r2 += (ax[i] - sys.rhs[i]) * (ax[i] - sys.rhs[i]);
  EXPECT_LT(std::sqrt(r2), 1e-8);
  // And the solver finds it from an arbitrary start.
  FloatMap noisy = random_map(6, 7, rng, 0.0, 1.0);
  noisy(3, 4) = 0.625;
  const FloatMap x = solve_matted(build_laplacian(Image(6, 7, 3, 0.3), p), noisy, conf, p);
  for (double v : x.data()) EXPECT_NEAR(v, 0.625, 1e-6);
}

TEST(SolveMatted, TransposeAndFlipRelabelingCommute) {
  UniformSource rng(27);
  const Image guide = random_image(7, 9, 3, rng);
  const FloatMap target = random_map(7, 9, rng, 0.0, 1.0);
  const FloatMap conf = random_map(7, 9, rng, 0.2, 1.0);
  const MattingParams p;
  const FloatMap base = solve_matted(build_laplacian(guide, p), target, conf, p);

  const FloatMap t = solve_matted(build_laplacian(transpose_grid(guide), p),
                                  transpose_grid(target), transpose_grid(conf), p);
  EXPECT_LT(testing::max_abs_diff(transpose_grid(t).data(), base.data()), 1e-6);

  const FloatMap f = solve_matted(build_laplacian(flip_horizontal(guide), p),
                                  flip_horizontal(target), flip_horizontal(conf), p);
  EXPECT_LT(testing::max_abs_diff(flip_horizontal(f).data(), base.data()), 1e-6);
}

TEST(SolveMatted, NonConvergenceReportsResidual) {
  UniformSource rng(28);
  const Image guide = random_image(8, 8, 3, rng);
  MattingParams p;
  p.cg_max_iter = 1;
  const FloatMap target = random_map(8, 8, rng, 0.0, 1.0);
  try {
    solve_matted(build_laplacian(guide, p), target, random_map(8, 8, rng, 0.1, 1.0), p);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 0.0);
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(SolveMatted, ShapeMismatchAndNegativeConfidenceFail) {
  const MattingParams p;
  const SparseSystem l = build_laplacian(Image(4, 4, 1, 0.5), p);
  EXPECT_THROW(solve_matted(l, FloatMap(4, 5), FloatMap(4, 5), p), ShapeError);
  EXPECT_THROW(solve_matted(l, FloatMap(4, 4), FloatMap(4, 4, 1, -1.0), p), Error);
}

TEST(SolveMatted, ZeroConfidenceGivesZero) {
  const MattingParams p;
  const FloatMap x = solve_matted(build_laplacian(Image(4, 4, 1, 0.5), p), FloatMap(4, 4, 1, 2.0),
                                  FloatMap(4, 4), p);
  for (double v : x.data()) EXPECT_EQ(v, 0.0);
}

TEST(LocalMeanScale, IdentityAndScaleCancellation) {
  UniformSource rng(29);
  const FloatMap ref = random_map(9, 11, rng, 0.5, 40.0);
  EXPECT_LT(testing::max_abs_diff(local_mean_scale(ref, ref).data(), ref.data()), 1e-5);
  FloatMap twice = ref;
  for (auto& v : twice.data()) v *= 2.0;
  EXPECT_LT(testing::max_abs_diff(local_mean_scale(twice, ref).data(), ref.data()), 1e-5);
}

TEST(LocalMeanScale, PiecewiseHandWindow) {
  // Columns alternate 1, 3 in pairs; at an interior pixel the 5x5 window
  // covers columns x-2..x+2.
  FloatMap m(9, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) m(y, x) = (x / 2) % 2 == 0 ? 1.0 : 3.0;
  const FloatMap out = local_mean_scale(m, FloatMap(9, 9, 1, 2.0));
  // Row values 1 1 3 3 1 1 3 3 1; at x = 4 the window columns 2..6 are
  // 3 3 1 1 3 -> mean 11/5.
  EXPECT_NEAR(out(4, 4), 1.0 * 2.0 / (11.0 / 5.0 + 1e-8), 1e-12);
  // Corner: clipped 3x3 window over columns 0..2 -> (1+1+3)/3.
  EXPECT_NEAR(out(0, 0), 1.0 * 2.0 / (5.0 / 3.0 + 1e-8), 1e-12);
}

TEST(LocalMeanScale, InvariantToPositiveRescaling) {
  UniformSource rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const FloatMap ref = random_map(6, 8, rng, 1.0, 50.0);
    const FloatMap m = random_map(6, 8, rng, 0.1, 2.0);
    const double s = rng.uniform(0.5, 20.0);
    FloatMap scaled = m;
    for (auto& v : scaled.data()) v *= s;
    EXPECT_LT(testing::max_abs_diff(local_mean_scale(m, ref).data(),
                                    local_mean_scale(scaled, ref).data()),
              1e-5);
  }
}

TEST(LocalMeanScale, ShapeMismatchFails) {
  EXPECT_THROW(local_mean_scale(FloatMap(3, 3), FloatMap(3, 4)), ShapeError);
}

}  // namespace
}  // namespace stereokit
