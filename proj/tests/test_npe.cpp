#include <gtest/gtest.h>

#include "support.hpp"

namespace stereokit {
namespace {

using testing::TempDir;

NpeParams unit_chain() {
  // hidden = out = 1, w1 = [1, 0], b1 = 0, w2 = 1, b2 = 0
  return NpeParams::unflatten(1, 1, std::vector<double>{1.0, 0.0, 0.0, 1.0, 0.0});
}

TEST(Npe, ZeroParamsGiveZeroFeatures) {
  const FeatureMap f = npe_forward(NpeParams::zeros(16, 16), {2, 3, 4, 5, 10, 12});
  EXPECT_EQ(f.channels(), 16);
  EXPECT_EQ(f.height(), 4);
  EXPECT_EQ(f.width(), 5);
  for (double v : f.data()) EXPECT_EQ(v, 0.0);
}

TEST(Npe, PositiveBranchHandValue) {
  // Column 3 of a 5-wide image normalizes to 2*3/4 - 1 = 0.5.
  const FeatureMap f = npe_forward(unit_chain(), {3, 0, 1, 1, 1, 5});
  EXPECT_DOUBLE_EQ(f(0, 0, 0), 0.5);
}

TEST(Npe, NegativeBranchHandValue) {
  const FeatureMap f = npe_forward(unit_chain(), {0, 0, 1, 1, 1, 5});
  const double inner = std::exp(-1.0) - 1.0;
  EXPECT_NEAR(f(0, 0, 0), std::exp(inner) - 1.0, 1e-15);
  EXPECT_NEAR(f(0, 0, 0), -0.4685, 5e-5);
}

TEST(Npe, EncodesAbsoluteNotPatchLocalPosition) {
  const NpeParams p = NpeParams::random(16, 16, 7);
  const FeatureMap a = npe_forward(p, {0, 0, 4, 4, 32, 48});
  const FeatureMap b = npe_forward(p, {20, 10, 4, 4, 32, 48});
  EXPECT_GT(testing::max_abs_diff(a.data(), b.data()), 1e-3);
  // The same absolute pixel gives the same feature from overlapping patches.
  const FeatureMap c = npe_forward(p, {1, 2, 4, 4, 32, 48});
  for (int o = 0; o < 16; ++o) EXPECT_EQ(a(2, 1, o), c(0, 0, o));
}

TEST(Npe, EluIsContinuousAtZero) {
  for (double eps : {1e-3, 1e-6, 1e-9}) EXPECT_LT(std::abs(elu(eps) - elu(-eps)), 2.0 * eps);
  EXPECT_EQ(elu(0.0), 0.0);
  EXPECT_EQ(elu_grad(0.0), 1.0);
}

TEST(NpeJacobian, ZeroParamsAgree) {
  const NpeParams p = NpeParams::zeros(16, 16);
  const PatchOrigin o{0, 0, 8, 8, 16, 16};
  // Only b2 has a non-zero derivative; its central difference straddles the
  // ELU kink and carries a truncation error of exactly step / 4.
  const JacobianReport coarse = npe_jacobian_check(p, o, 5);
  EXPECT_LE(coarse.max_abs_error, kFiniteDifferenceStep / 4.0 + 1e-10);
  const JacobianReport fine = npe_jacobian_check(p, o, 5, 1, 1e-6);
  EXPECT_LT(fine.max_rel_error, 1e-6);
}

TEST(NpeJacobian, RandomParamsTenProbes) {
  const JacobianReport r = npe_jacobian_check(NpeParams::random(16, 16, 3), {5, 7, 16, 16, 64, 96}, 10);
  EXPECT_EQ(r.probes, 10);
  EXPECT_EQ(r.entries, 10u * 16u * NpeParams::count(16, 16));
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(NpeJacobian, DeepNegativePreactivations) {
  NpeParams p = NpeParams::random(8, 8, 4);
  for (auto& b : p.b1) b = -6.0;
  for (auto& b : p.b2) b = -6.0;
  const JacobianReport r = npe_jacobian_check(p, {0, 0, 10, 10, 10, 10}, 10);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(NpeJacobian, HundredRandomDraws) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const JacobianReport r = npe_jacobian_check(NpeParams::random(6, 5, 1000 + seed),
                                                {3, 2, 6, 6, 20, 30}, 2, seed);
    ASSERT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(NpeJacobian, RejectsZeroProbes) {
  EXPECT_THROW(npe_jacobian_check(NpeParams::zeros(2, 2), {0, 0, 1, 1, 1, 1}, 0), Error);
}

TEST(NpeParams, ValidationAndOrigin) {
  NpeParams p = NpeParams::zeros(4, 3);
  p.w2.pop_back();
  EXPECT_THROW(p.validate(), ShapeError);
  EXPECT_THROW(NpeParams::unflatten(2, 2, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(npe_forward(NpeParams::zeros(2, 2), {5, 0, 4, 4, 8, 8}), Error);
  EXPECT_EQ(normalize_coordinate(0, 1), 0.0);
  EXPECT_EQ(normalize_coordinate(9, 10), 1.0);
}

TEST(NpeParams, StoreLoadRoundTrip) {
  TempDir dir("npe");
  // Quarter-steps survive float32 storage exactly.
  NpeParams p = NpeParams::random(5, 3, 9);
  for (auto* v : {&p.w1, &p.b1, &p.w2, &p.b2})
    for (auto& x : *v) x = std::round(x * 4.0) / 4.0;
  store_npe_params(p, dir / "params");
  const NpeParams q = load_npe_params(dir / "params");
  EXPECT_EQ(q.hidden, 5);
  EXPECT_EQ(q.out, 3);
  EXPECT_EQ(q.flatten(), p.flatten());
  EXPECT_THROW(load_npe_params(dir / "missing"), IoError);
}

}  // namespace
}  // namespace stereokit
