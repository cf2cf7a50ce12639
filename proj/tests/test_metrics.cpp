#include <gtest/gtest.h>

#include "support.hpp"

namespace stereokit {
namespace {

using testing::random_map;
using testing::TempDir;

void expect_perfect(const MetricReport& r) {
  EXPECT_NEAR(r.abs_rel, 0.0, 1e-12);
  EXPECT_NEAR(r.sq_rel, 0.0, 1e-12);
  EXPECT_NEAR(r.rmse, 0.0, 1e-12);
  EXPECT_NEAR(r.rmse_log, 0.0, 1e-12);
  EXPECT_EQ(r.delta1, 1.0);
  EXPECT_EQ(r.delta2, 1.0);
  EXPECT_EQ(r.delta3, 1.0);
}

TEST(EvalDepth, IdenticalPredictionIsPerfect) {
  UniformSource rng(81);
  const FloatMap gt = random_map(6, 7, rng, 1.0, 70.0);
  const MetricReport r = eval_depth(gt, gt);
  expect_perfect(r);
  EXPECT_EQ(r.n_valid, 42u);
}

TEST(EvalDepth, UniformOverestimate) {
  UniformSource rng(82);
  const FloatMap gt = random_map(5, 5, rng, 1.0, 60.0);
  FloatMap pred = gt;
  for (auto& v : pred.data()) v *= 1.2;
  const MetricReport r = eval_depth(pred, gt);
  EXPECT_NEAR(r.abs_rel, 0.2, 1e-12);
  EXPECT_NEAR(r.rmse_log, std::log(1.2), 1e-12);
  EXPECT_EQ(r.delta1, 1.0);
  EXPECT_EQ(r.delta2, 1.0);
  EXPECT_EQ(r.delta3, 1.0);
  // sq_rel = mean(0.04 g), rmse = 0.2 sqrt(mean g^2), from the gt values.
  double sg = 0.0, sg2 = 0.0;
  for (double g : gt.data()) {
    sg += g;
    sg2 += g * g;
  }
  EXPECT_NEAR(r.sq_rel, 0.04 * sg / 25.0, 1e-9);
  EXPECT_NEAR(r.rmse, 0.2 * std::sqrt(sg2 / 25.0), 1e-9);
  EvalOptions med;
  med.median_scale = true;
  expect_perfect(eval_depth(pred, gt, med));
}

TEST(EvalDepth, CapAndInvalidPixels) {
  const FloatMap gt = make_floatmap(1, 4, {0.0, 10.0, 90.0, 20.0});
  const FloatMap pred = make_floatmap(1, 4, {5.0, 10.0, 1.0, 200.0});
  const MetricReport r = eval_depth(pred, gt);
  EXPECT_EQ(r.n_valid, 2u);
  // 200 clamps to 80: |80-20|/20 = 3 -> mean (0 + 3) / 2.
  EXPECT_NEAR(r.abs_rel, 1.5, 1e-12);
  EXPECT_EQ(r.delta1, 0.5);
  EXPECT_THROW(eval_depth(pred, FloatMap(1, 4)), Error);
  EXPECT_THROW(eval_depth(FloatMap(1, 3), gt), ShapeError);
}

TEST(EvalDepth, FloorClampsBeforeLog) {
  const MetricReport r = eval_depth(make_floatmap(1, 1, {-5.0}), make_floatmap(1, 1, {1.0}));
  EXPECT_NEAR(r.rmse_log, -std::log(1e-3), 1e-9);
}

TEST(EvalDepth, MedianScalingIsScaleInvariantAndDeltasMonotone) {
  UniformSource rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const FloatMap gt = random_map(6, 6, rng, 0.5, 75.0);
    const FloatMap pred = random_map(6, 6, rng, 0.5, 75.0);
    EvalOptions med;
    med.median_scale = true;
    const MetricReport a = eval_depth(pred, gt, med);
    FloatMap scaled = pred;
    const double s = rng.uniform(0.1, 10.0);
    for (auto& v : scaled.data()) v *= s;
    const MetricReport b = eval_depth(scaled, gt, med);
    EXPECT_NEAR(a.abs_rel, b.abs_rel, 1e-9);
    EXPECT_NEAR(a.sq_rel, b.sq_rel, 1e-9);
    EXPECT_NEAR(a.rmse, b.rmse, 1e-9);
    EXPECT_NEAR(a.rmse_log, b.rmse_log, 1e-9);
    EXPECT_EQ(a.delta1, b.delta1);
    for (const MetricReport& r : {a, eval_depth(pred, gt)}) {
      EXPECT_LE(r.delta1, r.delta2);
      EXPECT_LE(r.delta2, r.delta3);
      EXPECT_GE(r.delta1, 0.0);
      EXPECT_LE(r.delta3, 1.0);
    }
  }
}

TEST(DisparityToDepth, Examples) {
  EXPECT_EQ(disparity_to_depth(FloatMap(1, 1, 1, 721 * 0.54), 721, 0.54)(0, 0), 1.0);
  EXPECT_NEAR(disparity_to_depth(FloatMap(1, 1, 1, 100.0), 721, 0.54)(0, 0), 3.8934, 1e-12);
  const FloatMap d = make_floatmap(1, 3, {10.0, 20.0, 0.0});
  const FloatMap z = disparity_to_depth(d, 700, 0.5);
  EXPECT_DOUBLE_EQ(z(0, 0), 2.0 * z(0, 1));
  EXPECT_EQ(z(0, 2), 0.0);
}

TEST(DisparityToDepth, RoundTripIsIdentity) {
  UniformSource rng(84);
  const FloatMap depth = random_map(5, 8, rng, 0.1, 100.0);
  const FloatMap back = disparity_to_depth(depth_to_disparity(depth, 721, 0.54), 721, 0.54);
  for (std::size_t i = 0; i < depth.size(); ++i) EXPECT_NEAR(back[i], depth[i], 1e-9 * depth[i]);
}

TEST(Config, DefaultsMatchDocumentedValues) {
  const Config c;
  EXPECT_EQ(c.d_min, 2.0);
  EXPECT_EQ(c.d_max, 300.0);
  EXPECT_EQ(c.n, 48);
  EXPECT_EQ(c.weights.alpha_p, 0.01);
  EXPECT_EQ(c.weights.alpha_ds, 0.0004);
  EXPECT_EQ(c.weights.alpha_dm, 0.25);
  EXPECT_EQ(c.weights.alpha_dc, 0.01);
  EXPECT_EQ(c.matting.lambda, 100.0);
  EXPECT_EQ(c.eval.cap, 80.0);
  EXPECT_EQ(c.autocorr_k, 3);
  EXPECT_EQ(c.schedule().n_planes(), 49);
}

TEST(Config, TextOverridesAndDumpRoundTrips) {
  Config c;
  apply_config_text(c, "# tuning\n  lambda = 250 # stronger\n\nmedian_scale=true\nn=8\n");
  EXPECT_EQ(c.matting.lambda, 250.0);
  EXPECT_TRUE(c.eval.median_scale);
  EXPECT_EQ(c.n, 8);
  Config d;
  apply_config_text(d, dump_config(c));
  EXPECT_EQ(dump_config(d), dump_config(c));
  for (const auto& k : config_keys()) EXPECT_FALSE(std::string(k.doc).empty()) << k.name;
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  Config c;
  EXPECT_THROW(apply_config_text(c, "bogus=1\n"), Error);
  EXPECT_THROW(apply_config_text(c, "lambda\n"), Error);
  EXPECT_THROW(config_set(c, "lambda", "abc"), Error);
  EXPECT_THROW(config_set(c, "n", "2.5"), Error);
  EXPECT_THROW(config_set(c, "median_scale", "maybe"), Error);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/cfg"), IoError);
}

TEST(Viz, ConstantMapIsSingleColour) {
  const auto rgb = render_colormap(FloatMap(3, 4, 1, 7.0));
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    EXPECT_EQ(rgb[i], kColormapStops[0][0]);
    EXPECT_EQ(rgb[i + 1], kColormapStops[0][1]);
    EXPECT_EQ(rgb[i + 2], kColormapStops[0][2]);
  }
}

TEST(Viz, ExtremesHitColormapEndpoints) {
  const auto rgb = render_colormap(make_floatmap(1, 3, {-2.0, 5.0, 1.0}));
  EXPECT_EQ(Rgb8({rgb[0], rgb[1], rgb[2]}), kColormapStops.front());
  EXPECT_EQ(Rgb8({rgb[3], rgb[4], rgb[5]}), kColormapStops.back());
  EXPECT_EQ(colormap(0.5), kColormapStops[2]);
}

TEST(Viz, PngIsDeterministicAndDecodes) {
  TempDir dir("viz");
  UniformSource rng(85);
  const FloatMap m = random_map(9, 11, rng, 0.0, 50.0);
  emit_visualization(m, dir / "a.png");
  emit_visualization(m, dir / "b.png");
  EXPECT_EQ(read_file(dir / "a.png"), read_file(dir / "b.png"));
  const Image img = load_image(dir / "a.png");
  EXPECT_EQ(img.channels(), 3);
  EXPECT_EQ(img.height(), 9);
  EXPECT_THROW(emit_visualization(m, dir / "missing" / "x.png"), IoError);
}

}  // namespace
}  // namespace stereokit
