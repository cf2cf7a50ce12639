#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include "stereokit/stereokit.hpp"

namespace stereokit::cli {
namespace {

namespace fs = std::filesystem;

// Numeric output: tab-separated, 9 significant digits.
class Row {
 public:
  explicit Row(std::ostream& os) : os_(os) { os_.precision(9); }
  ~Row() { os_ << '\n'; }
  template <typename T>
  Row& operator<<(const T& v) {
    if (!first_) os_ << '\t';
    first_ = false;
    os_ << v;
    return *this;
  }

 private:
  std::ostream& os_;
  bool first_ = true;
};

struct Globals {
  std::string config_path;
  std::vector<std::string> sets;
};

Config load_config(const Globals& g) {
  Config cfg;
  std::string path = g.config_path;
  if (path.empty())
    if (const char* env = std::getenv("STEREOKIT_CONFIG"); env && *env) path = env;
  if (!path.empty()) apply_config_file(cfg, path);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    config_set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

template <typename T>
void override_with(T& dst, const std::optional<T>& v) {
  if (v) dst = *v;
}

bool is_single_channel_pfm(const fs::path& p) {
  if (p.extension() != ".pfm") return false;
  return read_pfm(p).channels == 1;
}

FeatureMap load_feature_stack(const fs::path& prefix) {
  const DisparityVolume planes = load_volume(prefix, VolumeKind::logits);
  FeatureMap f(planes.height(), planes.width(), planes.n_planes());
  for (int c = 0; c < planes.n_planes(); ++c)
    for (int y = 0; y < planes.height(); ++y)
      for (int x = 0; x < planes.width(); ++x) f(y, x, c) = planes(c, y, x);
  return f;
}

void store_feature_stack(const FeatureMap& f, const fs::path& prefix) {
  for (int c = 0; c < f.channels(); ++c) {
    FloatMap plane(f.height(), f.width());
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) plane(y, x) = f(y, x, c);
    store_floatmap(plane, volume_plane_path(prefix, c));
  }
}

FeatureMap as_features(const FloatMap& m) {
  return FeatureMap(m.height(), m.width(), 1, m.values());
}

// Distilled matting loss of one sample and view, with the initial disparity
// standing in for the network prediction.
double sample_ldm(const FloatMap& disp, const fs::path& matted, const fs::path& mask) {
  return loss_distilled_matting(disp, load_floatmap(matted), load_bitmask(mask));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Disparity-volume view synthesis, matting distillation and loss toolkit",
               "stereokit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Globals globals;
  app.add_option("--config", globals.config_path,
                 "key=value config file (default: $STEREOKIT_CONFIG)");
  app.add_option("--set", globals.sets, "override a config key, key=value (repeatable)");

  std::function<void()> action;

  // quantize ---------------------------------------------------------------
  std::optional<double> q_dmin, q_dmax;
  std::optional<int> q_n;
  auto* quantize = app.add_subcommand("quantize", "print the plane disparities d_0..d_N");
  quantize->add_option("--d-min", q_dmin, "smallest disparity");
  quantize->add_option("--d-max", q_dmax, "largest disparity");
  quantize->add_option("-n,--n", q_n, "last plane index N");
  quantize->callback([&] {
    action = [&] {
      Config cfg = load_config(globals);
      override_with(cfg.d_min, q_dmin);
      override_with(cfg.d_max, q_dmax);
      override_with(cfg.n, q_n);
      const QuantSchedule s = cfg.schedule();
      for (int i = 0; i < s.n_planes(); ++i) Row(out) << i << s.d[i];
    };
  });

  // warp -------------------------------------------------------------------
  std::string w_src, w_disp, w_out, w_mask, w_dir = "left";
  auto* warp = app.add_subcommand("warp", "backward-warp an image or map along rows");
  warp->add_option("--src", w_src, "PNG/PFM image or single-channel PFM map")->required();
  warp->add_option("--disp", w_disp, "disparity PFM")->required();
  warp->add_option("--direction", w_dir, "left: sample x+d, right: sample x-d")
      ->check(CLI::IsMember({"left", "right"}));
  warp->add_option("--out", w_out, "output PFM")->required();
  warp->add_option("--mask-out", w_mask, "validity mask PFM");
  warp->callback([&] {
    action = [&] {
      const Shift shift = w_dir == "left" ? Shift::left : Shift::right;
      const FloatMap disp = load_floatmap(w_disp);
      BitMask valid;
      if (is_single_channel_pfm(w_src)) {
        auto r = warp_horizontal(load_floatmap(w_src), disp, shift);
        store_floatmap(r.image, w_out);
        valid = std::move(r.valid);
      } else {
        auto r = warp_horizontal(load_image(w_src), disp, shift);
        store_image(r.image, w_out);
        valid = std::move(r.valid);
      }
      if (!w_mask.empty()) store_bitmask(valid, w_mask);
    };
  });

  // synth ------------------------------------------------------------------
  std::string s_left, s_logits, s_out;
  auto* synth = app.add_subcommand("synth", "synthesize the right view from a logit volume");
  synth->add_option("--left", s_left, "left image (PNG/PFM)")->required();
  synth->add_option("--logits", s_logits, "logit volume prefix (<prefix>_000.pfm, ...)")->required();
  synth->add_option("--out", s_out, "synthesized right view PFM")->required();
  synth->callback([&] {
    action = [&] {
      const Config cfg = load_config(globals);
      const QuantSchedule sched = cfg.schedule();
      const DisparityVolume logits = load_volume(s_logits, VolumeKind::logits);
      const Image left = load_image(s_left);
      store_image(synthesize_right(left, project_logits_to_right(logits, sched), sched), s_out);
    };
  });

  // extract ----------------------------------------------------------------
  std::string e_logits, e_out;
  auto* extract = app.add_subcommand("extract", "expected disparity of a softmaxed logit volume");
  extract->add_option("--logits", e_logits, "logit volume prefix")->required();
  extract->add_option("--out", e_out, "disparity PFM")->required();
  extract->callback([&] {
    action = [&] {
      const Config cfg = load_config(globals);
      const QuantSchedule sched = cfg.schedule();
      store_floatmap(extract_disparity(softmax_volume(load_volume(e_logits, VolumeKind::logits)), sched),
                     e_out);
    };
  });

  // mat --------------------------------------------------------------------
  std::string m_guide, m_disp, m_out, m_conf;
  bool m_scale = false;
  std::optional<double> m_eps, m_lambda, m_tol;
  std::optional<int> m_iter;
  auto* mat = app.add_subcommand("mat", "matte an initial disparity against its photograph");
  mat->add_option("--guide", m_guide, "guide image (PNG/PFM)")->required();
  mat->add_option("--disp", m_disp, "initial disparity PFM")->required();
  mat->add_option("--out", m_out, "matted disparity PFM")->required();
  mat->add_option("--confidence", m_conf, "confidence PFM (default: all ones)");
  mat->add_flag("--local-scale", m_scale, "apply 5x5 local mean scaling against --disp");
  mat->add_option("--eps", m_eps, "covariance regularizer");
  mat->add_option("--lambda", m_lambda, "data-term weight");
  mat->add_option("--cg-tol", m_tol, "relative residual tolerance");
  mat->add_option("--cg-max-iter", m_iter, "iteration cap");
  mat->callback([&] {
    action = [&] {
      Config cfg = load_config(globals);
      override_with(cfg.matting.eps, m_eps);
      override_with(cfg.matting.lambda, m_lambda);
      override_with(cfg.matting.cg_tol, m_tol);
      override_with(cfg.matting.cg_max_iter, m_iter);
      const Image guide = load_image(m_guide);
      const FloatMap disp = load_floatmap(m_disp);
      const FloatMap conf =
          m_conf.empty() ? FloatMap(disp.height(), disp.width(), 1, 1.0) : load_floatmap(m_conf);
      FloatMap matted = solve_matted_disparity(guide, disp, conf, cfg.matting);
      if (m_scale) matted = local_mean_scale(matted, disp);
      store_floatmap(matted, m_out);
    };
  });

  // distill / pipeline -----------------------------------------------------
  std::string d_manifest, d_out;
  std::optional<int> d_jobs;
  auto add_dataset_options = [&](CLI::App* sub) {
    sub->add_option("--manifest", d_manifest, "tab-separated manifest")->required();
    sub->add_option("--out", d_out, "output directory")->required();
    sub->add_option("--jobs", d_jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto run_dataset = [&](const Config& cfg) {
    DatasetOptions opts{cfg.matting, d_jobs.value_or(cfg.jobs), &err};
    return generate_matted_dataset(read_manifest(d_manifest), d_out, opts);
  };

  auto* distill = app.add_subcommand("distill", "precompute matted disparities and masks");
  add_dataset_options(distill);
  distill->callback([&] {
    action = [&] {
      const auto written = run_dataset(load_config(globals));
      Row(out) << "samples" << written.size();
    };
  });

  auto* pipeline = app.add_subcommand(
      "pipeline", "distill a manifest and report the distilled matting loss per sample");
  add_dataset_options(pipeline);
  pipeline->callback([&] {
    action = [&] {
      const Config cfg = load_config(globals);
      const auto inputs = read_manifest(d_manifest);
      const auto written = run_dataset(cfg);
      std::ostringstream report;
      report.precision(9);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const DistilledEntry expected = distilled_paths(inputs[i], d_out, i);
        if (std::find(written.begin(), written.end(), expected) == written.end()) continue;
        const double ldm_l =
            sample_ldm(load_floatmap(inputs[i].left_disp), expected.matted_left, expected.mask_left);
        const double ldm_r = sample_ldm(load_floatmap(inputs[i].right_disp), expected.matted_right,
                                        expected.mask_right);
        report << i << '\t' << ldm_l << '\t' << ldm_r << '\t' << two_view_mean(ldm_l, ldm_r) << '\n';
      }
      const std::string text = report.str();
      write_file_atomic(fs::path(d_out) / "losses.tsv", std::span<const char>(text.data(), text.size()));
      out << text;
    };
  });

  // losses -----------------------------------------------------------------
  std::string l_left, l_right, l_synth, l_valid, l_disp, l_matted, l_mask, l_fdisp, l_fimg;
  std::vector<std::string> l_fpred, l_ftarget;
  double l_mirror = 0.0;
  std::optional<double> l_ap, l_ads, l_adm, l_adc;
  auto* losses = app.add_subcommand("losses", "evaluate every loss term for one sample");
  losses->add_option("--left", l_left, "left image I_L (smoothness guide)")->required();
  losses->add_option("--disp", l_disp, "predicted left disparity PFM")->required();
  losses->add_option("--right", l_right, "right image I_R (reconstruction target)");
  losses->add_option("--synth", l_synth, "synthesized right view I'_R");
  losses->add_option("--valid", l_valid, "validity mask PFM for l1");
  losses->add_option("--matted", l_matted, "locally scaled matted disparity PFM");
  losses->add_option("--mask", l_mask, "distillation mask PFM");
  losses->add_option("--feats-pred", l_fpred, "perceptual features of I'_R, one stack prefix per level");
  losses->add_option("--feats-target", l_ftarget, "perceptual features of I_R, one stack prefix per level");
  losses->add_option("--feats-disp", l_fdisp, "deep features of the disparity (stack prefix)");
  losses->add_option("--feats-img", l_fimg, "deep features of I_L (stack prefix)");
  losses->add_option("--mirror", l_mirror, "externally computed mirror loss");
  losses->add_option("--alpha-p", l_ap);
  losses->add_option("--alpha-ds", l_ads);
  losses->add_option("--alpha-dm", l_adm);
  losses->add_option("--alpha-dc", l_adc);
  losses->callback([&] {
    action = [&] {
      Config cfg = load_config(globals);
      override_with(cfg.weights.alpha_p, l_ap);
      override_with(cfg.weights.alpha_ds, l_ads);
      override_with(cfg.weights.alpha_dm, l_adm);
      override_with(cfg.weights.alpha_dc, l_adc);
      cfg.weights.validate();
      const Image left = load_image(l_left);
      const FloatMap disp = load_floatmap(l_disp);

      Stage1Parts s1;
      if (!l_synth.empty() != !l_right.empty())
        throw Error("losses: --synth and --right must be given together");
      if (!l_synth.empty()) {
        const Image synth = load_image(l_synth), right = load_image(l_right);
        const BitMask valid = l_valid.empty() ? BitMask(synth.height(), synth.width(), 1, 1)
                                              : load_bitmask(l_valid);
        s1.l1 = loss_l1(synth, right, valid);
        if (l_fpred.empty() && l_ftarget.empty()) {
          const RandomConvExtractor phi(synth.channels(), cfg.feature_seed);
          s1.lp = loss_perceptual(phi.extract_grid(synth), phi.extract_grid(right));
        }
      }
      if (!l_fpred.empty() || !l_ftarget.empty()) {
        std::vector<FeatureMap> pred, target;
        for (const auto& p : l_fpred) pred.push_back(load_feature_stack(p));
        for (const auto& p : l_ftarget) target.push_back(load_feature_stack(p));
        s1.lp = loss_perceptual(pred, target);
      }
      s1.lds = loss_smoothness(disp, left);

      FeatureMap f_disp, f_img;
      if (!l_fdisp.empty() != !l_fimg.empty())
        throw Error("losses: --feats-disp and --feats-img must be given together");
      if (!l_fdisp.empty()) {
        f_disp = load_feature_stack(l_fdisp);
        f_img = load_feature_stack(l_fimg);
      } else {
        FloatMap normalized = disp;
        const double peak = max_value(disp);
        if (peak > 0.0)
          for (auto& v : normalized.data()) v /= peak;
        f_disp = RandomConvExtractor(1, cfg.feature_seed).extract(as_features(normalized)).back();
        f_img = RandomConvExtractor(left.channels(), cfg.feature_seed).extract_grid(left).back();
      }

      Stage2Parts s2;
      s2.ls1 = stage1_total(s1, cfg.weights);
      s2.lm = l_mirror;
      s2.ldc = loss_deep_corr(f_disp, f_img, cfg.autocorr_k);
      if (!l_matted.empty() != !l_mask.empty())
        throw Error("losses: --matted and --mask must be given together");
      if (!l_matted.empty())
        s2.ldm = loss_distilled_matting(disp, load_floatmap(l_matted), load_bitmask(l_mask));

      Row(out) << "l1" << s1.l1;
      Row(out) << "lp" << s1.lp;
      Row(out) << "lds" << s1.lds;
      Row(out) << "ldc" << s2.ldc;
      Row(out) << "ldm" << s2.ldm;
      Row(out) << "lm" << s2.lm;
      Row(out) << "ls1" << s2.ls1;
      Row(out) << "ls2" << stage2_total(s2, cfg.weights);
    };
  });

  // npe --------------------------------------------------------------------
  std::string n_params, n_out, n_save;
  PatchOrigin n_origin;
  int n_check = 0;
  auto* npe = app.add_subcommand("npe", "positional encoding features for a patch");
  npe->add_option("--params", n_params, "parameter stem (<stem>.pfm + <stem>.txt); default: seeded init");
  npe->add_option("--x0", n_origin.x0)->required();
  npe->add_option("--y0", n_origin.y0)->required();
  npe->add_option("--patch-w", n_origin.patch_w)->required();
  npe->add_option("--patch-h", n_origin.patch_h)->required();
  npe->add_option("--full-w", n_origin.full_w)->required();
  npe->add_option("--full-h", n_origin.full_h)->required();
  npe->add_option("--out", n_out, "feature stack prefix");
  npe->add_option("--save-params", n_save, "write the parameters used to this stem");
  npe->add_option("--check", n_check, "run a finite-difference Jacobian check with this many probes");
  npe->callback([&] {
    action = [&] {
      const Config cfg = load_config(globals);
      const NpeParams params = n_params.empty()
                                   ? NpeParams::random(cfg.npe_hidden, cfg.npe_out, cfg.npe_seed)
                                   : load_npe_params(n_params);
      const FeatureMap f = npe_forward(params, n_origin);
      if (!n_out.empty()) store_feature_stack(f, n_out);
      if (!n_save.empty()) store_npe_params(params, n_save);
      if (n_check > 0) {
        const JacobianReport r = npe_jacobian_check(params, n_origin, n_check);
        Row(out) << "max_rel_error" << r.max_rel_error;
        Row(out) << "max_abs_error" << r.max_abs_error;
      }
    };
  });

  // metrics ----------------------------------------------------------------
  std::string mt_pred, mt_gt;
  std::optional<double> mt_cap, mt_focal, mt_baseline;
  bool mt_median = false;
  auto* metrics = app.add_subcommand("metrics", "depth metrics of a prediction against ground truth");
  metrics->add_option("--pred", mt_pred, "predicted depth PFM")->required();
  metrics->add_option("--gt", mt_gt, "ground-truth depth PFM (0 = invalid)")->required();
  metrics->add_option("--cap", mt_cap, "depth cap in meters (default 80)");
  metrics->add_flag("--median-scale", mt_median, "median-scale the prediction");
  metrics->add_option("--focal", mt_focal, "treat --pred as disparity with this focal length (px)");
  metrics->add_option("--baseline", mt_baseline, "stereo baseline (m), used with --focal");
  metrics->callback([&] {
    action = [&] {
      Config cfg = load_config(globals);
      override_with(cfg.eval.cap, mt_cap);
      if (mt_median) cfg.eval.median_scale = true;
      FloatMap pred = load_floatmap(mt_pred);
      if (mt_focal.has_value() != mt_baseline.has_value())
        throw Error("metrics: --focal and --baseline must be given together");
      if (mt_focal) pred = disparity_to_depth(pred, *mt_focal, *mt_baseline);
      const MetricReport r = eval_depth(pred, load_floatmap(mt_gt), cfg.eval);
      Row(out) << r.abs_rel << r.sq_rel << r.rmse << r.rmse_log << r.delta1 << r.delta2 << r.delta3
               << r.n_valid;
    };
  });

  // viz --------------------------------------------------------------------
  std::string v_in, v_out;
  auto* viz = app.add_subcommand("viz", "render a float map as a false-color PNG");
  viz->add_option("--in", v_in, "input PFM")->required();
  viz->add_option("--out", v_out, "output PNG")->required();
  viz->callback([&] { action = [&] { emit_visualization(load_floatmap(v_in), v_out); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (action) action();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace stereokit::cli
