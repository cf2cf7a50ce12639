#pragma once

// Flat key=value configuration. Lines starting with '#' are comments; unknown
// keys are rejected. Defaults follow the published training setup where it
// states a value.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "stereokit/dispvol.hpp"
#include "stereokit/losses.hpp"
#include "stereokit/matting.hpp"
#include "stereokit/metrics.hpp"

namespace stereokit {

struct Config {
  double d_min = 2.0;
  double d_max = 300.0;
  int n = 48;  // last plane index; the volume has n + 1 planes
  MattingParams matting;
  LossWeights weights;
  int autocorr_k = 3;
  EvalOptions eval;
  int npe_hidden = 16;
  int npe_out = 16;
  std::uint64_t npe_seed = 1;
  std::uint64_t feature_seed = 0x5eed;
  int jobs = 1;

  QuantSchedule schedule() const { return make_schedule(d_min, d_max, n); }
};

struct ConfigKey {
  const char* name;
  const char* doc;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(d))
    throw Error("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != v.size()) throw Error("config: " + key + " expects an integer, got '" + v + "'");
  return i;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error("config: " + key + " expects a boolean, got '" + v + "'");
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

#define STEREOKIT_DOUBLE_KEY(name, member, doc)                                                \
  ConfigKey {                                                                                 \
    name, doc, [](Config& c, const std::string& v) { c.member = detail::parse_double(name, v); }, \
        [](const Config& c) { return detail::fmt(c.member); }                                 \
  }
#define STEREOKIT_INT_KEY(name, member, type, doc)                                              \
  ConfigKey {                                                                                  \
    name, doc,                                                                                 \
        [](Config& c, const std::string& v) { c.member = static_cast<type>(detail::parse_int(name, v)); }, \
        [](const Config& c) { return std::to_string(c.member); }                               \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      STEREOKIT_DOUBLE_KEY("d_min", d_min, "smallest plane disparity in pixels (2)"),
      STEREOKIT_DOUBLE_KEY("d_max", d_max, "largest plane disparity in pixels (300)"),
      STEREOKIT_INT_KEY("n", n, int, "last plane index N; volumes have N+1 planes (48)"),
      STEREOKIT_INT_KEY("window_radius", matting.window_radius, int,
                        "matting Laplacian window radius (1 = 3x3)"),
      STEREOKIT_DOUBLE_KEY("eps", matting.eps, "matting covariance regularizer (1e-7)"),
      STEREOKIT_DOUBLE_KEY("lambda", matting.lambda, "matting data-term weight (100)"),
      STEREOKIT_DOUBLE_KEY("cg_tol", matting.cg_tol, "CG relative residual tolerance (1e-8)"),
      STEREOKIT_INT_KEY("cg_max_iter", matting.cg_max_iter, int, "CG iteration cap (2000)"),
      STEREOKIT_DOUBLE_KEY("alpha_p", weights.alpha_p, "perceptual loss weight (0.01)"),
      STEREOKIT_DOUBLE_KEY("alpha_ds", weights.alpha_ds, "smoothness loss weight (0.0004)"),
      STEREOKIT_DOUBLE_KEY("alpha_dm", weights.alpha_dm, "distilled matting loss weight (0.25)"),
      STEREOKIT_DOUBLE_KEY("alpha_dc", weights.alpha_dc, "deep corr-l1 loss weight (0.01)"),
      STEREOKIT_INT_KEY("autocorr_k", autocorr_k, int, "auto-correlation window (3)"),
      STEREOKIT_DOUBLE_KEY("cap", eval.cap, "evaluation depth cap in meters (80)"),
      ConfigKey{"median_scale", "median-scale predictions before metrics (false)",
                [](Config& c, const std::string& v) {
                  c.eval.median_scale = detail::parse_bool("median_scale", v);
                },
                [](const Config& c) { return std::string(c.eval.median_scale ? "true" : "false"); }},
      STEREOKIT_INT_KEY("npe_hidden", npe_hidden, int, "NPE hidden width (16)"),
      STEREOKIT_INT_KEY("npe_out", npe_out, int, "NPE output channels (16)"),
      STEREOKIT_INT_KEY("npe_seed", npe_seed, std::uint64_t, "seed for NPE parameter init (1)"),
      STEREOKIT_INT_KEY("feature_seed", feature_seed, std::uint64_t,
                        "seed of the stand-in feature extractor (24301)"),
      STEREOKIT_INT_KEY("jobs", jobs, int, "worker threads for distill/pipeline (1)"),
  };
  return keys;
}

#undef STEREOKIT_DOUBLE_KEY
#undef STEREOKIT_INT_KEY

inline void config_set(Config& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys())
    if (key == k.name) {
      k.set(cfg, value);
      return;
    }
  throw Error("config: unknown key '" + key + "'");
}

inline void apply_config_text(Config& cfg, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(origin + ":" + std::to_string(lineno) + ": expected key=value");
    config_set(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void apply_config_file(Config& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

inline std::string dump_config(const Config& cfg) {
  std::string out;
  for (const auto& k : config_keys())
    out += std::string("# ") + k.doc + "\n" + k.name + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace stereokit
