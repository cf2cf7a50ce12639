#pragma once

// Matted-disparity distillation: per-view matting + mean scaling, the
// photometric / left-right consistency gate, and bulk dataset generation.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stereokit/dispvol.hpp"
#include "stereokit/imgio.hpp"
#include "stereokit/matting.hpp"

namespace stereokit {

struct StereoSample {
  Image img_left;
  Image img_right;
  FloatMap disp_left;
  FloatMap disp_right;

  void validate() const {
    require_same_extent(img_left, img_right, "stereo sample images");
    require_same_extent(img_left, disp_left, "stereo sample left disparity");
    require_same_extent(img_left, disp_right, "stereo sample right disparity");
    if (img_left.channels() != img_right.channels())
      throw ShapeError("stereo sample: channel count differs between views");
    for (const FloatMap* d : {&disp_left, &disp_right})
      for (double v : d->data())
        if (!(v >= 0.0)) throw Error("stereo sample: disparities must be >= 0");
  }
};

struct DistillOutput {
  FloatMap matted_left;
  FloatMap matted_right;
  BitMask mask_left;
  BitMask mask_right;
};

enum class View { left, right };

namespace detail {

// One view of the gate. `self` is the view being masked, `other` the
// counter view; `toward_other` is the shift that backward-warps other into self.
inline BitMask consistency_gate(const Image& img_self, const Image& img_other,
                                const FloatMap& disp_self, const FloatMap& disp_other,
                                const FloatMap& matted_self, const FloatMap& matted_other,
                                Shift toward_other) {
  const auto photo_matted = warp_horizontal(img_other, matted_self, toward_other);
  const auto photo_initial = warp_horizontal(img_other, disp_self, toward_other);
  const auto lr_matted = warp_horizontal(matted_other, matted_self, toward_other);
  const auto lr_initial = warp_horizontal(disp_other, disp_self, toward_other);

  const int c = img_self.channels();
  BitMask mask(img_self.height(), img_self.width());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!photo_matted.valid(y, x) || !photo_initial.valid(y, x) || !lr_matted.valid(y, x) ||
          !lr_initial.valid(y, x))
        continue;
      double err_matted = 0.0;
      double err_initial = 0.0;
      for (int k = 0; k < c; ++k) {
        err_matted += std::abs(img_self(y, x, k) - photo_matted.image(y, x, k));
        err_initial += std::abs(img_self(y, x, k) - photo_initial.image(y, x, k));
      }
      err_matted /= c;
      err_initial /= c;
      const double lr_err_matted = std::abs(matted_self(y, x) - lr_matted.image(y, x));
      const double lr_err_initial = std::abs(disp_self(y, x) - lr_initial.image(y, x));
      mask(y, x) = (err_matted < err_initial && lr_err_matted < lr_err_initial) ? 1 : 0;
    }
  return mask;
}

}  // namespace detail

// Distillation mask for one view: 1 where the matted disparity both
// reconstructs the view better from its counterpart (channel-mean absolute
// error) and is more left-right consistent than the initial disparity. Pixels
// where any of the four warps leaves the frame are 0.
inline BitMask distillation_mask(const StereoSample& sample, const FloatMap& matted_left,
                                 const FloatMap& matted_right, View view = View::left) {
  sample.validate();
  require_same_extent(sample.disp_left, matted_left, "distillation_mask");
  require_same_extent(sample.disp_left, matted_right, "distillation_mask");
  if (view == View::left)
    return detail::consistency_gate(sample.img_left, sample.img_right, sample.disp_left,
                                    sample.disp_right, matted_left, matted_right, Shift::right);
  return detail::consistency_gate(sample.img_right, sample.img_left, sample.disp_right,
                                  sample.disp_left, matted_right, matted_left, Shift::left);
}

// Matted disparity of one view: solves against the view's photograph with the
// disparity normalized by its maximum as target, then denormalizes.
inline FloatMap solve_matted_disparity(const Image& guide, const FloatMap& initial,
                                       const FloatMap& confidence, const MattingParams& params) {
  require_same_extent(guide, initial, "solve_matted_disparity");
  const double peak = max_value(initial);
  if (!(peak > 0.0)) throw Error("solve_matted_disparity: max disparity must be > 0");
  FloatMap target(initial.height(), initial.width());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = initial[i] / peak;
  FloatMap matted = solve_matted(build_laplacian(guide, params), target, confidence, params);
  for (auto& v : matted.data()) v *= peak;
  return matted;
}

// Unit-confidence matting followed by 5x5 mean scaling against the initial
// disparity.
inline FloatMap matte_disparity(const Image& guide, const FloatMap& initial,
                                const MattingParams& params) {
  const FloatMap confidence(initial.height(), initial.width(), 1, 1.0);
  return local_mean_scale(solve_matted_disparity(guide, initial, confidence, params), initial);
}

inline DistillOutput distill_sample(const StereoSample& sample, const MattingParams& params) {
  sample.validate();
  DistillOutput out;
  out.matted_left = matte_disparity(sample.img_left, sample.disp_left, params);
  out.matted_right = matte_disparity(sample.img_right, sample.disp_right, params);
  out.mask_left = distillation_mask(sample, out.matted_left, out.matted_right, View::left);
  out.mask_right = distillation_mask(sample, out.matted_left, out.matted_right, View::right);
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

// Input row: left_img, right_img, left_disp, right_disp.
struct ManifestEntry {
  std::filesystem::path left_img;
  std::filesystem::path right_img;
  std::filesystem::path left_disp;
  std::filesystem::path right_disp;
};

// Output row: left_img, right_img, matted_left, matted_right, mask_left, mask_right.
struct DistilledEntry {
  std::filesystem::path left_img;
  std::filesystem::path right_img;
  std::filesystem::path matted_left;
  std::filesystem::path matted_right;
  std::filesystem::path mask_left;
  std::filesystem::path mask_right;

  bool operator==(const DistilledEntry&) const = default;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

// Blank lines and lines starting with '#' are ignored. Relative paths resolve
// against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 4)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated columns");
    entries.push_back({detail::resolve(base, cols[0]), detail::resolve(base, cols[1]),
                       detail::resolve(base, cols[2]), detail::resolve(base, cols[3])});
  }
  return entries;
}

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.left_img.string() << '\t' << e.right_img.string() << '\t' << e.left_disp.string()
       << '\t' << e.right_disp.string() << '\n';
  const std::string s = os.str();
  write_file_atomic(path, std::span<const char>(s.data(), s.size()));
}

inline void write_distilled_manifest(const std::vector<DistilledEntry>& entries,
                                     const std::filesystem::path& path) {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.left_img.string() << '\t' << e.right_img.string() << '\t'
       << e.matted_left.string() << '\t' << e.matted_right.string() << '\t'
       << e.mask_left.string() << '\t' << e.mask_right.string() << '\n';
  const std::string s = os.str();
  write_file_atomic(path, std::span<const char>(s.data(), s.size()));
}

inline std::vector<DistilledEntry> read_distilled_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::vector<DistilledEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (cols.size() != 6) throw IoError(path.string() + ": expected 6 tab-separated columns");
    entries.push_back({cols[0], cols[1], cols[2], cols[3], cols[4], cols[5]});
  }
  return entries;
}

inline StereoSample load_sample(const ManifestEntry& e) {
  StereoSample s{load_image(e.left_img), load_image(e.right_img), load_floatmap(e.left_disp),
                 load_floatmap(e.right_disp)};
  s.validate();
  return s;
}

inline DistilledEntry distilled_paths(const ManifestEntry& e, const std::filesystem::path& out_dir,
                                      std::size_t index) {
  char stem[32];
  std::snprintf(stem, sizeof stem, "sample_%06zu_", index);
  const std::string s(stem);
  return {e.left_img,
          e.right_img,
          out_dir / (s + "matted_left.pfm"),
          out_dir / (s + "matted_right.pfm"),
          out_dir / (s + "mask_left.pfm"),
          out_dir / (s + "mask_right.pfm")};
}

inline constexpr const char* kDistilledManifestName = "manifest.tsv";

struct DatasetOptions {
  MattingParams params;
  int jobs = 1;
  std::ostream* log = &std::cerr;
};

// Distills every manifest entry into out_dir, writing four PFMs per sample and
// out_dir/manifest.tsv. Samples whose four outputs already exist are not
// recomputed. A failing sample is logged and left out of the manifest.
inline std::vector<DistilledEntry> generate_matted_dataset(
    const std::vector<ManifestEntry>& entries, const std::filesystem::path& out_dir,
    const DatasetOptions& options = {}) {
  options.params.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory: " + out_dir.string());
  {
    const std::string probe = "probe";
    write_file_atomic(out_dir / ".write_probe", std::span<const char>(probe.data(), probe.size()));
    std::filesystem::remove(out_dir / ".write_probe", ec);
  }

  std::vector<std::optional<DistilledEntry>> results(entries.size());
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    *options.log << msg << '\n';
  };

  auto process = [&](std::size_t i) {
    const DistilledEntry paths = distilled_paths(entries[i], out_dir, i);
    namespace fs = std::filesystem;
    if (fs::exists(paths.matted_left) && fs::exists(paths.matted_right) &&
        fs::exists(paths.mask_left) && fs::exists(paths.mask_right)) {
      results[i] = paths;
      return;
    }
    try {
      const StereoSample sample = load_sample(entries[i]);
      const DistillOutput out = distill_sample(sample, options.params);
      store_floatmap(out.matted_left, paths.matted_left);
      store_floatmap(out.matted_right, paths.matted_right);
      store_bitmask(out.mask_left, paths.mask_left);
      store_bitmask(out.mask_right, paths.mask_right);
      results[i] = paths;
    } catch (const std::exception& e) {
      log("sample " + std::to_string(i) + " (" + entries[i].left_img.string() +
          ") skipped: " + e.what());
    }
  };

  const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(entries.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) process(i);
      });
  }

  std::vector<DistilledEntry> manifest;
  for (auto& r : results)
    if (r) manifest.push_back(std::move(*r));
  write_distilled_manifest(manifest, out_dir / kDistilledManifestName);
  return manifest;
}

}  // namespace stereokit
