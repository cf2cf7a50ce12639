#pragma once

// Image, float-map and mask IO. PFM ("Pf" gray / "PF" color, rows stored
// bottom-to-top, negative scale = little-endian) is the lossless interchange
// format; PNG is read as 8/16-bit gray or RGB and written as 8-bit RGB.
//
// Maps hold doubles but PFM stores float32, so stores round to float32.
// Anything loaded from a PFM survives store -> load bit-exactly.

#include <png.h>

#include <atomic>
#include <bit>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "stereokit/grid.hpp"

namespace stereokit {

namespace fs = std::filesystem;

// Writes bytes to a sibling temp file and renames it over `path`, so readers
// never observe a partially written file.
inline void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into place: " + path.string());
  }
}

inline std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// PFM

struct PfmData {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> values;  // top-to-bottom, channels interleaved
};

inline PfmData decode_pfm(std::span<const char> bytes, const std::string& name = "<pfm>") {
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) -> IoError {
    return IoError("invalid PFM " + name + ": " + why);
  };
  auto skip_space = [&] {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  };
  auto token = [&] {
    skip_space();
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos])))
      t += bytes[pos++];
    if (t.empty()) throw fail("truncated header");
    return t;
  };

  PfmData out;
  const std::string magic = token();
  if (magic == "Pf")
    out.channels = 1;
  else if (magic == "PF")
    out.channels = 3;
  else
    throw fail("bad magic '" + magic + "'");

  double scale = 0.0;
  try {
    out.width = std::stoi(token());
    out.height = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw fail("malformed header");
  }
  if (out.width <= 0 || out.height <= 0) throw fail("non-positive dimensions");
  if (scale == 0.0 || !std::isfinite(scale)) throw fail("bad scale");
  // exactly one whitespace byte separates the header from the raster
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw fail("missing raster separator");
  ++pos;

  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  if (bytes.size() - pos < count * sizeof(float)) throw fail("truncated raster");

  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;
  out.values.resize(count);
  const std::size_t row = static_cast<std::size_t>(out.width) * out.channels;
  for (int r = 0; r < out.height; ++r) {
    const int dst_row = out.height - 1 - r;
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + pos + (r * row + i) * sizeof(float), sizeof bits);
      if (file_little != host_little) bits = __builtin_bswap32(bits);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      if (!std::isfinite(v)) throw fail("non-finite sample");
      out.values[dst_row * row + i] = v;
    }
  }
  return out;
}

inline std::vector<char> encode_pfm(const PfmData& pfm) {
  if (pfm.channels != 1 && pfm.channels != 3) throw IoError("PFM supports 1 or 3 channels");
  std::ostringstream header;
  header << (pfm.channels == 3 ? "PF" : "Pf") << '\n'
         << pfm.width << ' ' << pfm.height << '\n'
         << (std::endian::native == std::endian::little ? "-1.0" : "1.0") << '\n';
  const std::string h = header.str();
  std::vector<char> bytes(h.begin(), h.end());
  const std::size_t row = static_cast<std::size_t>(pfm.width) * pfm.channels;
  bytes.reserve(bytes.size() + pfm.values.size() * sizeof(float));
  for (int r = pfm.height - 1; r >= 0; --r) {
    const char* src = reinterpret_cast<const char*>(pfm.values.data() + r * row);
    bytes.insert(bytes.end(), src, src + row * sizeof(float));
  }
  return bytes;
}

inline PfmData read_pfm(const fs::path& path) {
  const auto bytes = read_file(path);
  return decode_pfm(bytes, path.string());
}

template <typename G>
void store_pfm(const G& grid, const fs::path& path) {
  require_finite(grid, "store_pfm");
  PfmData pfm{grid.height(), grid.width(), grid.channels(), {}};
  pfm.values.reserve(grid.size());
  for (auto v : grid.data()) pfm.values.push_back(static_cast<float>(v));
  write_file_atomic(path, encode_pfm(pfm));
}

inline FloatMap load_floatmap(const fs::path& path) {
  PfmData pfm = read_pfm(path);
  if (pfm.channels != 1) throw IoError("expected single-channel PFM: " + path.string());
  FloatMap map(pfm.height, pfm.width);
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = pfm.values[i];
  return map;
}

inline void store_floatmap(const FloatMap& map, const fs::path& path) { store_pfm(map, path); }

inline BitMask load_bitmask(const fs::path& path) { return to_bitmask(load_floatmap(path)); }

inline void store_bitmask(const BitMask& mask, const fs::path& path) {
  store_pfm(to_floatmap(mask), path);
}

// ---------------------------------------------------------------------------
// PNG

namespace detail {

struct PngReadState {
  std::vector<std::uint8_t> raw;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::string error;
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
  if (state) state->error = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

// Plain C-style body: no objects with destructors live across setjmp.
inline bool png_read_raw(std::FILE* fp, PngReadState* state) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, state, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  state->width = png_get_image_width(png, info);
  state->height = png_get_image_height(png, info);
  state->bit_depth = png_get_bit_depth(png, info);
  state->color_type = png_get_color_type(png, info);
  if (state->bit_depth != 8 && state->bit_depth != 16) {
    state->error = "unsupported bit depth " + std::to_string(state->bit_depth);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (state->color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (state->bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  state->color_type = png_get_color_type(png, info);
  state->bit_depth = png_get_bit_depth(png, info);
  if ((state->color_type & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) {
    state->error = "alpha channel not supported";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  state->raw.resize(rowbytes * state->height);
  for (png_uint_32 y = 0; y < state->height; ++y)
    png_read_row(png, state->raw.data() + y * rowbytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool png_write_rgb8(std::FILE* fp, const std::uint8_t* rgb, png_uint_32 width,
                           png_uint_32 height) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < height; ++y)
    png_write_row(png, const_cast<std::uint8_t*>(rgb + y * width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

}  // namespace detail

inline Image load_png(const fs::path& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path.string());
  detail::PngReadState state;
  if (!detail::png_read_raw(fp.get(), &state))
    throw IoError("cannot decode PNG " + path.string() +
                  (state.error.empty() ? "" : ": " + state.error));
  const int channels = state.color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const std::size_t n = static_cast<std::size_t>(state.width) * state.height * channels;
  std::vector<double> data(n);
  if (state.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) data[i] = state.raw[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, state.raw.data() + 2 * i, sizeof v);
      data[i] = v / 65535.0;
    }
  }
  return make_image(static_cast<int>(state.height), static_cast<int>(state.width), channels,
                    std::move(data));
}

// Writes interleaved 8-bit RGB. No time or text chunks, so identical input
// produces identical bytes.
inline void store_png_rgb8(std::span<const std::uint8_t> rgb, int height, int width,
                           const fs::path& path) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
    throw ShapeError("store_png_rgb8: buffer size does not match shape");
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path.string());
    if (!detail::png_write_rgb8(fp.get(), rgb.data(), static_cast<png_uint_32>(width),
                                static_cast<png_uint_32>(height)))
      throw IoError("PNG encode failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into place: " + path.string());
}

// Loads an 8/16-bit PNG or a PFM as an Image. PFM samples are clamped to [0,1].
inline Image load_image(const fs::path& path) {
  auto ext = path.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == ".pfm") {
    PfmData pfm = read_pfm(path);
    return make_image(pfm.height, pfm.width, pfm.channels,
                      std::vector<double>(pfm.values.begin(), pfm.values.end()));
  }
  return load_png(path);
}

inline void store_image(const Image& img, const fs::path& path) { store_pfm(img, path); }

}  // namespace stereokit
