#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "navcost/errors.hpp"

namespace navcost {

// 8-bit single channel raster, row-major, (0,0) at the top-left pixel.
// Pixel (c, r) has its center at continuous coordinate (c, r).
struct GrayImage {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw InvalidArgument("GrayImage: negative dimensions");
  }

  std::size_t index(int c, int r) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c);
  }
  std::uint8_t& at(int c, int r) { return pixels[index(c, r)]; }
  std::uint8_t at(int c, int r) const { return pixels[index(c, r)]; }
  bool contains(int c, int r) const { return c >= 0 && r >= 0 && c < width && r < height; }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

enum class MaskClass : std::uint8_t { Unknown = 0, Obstacle = 128, Traversable = 255 };

inline constexpr std::uint8_t code(MaskClass c) { return static_cast<std::uint8_t>(c); }

inline bool is_class_code(std::uint8_t v) {
  return v == code(MaskClass::Unknown) || v == code(MaskClass::Obstacle) ||
         v == code(MaskClass::Traversable);
}

// Camera-frame label image. Only the three MaskClass codes may appear.
struct PathMask {
  GrayImage codes;

  PathMask() = default;
  PathMask(int w, int h, MaskClass fill = MaskClass::Unknown) : codes(w, h, code(fill)) {}

  int width() const { return codes.width; }
  int height() const { return codes.height; }
  MaskClass at(int c, int r) const { return static_cast<MaskClass>(codes.at(c, r)); }
  void set(int c, int r, MaskClass m) { codes.at(c, r) = code(m); }
  bool traversable(int c, int r) const { return codes.at(c, r) == code(MaskClass::Traversable); }

  std::size_t count(MaskClass m) const {
    return static_cast<std::size_t>(std::count(codes.pixels.begin(), codes.pixels.end(), code(m)));
  }

  friend bool operator==(const PathMask&, const PathMask&) = default;
};

inline void require_same_dims(const GrayImage& a, const GrayImage& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    std::ostringstream os;
    os << what << ": " << a.width << "x" << a.height << " vs " << b.width << "x" << b.height;
    throw DimensionMismatch(os.str());
  }
}

inline void require_same_dims(const PathMask& a, const PathMask& b, const char* what) {
  require_same_dims(a.codes, b.codes, what);
}

// ---------------------------------------------------------------------------
// PGM (P5, maxval 255)

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace detail {

inline std::string pgm_token(std::istream& in, const std::string& name) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty()) throw IoError("truncated PGM header: " + name);
  return tok;
}

}  // namespace detail

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::string name = path.string();
  if (detail::pgm_token(in, name) != "P5") throw IoError("not a binary PGM (P5): " + name);
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pgm_token(in, name));
    h = std::stoi(detail::pgm_token(in, name));
    maxval = std::stoi(detail::pgm_token(in, name));
  } catch (const std::logic_error&) {
    throw IoError("malformed PGM header: " + name);
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PGM geometry or depth: " + name);
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw IoError("truncated PGM data: " + name);
  return img;
}

// ---------------------------------------------------------------------------
// Horizontal window extraction and rescaling.

// Takes columns [x0, x0 + crop_width) (clamped to the border) and stretches them
// back to the source width. Bilinear interpolation along x.
inline GrayImage crop_rescale_bilinear(const GrayImage& src, int x0, int crop_width) {
  GrayImage out(src.width, src.height);
  const double scale = static_cast<double>(crop_width) / static_cast<double>(src.width);
  for (int c = 0; c < src.width; ++c) {
    const double sx = x0 + (c + 0.5) * scale - 0.5;
    const double fl = std::floor(sx);
    const double t = sx - fl;
    const int a = std::clamp(static_cast<int>(fl), 0, src.width - 1);
    const int b = std::clamp(static_cast<int>(fl) + 1, 0, src.width - 1);
    for (int r = 0; r < src.height; ++r) {
      const double v = (1.0 - t) * src.at(a, r) + t * src.at(b, r);
      out.at(c, r) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

// Nearest-neighbour variant; class codes survive unchanged.
inline GrayImage crop_rescale_nearest(const GrayImage& src, int x0, int crop_width) {
  GrayImage out(src.width, src.height);
  const double scale = static_cast<double>(crop_width) / static_cast<double>(src.width);
  for (int c = 0; c < src.width; ++c) {
    const double sx = x0 + (c + 0.5) * scale;
    const int a = std::clamp(static_cast<int>(std::floor(sx)), 0, src.width - 1);
    for (int r = 0; r < src.height; ++r) out.at(c, r) = src.at(a, r);
  }
  return out;
}

inline GrayImage mirror_horizontal(const GrayImage& src) {
  GrayImage out(src.width, src.height);
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < src.width; ++c) out.at(c, r) = src.at(src.width - 1 - c, r);
  return out;
}

}  // namespace navcost
