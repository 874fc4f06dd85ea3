#pragma once

// 8-bit RGB raster, the handful of fill/stroke primitives the generator
// needs, and PNG / base64 encoding. Pixel (i, j) has its center at (i, j).

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "linecaptcha/geometry.hpp"

namespace linecaptcha {

struct Rgb {
  std::uint8_t r{0};
  std::uint8_t g{0};
  std::uint8_t b{0};

  friend constexpr bool operator==(Rgb, Rgb) = default;
};

/// h in degrees (any real, wrapped), s and v in [0, 1].
inline Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  s = std::clamp(s, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  auto to8 = [](double u) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(u * 255.0), 0L, 255L));
  };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

/// Hue in degrees [0, 360); 0 for greys.
inline double hue_of(Rgb c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  if (d <= 0.0) return 0.0;
  double h;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  return h < 0.0 ? h + 360.0 : h;
}

/// Circular distance between two hues, in degrees.
inline double hue_distance(double a, double b) {
  const double d = std::fmod(std::fabs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("RasterImage: empty dimensions");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const Rgb> pixels() const { return pixels_; }
  std::span<Rgb> pixels() { return pixels_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_{0};
  int height_{0};
  std::vector<Rgb> pixels_;
};

// Drawing primitives. All clip to the image.

inline void fill_ellipse(RasterImage& img, Point center, double rx, double ry, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - rx)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(center.x + rx)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - ry)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(center.y + ry)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x - center.x) / rx;
      const double dy = (y - center.y) / ry;
      if (dx * dx + dy * dy <= 1.0) img.at(x, y) = color;
    }
  }
}

inline void fill_rect(RasterImage& img, Point top_left, double w, double h, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(top_left.x)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::floor(top_left.x + w)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(top_left.y)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::floor(top_left.y + h)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) img.at(x, y) = color;
  }
}

/// Disc-swept stroke: paints every pixel whose center lies within
/// width/2 of the path.
inline void stroke_path(RasterImage& img, std::span<const Point> path, double width, Rgb color) {
  const double r = width / 2.0;
  auto paint_segment = [&](Point a, Point b) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
    const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
    const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (point_segment_distance({static_cast<double>(x), static_cast<double>(y)}, a, b) <= r) {
          img.at(x, y) = color;
        }
      }
    }
  };
  if (path.size() == 1) {
    paint_segment(path[0], path[0]);
    return;
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) paint_segment(path[i], path[i + 1]);
}

/// Stroked circular arc from angle a0 sweeping `sweep` radians.
inline void stroke_arc(RasterImage& img, Point center, double radius, double a0, double sweep,
                       double width, Rgb color) {
  const int steps = std::max(8, static_cast<int>(std::ceil(std::fabs(sweep) * radius / 2.0)));
  std::vector<Point> pts;
  pts.reserve(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double a = a0 + sweep * k / steps;
    pts.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  stroke_path(img, pts, width, color);
}

// PNG encoding (8-bit RGB, no alpha, filter type 0).

namespace detail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5],
                      std::span<const std::uint8_t> data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * w));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < w; ++x) {
      const Rgb c = img.at(x, y);
      raw.push_back(c.r);
      raw.push_back(c.g);
      raw.push_back(c.b);
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw std::runtime_error("encode_png: deflate failed");
  }
  z.resize(zlen);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  detail::put_u32be(ihdr, static_cast<std::uint32_t>(w));
  detail::put_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, truecolor, deflate, filter 0, no interlace
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", z);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::string base64_encode(std::span<const std::uint8_t> data, bool url_safe = false) {
  static constexpr std::string_view kStd =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  static constexpr std::string_view kUrl =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  const std::string_view alphabet = url_safe ? kUrl : kStd;
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
  }
  const std::size_t rest = data.size() - i;
  if (rest > 0) {
    std::uint32_t v = data[i] << 16;
    if (rest == 2) v |= data[i + 1] << 8;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    if (rest == 2) out += alphabet[(v >> 6) & 63];
    // url-safe tokens are emitted without padding
    if (!url_safe) out.append(rest == 1 ? "==" : "=");
  }
  return out;
}

}  // namespace linecaptcha
