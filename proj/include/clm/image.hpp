#pragma once

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "clm/bifurcation.hpp"
#include "clm/polyline.hpp"
#include "clm/raster.hpp"

namespace clm {

struct rgb_image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first, 3 bytes per pixel

  rgb_image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    auto* px = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    px[0] = c[0];
    px[1] = c[1];
    px[2] = c[2];
  }
};

// Fills an image from grid cells; grid row 0 (bottom) becomes the last image row.
template <class Fn>
rgb_image paint(const grid_spec& g, Fn&& color_of_cell) {
  rgb_image img(g.width, g.height);
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i) img.set(i, g.height - 1 - j, color_of_cell(g.index(i, j)));
  return img;
}

// Bounded cells black, escaped cells on a grey ramp by escape step.
inline rgb_image paint_escape(const escape_raster& r) {
  return paint(r.grid, [&](std::size_t c) -> std::array<std::uint8_t, 3> {
    const int k = r.cells[c];
    if (k == bounded_cell) return {0, 0, 0};
    const int v = 255 - std::min(k, 12) * 15;
    return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v)};
  });
}

inline std::array<std::uint8_t, 3> label_color(int label) {
  if (label < 0) return {0, 0, 0};
  std::uint32_t h = static_cast<std::uint32_t>(label) * 2654435761u;
  h ^= h >> 15;
  return {static_cast<std::uint8_t>(64 + (h & 0xBF)), static_cast<std::uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<std::uint8_t>(64 + ((h >> 16) & 0xBF))};
}

inline rgb_image paint_labels(const component_labeling& l) {
  return paint(l.grid, [&](std::size_t c) { return label_color(l.labels[c]); });
}

inline rgb_image paint_basin(const basin_raster& b) {
  return paint(b.grid, [&](std::size_t c) -> std::array<std::uint8_t, 3> {
    switch (b.cells[c]) {
      case basin_cell::this_attractor: return {200, 40, 40};
      case basin_cell::other_bounded: return {40, 40, 160};
      case basin_cell::escaped: return {255, 255, 255};
      case basin_cell::unclassified: return {120, 120, 120};
    }
    return {0, 0, 0};
  });
}

inline rgb_image paint_attractor(const attractor_estimate& a) {
  return paint(a.grid, [&](std::size_t c) -> std::array<std::uint8_t, 3> {
    if (!a.occupied.contains(c)) return {255, 255, 255};
    return {0, 0, 0};
  });
}

inline rgb_image paint_loci(const loci_raster& d) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 5> colors{
      {{200, 30, 30}, {30, 30, 200}, {30, 150, 30}, {200, 120, 0}, {140, 0, 160}}};
  return paint(d.grid, [&](std::size_t c) -> std::array<std::uint8_t, 3> {
    for (std::size_t k = 0; k < all_loci.size(); ++k)
      if (d.cells[c] & static_cast<std::uint8_t>(all_loci[k])) return colors[k];
    return {255, 255, 255};
  });
}

// Black points on white; points outside the window are dropped.
inline rgb_image plot_points(const grid_spec& g, const std::vector<plane_point>& pts) {
  std::vector<char> hit(g.cell_count(), 0);
  for (auto z : pts)
    if (auto c = g.cell_of(z)) hit[*c] = 1;
  return paint(g, [&](std::size_t c) -> std::array<std::uint8_t, 3> {
    if (hit[c]) return {0, 0, 0};
    return {255, 255, 255};
  });
}

// Curves sampled at half-cell spacing, then plotted as points.
inline rgb_image plot_curves(const grid_spec& g, const std::vector<polyline>& curves) {
  std::vector<plane_point> pts;
  const double step = 0.5 * std::min(g.cell_width(), g.cell_height());
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.segment_count(); ++i) {
      const auto a = c.seg_a(i), b = c.seg_b(i);
      const int n = std::max(1, static_cast<int>(std::ceil(dist(a, b) / step)));
      for (int k = 0; k <= n; ++k) pts.push_back(lerp(a, b, static_cast<double>(k) / n));
    }
  return plot_points(g, pts);
}

inline std::string encode_ppm(const rgb_image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

namespace detail {

inline void put_be32(std::string& s, std::uint32_t v) {
  for (int k = 3; k >= 0; --k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

inline void png_chunk(std::string& out, const char* type, const std::string& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_be32(out, static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

}  // namespace detail

inline std::string encode_png(const rgb_image& img) {
  std::string raw;
  const std::size_t row = static_cast<std::size_t>(img.width) * 3;
  raw.reserve((row + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(&img.pixels[y * row]), row);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw error(error_code::io_error, "png compression failed");
  z.resize(len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", z);
  detail::png_chunk(out, "IEND", "");
  return out;
}

// Writes PNG for a .png suffix, binary PPM otherwise.
inline void write_image(const rgb_image& img, const std::string& path) {
  const bool png = path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw error(error_code::io_error, "cannot open " + path);
  const std::string bytes = png ? encode_png(img) : encode_ppm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw error(error_code::io_error, "write failed: " + path);
}

}  // namespace clm
