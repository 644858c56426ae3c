#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "clm/core_map.hpp"

namespace clm {

// A rectangular window split into width x height cells. Row 0 is the bottom
// row (smallest y); images flip it when written.
struct grid_spec {
  rect window;
  int width = 0;
  int height = 0;

  grid_spec() = default;
  grid_spec(rect w, int nx, int ny) : window(w), width(nx), height(ny) {
    if (!w.valid()) throw error(error_code::invalid_argument, "window must have positive area");
    if (nx < 1 || ny < 1) throw error(error_code::invalid_argument, "resolution must be positive");
  }

  std::size_t cell_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double cell_width() const { return window.width() / width; }
  double cell_height() const { return window.height() / height; }
  double cell_area() const { return cell_width() * cell_height(); }

  plane_point cell_center(int i, int j) const {
    return {window.x0 + (i + 0.5) * cell_width(), window.y0 + (j + 0.5) * cell_height()};
  }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }

  std::optional<std::size_t> cell_of(plane_point z) const {
    if (!(z.x >= window.x0 && z.x < window.x1 && z.y >= window.y0 && z.y < window.y1)) return std::nullopt;
    int i = static_cast<int>((z.x - window.x0) / cell_width());
    int j = static_cast<int>((z.y - window.y0) / cell_height());
    if (i >= width) i = width - 1;
    if (j >= height) j = height - 1;
    return index(i, j);
  }

  friend bool operator==(const grid_spec& a, const grid_spec& b) {
    return a.width == b.width && a.height == b.height && a.window.x0 == b.window.x0 && a.window.x1 == b.window.x1 &&
           a.window.y0 == b.window.y0 && a.window.y1 == b.window.y1;
  }
};

template <class T>
struct raster {
  grid_spec grid;
  std::vector<T> cells;

  raster() = default;
  raster(const grid_spec& g, T fill) : grid(g), cells(g.cell_count(), fill) {}

  T& at(int i, int j) { return cells[grid.index(i, j)]; }
  const T& at(int i, int j) const { return cells[grid.index(i, j)]; }
  int width() const { return grid.width; }
  int height() const { return grid.height; }
};

// Packed set of cells of a grid.
class cell_set {
 public:
  cell_set() = default;
  explicit cell_set(std::size_t n) : bits_((n + 63) / 64, 0), size_(n) {}

  void insert(std::size_t i) { bits_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  bool contains(std::size_t i) const { return (bits_[i >> 6] >> (i & 63)) & 1u; }
  std::size_t universe() const { return size_; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : bits_) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }

  std::size_t intersection_count(const cell_set& o) const {
    std::size_t c = 0;
    for (std::size_t k = 0; k < bits_.size(); ++k) c += static_cast<std::size_t>(__builtin_popcountll(bits_[k] & o.bits_[k]));
    return c;
  }

  void clear() { std::fill(bits_.begin(), bits_.end(), 0); }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < bits_.size(); ++k) {
      auto w = bits_[k];
      while (w) {
        int b = __builtin_ctzll(w);
        out.push_back(k * 64 + static_cast<std::size_t>(b));
        w &= w - 1;
      }
    }
    return out;
  }

  bool operator==(const cell_set&) const = default;

 private:
  std::vector<std::uint64_t> bits_;
  std::size_t size_ = 0;
};

}  // namespace clm
