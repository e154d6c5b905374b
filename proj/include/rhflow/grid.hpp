#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace rhflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Periodic structured lattice covering the chart of a torus T^1 or T^2.
///
/// Nodes are stored x-fastest: node = i + n_x * j.  All index arithmetic
/// wraps on every axis.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, std::array<int, 2> n_points, std::array<double, 2> length);

  static Grid line(int n, double length);
  static Grid square(int n, double length);

  int dim() const { return dim_; }
  int n(int axis) const { return n_[axis]; }
  double length(int axis) const { return length_[axis]; }
  double h(int axis) const { return h_[axis]; }
  double h_min() const;
  double h_max() const;
  /// Volume of one lattice cell, h_x (* h_y).
  double cell_volume() const;
  std::size_t size() const { return size_; }

  std::size_t index(int i, int j = 0) const;
  std::array<int, 2> coords(std::size_t node) const;
  /// Node reached from `node` by moving (di, dj) cells, wrapped.
  std::size_t offset(std::size_t node, int di, int dj = 0) const;
  /// Node reached by one cell along `axis` in direction `step` (+1 / -1).
  std::size_t neighbor(std::size_t node, int axis, int step) const;
  double coordinate(std::size_t node, int axis) const;

  /// Shortest signed displacement in cells between two indices on an axis.
  int wrapped_delta(int from, int to, int axis) const;

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

  std::string describe() const;

 private:
  int dim_ = 1;
  std::array<int, 2> n_{8, 1};
  std::array<double, 2> length_{1.0, 1.0};
  std::array<double, 2> h_{0.125, 1.0};
  std::size_t size_ = 8;
};

/// Throws if two grids differ; `what` names the operation for the message.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace rhflow
