#include "rhflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rhflow {

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

Grid::Grid(int dim, std::array<int, 2> n_points, std::array<double, 2> length)
    : dim_(dim), n_(n_points), length_(length) {
  if (dim != 1 && dim != 2) {
    throw Error("grid: dim must be 1 or 2, got " + std::to_string(dim));
  }
  if (dim == 1) {
    n_[1] = 1;
    length_[1] = 1.0;
  }
  for (int a = 0; a < dim; ++a) {
    if (n_[a] < 8) {
      throw Error("grid: n_points must be >= 8 on every axis");
    }
    if (!(length_[a] > 0.0) || !std::isfinite(length_[a])) {
      throw Error("grid: length must be positive and finite");
    }
    h_[a] = length_[a] / n_[a];
  }
  if (dim == 1) h_[1] = 1.0;
  size_ = static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]);
}

Grid Grid::line(int n, double length) { return Grid(1, {n, 1}, {length, 1.0}); }

Grid Grid::square(int n, double length) {
  return Grid(2, {n, n}, {length, length});
}

double Grid::h_min() const { return dim_ == 1 ? h_[0] : std::min(h_[0], h_[1]); }
double Grid::h_max() const { return dim_ == 1 ? h_[0] : std::max(h_[0], h_[1]); }
double Grid::cell_volume() const { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }

std::size_t Grid::index(int i, int j) const {
  return static_cast<std::size_t>(wrap(i, n_[0])) +
         static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(wrap(j, n_[1]));
}

std::array<int, 2> Grid::coords(std::size_t node) const {
  return {static_cast<int>(node % n_[0]), static_cast<int>(node / n_[0])};
}

std::size_t Grid::offset(std::size_t node, int di, int dj) const {
  const auto c = coords(node);
  return index(c[0] + di, c[1] + dj);
}

std::size_t Grid::neighbor(std::size_t node, int axis, int step) const {
  return axis == 0 ? offset(node, step, 0) : offset(node, 0, step);
}

double Grid::coordinate(std::size_t node, int axis) const {
  return coords(node)[axis] * h_[axis];
}

int Grid::wrapped_delta(int from, int to, int axis) const {
  const int n = n_[axis];
  int d = wrap(to - from, n);
  if (d > n / 2) d -= n;
  return d;
}

bool Grid::operator==(const Grid& other) const {
  return dim_ == other.dim_ && n_ == other.n_ && length_ == other.length_;
}

std::string Grid::describe() const {
  std::ostringstream os;
  os << "T^" << dim_ << " " << n_[0];
  if (dim_ == 2) os << "x" << n_[1];
  os << " nodes, length " << length_[0];
  if (dim_ == 2) os << "x" << length_[1];
  return os.str();
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) {
    throw Error(std::string(what) + ": fields live on different grids (" +
                a.describe() + " vs " + b.describe() + ")");
  }
}

}  // namespace rhflow
