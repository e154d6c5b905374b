#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rhflow/grid.hpp"

namespace rhflow {

/// Raised when a metric fails the positive-definiteness gate at some node.
class MetricDegenerate : public Error {
 public:
  MetricDegenerate(std::size_t node, const std::string& detail);
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Small dense 2x2 matrix.  On a 1D grid only entry (0,0) is meaningful.
struct Mat2 {
  std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};

  double& operator()(int i, int j) { return a[2 * i + j]; }
  double operator()(int i, int j) const { return a[2 * i + j]; }

  static Mat2 identity() { return Mat2{{1.0, 0.0, 0.0, 1.0}}; }
  static Mat2 diagonal(double d0, double d1) { return Mat2{{d0, 0.0, 0.0, d1}}; }

  Mat2& operator+=(const Mat2& o);
  Mat2& operator-=(const Mat2& o);
  Mat2& operator*=(double s);
  friend Mat2 operator+(Mat2 x, const Mat2& y) { return x += y; }
  friend Mat2 operator-(Mat2 x, const Mat2& y) { return x -= y; }
  friend Mat2 operator*(Mat2 x, double s) { return x *= s; }
  friend Mat2 operator*(double s, Mat2 x) { return x *= s; }
  bool operator==(const Mat2&) const = default;
};

double trace(const Mat2& m, int dim);
double det(const Mat2& m, int dim);
/// Inverse of a symmetric matrix; throws MetricDegenerate (node 0) if singular.
Mat2 inverse(const Mat2& m, int dim);
/// Averages the off-diagonal pair so the matrix is exactly symmetric.
Mat2 symmetrized(const Mat2& m);
/// Eigenvalues (ascending) of a symmetric matrix.
std::pair<double, double> sym_eigen(const Mat2& m, int dim);
/// Eigenvalues (ascending) of A relative to the positive-definite g,
/// i.e. roots of det(A - lambda g) = 0.
std::pair<double, double> generalized_eigen(const Mat2& A, const Mat2& g, int dim);
/// g^{ik} A_kl g^{lj} A'_ij style contraction: returns g^{ia} g^{jb} A_ab B_ij.
double contract_full(const Mat2& ginv, const Mat2& A, const Mat2& B, int dim);

enum class ScalarTag { generic, u, f, R, energy_density, S, F, lhs, rhs, distance };
enum class TensorTag { generic, metric, ricci, grad_phi_outer, s_tensor, hessian };

const char* to_string(ScalarTag tag);

struct ScalarField {
  Grid grid;
  std::vector<double> values;
  ScalarTag tag = ScalarTag::generic;

  ScalarField() = default;
  ScalarField(Grid g, ScalarTag t = ScalarTag::generic, double fill = 0.0)
      : grid(std::move(g)), values(grid.size(), fill), tag(t) {}
  ScalarField(Grid g, std::vector<double> v, ScalarTag t = ScalarTag::generic);

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

struct TensorField2 {
  Grid grid;
  std::vector<Mat2> values;
  TensorTag tag = TensorTag::generic;

  TensorField2() = default;
  TensorField2(Grid g, TensorTag t = TensorTag::generic)
      : grid(std::move(g)), values(grid.size()), tag(t) {}

  Mat2& operator[](std::size_t i) { return values[i]; }
  const Mat2& operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

/// Riemannian metric sampled on the grid: symmetric and positive definite
/// at every node (checked on construction).
class MetricField {
 public:
  MetricField() = default;
  MetricField(Grid grid, std::vector<Mat2> values);

  static MetricField flat(const Grid& grid);

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  std::size_t size() const { return g_.size(); }
  const Mat2& operator[](std::size_t i) const { return g_[i]; }
  const std::vector<Mat2>& values() const { return g_; }
  const Mat2& inverse(std::size_t i) const { return ginv_[i]; }
  double sqrt_det(std::size_t i) const { return sqrt_det_[i]; }
  /// Smallest eigenvalue of g over all nodes.
  double min_eigenvalue() const;
  /// Returns a copy with every component multiplied by c > 0.
  MetricField scaled(double c) const;

 private:
  Grid grid_;
  std::vector<Mat2> g_;
  std::vector<Mat2> ginv_;
  std::vector<double> sqrt_det_;
};

/// Throws MetricDegenerate unless m is PD with eigenvalue threshold
/// 1e-12 * trace(m).
void check_positive_definite(const Mat2& m, int dim, std::size_t node);

/// Map phi: M -> R^d, stored one scalar array per target component.
struct MapField {
  Grid grid;
  std::vector<std::vector<double>> components;

  MapField() = default;
  MapField(Grid g, int d, double fill = 0.0);

  int d() const { return static_cast<int>(components.size()); }
  ScalarField component(int mu) const;
};

void check_finite(const MapField& phi, const char* what);

}  // namespace rhflow
