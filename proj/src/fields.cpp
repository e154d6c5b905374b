#include "rhflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rhflow {

MetricDegenerate::MetricDegenerate(std::size_t node, const std::string& detail)
    : Error("metric degenerate at node " + std::to_string(node) + ": " + detail),
      node_(node) {}

Mat2& Mat2::operator+=(const Mat2& o) {
  for (int k = 0; k < 4; ++k) a[k] += o.a[k];
  return *this;
}

Mat2& Mat2::operator-=(const Mat2& o) {
  for (int k = 0; k < 4; ++k) a[k] -= o.a[k];
  return *this;
}

Mat2& Mat2::operator*=(double s) {
  for (double& x : a) x *= s;
  return *this;
}

double trace(const Mat2& m, int dim) { return dim == 1 ? m(0, 0) : m(0, 0) + m(1, 1); }

double det(const Mat2& m, int dim) {
  return dim == 1 ? m(0, 0) : m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

Mat2 inverse(const Mat2& m, int dim) {
  const double d = det(m, dim);
  if (!(std::abs(d) > 0.0) || !std::isfinite(d)) {
    throw MetricDegenerate(0, "singular matrix");
  }
  if (dim == 1) return Mat2{{1.0 / d, 0.0, 0.0, 0.0}};
  return Mat2{{m(1, 1) / d, -m(0, 1) / d, -m(1, 0) / d, m(0, 0) / d}};
}

Mat2 symmetrized(const Mat2& m) {
  Mat2 s = m;
  const double off = 0.5 * (m(0, 1) + m(1, 0));
  s(0, 1) = off;
  s(1, 0) = off;
  return s;
}

std::pair<double, double> sym_eigen(const Mat2& m, int dim) {
  if (dim == 1) return {m(0, 0), m(0, 0)};
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  const double off = 0.5 * (m(0, 1) + m(1, 0));
  const double r = std::hypot(half_diff, off);
  return {mean - r, mean + r};
}

std::pair<double, double> generalized_eigen(const Mat2& A, const Mat2& g, int dim) {
  if (dim == 1) {
    const double l = A(0, 0) / g(0, 0);
    return {l, l};
  }
  // Whiten with the Cholesky factor of g: L^{-1} A L^{-T} is symmetric.
  const double l00 = std::sqrt(g(0, 0));
  const double l10 = g(1, 0) / l00;
  const double l11 = std::sqrt(std::max(g(1, 1) - l10 * l10, 0.0));
  // B = L^{-1} A L^{-T}
  const double i00 = 1.0 / l00;
  const double i11 = 1.0 / l11;
  const double i10 = -l10 * i00 * i11;
  const double a00 = A(0, 0), a01 = 0.5 * (A(0, 1) + A(1, 0)), a11 = A(1, 1);
  // rows of L^{-1}: (i00, 0), (i10, i11)
  const double b00 = i00 * i00 * a00;
  const double b01 = i00 * (i10 * a00 + i11 * a01);
  const double b11 = i10 * i10 * a00 + 2.0 * i10 * i11 * a01 + i11 * i11 * a11;
  return sym_eigen(Mat2{{b00, b01, b01, b11}}, 2);
}

double contract_full(const Mat2& ginv, const Mat2& A, const Mat2& B, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) s += ginv(i, a) * ginv(j, b) * A(a, b) * B(i, j);
  return s;
}

const char* to_string(ScalarTag tag) {
  switch (tag) {
    case ScalarTag::generic: return "generic";
    case ScalarTag::u: return "u";
    case ScalarTag::f: return "f";
    case ScalarTag::R: return "R";
    case ScalarTag::energy_density: return "energy_density";
    case ScalarTag::S: return "S";
    case ScalarTag::F: return "F";
    case ScalarTag::lhs: return "estimate-LHS";
    case ScalarTag::rhs: return "estimate-RHS";
    case ScalarTag::distance: return "distance";
  }
  return "generic";
}

ScalarField::ScalarField(Grid g, std::vector<double> v, ScalarTag t)
    : grid(std::move(g)), values(std::move(v)), tag(t) {
  if (values.size() != grid.size()) {
    throw Error("scalar field: value count does not match grid size");
  }
  if (tag == ScalarTag::u) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] > 0.0)) {
        throw Error("scalar field u must be strictly positive (node " +
                    std::to_string(i) + ")");
      }
    }
  }
}

void check_positive_definite(const Mat2& m, int dim, std::size_t node) {
  for (double x : m.a) {
    if (!std::isfinite(x)) throw MetricDegenerate(node, "non-finite component");
  }
  if (dim == 2 && m(0, 1) != m(1, 0)) throw MetricDegenerate(node, "not symmetric");
  const double tr = trace(m, dim);
  const double lmin = sym_eigen(m, dim).first;
  if (!(tr > 0.0) || !(lmin > 1e-12 * tr)) {
    throw MetricDegenerate(node, "smallest eigenvalue " + std::to_string(lmin) +
                                     " below 1e-12*trace");
  }
}

MetricField::MetricField(Grid grid, std::vector<Mat2> values)
    : grid_(std::move(grid)), g_(std::move(values)) {
  if (g_.size() != grid_.size()) {
    throw Error("metric field: value count does not match grid size");
  }
  const int n = grid_.dim();
  ginv_.resize(g_.size());
  sqrt_det_.resize(g_.size());
  for (std::size_t i = 0; i < g_.size(); ++i) {
    if (n == 1) {
      g_[i](0, 1) = g_[i](1, 0) = g_[i](1, 1) = 0.0;
    }
    check_positive_definite(g_[i], n, i);
    ginv_[i] = rhflow::inverse(g_[i], n);
    sqrt_det_[i] = std::sqrt(det(g_[i], n));
  }
}

MetricField MetricField::flat(const Grid& grid) {
  return MetricField(grid, std::vector<Mat2>(grid.size(), Mat2::identity()));
}

double MetricField::min_eigenvalue() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& g : g_) m = std::min(m, sym_eigen(g, dim()).first);
  return m;
}

MetricField MetricField::scaled(double c) const {
  std::vector<Mat2> v = g_;
  for (auto& m : v) m *= c;
  return MetricField(grid_, std::move(v));
}

MapField::MapField(Grid g, int d, double fill)
    : grid(std::move(g)), components(static_cast<std::size_t>(d),
                                     std::vector<double>(grid.size(), fill)) {
  if (d < 1) throw Error("map field: target dimension d must be >= 1");
}

ScalarField MapField::component(int mu) const {
  return ScalarField(grid, components.at(static_cast<std::size_t>(mu)));
}

void check_finite(const MapField& phi, const char* what) {
  for (const auto& c : phi.components) {
    for (double x : c) {
      if (!std::isfinite(x)) throw Error(std::string(what) + ": map value not finite");
    }
  }
}

}  // namespace rhflow
