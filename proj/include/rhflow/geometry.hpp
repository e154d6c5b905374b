#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "rhflow/fields.hpp"

namespace rhflow {

/// Per-node covector (d_x s, d_y s); the y entry is zero on 1D grids.
using Covector = std::array<double, 2>;

struct CovectorField {
  Grid grid;
  std::vector<Covector> values;
};

/// Christoffel symbols of the second kind, Gamma^k_ij, per node.
struct ChristoffelField {
  Grid grid;
  std::vector<std::array<double, 8>> values;

  double operator()(std::size_t node, int k, int i, int j) const {
    return values[node][4 * k + 2 * i + j];
  }
};

/// Centered second-order periodic difference along `axis`.
std::vector<double> partial(const Grid& grid, std::span<const double> v, int axis);

ChristoffelField christoffel(const MetricField& g);
TensorField2 ricci(const MetricField& g);
TensorField2 ricci(const MetricField& g, const ChristoffelField& gamma);
ScalarField scalar_curvature(const MetricField& g);
ScalarField trace(const MetricField& g, const TensorField2& t);

/// Laplace-Beltrami operator in divergence form with its coefficients
/// sqrt(det g) g^{ij} cached, so repeated application on a frozen metric
/// is cheap.
///
/// Diagonal fluxes live on cell faces (face-averaged coefficients); the
/// mixed g^{xy} fluxes live at cell centres with corner-averaged
/// coefficients.  The result is -W^{-1} D^T A D, hence self-adjoint with
/// respect to the sqrt(det g) weighted inner product, and the weighted
/// sum of (Laplacian s) telescopes to zero.
class LaplaceBeltrami {
 public:
  explicit LaplaceBeltrami(const MetricField& g);

  void apply(std::span<const double> s, std::span<double> out) const;
  ScalarField operator()(const ScalarField& s) const;

  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
  std::vector<double> inv_sqrt_det_;
  std::vector<double> face_x_;  // a^{xx} at (i+1/2, j)
  std::vector<double> face_y_;  // a^{yy} at (i, j+1/2)
  std::vector<double> cell_xy_; // a^{xy} at (i+1/2, j+1/2)
};

ScalarField laplace_beltrami(const MetricField& g, const ScalarField& s);

CovectorField gradient(const ScalarField& s);
ScalarField gradient_norm_sq(const MetricField& g, const ScalarField& s);
/// g^{ij} a_i b_j per node.
ScalarField inner(const MetricField& g, const CovectorField& a, const CovectorField& b);

TensorField2 hessian(const MetricField& g, const ScalarField& s);
TensorField2 hessian(const MetricField& g, const ChristoffelField& gamma,
                     const ScalarField& s);

TensorField2 grad_phi_outer(const MetricField& g, const MapField& phi);
ScalarField energy_density(const MetricField& g, const MapField& phi);
TensorField2 s_tensor(const MetricField& g, const MapField& phi, double alpha);
ScalarField s_scalar(const MetricField& g, const MapField& phi, double alpha);
MapField tension_field(const MetricField& g, const MapField& phi);

/// g^{kl} nabla_k nabla_l omega_i for a covector field omega.
CovectorField rough_laplacian(const MetricField& g, const ChristoffelField& gamma,
                              const CovectorField& omega);

/// Graph distance from node x0 over the 8-neighbour (2-neighbour in 1D)
/// lattice graph; an edge costs the length of its chart segment under the
/// endpoint-averaged metric.  Label-setting sweep, ties broken by node index.
ScalarField geodesic_distance(const MetricField& g, std::size_t x0);

/// <a, b>_w = sum_nodes a b sqrt(det g) h^n.
double weighted_inner(const MetricField& g, std::span<const double> a,
                      std::span<const double> b);

}  // namespace rhflow
