#include "rhflow/geometry.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace rhflow {

namespace {

constexpr int idx3(int k, int i, int j) { return 4 * k + 2 * i + j; }

void require_map_grid(const MetricField& g, const MapField& phi, const char* what) {
  require_same_grid(g.grid(), phi.grid, what);
}

}  // namespace

std::vector<double> partial(const Grid& grid, std::span<const double> v, int axis) {
  std::vector<double> out(grid.size());
  const int nx = grid.n(0);
  const int ny = grid.n(1);
  const double inv2h = 0.5 / grid.h(axis);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t node = grid.index(i, j);
      std::size_t plus, minus;
      if (axis == 0) {
        plus = grid.index(i + 1, j);
        minus = grid.index(i - 1, j);
      } else {
        plus = grid.index(i, j + 1);
        minus = grid.index(i, j - 1);
      }
      out[node] = (v[plus] - v[minus]) * inv2h;
    }
  }
  return out;
}

ChristoffelField christoffel(const MetricField& g) {
  const Grid& grid = g.grid();
  const int n = grid.dim();
  const std::size_t N = grid.size();

  // dg[l][a][b] = d_l g_ab
  std::array<std::array<std::array<std::vector<double>, 2>, 2>, 2> dg;
  std::vector<double> comp(N);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      for (std::size_t p = 0; p < N; ++p) comp[p] = g[p](a, b);
      for (int l = 0; l < n; ++l) {
        dg[l][a][b] = partial(grid, comp, l);
        if (a != b) dg[l][b][a] = dg[l][a][b];
      }
    }
  }

  ChristoffelField out{grid, std::vector<std::array<double, 8>>(N)};
  for (std::size_t p = 0; p < N; ++p) {
    const Mat2& ginv = g.inverse(p);
    auto& G = out.values[p];
    G.fill(0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        // first kind: Gamma_lij = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        std::array<double, 2> first{};
        for (int l = 0; l < n; ++l) {
          first[l] = 0.5 * (dg[i][j][l][p] + dg[j][i][l][p] - dg[l][i][j][p]);
        }
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) s += ginv(k, l) * first[l];
          G[idx3(k, i, j)] = s;
          G[idx3(k, j, i)] = s;
        }
      }
    }
  }
  return out;
}

TensorField2 ricci(const MetricField& g) { return ricci(g, christoffel(g)); }

TensorField2 ricci(const MetricField& g, const ChristoffelField& gamma) {
  const Grid& grid = g.grid();
  const int n = grid.dim();
  const std::size_t N = grid.size();
  TensorField2 out(grid, TensorTag::ricci);
  if (n == 1) return out;  // curvature vanishes identically in dimension one

  // dGamma[m][c] = d_m Gamma^c, c = idx3(k,i,j)
  std::array<std::array<std::vector<double>, 8>, 2> dG;
  std::vector<double> comp(N);
  for (int c = 0; c < 8; ++c) {
    for (std::size_t p = 0; p < N; ++p) comp[p] = gamma.values[p][c];
    for (int m = 0; m < n; ++m) dG[m][c] = partial(grid, comp, m);
  }

  for (std::size_t p = 0; p < N; ++p) {
    const auto& G = gamma.values[p];
    Mat2 R;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
          s += dG[k][idx3(k, i, j)][p];
          s -= dG[i][idx3(k, k, j)][p];
          for (int l = 0; l < n; ++l) {
            s += G[idx3(k, k, l)] * G[idx3(l, i, j)];
            s -= G[idx3(k, i, l)] * G[idx3(l, k, j)];
          }
        }
        R(i, j) = s;
      }
    }
    out[p] = symmetrized(R);
  }
  return out;
}

ScalarField trace(const MetricField& g, const TensorField2& t) {
  require_same_grid(g.grid(), t.grid, "trace");
  const int n = g.dim();
  ScalarField out(g.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const Mat2& ginv = g.inverse(p);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += ginv(i, j) * t[p](i, j);
    out[p] = s;
  }
  return out;
}

ScalarField scalar_curvature(const MetricField& g) {
  ScalarField R = trace(g, ricci(g));
  R.tag = ScalarTag::R;
  return R;
}

LaplaceBeltrami::LaplaceBeltrami(const MetricField& g) : grid_(g.grid()) {
  const std::size_t N = grid_.size();
  const int n = grid_.dim();
  const int nx = grid_.n(0);
  const int ny = grid_.n(1);
  std::vector<double> axx(N), ayy(N), axy(N);
  inv_sqrt_det_.resize(N);
  for (std::size_t p = 0; p < N; ++p) {
    const double w = g.sqrt_det(p);
    inv_sqrt_det_[p] = 1.0 / w;
    axx[p] = w * g.inverse(p)(0, 0);
    if (n == 2) {
      ayy[p] = w * g.inverse(p)(1, 1);
      axy[p] = w * g.inverse(p)(0, 1);
    }
  }
  face_x_.resize(N);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      face_x_[grid_.index(i, j)] = 0.5 * (axx[grid_.index(i, j)] + axx[grid_.index(i + 1, j)]);
  if (n == 2) {
    face_y_.resize(N);
    cell_xy_.resize(N);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t p = grid_.index(i, j);
        face_y_[p] = 0.5 * (ayy[p] + ayy[grid_.index(i, j + 1)]);
        cell_xy_[p] = 0.25 * (axy[p] + axy[grid_.index(i + 1, j)] +
                              axy[grid_.index(i, j + 1)] + axy[grid_.index(i + 1, j + 1)]);
      }
    }
  }
}

void LaplaceBeltrami::apply(std::span<const double> s, std::span<double> out) const {
  const int nx = grid_.n(0);
  const double hx = grid_.h(0);
  const double ihx2 = 1.0 / (hx * hx);
  if (grid_.dim() == 1) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p = grid_.index(i);
      const std::size_t e = grid_.index(i + 1);
      const std::size_t w = grid_.index(i - 1);
      const double flux = face_x_[p] * (s[e] - s[p]) - face_x_[w] * (s[p] - s[w]);
      out[p] = inv_sqrt_det_[p] * flux * ihx2;
    }
    return;
  }

  const int ny = grid_.n(1);
  const double hy = grid_.h(1);
  const double ihy2 = 1.0 / (hy * hy);
  const std::size_t N = grid_.size();
  // Mixed fluxes at cell centres (i+1/2, j+1/2), stored at the cell's lower-left node.
  std::vector<double> qx(N), qy(N);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p00 = grid_.index(i, j);
      const std::size_t p10 = grid_.index(i + 1, j);
      const std::size_t p01 = grid_.index(i, j + 1);
      const std::size_t p11 = grid_.index(i + 1, j + 1);
      const double dx = ((s[p10] - s[p00]) + (s[p11] - s[p01])) / (2.0 * hx);
      const double dy = ((s[p01] - s[p00]) + (s[p11] - s[p10])) / (2.0 * hy);
      qx[p00] = cell_xy_[p00] * dy;
      qy[p00] = cell_xy_[p00] * dx;
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p = grid_.index(i, j);
      const std::size_t e = grid_.index(i + 1, j);
      const std::size_t w = grid_.index(i - 1, j);
      const std::size_t nn = grid_.index(i, j + 1);
      const std::size_t sn = grid_.index(i, j - 1);
      const std::size_t sw = grid_.index(i - 1, j - 1);
      const double diag = (face_x_[p] * (s[e] - s[p]) - face_x_[w] * (s[p] - s[w])) * ihx2 +
                          (face_y_[p] * (s[nn] - s[p]) - face_y_[sn] * (s[p] - s[sn])) * ihy2;
      // cells around the node: c(i,j)=p, c(i-1,j)=w, c(i,j-1)=sn, c(i-1,j-1)=sw
      const double cross = ((qx[p] + qx[sn]) - (qx[w] + qx[sw])) / (2.0 * hx) +
                           ((qy[p] + qy[w]) - (qy[sn] + qy[sw])) / (2.0 * hy);
      out[p] = inv_sqrt_det_[p] * (diag + cross);
    }
  }
}

ScalarField LaplaceBeltrami::operator()(const ScalarField& s) const {
  require_same_grid(grid_, s.grid, "laplace_beltrami");
  ScalarField out(grid_);
  apply(s.values, out.values);
  return out;
}

ScalarField laplace_beltrami(const MetricField& g, const ScalarField& s) {
  return LaplaceBeltrami(g)(s);
}

CovectorField gradient(const ScalarField& s) {
  const Grid& grid = s.grid;
  CovectorField out{grid, std::vector<Covector>(grid.size(), Covector{0.0, 0.0})};
  for (int a = 0; a < grid.dim(); ++a) {
    const auto d = partial(grid, s.values, a);
    for (std::size_t p = 0; p < d.size(); ++p) out.values[p][a] = d[p];
  }
  return out;
}

ScalarField inner(const MetricField& g, const CovectorField& a, const CovectorField& b) {
  require_same_grid(g.grid(), a.grid, "inner");
  require_same_grid(g.grid(), b.grid, "inner");
  const int n = g.dim();
  ScalarField out(g.grid());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const Mat2& ginv = g.inverse(p);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += ginv(i, j) * a.values[p][i] * b.values[p][j];
    out[p] = s;
  }
  return out;
}

ScalarField gradient_norm_sq(const MetricField& g, const ScalarField& s) {
  require_same_grid(g.grid(), s.grid, "gradient_norm_sq");
  const auto ds = gradient(s);
  return inner(g, ds, ds);
}

TensorField2 hessian(const MetricField& g, const ScalarField& s) {
  return hessian(g, christoffel(g), s);
}

TensorField2 hessian(const MetricField& g, const ChristoffelField& gamma,
                     const ScalarField& s) {
  require_same_grid(g.grid(), s.grid, "hessian");
  const Grid& grid = g.grid();
  const int n = grid.dim();
  const int nx = grid.n(0);
  const int ny = grid.n(1);
  const double hx = grid.h(0);
  const double hy = grid.h(1);
  const auto ds = gradient(s);
  TensorField2 out(grid, TensorTag::hessian);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t p = grid.index(i, j);
      Mat2 H;
      H(0, 0) = (s[grid.index(i + 1, j)] - 2.0 * s[p] + s[grid.index(i - 1, j)]) / (hx * hx);
      if (n == 2) {
        H(1, 1) = (s[grid.index(i, j + 1)] - 2.0 * s[p] + s[grid.index(i, j - 1)]) / (hy * hy);
        const double hxy = (s[grid.index(i + 1, j + 1)] - s[grid.index(i + 1, j - 1)] -
                            s[grid.index(i - 1, j + 1)] + s[grid.index(i - 1, j - 1)]) /
                           (4.0 * hx * hy);
        H(0, 1) = H(1, 0) = hxy;
      }
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int k = 0; k < n; ++k) H(a, b) -= gamma(p, k, a, b) * ds.values[p][k];
      out[p] = symmetrized(H);
    }
  }
  return out;
}

TensorField2 grad_phi_outer(const MetricField& g, const MapField& phi) {
  require_map_grid(g, phi, "grad_phi_outer");
  const Grid& grid = g.grid();
  const int n = grid.dim();
  TensorField2 out(grid, TensorTag::grad_phi_outer);
  for (const auto& comp : phi.components) {
    std::array<std::vector<double>, 2> d;
    for (int a = 0; a < n; ++a) d[a] = partial(grid, comp, a);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) out[p](a, b) += d[a][p] * d[b][p];
    }
  }
  return out;
}

ScalarField energy_density(const MetricField& g, const MapField& phi) {
  ScalarField e = trace(g, grad_phi_outer(g, phi));
  e.tag = ScalarTag::energy_density;
  return e;
}

TensorField2 s_tensor(const MetricField& g, const MapField& phi, double alpha) {
  TensorField2 S = ricci(g);
  const TensorField2 P = grad_phi_outer(g, phi);
  for (std::size_t p = 0; p < S.size(); ++p) S[p] -= alpha * P[p];
  S.tag = TensorTag::s_tensor;
  return S;
}

ScalarField s_scalar(const MetricField& g, const MapField& phi, double alpha) {
  ScalarField S = scalar_curvature(g);
  const ScalarField e = energy_density(g, phi);
  for (std::size_t p = 0; p < S.size(); ++p) S[p] -= alpha * e[p];
  S.tag = ScalarTag::S;
  return S;
}

MapField tension_field(const MetricField& g, const MapField& phi) {
  require_map_grid(g, phi, "tension_field");
  const LaplaceBeltrami lap(g);
  MapField out(g.grid(), phi.d());
  for (int mu = 0; mu < phi.d(); ++mu) lap.apply(phi.components[mu], out.components[mu]);
  return out;
}

CovectorField rough_laplacian(const MetricField& g, const ChristoffelField& gamma,
                              const CovectorField& omega) {
  const Grid& grid = g.grid();
  const int n = grid.dim();
  const std::size_t N = grid.size();
  // T[l][i] = nabla_l omega_i
  std::array<std::array<std::vector<double>, 2>, 2> T;
  std::vector<double> comp(N);
  for (int i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < N; ++p) comp[p] = omega.values[p][i];
    for (int l = 0; l < n; ++l) {
      T[l][i] = partial(grid, comp, l);
      for (std::size_t p = 0; p < N; ++p) {
        for (int m = 0; m < n; ++m) T[l][i][p] -= gamma(p, m, l, i) * omega.values[p][m];
      }
    }
  }
  // dT[k][l][i] = d_k T_li
  std::array<std::array<std::array<std::vector<double>, 2>, 2>, 2> dT;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i) dT[k][l][i] = partial(grid, T[l][i], k);

  CovectorField out{grid, std::vector<Covector>(N, Covector{0.0, 0.0})};
  for (std::size_t p = 0; p < N; ++p) {
    const Mat2& ginv = g.inverse(p);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          double v = dT[k][l][i][p];
          for (int m = 0; m < n; ++m) {
            v -= gamma(p, m, k, l) * T[m][i][p];
            v -= gamma(p, m, k, i) * T[l][m][p];
          }
          s += ginv(k, l) * v;
        }
      }
      out.values[p][i] = s;
    }
  }
  return out;
}

ScalarField geodesic_distance(const MetricField& g, std::size_t x0) {
  const Grid& grid = g.grid();
  if (x0 >= grid.size()) throw Error("geodesic_distance: source node out of range");
  const int n = grid.dim();
  std::vector<std::array<int, 2>> stencil;
  if (n == 1) {
    stencil = {{1, 0}, {-1, 0}};
  } else {
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (di != 0 || dj != 0) stencil.push_back({di, dj});
  }

  ScalarField dist(grid, ScalarTag::distance, std::numeric_limits<double>::infinity());
  std::vector<char> done(grid.size(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  dist[x0] = 0.0;
  queue.push({0.0, x0});
  while (!queue.empty()) {
    const auto [d, p] = queue.top();
    queue.pop();
    if (done[p]) continue;
    done[p] = 1;
    for (const auto& st : stencil) {
      const std::size_t q = grid.offset(p, st[0], st[1]);
      if (done[q]) continue;
      const Mat2 gbar = 0.5 * (g[p] + g[q]);
      const double vx = st[0] * grid.h(0);
      const double vy = n == 2 ? st[1] * grid.h(1) : 0.0;
      const double len2 = gbar(0, 0) * vx * vx + 2.0 * gbar(0, 1) * vx * vy + gbar(1, 1) * vy * vy;
      const double nd = d + std::sqrt(len2);
      if (nd < dist[q]) {
        dist[q] = nd;
        queue.push({nd, q});
      }
    }
  }
  return dist;
}

double weighted_inner(const MetricField& g, std::span<const double> a,
                      std::span<const double> b) {
  double s = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) s += a[p] * b[p] * g.sqrt_det(p);
  return s * g.grid().cell_volume();
}

}  // namespace rhflow
