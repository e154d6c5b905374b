#include "rhflow/initial_data.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rhflow {

namespace {

constexpr int kImages = 2;

double periodic_gaussian(const Grid& grid, std::size_t node, const std::array<double, 2>& c,
                         double var2) {
  const int n = grid.dim();
  double sum = 0.0;
  const int jmax = n == 2 ? kImages : 0;
  for (int mj = -jmax; mj <= jmax; ++mj) {
    for (int mi = -kImages; mi <= kImages; ++mi) {
      const double dx = grid.coordinate(node, 0) - c[0] - mi * grid.length(0);
      double r2 = dx * dx;
      if (n == 2) {
        const double dy = grid.coordinate(node, 1) - c[1] - mj * grid.length(1);
        r2 += dy * dy;
      }
      sum += std::exp(-r2 / var2);
    }
  }
  return sum;
}

double mode_value(const Grid& grid, std::size_t node, double amplitude,
                  const std::array<int, 2>& k, const std::array<double, 2>& phase) {
  double v = amplitude;
  for (int a = 0; a < grid.dim(); ++a) {
    v *= std::cos(2.0 * std::numbers::pi * k[a] * grid.coordinate(node, a) / grid.length(a) +
                  phase[a]);
  }
  return v;
}

}  // namespace

const char* to_string(Term::Kind kind) {
  switch (kind) {
    case Term::Kind::constant: return "constant";
    case Term::Kind::mode: return "mode";
    case Term::Kind::gaussian: return "gaussian";
    case Term::Kind::heat_kernel: return "heat_kernel";
    case Term::Kind::random_modes: return "random_modes";
  }
  return "constant";
}

const char* to_string(MetricSpec::Kind kind) {
  switch (kind) {
    case MetricSpec::Kind::flat: return "flat";
    case MetricSpec::Kind::conformal: return "conformal";
    case MetricSpec::Kind::exp_conformal: return "exp_conformal";
    case MetricSpec::Kind::components: return "components";
  }
  return "flat";
}

bool is_constant(const Expression& expr) {
  for (const auto& t : expr) {
    switch (t.kind) {
      case Term::Kind::constant:
        break;
      case Term::Kind::mode:
        if (t.wavenumber[0] != 0 || t.wavenumber[1] != 0) return false;
        break;
      default:
        if (t.value != 0.0 || t.kind == Term::Kind::random_modes) return false;
    }
  }
  return true;
}

std::vector<double> evaluate(const Grid& grid, const Expression& expr, std::uint64_t seed) {
  std::vector<double> out(grid.size(), 0.0);
  const int n = grid.dim();
  for (std::size_t ti = 0; ti < expr.size(); ++ti) {
    const Term& t = expr[ti];
    switch (t.kind) {
      case Term::Kind::constant:
        for (double& v : out) v += t.value;
        break;
      case Term::Kind::mode:
        for (std::size_t p = 0; p < out.size(); ++p)
          out[p] += mode_value(grid, p, t.value, t.wavenumber, t.phase);
        break;
      case Term::Kind::gaussian: {
        const double var2 = 2.0 * t.width * t.width;
        for (std::size_t p = 0; p < out.size(); ++p)
          out[p] += t.value * periodic_gaussian(grid, p, t.center, var2);
        break;
      }
      case Term::Kind::heat_kernel: {
        const double var2 = 4.0 * t.time;
        const double norm = t.value * std::pow(4.0 * std::numbers::pi * t.time, -0.5 * n);
        for (std::size_t p = 0; p < out.size(); ++p)
          out[p] += norm * periodic_gaussian(grid, p, t.center, var2);
        break;
      }
      case Term::Kind::random_modes: {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + ti + 1);
        std::uniform_int_distribution<int> kdist(-t.max_wavenumber, t.max_wavenumber);
        std::uniform_real_distribution<double> adist(-t.value, t.value);
        std::uniform_real_distribution<double> pdist(0.0, 2.0 * std::numbers::pi);
        for (int m = 0; m < t.count; ++m) {
          std::array<int, 2> k{kdist(rng), n == 2 ? kdist(rng) : 0};
          const double a = adist(rng);
          std::array<double, 2> ph{pdist(rng), n == 2 ? pdist(rng) : 0.0};
          for (std::size_t p = 0; p < out.size(); ++p) out[p] += mode_value(grid, p, a, k, ph);
        }
        break;
      }
    }
  }
  return out;
}

MetricField build_metric(const Grid& grid, const MetricSpec& spec, std::uint64_t seed) {
  std::vector<Mat2> g(grid.size(), Mat2::identity());
  switch (spec.kind) {
    case MetricSpec::Kind::flat:
      break;
    case MetricSpec::Kind::conformal: {
      const auto f = evaluate(grid, spec.factor, seed);
      for (std::size_t p = 0; p < g.size(); ++p) g[p] = Mat2::diagonal(f[p], f[p]);
      break;
    }
    case MetricSpec::Kind::exp_conformal: {
      const auto w = evaluate(grid, spec.w, seed);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const double e = std::exp(2.0 * w[p]);
        g[p] = Mat2::diagonal(e, e);
      }
      break;
    }
    case MetricSpec::Kind::components: {
      const auto xx = evaluate(grid, spec.xx, seed);
      const auto xy = evaluate(grid, spec.xy, seed);
      const auto yy = evaluate(grid, spec.yy, seed);
      for (std::size_t p = 0; p < g.size(); ++p) g[p] = Mat2{{xx[p], xy[p], xy[p], yy[p]}};
      break;
    }
  }
  return MetricField(grid, std::move(g));
}

MapField build_map(const Grid& grid, const std::vector<Expression>& components,
                   std::uint64_t seed) {
  if (components.empty()) throw Error("initial data: map needs at least one component");
  MapField phi(grid, static_cast<int>(components.size()));
  for (std::size_t mu = 0; mu < components.size(); ++mu) {
    phi.components[mu] = evaluate(grid, components[mu], seed + 7919 * (mu + 1));
  }
  check_finite(phi, "initial data");
  return phi;
}

ScalarField build_u(const Grid& grid, const Expression& expr, std::uint64_t seed) {
  return ScalarField(grid, evaluate(grid, expr, seed + 104729), ScalarTag::u);
}

}  // namespace rhflow
