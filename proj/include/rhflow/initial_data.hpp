#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rhflow/fields.hpp"

namespace rhflow {

/// One closed-form term of an initial-data expression.  An expression is
/// the sum of its terms, evaluated at node chart coordinates.
struct Term {
  enum class Kind { constant, mode, gaussian, heat_kernel, random_modes };
  Kind kind = Kind::constant;
  double value = 0.0;  // constant value, mode/gaussian amplitude, kernel mass
  std::array<int, 2> wavenumber{0, 0};
  std::array<double, 2> phase{0.0, 0.0};
  std::array<double, 2> center{0.0, 0.0};
  double width = 1.0;  // gaussian standard deviation
  double time = 1.0;   // heat kernel time
  int count = 0;       // random_modes
  int max_wavenumber = 1;
};

using Expression = std::vector<Term>;

const char* to_string(Term::Kind kind);

/// Evaluates the expression at every node.  Gaussians are periodised by
/// summing images over neighbouring chart cells; random modes draw from a
/// generator seeded with `seed` and the term position.
std::vector<double> evaluate(const Grid& grid, const Expression& expr, std::uint64_t seed);

/// True when no term varies in space.
bool is_constant(const Expression& expr);

struct MetricSpec {
  enum class Kind { flat, conformal, exp_conformal, components };
  Kind kind = Kind::flat;
  Expression factor;  // conformal: g = factor * delta
  Expression w;       // exp_conformal: g = exp(2w) * delta
  Expression xx, xy, yy;
};

const char* to_string(MetricSpec::Kind kind);

MetricField build_metric(const Grid& grid, const MetricSpec& spec, std::uint64_t seed);
MapField build_map(const Grid& grid, const std::vector<Expression>& components,
                   std::uint64_t seed);
ScalarField build_u(const Grid& grid, const Expression& expr, std::uint64_t seed);

}  // namespace rhflow
