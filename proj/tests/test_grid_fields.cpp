#include <gtest/gtest.h>

#include "rhflow/fields.hpp"
#include "test_support.hpp"

namespace rhflow {
namespace {

TEST(Grid, RejectsInvalidShapes) {
  EXPECT_THROW(Grid(3, {8, 8}, {1.0, 1.0}), Error);
  EXPECT_THROW(Grid::line(4, 1.0), Error);
  EXPECT_THROW(Grid::square(16, -1.0), Error);
}

TEST(Grid, IndexingWrapsOnEveryAxis) {
  const Grid g = Grid::square(8, 2.0);
  EXPECT_EQ(g.index(-1, 0), g.index(7, 0));
  EXPECT_EQ(g.index(0, 8), g.index(0, 0));
  EXPECT_EQ(g.offset(g.index(7, 7), 1, 1), g.index(0, 0));
  EXPECT_DOUBLE_EQ(g.h(0), 0.25);
  EXPECT_EQ(g.wrapped_delta(1, 7, 0), -2);
  EXPECT_EQ(g.wrapped_delta(7, 1, 0), 2);
}

TEST(Mat2, GeneralizedEigenvaluesMatchDefinition) {
  const Mat2 g{{2.0, 0.3, 0.3, 1.5}};
  const Mat2 A{{0.7, -0.2, -0.2, 0.1}};
  const auto [l0, l1] = generalized_eigen(A, g, 2);
  for (double l : {l0, l1}) EXPECT_NEAR(det(A - l * g, 2), 0.0, 1e-12);
  EXPECT_LE(l0, l1);
}

TEST(MetricField, DegenerateMetricIsRejected) {
  const Grid grid = Grid::square(8, 1.0);
  std::vector<Mat2> g(grid.size(), Mat2::identity());
  g[5] = Mat2{{1.0, 1.0, 1.0, 1.0}};
  EXPECT_THROW(MetricField(grid, g), MetricDegenerate);
  g[5] = Mat2{{1.0, 0.1, 0.2, 1.0}};
  EXPECT_THROW(MetricField(grid, g), MetricDegenerate);
}

TEST(ScalarField, UMustBePositive) {
  const Grid grid = Grid::line(8, 1.0);
  std::vector<double> v(8, 1.0);
  v[3] = 0.0;
  EXPECT_THROW(ScalarField(grid, v, ScalarTag::u), Error);
}

}  // namespace
}  // namespace rhflow
