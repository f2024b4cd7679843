#include "upgnn/matrix.hpp"

#include <gtest/gtest.h>

#include "upgnn/errors.hpp"

namespace upgnn {
namespace {

TEST(MatrixTest, ShapeConstructorZeroInitializes) {
  Matrix<double> m(2, 3);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  for (const double v : m.values()) EXPECT_EQ(v, 0.0);
}

TEST(MatrixTest, FromRowsLaysOutRowMajor) {
  const auto m = Matrix<double>::FromRows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 2), 3.0);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.values()[4], 5.0);  // row 1, column 1
}

TEST(MatrixTest, RaggedRowsRejected) {
  EXPECT_THROW(Matrix<double>::FromRows({{1, 2}, {3}}), ShapeError);
}

TEST(MatrixTest, BufferSizeMustMatchShape) {
  EXPECT_THROW(Matrix<double>(2, 2, {1.0, 2.0, 3.0}), ShapeError);
}

TEST(MatrixTest, EqualityComparesShapeAndValues) {
  const auto a = Matrix<double>::FromRows({{1, 2}});
  const auto b = Matrix<double>::FromRows({{1, 2}});
  const auto c = Matrix<double>::FromRows({{1}, {2}});
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(MatrixTest, CastConvertsElementwise) {
  const auto d = Matrix<double>::FromRows({{1.5, -2.25}});
  const Matrix<float> f = d.cast<float>();
  EXPECT_EQ(f(0, 0), 1.5f);
  EXPECT_EQ(f(0, 1), -2.25f);
  const Matrix<double> back = f.cast<double>();
  EXPECT_TRUE(back == d);  // both values are exact in float
}

TEST(MatrixTest, EmptyMatrixBehaves) {
  Matrix<double> m;
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(m.rows(), 0u);
  EXPECT_EQ(m.size(), 0u);
}

}  // namespace
}  // namespace upgnn
