#include "upgnn/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "upgnn/errors.hpp"
#include "upgnn/rng.hpp"

namespace upgnn {
namespace {

using Builder = std::function<TapeD::Ref(TapeD&, const std::vector<TapeD::Ref>&)>;

// Central-difference check of a scalar tape program against reverse-mode
// gradients. The program is rebuilt from scratch for every probe, so any
// internal randomness must be re-seeded identically inside `build`.
double max_fd_rel_err(std::vector<Matrix<double>> leaves, const Builder& build,
                      double step = 1e-6) {
  TapeD tape;
  std::vector<TapeD::Ref> refs;
  refs.reserve(leaves.size());
  for (const auto& leaf : leaves) refs.push_back(tape.leaf(leaf));
  const TapeD::Ref loss = build(tape, refs);
  tape.backward(loss);
  std::vector<Matrix<double>> analytic;
  analytic.reserve(refs.size());
  for (const TapeD::Ref r : refs) analytic.push_back(tape.grad(r));

  const auto eval = [&](const std::vector<Matrix<double>>& values) {
    TapeD probe;
    std::vector<TapeD::Ref> probe_refs;
    probe_refs.reserve(values.size());
    for (const auto& leaf : values) probe_refs.push_back(probe.leaf(leaf));
    return probe.value(build(probe, probe_refs))(0, 0);
  };

  double worst = 0.0;
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    for (std::size_t i = 0; i < leaves[p].size(); ++i) {
      const double saved = leaves[p].values()[i];
      leaves[p].values()[i] = saved + step;
      const double up = eval(leaves);
      leaves[p].values()[i] = saved - step;
      const double down = eval(leaves);
      leaves[p].values()[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = analytic[p].values()[i];
      const double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1.0});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

Matrix<double> random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                             double spread = 1.0) {
  Matrix<double> m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-spread, spread);
  return m;
}

TEST(TapeTest, MatmulIdentityAndHandValues) {
  TapeD tape;
  const auto i2 = tape.constant(Matrix<double>::FromRows({{1, 0}, {0, 1}}));
  const auto b = tape.constant(Matrix<double>::FromRows({{3, 4}, {5, 6}}));
  EXPECT_TRUE(tape.value(tape.matmul(i2, b)) ==
              Matrix<double>::FromRows({{3, 4}, {5, 6}}));

  const auto row = tape.constant(Matrix<double>::FromRows({{1, 2}}));
  const auto col = tape.constant(Matrix<double>::FromRows({{3}, {4}}));
  EXPECT_DOUBLE_EQ(tape.value(tape.matmul(row, col))(0, 0), 11.0);
}

TEST(TapeTest, MatmulShapeMismatchThrows) {
  TapeD tape;
  const auto a = tape.constant(Matrix<double>(2, 3));
  const auto b = tape.constant(Matrix<double>(2, 2));
  EXPECT_THROW(tape.matmul(a, b), ShapeError);
}

TEST(TapeTest, ElementwiseShapeMismatchThrows) {
  TapeD tape;
  const auto a = tape.constant(Matrix<double>(2, 2));
  const auto b = tape.constant(Matrix<double>(2, 3));
  EXPECT_THROW(tape.add(a, b), ShapeError);
  EXPECT_THROW(tape.sub(a, b), ShapeError);
  EXPECT_THROW(tape.hadamard(a, b), ShapeError);
}

TEST(TapeTest, ReluClampsAndKillsGradient) {
  TapeD tape;
  const auto x = tape.leaf(Matrix<double>::FromRows({{-1, 0, 2}}));
  const auto r = tape.relu(x);
  EXPECT_TRUE(tape.value(r) == Matrix<double>::FromRows({{0, 0, 2}}));
  const auto loss = tape.sum(r);
  tape.backward(loss);
  const Matrix<double> g = tape.grad(x);
  EXPECT_EQ(g(0, 0), 0.0);  // negative input
  EXPECT_EQ(g(0, 1), 0.0);  // tie at zero resolves to zero gradient
  EXPECT_EQ(g(0, 2), 1.0);
}

TEST(TapeTest, LinearBackwardIsTheDataValue) {
  // loss = w * x with x fixed -> dloss/dw = x.
  TapeD tape;
  const auto w = tape.leaf(Matrix<double>::FromRows({{2, -3}}));
  const auto x = tape.constant(Matrix<double>::FromRows({{5}, {7}}));
  const auto loss = tape.matmul(w, x);
  tape.backward(loss);
  EXPECT_TRUE(tape.grad(w) == Matrix<double>::FromRows({{5, 7}}));
}

TEST(TapeTest, BackwardRequiresScalarLoss) {
  TapeD tape;
  const auto x = tape.leaf(Matrix<double>(2, 2));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(TapeTest, OffPathLeafGetsZeroGradient) {
  TapeD tape;
  const auto used = tape.leaf(Matrix<double>::FromRows({{1.0}}));
  const auto unused = tape.leaf(Matrix<double>::FromRows({{4.0, 5.0}}));
  tape.backward(tape.sum(used));
  const Matrix<double> g = tape.grad(unused);
  EXPECT_TRUE(g == Matrix<double>(1, 2));
}

TEST(TapeTest, ParameterBehindDeadReluGetsZeroGradient) {
  // x < 0 everywhere, so relu(x * w) with negative products kills w's grad.
  TapeD tape;
  const auto w = tape.leaf(Matrix<double>::FromRows({{2.0}}));
  const auto x = tape.constant(Matrix<double>::FromRows({{-1.0}, {-3.0}}));
  const auto loss = tape.sum(tape.relu(tape.matmul(x, w)));
  tape.backward(loss);
  EXPECT_TRUE(tape.grad(w) == Matrix<double>(1, 1));
}

TEST(TapeTest, DropoutZeroRateIsIdentity) {
  TapeD tape;
  Rng rng(3);
  const auto x = tape.leaf(Matrix<double>::FromRows({{1, -2}, {3, 4}}));
  const auto d = tape.dropout(x, 0.0, rng);
  EXPECT_TRUE(tape.value(d) == tape.value(x));
}

TEST(TapeTest, DropoutRejectsRateOutsideDomain) {
  TapeD tape;
  Rng rng(3);
  const auto x = tape.leaf(Matrix<double>(2, 2));
  EXPECT_THROW(tape.dropout(x, 1.0, rng), ParameterError);
  EXPECT_THROW(tape.dropout(x, -0.1, rng), ParameterError);
}

TEST(TapeTest, DropoutScalesSurvivorsAndHitsTheRate) {
  TapeD tape;
  Rng rng(41);
  Matrix<double> ones(100, 100);
  for (double& v : ones.values()) v = 1.0;
  const auto x = tape.constant(ones);
  const auto d = tape.dropout(x, 0.4, rng);
  const Matrix<double>& out = tape.value(d);
  std::size_t zeros = 0;
  double sum = 0.0;
  for (const double v : out.values()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_NEAR(v, 1.0 / 0.6, 1e-12);
    }
    sum += v;
  }
  EXPECT_NEAR(static_cast<double>(zeros) / out.size(), 0.4, 0.02);
  EXPECT_NEAR(sum / out.size(), 1.0, 0.05);  // inverted scaling preserves mean
}

TEST(TapeTest, DropoutMaskIsReproducibleBySeed) {
  const auto run = [] {
    TapeD tape;
    Rng rng(77);
    Matrix<double> x(8, 8);
    for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = double(i + 1);
    const auto d = tape.dropout(tape.constant(x), 0.4, rng);
    return tape.value(d);
  };
  EXPECT_TRUE(run() == run());
}

TEST(TapeTest, SumAndScaleValues) {
  TapeD tape;
  const auto x = tape.constant(Matrix<double>::FromRows({{1, 2}, {3, 4}}));
  EXPECT_DOUBLE_EQ(tape.value(tape.sum(x))(0, 0), 10.0);
  EXPECT_TRUE(tape.value(tape.scale(x, 0.5)) ==
              Matrix<double>::FromRows({{0.5, 1}, {1.5, 2}}));
}

TEST(TapeTest, ConcatSliceGatherValues) {
  TapeD tape;
  const auto a = tape.constant(Matrix<double>::FromRows({{1, 2}, {3, 4}}));
  const auto b = tape.constant(Matrix<double>::FromRows({{5}, {6}}));
  EXPECT_TRUE(tape.value(tape.concat_cols(a, b)) ==
              Matrix<double>::FromRows({{1, 2, 5}, {3, 4, 6}}));
  const auto c = tape.constant(Matrix<double>::FromRows({{7, 8}}));
  EXPECT_TRUE(tape.value(tape.concat_rows(a, c)) ==
              Matrix<double>::FromRows({{1, 2}, {3, 4}, {7, 8}}));
  EXPECT_TRUE(tape.value(tape.slice_rows(a, 1, 2)) ==
              Matrix<double>::FromRows({{3, 4}}));
  EXPECT_TRUE(tape.value(tape.gather_rows(a, {1, 0, 1})) ==
              Matrix<double>::FromRows({{3, 4}, {1, 2}, {3, 4}}));
}

TEST(TapeTest, BceWithLogitsHandValues) {
  TapeD tape;
  // Logit 0 against any target -> ln 2; logit 1 against target 1 -> -ln σ(1).
  const auto z = tape.constant(Matrix<double>::FromRows({{0.0}}));
  Matrix<double> t0(1, 1);
  t0(0, 0) = 1.0;
  EXPECT_NEAR(tape.value(tape.bce_with_logits_mean(z, t0))(0, 0),
              std::log(2.0), 1e-15);

  const auto z1 = tape.constant(Matrix<double>::FromRows({{1.0}}));
  EXPECT_NEAR(tape.value(tape.bce_with_logits_mean(z1, t0))(0, 0),
              -std::log(1.0 / (1.0 + std::exp(-1.0))), 1e-15);

  // Saturated, correctly signed logits vanish.
  const auto z20 = tape.constant(Matrix<double>::FromRows({{20.0}, {-20.0}}));
  Matrix<double> t(2, 1);
  t(0, 0) = 1.0;
  t(1, 0) = 0.0;
  EXPECT_LT(tape.value(tape.bce_with_logits_mean(z20, t))(0, 0), 1e-6);
}

// --------------------------- gradient checks ------------------------------

TEST(TapeGradTest, Matmul) {
  Rng rng(100);
  const double err = max_fd_rel_err(
      {random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
      [](TapeD& t, const std::vector<TapeD::Ref>& L) {
        return t.sum(t.matmul(L[0], L[1]));
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, ChainedElementwiseOps) {
  Rng rng(101);
  const double err = max_fd_rel_err(
      {random_matrix(3, 3, rng), random_matrix(3, 3, rng),
       random_matrix(3, 3, rng)},
      [](TapeD& t, const std::vector<TapeD::Ref>& L) {
        const auto mix = t.hadamard(t.add(L[0], L[1]), t.sub(L[1], L[2]));
        return t.sum(t.scale(mix, 1.7));
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, ReluAwayFromKinks) {
  Rng rng(102);
  Matrix<double> x = random_matrix(4, 4, rng);
  for (double& v : x.values()) v += (v >= 0 ? 0.05 : -0.05);  // clear the kink
  const double err = max_fd_rel_err(
      {x}, [](TapeD& t, const std::vector<TapeD::Ref>& L) {
        return t.sum(t.relu(L[0]));
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, SpmmAllModes) {
  Rng rng(103);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t p = 0; p < 4; ++p) {
      if (rng.bernoulli(0.5)) edges.push_back({u, p});
    }
  }
  for (const NormMode mode :
       {NormMode::kSum, NormMode::kMean, NormMode::kSym}) {
    const auto adj = SparseAdjacency::FromBipartiteEdges(3, 4, edges, mode);
    const double err = max_fd_rel_err(
        {random_matrix(7, 2, rng)},
        [&adj](TapeD& t, const std::vector<TapeD::Ref>& L) {
          return t.sum(t.spmm(adj, L[0]));
        });
    EXPECT_LT(err, 1e-8);
  }
}

TEST(TapeGradTest, ConcatSliceGather) {
  Rng rng(104);
  const double err = max_fd_rel_err(
      {random_matrix(4, 2, rng), random_matrix(4, 3, rng)},
      [](TapeD& t, const std::vector<TapeD::Ref>& L) {
        const auto wide = t.concat_cols(L[0], L[1]);
        const auto stacked = t.concat_rows(wide, wide);
        const auto sliced = t.slice_rows(stacked, 1, 6);
        // A repeated gather index exercises gradient accumulation.
        const auto picked = t.gather_rows(sliced, {0, 2, 2, 4});
        return t.sum(picked);
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, BceWithLogits) {
  Rng rng(105);
  Matrix<double> targets(5, 1);
  for (double& v : targets.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  const double err = max_fd_rel_err(
      {random_matrix(5, 1, rng, 3.0)},
      [targets](TapeD& t, const std::vector<TapeD::Ref>& L) {
        return t.bce_with_logits_mean(L[0], targets);
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, DropoutWithFrozenMask) {
  Rng rng(106);
  Matrix<double> x = random_matrix(6, 6, rng);
  for (double& v : x.values()) v += (v >= 0 ? 0.05 : -0.05);
  const double err = max_fd_rel_err(
      {x}, [](TapeD& t, const std::vector<TapeD::Ref>& L) {
        // Fresh generator per rebuild: every probe sees the same mask.
        Rng mask_rng(55);
        return t.sum(t.relu(t.dropout(L[0], 0.4, mask_rng)));
      });
  EXPECT_LT(err, 1e-8);
}

TEST(TapeGradTest, TwoLayerReluNetwork) {
  // Random two-layer ReLU network against central differences, step 1e-4.
  Rng rng(107);
  const Matrix<double> x = random_matrix(5, 3, rng);
  const double err = max_fd_rel_err(
      {random_matrix(3, 4, rng), random_matrix(4, 1, rng)},
      [x](TapeD& t, const std::vector<TapeD::Ref>& L) {
        const auto h = t.relu(t.matmul(t.constant(x), L[0]));
        const auto out = t.relu(t.matmul(h, L[1]));
        return t.sum(t.hadamard(out, out));
      },
      1e-4);
  EXPECT_LT(err, 1e-4);
}

}  // namespace
}  // namespace upgnn
