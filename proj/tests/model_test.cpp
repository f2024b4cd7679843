#include "upgnn/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "upgnn/errors.hpp"
#include "upgnn/graph.hpp"
#include "upgnn/matrix.hpp"
#include "upgnn/rng.hpp"
#include "testing_support.hpp"

namespace upgnn {
namespace {

ModelConfig tiny_config(GnnKind kind = GnnKind::kSage) {
  ModelConfig cfg;
  cfg.gnn = kind;
  cfg.proj_width = 4;
  cfg.gnn_hidden = 4;
  cfg.head_hidden = 3;
  cfg.dropout = 0.0;
  cfg.epochs = 40;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 1e-4;
  cfg.seed = 3;
  return cfg;
}

std::vector<std::size_t> all_users(const Dataset& ds) {
  std::vector<std::size_t> users(ds.n());
  std::iota(users.begin(), users.end(), 0);
  return users;
}

bool params_equal(const ModelParams<float>& a, const ModelParams<float>& b) {
  const auto na = a.named();
  const auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first) return false;
    if (!(*na[i].second == *nb[i].second)) return false;
  }
  return true;
}

TEST(ModelTest, GnnKindNamesRoundTrip) {
  for (const GnnKind kind :
       {GnnKind::kSage, GnnKind::kNgcf, GnnKind::kLgc}) {
    EXPECT_EQ(parse_gnn_kind(gnn_kind_name(kind)), kind);
  }
  EXPECT_THROW(parse_gnn_kind("gat"), ConfigError);
}

TEST(ModelTest, ValidateRejectsOutOfRangeFields) {
  ModelConfig cfg = tiny_config();
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.weight_decay = -1e-3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.proj_width = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.treatment_loss_weight = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.lgc_layers = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(ModelTest, ProjectFeaturesHandExample) {
  const auto x_u = Matrix<double>::FromRows({{2.0}});
  const auto w_u = Matrix<double>::FromRows({{3.0}});
  const auto x_p = Matrix<double>::FromRows({{-1.0}});
  const auto w_p = Matrix<double>::FromRows({{5.0}});
  const Matrix<double> x = project_features(x_u, x_p, w_u, w_p);
  ASSERT_EQ(x.rows(), 2u);
  ASSERT_EQ(x.cols(), 1u);
  EXPECT_EQ(x(0, 0), 6.0);   // ReLU(2 * 3)
  EXPECT_EQ(x(1, 0), 0.0);   // ReLU(-1 * 5)
}

TEST(ModelTest, ProjectFeaturesRejectsWidthMismatch) {
  const auto x_u = Matrix<double>::FromRows({{2.0}});
  const auto w_u = Matrix<double>::FromRows({{3.0, 1.0}});
  const auto x_p = Matrix<double>::FromRows({{-1.0}});
  const auto w_p = Matrix<double>::FromRows({{5.0}});
  EXPECT_THROW(project_features(x_u, x_p, w_u, w_p), ShapeError);
}

TEST(ModelTest, SageEncodingAveragesNeighborsAndZeroesIsolatedRows) {
  // Two users, one product, single edge (0, 0): user 1 is isolated, so its
  // neighbor average is the zero row.
  const BipartiteGraph graph(2, 1, {{0, 0}});
  const SparseAdjacency adj = build_adjacency(graph, NormMode::kMean);
  const auto x = Matrix<double>::FromRows(
      {{1.0, 2.0}, {5.0, 6.0}, {3.0, 4.0}});
  const auto w = Matrix<double>::FromRows({{1.0}, {1.0}, {1.0}, {1.0}});
  const Matrix<double> h = encode(adj, x, GnnKind::kSage, {w});
  ASSERT_EQ(h.rows(), 3u);
  ASSERT_EQ(h.cols(), 1u);
  EXPECT_DOUBLE_EQ(h(0, 0), 10.0);  // 1 + 2 + 3 + 4
  EXPECT_DOUBLE_EQ(h(1, 0), 11.0);  // 5 + 6 + 0 + 0
  EXPECT_DOUBLE_EQ(h(2, 0), 10.0);  // 3 + 4 + 1 + 2

  const auto w_neg = Matrix<double>::FromRows({{-1.0}, {0.0}, {0.0}, {0.0}});
  const Matrix<double> hn = encode(adj, x, GnnKind::kSage, {w_neg});
  for (const double v : hn.values()) EXPECT_EQ(v, 0.0);
}

TEST(ModelTest, LgcWithNoEdgesHalvesTheFeatures) {
  // One propagation layer over an empty graph averages X with the zero
  // matrix, giving exactly X / 2.
  const BipartiteGraph graph(2, 2, {});
  const SparseAdjacency adj = build_adjacency(graph, NormMode::kSym);
  const auto x = Matrix<double>::FromRows(
      {{2.0, -4.0}, {6.0, 0.0}, {1.0, 1.0}, {-8.0, 2.0}});
  const Matrix<double> h = encode(adj, x, GnnKind::kLgc, {}, 1);
  ASSERT_EQ(h.rows(), 4u);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      EXPECT_DOUBLE_EQ(h(i, j), x(i, j) / 2.0);
    }
  }
}

TEST(ModelTest, NgcfEncodingMatchesAnUnrolledReference) {
  Rng rng(91);
  const BipartiteGraph graph(3, 2, {{0, 0}, {0, 1}, {1, 0}, {2, 1}});
  const SparseAdjacency adj = build_adjacency(graph, NormMode::kSym);
  const std::size_t dim = 5, width = 3;
  auto rand_mat = [&](std::size_t r, std::size_t c) {
    Matrix<double> m(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    return m;
  };
  const Matrix<double> x = rand_mat(dim, width);
  std::vector<Matrix<double>> weights;
  for (int l = 0; l < 3; ++l) {
    weights.push_back(rand_mat(width, width));  // W1_l
    weights.push_back(rand_mat(width, width));  // W2_l
  }

  // Reference recurrence: H_{l+1} = ReLU((H + AH) W1 + (H ⊙ AH) W2).
  Matrix<double> h = x;
  for (int l = 0; l < 3; ++l) {
    const Matrix<double> ah = adj.spmm(h);
    Matrix<double> sum(h.rows(), h.cols());
    Matrix<double> had(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < h.cols(); ++j) {
        sum(i, j) = h(i, j) + ah(i, j);
        had(i, j) = h(i, j) * ah(i, j);
      }
    }
    const Matrix<double>& w1 = weights[2 * l];
    const Matrix<double>& w2 = weights[2 * l + 1];
    Matrix<double> next(h.rows(), width);
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < width; ++t) {
          acc += sum(i, t) * w1(t, j) + had(i, t) * w2(t, j);
        }
        next(i, j) = std::max(acc, 0.0);
      }
    }
    h = next;
  }

  const Matrix<double> got = encode(adj, x, GnnKind::kNgcf, weights);
  ASSERT_EQ(got.rows(), h.rows());
  ASSERT_EQ(got.cols(), h.cols());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_NEAR(got.values()[i], h.values()[i], 1e-12);
  }
}

TEST(ModelTest, EncodeRejectsMismatchedAdjacencyMode) {
  const BipartiteGraph graph(2, 1, {{0, 0}});
  const auto x = Matrix<double>(3, 2);
  const auto w = Matrix<double>(4, 2);
  EXPECT_THROW(
      encode(build_adjacency(graph, NormMode::kSym), x, GnnKind::kSage, {w}),
      ConfigError);
  EXPECT_THROW(
      encode(build_adjacency(graph, NormMode::kMean), x, GnnKind::kLgc, {}),
      ConfigError);
}

TEST(ModelTest, AdjacencyForPicksTheKindsAggregation) {
  const BipartiteGraph graph(2, 1, {{0, 0}});
  EXPECT_EQ(adjacency_for(tiny_config(GnnKind::kSage), graph).norm_mode(),
            NormMode::kMean);
  EXPECT_EQ(adjacency_for(tiny_config(GnnKind::kNgcf), graph).norm_mode(),
            NormMode::kSym);
  EXPECT_EQ(adjacency_for(tiny_config(GnnKind::kLgc), graph).norm_mode(),
            NormMode::kSym);
}

TEST(ModelTest, HeadForwardHandExample) {
  const auto x = Matrix<double>::FromRows({{1.0, 2.0}, {9.0, 9.0}});
  const auto h1 = Matrix<double>::FromRows({{3.0, 4.0}, {9.0, 9.0}});
  const auto w1 = Matrix<double>::FromRows(
      {{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}});
  const auto w_out = Matrix<double>::FromRows({{1.0}, {-1.0}});
  const std::vector<double> out = head_forward(x, h1, 1, w1, w_out);
  ASSERT_EQ(out.size(), 1u);
  // concat row = [1 2 3 4] → hidden ReLU([4, 6]) → 4 − 6.
  EXPECT_DOUBLE_EQ(out[0], -2.0);
}

TEST(ModelTest, FactualLossHandExample) {
  const std::vector<double> y_hat_t = {5.0, 9.0};
  const std::vector<double> y_hat_c = {9.0, 2.0};
  const std::vector<double> y = {3.0, 1.0};
  const std::vector<int> t = {1, 0};
  const std::vector<char> mask = {1, 1};
  // Treated user: (5 − 3)²; control user: (2 − 1)²; mean = 2.5.
  EXPECT_DOUBLE_EQ(loss_y(y_hat_t, y_hat_c, y, t, mask), 2.5);
}

TEST(ModelTest, FactualLossIgnoresMaskedUsersAndCounterfactualArm) {
  const std::vector<double> y_hat_t = {5.0, 1e9};
  const std::vector<double> y_hat_c = {-1e9, 2.0};
  const std::vector<double> y = {5.0, 123.0};
  const std::vector<int> t = {1, 0};
  EXPECT_DOUBLE_EQ(loss_y(y_hat_t, y_hat_c, y, t, {1, 0}), 0.0);
  EXPECT_THROW(loss_y(y_hat_t, y_hat_c, y, t, {0, 0}), ParameterError);
}

TEST(ModelTest, TreatmentLossHandExamples) {
  EXPECT_DOUBLE_EQ(loss_t({0.0}, {1}, {1}), std::log(2.0));
  EXPECT_DOUBLE_EQ(loss_t({0.0}, {0}, {1}), std::log(2.0));
  EXPECT_NEAR(loss_t({1.0}, {1}, {1}), 0.31326168751822286, 1e-12);
  EXPECT_LT(loss_t({20.0}, {1}, {1}), 1e-6);
  EXPECT_LT(loss_t({-20.0}, {0}, {1}), 1e-6);
  // The masked user's wild logit must not contribute.
  EXPECT_DOUBLE_EQ(loss_t({0.0, 1e8}, {1, 0}, {1, 0}), std::log(2.0));
}

TEST(ModelTest, IdenticalHeadsPredictZeroUplift) {
  const Dataset ds = testutil::small_dataset(8, 4, 21);
  ModelConfig cfg = tiny_config();
  UpliftModel model;
  model.config = cfg;
  model.params = init_params(cfg, ds.x_u.cols(), ds.x_p.cols());
  model.params.w_c1 = model.params.w_t1;
  model.params.w_c_out = model.params.w_t_out;
  model.user_feature_width = ds.x_u.cols();
  model.product_feature_width = ds.x_p.cols();
  const UpliftPrediction pred = predict(model, ds);
  ASSERT_EQ(pred.tau.size(), ds.n());
  for (std::size_t u = 0; u < ds.n(); ++u) {
    EXPECT_EQ(pred.y_treat[u], pred.y_control[u]);
    EXPECT_EQ(pred.tau[u], 0.0);
    EXPECT_EQ(pred.q[u], 0.0);
  }
}

TEST(ModelTest, ZeroEpochsReturnsTheInitializationBitwise) {
  const Dataset ds = testutil::small_dataset(10, 5, 4);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 0;
  const TrainResult result = train(ds, all_users(ds), cfg);
  EXPECT_TRUE(result.loss_trace.empty());
  EXPECT_TRUE(params_equal(result.model.params,
                           init_params(cfg, ds.x_u.cols(), ds.x_p.cols())));
}

TEST(ModelTest, TrainingIsDeterministic) {
  const Dataset ds = testutil::small_dataset(12, 5, 9);
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.3;  // exercise the mask stream too
  cfg.epochs = 25;
  const TrainResult a = train(ds, all_users(ds), cfg);
  const TrainResult b = train(ds, all_users(ds), cfg);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_TRUE(params_equal(a.model.params, b.model.params));
}

TEST(ModelTest, DifferentSeedsTrainDifferentModels) {
  const Dataset ds = testutil::small_dataset(12, 5, 9);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 5;
  ModelConfig other = cfg;
  other.seed = cfg.seed + 1;
  EXPECT_FALSE(params_equal(train(ds, all_users(ds), cfg).model.params,
                            train(ds, all_users(ds), other).model.params));
}

TEST(ModelTest, OverfitsASmallLabeledSet) {
  const Dataset ds = testutil::small_dataset(20, 6, 13);
  ModelConfig cfg = tiny_config();
  cfg.proj_width = 8;
  cfg.gnn_hidden = 8;
  cfg.head_hidden = 6;
  cfg.epochs = 400;
  cfg.learning_rate = 0.02;
  cfg.weight_decay = 0.0;
  const TrainResult result = train(ds, all_users(ds), cfg);
  ASSERT_EQ(result.loss_trace.size(), cfg.epochs);
  EXPECT_LT(result.loss_trace.back(), 0.1 * result.loss_trace.front());
}

TEST(ModelTest, SingleArmSetsTheFlagAndFreezesTheIdleHead) {
  Dataset ds = testutil::small_dataset(10, 4, 6);
  for (std::size_t u = 0; u < ds.n(); ++u) ds.treatment[u] = 1;
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.0;
  cfg.epochs = 30;
  const TrainResult result = train(ds, all_users(ds), cfg);
  EXPECT_TRUE(result.single_arm);

  // With no control users the control head receives zero gradient, so its
  // weights follow the pure decoupled-decay trajectory.
  Matrix<float> expected = init_params(cfg, ds.x_u.cols(), ds.x_p.cols()).w_c1;
  const float lr = static_cast<float>(cfg.learning_rate);
  const float wd = static_cast<float>(cfg.weight_decay);
  float* vals = expected.data();
  for (std::size_t k = 0; k < cfg.epochs; ++k) {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      vals[i] -= lr * wd * vals[i];
    }
  }
  const Matrix<float>& got = result.model.params.w_c1;
  ASSERT_EQ(got.rows(), expected.rows());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got.values()[i], expected.values()[i], 1e-6f);
  }
}

TEST(ModelTest, BothArmsClearTheSingleArmFlag) {
  const Dataset ds = testutil::small_dataset(10, 4, 6);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 1;
  EXPECT_FALSE(train(ds, all_users(ds), cfg).single_arm);
}

TEST(ModelTest, TrainValidatesTheLabeledSet) {
  const Dataset ds = testutil::small_dataset(6, 3, 2);
  EXPECT_THROW(train(ds, {}, tiny_config()), ParameterError);
  EXPECT_THROW(train(ds, {99}, tiny_config()), ParameterError);
}

TEST(ModelTest, DrVariantCarriesATreatmentHead) {
  ModelConfig cfg = tiny_config();
  EXPECT_EQ(init_params(cfg, 3, 2).w_treat.size(), 0u);
  cfg.dr_variant = true;
  const ModelParams<float> params = init_params(cfg, 3, 2);
  EXPECT_GT(params.w_treat.size(), 0u);
  const auto named = params.named();
  EXPECT_EQ(named.back().first, "w_treat");

  const Dataset ds = testutil::small_dataset(10, 4, 5);
  ModelConfig plain = tiny_config();
  plain.epochs = 10;
  ModelConfig dr = plain;
  dr.dr_variant = true;
  const TrainResult a = train(ds, all_users(ds), plain);
  const TrainResult b = train(ds, all_users(ds), dr);
  EXPECT_NE(a.loss_trace.front(), b.loss_trace.front());
}

TEST(ModelTest, PredictRejectsMismatchedFeatureWidths) {
  const Dataset ds = testutil::small_dataset(6, 3, 2);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 0;
  UpliftModel model = train(ds, all_users(ds), cfg).model;
  Dataset other = ds;
  other.x_u = Matrix<double>(ds.n(), ds.x_u.cols() + 1);
  EXPECT_THROW(predict(model, other), ShapeError);
}

TEST(ModelTest, McDropoutWithoutDropoutMatchesDeterministicPrediction) {
  const Dataset ds = testutil::small_dataset(9, 4, 8);
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.0;
  cfg.epochs = 15;
  const UpliftModel model = train(ds, all_users(ds), cfg).model;
  const UpliftPrediction det = predict(model, ds);
  const UpliftPrediction mc = mc_dropout_predict(model, ds, 5, 77);
  for (std::size_t u = 0; u < ds.n(); ++u) {
    EXPECT_EQ(mc.q[u], 0.0);  // exactly, not approximately
    EXPECT_EQ(mc.tau[u], det.tau[u]);
    EXPECT_EQ(mc.y_treat[u], det.y_treat[u]);
    EXPECT_EQ(mc.y_control[u], det.y_control[u]);
  }
}

TEST(ModelTest, SinglePassHasExactlyZeroVariance) {
  const Dataset ds = testutil::small_dataset(9, 4, 8);
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.4;
  cfg.epochs = 5;
  const UpliftModel model = train(ds, all_users(ds), cfg).model;
  const UpliftPrediction mc = mc_dropout_predict(model, ds, 1, 7);
  for (const double q : mc.q) EXPECT_EQ(q, 0.0);
}

TEST(ModelTest, DropoutPassesDisagreeAndProduceSpread) {
  const Dataset ds = testutil::small_dataset(12, 5, 10);
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.4;
  cfg.epochs = 30;
  const UpliftModel model = train(ds, all_users(ds), cfg).model;
  const UpliftPrediction mc = mc_dropout_predict(model, ds, 30, 5);
  EXPECT_GT(*std::max_element(mc.q.begin(), mc.q.end()), 0.0);
  // Same seed reproduces, different seed shifts the estimate.
  const UpliftPrediction again = mc_dropout_predict(model, ds, 30, 5);
  EXPECT_EQ(mc.tau, again.tau);
  EXPECT_EQ(mc.q, again.q);
  const UpliftPrediction other = mc_dropout_predict(model, ds, 30, 6);
  EXPECT_NE(mc.tau, other.tau);
}

TEST(ModelTest, McDropoutRejectsZeroPasses) {
  const Dataset ds = testutil::small_dataset(6, 3, 2);
  ModelConfig cfg = tiny_config();
  cfg.epochs = 0;
  const UpliftModel model = train(ds, all_users(ds), cfg).model;
  EXPECT_THROW(mc_dropout_predict(model, ds, 0, 1), ParameterError);
}

// ---------------------------------------------------------------------------
// Finite-difference checks of the full training loss, one per architecture.

testutil::GradCheckReport checked_gradients(GnnKind kind, bool dr,
                                            bool dropout) {
  const Dataset ds = testutil::small_dataset(5, 3, 31);
  ModelConfig cfg = tiny_config(kind);
  cfg.proj_width = 3;
  cfg.gnn_hidden = 3;
  cfg.head_hidden = 2;
  cfg.dr_variant = dr;
  cfg.dropout = dropout ? 0.35 : 0.0;
  const std::vector<std::size_t> labeled = all_users(ds);

  // Resample parameters until every ReLU input clears the kink margin the
  // probe step could cross; each draw is checked before it counts.
  testutil::GradCheckReport report;
  for (std::uint64_t attempt = 0; attempt < 20; ++attempt) {
    Rng rng(400 + attempt);
    const ModelParams<double> params =
        testutil::random_params(cfg, ds.x_u.cols(), ds.x_p.cols(), rng);
    report = testutil::model_gradcheck(cfg, ds, labeled, params, dropout,
                                       /*dropout_seed=*/11);
    if (report.min_kink_gap >= 1e-3) return report;
  }
  ADD_FAILURE() << "no parameter draw cleared the ReLU kink margin";
  return report;
}

TEST(ModelGradientTest, SageLossMatchesFiniteDifferences) {
  EXPECT_LT(checked_gradients(GnnKind::kSage, false, false).max_rel_err,
            1e-5);
}

TEST(ModelGradientTest, NgcfLossMatchesFiniteDifferences) {
  EXPECT_LT(checked_gradients(GnnKind::kNgcf, false, false).max_rel_err,
            1e-5);
}

TEST(ModelGradientTest, LgcLossMatchesFiniteDifferences) {
  EXPECT_LT(checked_gradients(GnnKind::kLgc, false, false).max_rel_err,
            1e-5);
}

TEST(ModelGradientTest, TreatmentHeadLossMatchesFiniteDifferences) {
  EXPECT_LT(checked_gradients(GnnKind::kSage, true, false).max_rel_err,
            1e-5);
}

TEST(ModelGradientTest, FrozenDropoutMaskMatchesFiniteDifferences) {
  EXPECT_LT(checked_gradients(GnnKind::kSage, false, true).max_rel_err,
            1e-5);
}

}  // namespace
}  // namespace upgnn
