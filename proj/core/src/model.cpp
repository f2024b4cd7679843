#include "upgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "upgnn/errors.hpp"
#include "upgnn/graph.hpp"
#include "upgnn/optimizer.hpp"

namespace upgnn {

GnnKind parse_gnn_kind(const std::string& name) {
  if (name == "sage") return GnnKind::kSage;
  if (name == "ngcf") return GnnKind::kNgcf;
  if (name == "lgc") return GnnKind::kLgc;
  throw ConfigError("unknown gnn kind '" + name + "'");
}

std::string gnn_kind_name(GnnKind kind) {
  switch (kind) {
    case GnnKind::kSage: return "sage";
    case GnnKind::kNgcf: return "ngcf";
    case GnnKind::kLgc: return "lgc";
  }
  throw ConfigError("unknown gnn kind");
}

void ModelConfig::validate() const {
  if (proj_width == 0 || gnn_hidden == 0 || head_hidden == 0) {
    throw ConfigError("model: hidden sizes must be positive");
  }
  if (!(dropout >= 0.0) || dropout >= 1.0) {
    throw ConfigError("model: dropout must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("model: learning rate must be positive");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("model: weight decay must be non-negative");
  }
  if (!(treatment_loss_weight >= 0.0)) {
    throw ConfigError("model: treatment loss weight must be non-negative");
  }
  if (lgc_layers == 0) {
    throw ConfigError("model: lgc layers must be positive");
  }
}

namespace {

constexpr std::size_t kNgcfLayers = 3;

}  // namespace

template <typename T>
std::vector<std::pair<std::string, Matrix<T>*>> ModelParams<T>::named() {
  std::vector<std::pair<std::string, Matrix<T>*>> out;
  out.emplace_back("w_u", &w_u);
  out.emplace_back("w_p", &w_p);
  for (std::size_t i = 0; i < gnn.size(); ++i) {
    out.emplace_back("gnn" + std::to_string(i), &gnn[i]);
  }
  out.emplace_back("w_t1", &w_t1);
  out.emplace_back("w_t_out", &w_t_out);
  out.emplace_back("w_c1", &w_c1);
  out.emplace_back("w_c_out", &w_c_out);
  if (!w_treat.empty()) out.emplace_back("w_treat", &w_treat);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Matrix<T>*>> ModelParams<T>::named()
    const {
  std::vector<std::pair<std::string, const Matrix<T>*>> out;
  for (auto& [name, mat] : const_cast<ModelParams<T>*>(this)->named()) {
    out.emplace_back(name, mat);
  }
  return out;
}

template struct ModelParams<float>;
template struct ModelParams<double>;

template <typename T>
ModelParams<T> make_params(const ModelConfig& cfg, std::size_t d_u,
                           std::size_t d_p) {
  cfg.validate();
  if (d_u == 0 || d_p == 0) {
    throw ShapeError("model: feature widths must be positive");
  }
  const std::size_t w = cfg.proj_width;
  std::size_t embed = 0;
  ModelParams<T> p;
  p.w_u = Matrix<T>(d_u, w);
  p.w_p = Matrix<T>(d_p, w);
  switch (cfg.gnn) {
    case GnnKind::kSage:
      p.gnn.emplace_back(2 * w, cfg.gnn_hidden);
      embed = cfg.gnn_hidden;
      break;
    case GnnKind::kNgcf:
      for (std::size_t l = 0; l < kNgcfLayers; ++l) {
        const std::size_t in = l == 0 ? w : cfg.gnn_hidden;
        p.gnn.emplace_back(in, cfg.gnn_hidden);  // W1_l
        p.gnn.emplace_back(in, cfg.gnn_hidden);  // W2_l
      }
      embed = cfg.gnn_hidden;
      break;
    case GnnKind::kLgc:
      embed = w;
      break;
  }
  const std::size_t head_in = w + embed;
  p.w_t1 = Matrix<T>(head_in, cfg.head_hidden);
  p.w_t_out = Matrix<T>(cfg.head_hidden, 1);
  p.w_c1 = Matrix<T>(head_in, cfg.head_hidden);
  p.w_c_out = Matrix<T>(cfg.head_hidden, 1);
  if (cfg.dr_variant) p.w_treat = Matrix<T>(head_in, 1);
  return p;
}

template ModelParams<float> make_params<float>(const ModelConfig&, std::size_t,
                                               std::size_t);
template ModelParams<double> make_params<double>(const ModelConfig&,
                                                 std::size_t, std::size_t);

ModelParams<float> init_params(const ModelConfig& cfg, std::size_t d_u,
                               std::size_t d_p) {
  ModelParams<float> p = make_params<float>(cfg, d_u, d_p);
  Rng rng = Rng(cfg.seed).sub("init");
  for (auto& [name, mat] : p.named()) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(mat->rows() + mat->cols()));
    for (float& v : mat->values()) {
      v = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Plain reference forward pieces.

namespace {

Matrix<double> dense_matmul(const Matrix<double>& a, const Matrix<double>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ");
  }
  Matrix<double> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

void relu_inplace(Matrix<double>& m) {
  for (double& v : m.values()) v = std::max(0.0, v);
}

}  // namespace

Matrix<double> project_features(const Matrix<double>& x_u,
                                const Matrix<double>& x_p,
                                const Matrix<double>& w_u,
                                const Matrix<double>& w_p) {
  if (w_u.cols() != w_p.cols()) {
    throw ShapeError("project: projection widths differ");
  }
  Matrix<double> hu = dense_matmul(x_u, w_u);
  Matrix<double> hp = dense_matmul(x_p, w_p);
  relu_inplace(hu);
  relu_inplace(hp);
  Matrix<double> x(hu.rows() + hp.rows(), hu.cols());
  for (std::size_t i = 0; i < hu.rows(); ++i) {
    for (std::size_t j = 0; j < hu.cols(); ++j) x(i, j) = hu(i, j);
  }
  for (std::size_t i = 0; i < hp.rows(); ++i) {
    for (std::size_t j = 0; j < hp.cols(); ++j) x(hu.rows() + i, j) = hp(i, j);
  }
  return x;
}

Matrix<double> encode(const SparseAdjacency& adj, const Matrix<double>& x,
                      GnnKind kind,
                      const std::vector<Matrix<double>>& gnn_weights,
                      std::size_t lgc_layers) {
  if (adj.dimension() != x.rows()) {
    throw ShapeError("encode: adjacency dimension does not match features");
  }
  switch (kind) {
    case GnnKind::kSage: {
      if (adj.norm_mode() != NormMode::kMean) {
        throw ConfigError("encode: SAGE expects mean-aggregation adjacency");
      }
      if (gnn_weights.size() != 1) {
        throw ShapeError("encode: SAGE expects one weight matrix");
      }
      const Matrix<double> neigh = adj.spmm(x);
      Matrix<double> cat(x.rows(), 2 * x.cols());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
          cat(i, j) = x(i, j);
          cat(i, x.cols() + j) = neigh(i, j);
        }
      }
      Matrix<double> h = dense_matmul(cat, gnn_weights[0]);
      relu_inplace(h);
      return h;
    }
    case GnnKind::kNgcf: {
      if (adj.norm_mode() != NormMode::kSym) {
        throw ConfigError("encode: NGCF expects symmetric-normalized adjacency");
      }
      if (gnn_weights.size() != 2 * kNgcfLayers) {
        throw ShapeError("encode: NGCF expects six weight matrices");
      }
      Matrix<double> h = x;
      for (std::size_t l = 0; l < kNgcfLayers; ++l) {
        const Matrix<double> ah = adj.spmm(h);
        Matrix<double> sum_in(h.rows(), h.cols());
        Matrix<double> mix_in(h.rows(), h.cols());
        for (std::size_t i = 0; i < h.size(); ++i) {
          sum_in.values()[i] = h.values()[i] + ah.values()[i];
          mix_in.values()[i] = h.values()[i] * ah.values()[i];
        }
        Matrix<double> pre = dense_matmul(sum_in, gnn_weights[2 * l]);
        const Matrix<double> mix = dense_matmul(mix_in, gnn_weights[2 * l + 1]);
        for (std::size_t i = 0; i < pre.size(); ++i) {
          pre.values()[i] += mix.values()[i];
        }
        relu_inplace(pre);
        h = std::move(pre);
      }
      return h;
    }
    case GnnKind::kLgc: {
      if (adj.norm_mode() != NormMode::kSym) {
        throw ConfigError("encode: LGC expects symmetric-normalized adjacency");
      }
      if (lgc_layers == 0) {
        throw ConfigError("encode: LGC needs at least one propagation layer");
      }
      Matrix<double> acc = x;
      Matrix<double> h = x;
      for (std::size_t l = 0; l < lgc_layers; ++l) {
        h = adj.spmm(h);
        for (std::size_t i = 0; i < acc.size(); ++i) {
          acc.values()[i] += h.values()[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(lgc_layers + 1);
      for (double& v : acc.values()) v *= inv;
      return acc;
    }
  }
  throw ConfigError("encode: unknown gnn kind");
}

std::vector<double> head_forward(const Matrix<double>& x,
                                 const Matrix<double>& h1, std::size_t n,
                                 const Matrix<double>& w1,
                                 const Matrix<double>& w_out) {
  if (n > x.rows() || n > h1.rows() || x.rows() != h1.rows()) {
    throw ShapeError("head: row counts do not cover the user block");
  }
  Matrix<double> feat(n, x.cols() + h1.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) feat(i, j) = x(i, j);
    for (std::size_t j = 0; j < h1.cols(); ++j) {
      feat(i, x.cols() + j) = h1(i, j);
    }
  }
  Matrix<double> hidden = dense_matmul(feat, w1);
  relu_inplace(hidden);
  const Matrix<double> out = dense_matmul(hidden, w_out);
  if (out.cols() != 1) throw ShapeError("head: output weights must have one column");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = out(i, 0);
  return y;
}

double loss_y(const std::vector<double>& y_hat_t,
              const std::vector<double>& y_hat_c,
              const std::vector<double>& y, const std::vector<int>& t,
              const std::vector<char>& mask) {
  const std::size_t n = y.size();
  if (y_hat_t.size() != n || y_hat_c.size() != n || t.size() != n ||
      mask.size() != n) {
    throw ShapeError("loss_y: vector lengths differ");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double d = (t[i] ? y_hat_t[i] : y_hat_c[i]) - y[i];
    total += d * d;
    ++count;
  }
  if (count == 0) throw ParameterError("loss_y: no labeled users");
  return total / static_cast<double>(count);
}

double loss_t(const std::vector<double>& logits, const std::vector<int>& t,
              const std::vector<char>& mask) {
  const std::size_t n = logits.size();
  if (t.size() != n || mask.size() != n) {
    throw ShapeError("loss_t: vector lengths differ");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double z = logits[i];
    const double target = t[i] ? 1.0 : 0.0;
    total += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    ++count;
  }
  if (count == 0) throw ParameterError("loss_t: no labeled users");
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Tape graph.

template <typename T>
ForwardLeaves<T> register_leaves(Tape<T>& tape, const ModelParams<T>& params) {
  ForwardLeaves<T> leaves;
  leaves.w_u = tape.leaf(params.w_u);
  leaves.w_p = tape.leaf(params.w_p);
  for (const auto& g : params.gnn) leaves.gnn.push_back(tape.leaf(g));
  leaves.w_t1 = tape.leaf(params.w_t1);
  leaves.w_t_out = tape.leaf(params.w_t_out);
  leaves.w_c1 = tape.leaf(params.w_c1);
  leaves.w_c_out = tape.leaf(params.w_c_out);
  if (!params.w_treat.empty()) leaves.w_treat = tape.leaf(params.w_treat);
  return leaves;
}

template ForwardLeaves<float> register_leaves(Tape<float>&,
                                              const ModelParams<float>&);
template ForwardLeaves<double> register_leaves(Tape<double>&,
                                               const ModelParams<double>&);

template <typename T>
ForwardOutputs<T> build_forward(Tape<T>& tape, const ModelConfig& cfg,
                                const ForwardLeaves<T>& leaves,
                                const SparseAdjacency& adj,
                                const Matrix<T>& x_u, const Matrix<T>& x_p,
                                bool use_dropout, Rng* dropout_rng) {
  if (adj.dimension() != x_u.rows() + x_p.rows()) {
    throw ShapeError("forward: adjacency dimension does not match node count");
  }
  const std::size_t n = x_u.rows();
  ForwardOutputs<T> out;

  const auto u_pre = tape.matmul(tape.constant(x_u), leaves.w_u);
  const auto p_pre = tape.matmul(tape.constant(x_p), leaves.w_p);
  out.relu_inputs.push_back(u_pre);
  out.relu_inputs.push_back(p_pre);
  const auto x = tape.concat_rows(tape.relu(u_pre), tape.relu(p_pre));

  auto embed = x;
  switch (cfg.gnn) {
    case GnnKind::kSage: {
      const auto neigh = tape.spmm(adj, x);
      const auto pre = tape.matmul(tape.concat_cols(x, neigh), leaves.gnn[0]);
      out.relu_inputs.push_back(pre);
      embed = tape.relu(pre);
      break;
    }
    case GnnKind::kNgcf: {
      auto h = x;
      for (std::size_t l = 0; l < kNgcfLayers; ++l) {
        const auto ah = tape.spmm(adj, h);
        const auto pre =
            tape.add(tape.matmul(tape.add(h, ah), leaves.gnn[2 * l]),
                     tape.matmul(tape.hadamard(h, ah), leaves.gnn[2 * l + 1]));
        out.relu_inputs.push_back(pre);
        h = tape.relu(pre);
      }
      embed = h;
      break;
    }
    case GnnKind::kLgc: {
      auto acc = x;
      auto h = x;
      for (std::size_t l = 0; l < cfg.lgc_layers; ++l) {
        h = tape.spmm(adj, h);
        acc = tape.add(acc, h);
      }
      embed = tape.scale(acc, T(1) / static_cast<T>(cfg.lgc_layers + 1));
      break;
    }
  }

  const auto feat = tape.concat_cols(tape.slice_rows(x, 0, n),
                                     tape.slice_rows(embed, 0, n));
  const bool drop = use_dropout && cfg.dropout > 0.0;
  if (drop && dropout_rng == nullptr) {
    throw ParameterError("forward: dropout requires a generator");
  }
  const auto branch = [&](typename Tape<T>::Ref w1,
                          typename Tape<T>::Ref w_out) {
    const auto pre = tape.matmul(feat, w1);
    out.relu_inputs.push_back(pre);
    auto h = tape.relu(pre);
    if (drop) h = tape.dropout(h, cfg.dropout, *dropout_rng);
    return tape.matmul(h, w_out);
  };
  out.y_treat = branch(leaves.w_t1, leaves.w_t_out);
  out.y_control = branch(leaves.w_c1, leaves.w_c_out);
  if (cfg.dr_variant) {
    out.t_logits = tape.matmul(feat, leaves.w_treat);
    out.has_t_logits = true;
  }
  return out;
}

template ForwardOutputs<float> build_forward(Tape<float>&, const ModelConfig&,
                                             const ForwardLeaves<float>&,
                                             const SparseAdjacency&,
                                             const Matrix<float>&,
                                             const Matrix<float>&, bool, Rng*);
template ForwardOutputs<double> build_forward(Tape<double>&,
                                              const ModelConfig&,
                                              const ForwardLeaves<double>&,
                                              const SparseAdjacency&,
                                              const Matrix<double>&,
                                              const Matrix<double>&, bool,
                                              Rng*);

template <typename T>
typename Tape<T>::Ref build_loss(Tape<T>& tape, const ModelConfig& cfg,
                                 const ForwardOutputs<T>& fwd,
                                 const Dataset& ds,
                                 const std::vector<std::size_t>& labeled) {
  if (labeled.empty()) {
    throw ParameterError("loss: labeled set is empty");
  }
  std::vector<std::size_t> treated, control;
  for (const std::size_t u : labeled) {
    if (u >= ds.n()) throw ParameterError("loss: labeled index out of range");
    (ds.treatment[u] ? treated : control).push_back(u);
  }

  // Squared factual error of one arm, as a 1×1 sum.
  const auto arm_sq = [&](typename Tape<T>::Ref pred,
                          const std::vector<std::size_t>& idx) {
    Matrix<T> target(idx.size(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      target(i, 0) = static_cast<T>(ds.outcome[idx[i]]);
    }
    const auto diff =
        tape.sub(tape.gather_rows(pred, idx), tape.constant(target));
    return tape.sum(tape.hadamard(diff, diff));
  };
  auto loss = tape.scale(tape.add(arm_sq(fwd.y_treat, treated),
                                  arm_sq(fwd.y_control, control)),
                         T(1) / static_cast<T>(labeled.size()));

  if (cfg.dr_variant) {
    if (!fwd.has_t_logits) {
      throw ConfigError("loss: dr variant needs treatment logits");
    }
    Matrix<T> targets(labeled.size(), 1);
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      targets(i, 0) = static_cast<T>(ds.treatment[labeled[i]]);
    }
    const auto bce = tape.bce_with_logits_mean(
        tape.gather_rows(fwd.t_logits, labeled), targets);
    loss = tape.add(loss,
                    tape.scale(bce, static_cast<T>(cfg.treatment_loss_weight)));
  }
  return loss;
}

template Tape<float>::Ref build_loss(Tape<float>&, const ModelConfig&,
                                     const ForwardOutputs<float>&,
                                     const Dataset&,
                                     const std::vector<std::size_t>&);
template Tape<double>::Ref build_loss(Tape<double>&, const ModelConfig&,
                                      const ForwardOutputs<double>&,
                                      const Dataset&,
                                      const std::vector<std::size_t>&);

SparseAdjacency adjacency_for(const ModelConfig& cfg,
                              const BipartiteGraph& graph) {
  return build_adjacency(
      graph, cfg.gnn == GnnKind::kSage ? NormMode::kMean : NormMode::kSym);
}

// ---------------------------------------------------------------------------
// Training and inference.

namespace {

// Leaf refs in the same order ModelParams::named() lists the matrices.
template <typename T>
std::vector<typename Tape<T>::Ref> flat_refs(const ForwardLeaves<T>& leaves,
                                             bool dr) {
  std::vector<typename Tape<T>::Ref> refs{leaves.w_u, leaves.w_p};
  refs.insert(refs.end(), leaves.gnn.begin(), leaves.gnn.end());
  refs.push_back(leaves.w_t1);
  refs.push_back(leaves.w_t_out);
  refs.push_back(leaves.w_c1);
  refs.push_back(leaves.w_c_out);
  if (dr) refs.push_back(leaves.w_treat);
  return refs;
}

std::vector<double> column_of(const Matrix<float>& m) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, 0);
  return out;
}

void check_widths(const UpliftModel& model, const Dataset& ds) {
  if (ds.x_u.cols() != model.user_feature_width ||
      ds.x_p.cols() != model.product_feature_width) {
    throw ShapeError("predict: dataset feature widths do not match the model");
  }
}

}  // namespace

TrainResult train(const Dataset& ds, const std::vector<std::size_t>& labeled,
                  const ModelConfig& cfg) {
  cfg.validate();
  if (labeled.empty()) throw ParameterError("train: labeled set is empty");
  bool has_treated = false;
  bool has_control = false;
  for (const std::size_t u : labeled) {
    if (u >= ds.n()) throw ParameterError("train: labeled index out of range");
    (ds.treatment[u] ? has_treated : has_control) = true;
  }

  const SparseAdjacency adj = adjacency_for(cfg, ds.graph);
  const Matrix<float> x_u = ds.x_u.cast<float>();
  const Matrix<float> x_p = ds.x_p.cast<float>();

  TrainResult result;
  result.single_arm = !(has_treated && has_control);
  result.model.config = cfg;
  result.model.params = init_params(cfg, ds.x_u.cols(), ds.x_p.cols());
  result.model.user_feature_width = ds.x_u.cols();
  result.model.product_feature_width = ds.x_p.cols();

  AdamW opt(cfg.learning_rate, cfg.weight_decay);
  const auto named = result.model.params.named();
  std::vector<AdamState> states(named.size());
  Rng dropout_rng = Rng(cfg.seed).sub("dropout");

  result.loss_trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    TapeF tape;
    const auto leaves = register_leaves(tape, result.model.params);
    const auto fwd = build_forward(tape, cfg, leaves, adj, x_u, x_p,
                                   /*use_dropout=*/true, &dropout_rng);
    const auto loss = build_loss(tape, cfg, fwd, ds, labeled);
    tape.backward(loss);
    result.loss_trace.push_back(
        static_cast<double>(tape.value(loss)(0, 0)));

    const auto refs = flat_refs(leaves, cfg.dr_variant);
    for (std::size_t i = 0; i < named.size(); ++i) {
      opt.step(*named[i].second, tape.grad(refs[i]), states[i]);
    }
    for (const auto& [name, mat] : named) {
      for (const float v : mat->values()) {
        if (!std::isfinite(v)) {
          throw Error("train: weight '" + name + "' became non-finite at epoch " +
                      std::to_string(epoch));
        }
      }
    }
  }
  return result;
}

UpliftPrediction predict(const UpliftModel& model, const Dataset& ds) {
  check_widths(model, ds);
  const SparseAdjacency adj = adjacency_for(model.config, ds.graph);
  TapeF tape;
  const auto leaves = register_leaves(tape, model.params);
  const auto fwd =
      build_forward(tape, model.config, leaves, adj, ds.x_u.cast<float>(),
                    ds.x_p.cast<float>(), /*use_dropout=*/false, nullptr);
  UpliftPrediction pred;
  pred.y_treat = column_of(tape.value(fwd.y_treat));
  pred.y_control = column_of(tape.value(fwd.y_control));
  pred.tau.resize(ds.n());
  for (std::size_t u = 0; u < ds.n(); ++u) {
    pred.tau[u] = pred.y_treat[u] - pred.y_control[u];
  }
  pred.q.assign(ds.n(), 0.0);
  return pred;
}

UpliftPrediction mc_dropout_predict(const UpliftModel& model,
                                    const Dataset& ds, std::size_t passes,
                                    std::uint64_t seed) {
  if (passes == 0) throw ParameterError("mc-dropout: passes must be positive");
  check_widths(model, ds);
  const SparseAdjacency adj = adjacency_for(model.config, ds.graph);
  const Matrix<float> x_u = ds.x_u.cast<float>();
  const Matrix<float> x_p = ds.x_p.cast<float>();
  const std::size_t n = ds.n();

  std::vector<std::vector<double>> taus(passes), yts(passes), ycs(passes);
  for (std::size_t pass = 0; pass < passes; ++pass) {
    Rng rng = Rng(seed).sub("mc", pass);
    TapeF tape;
    const auto leaves = register_leaves(tape, model.params);
    const auto fwd = build_forward(tape, model.config, leaves, adj, x_u, x_p,
                                   /*use_dropout=*/true, &rng);
    yts[pass] = column_of(tape.value(fwd.y_treat));
    ycs[pass] = column_of(tape.value(fwd.y_control));
    taus[pass].resize(n);
    for (std::size_t u = 0; u < n; ++u) {
      taus[pass][u] = yts[pass][u] - ycs[pass][u];
    }
  }

  // Aggregate relative to the first pass: shifting the data before the
  // mean/variance sums cancels the common offset, so identical passes (for
  // instance with dropout 0) give exactly the pass value and exactly zero
  // variance instead of picking up rounding residue.
  const double inv = 1.0 / static_cast<double>(passes);
  auto shifted_mean = [&](const std::vector<std::vector<double>>& per_pass,
                          std::size_t u) {
    double acc = 0.0;
    for (std::size_t pass = 1; pass < passes; ++pass) {
      acc += per_pass[pass][u] - per_pass[0][u];
    }
    return per_pass[0][u] + acc * inv;
  };
  UpliftPrediction pred;
  pred.y_treat.assign(n, 0.0);
  pred.y_control.assign(n, 0.0);
  pred.tau.assign(n, 0.0);
  pred.q.assign(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    pred.y_treat[u] = shifted_mean(yts, u);
    pred.y_control[u] = shifted_mean(ycs, u);
    double shift_acc = 0.0;
    for (std::size_t pass = 1; pass < passes; ++pass) {
      shift_acc += taus[pass][u] - taus[0][u];
    }
    const double mean_shift = shift_acc * inv;
    double var = 0.0;
    for (std::size_t pass = 0; pass < passes; ++pass) {
      const double c = (taus[pass][u] - taus[0][u]) - mean_shift;
      var += c * c;
    }
    pred.tau[u] = taus[0][u] + mean_shift;
    pred.q[u] = var * inv;
  }
  return pred;
}

}  // namespace upgnn
