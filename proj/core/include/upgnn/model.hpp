#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "upgnn/dataset.hpp"
#include "upgnn/matrix.hpp"
#include "upgnn/rng.hpp"
#include "upgnn/sparse.hpp"
#include "upgnn/tape.hpp"

namespace upgnn {

enum class GnnKind { kSage, kNgcf, kLgc };

// Parse/format the CLI spelling ("sage" | "ngcf" | "lgc").
GnnKind parse_gnn_kind(const std::string& name);
std::string gnn_kind_name(GnnKind kind);

// Architecture and training settings for one model.
struct ModelConfig {
  GnnKind gnn = GnnKind::kSage;
  std::size_t proj_width = 64;   // shared projection width w
  std::size_t gnn_hidden = 64;   // GNN layer width (SAGE/NGCF)
  std::size_t head_hidden = 32;  // branch-head hidden width
  double dropout = 0.4;
  std::size_t epochs = 2000;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  bool dr_variant = false;            // add the treatment-prediction head
  double treatment_loss_weight = 1.0; // alpha
  std::size_t lgc_layers = 3;         // propagation depth for LGC
  std::uint64_t seed = 0;

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

// Every learnable matrix, addressable by a stable name for the optimizer
// and the checkpoint format. `gnn` holds W_sage for SAGE, the interleaved
// {W1_l, W2_l} stacks for NGCF, and nothing for LGC. `w_treat` is empty
// unless the Dr variant is on.
template <typename T>
struct ModelParams {
  Matrix<T> w_u, w_p;
  std::vector<Matrix<T>> gnn;
  Matrix<T> w_t1, w_t_out;
  Matrix<T> w_c1, w_c_out;
  Matrix<T> w_treat;

  // Non-empty parameters in canonical order. Names: w_u, w_p, gnn0..,
  // w_t1, w_t_out, w_c1, w_c_out, w_treat.
  std::vector<std::pair<std::string, Matrix<T>*>> named();
  std::vector<std::pair<std::string, const Matrix<T>*>> named() const;
};

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.w_u = p.w_u.template cast<To>();
  out.w_p = p.w_p.template cast<To>();
  for (const auto& g : p.gnn) out.gnn.push_back(g.template cast<To>());
  out.w_t1 = p.w_t1.template cast<To>();
  out.w_t_out = p.w_t_out.template cast<To>();
  out.w_c1 = p.w_c1.template cast<To>();
  out.w_c_out = p.w_c_out.template cast<To>();
  out.w_treat = p.w_treat.template cast<To>();
  return out;
}

// Zero parameters with the shapes cfg implies for the given feature widths.
template <typename T>
ModelParams<T> make_params(const ModelConfig& cfg, std::size_t d_u,
                           std::size_t d_p);

// Fan-balanced uniform initialization from the "init" sub-stream of cfg.seed.
ModelParams<float> init_params(const ModelConfig& cfg, std::size_t d_u,
                               std::size_t d_p);

// A trained (or freshly initialized) model: immutable after training.
struct UpliftModel {
  ModelConfig config;
  ModelParams<float> params;
  std::size_t user_feature_width = 0;
  std::size_t product_feature_width = 0;
};

// Per-user predictions: both arms, their difference, and the MC-dropout
// uncertainty (zero for deterministic prediction).
struct UpliftPrediction {
  std::vector<double> y_treat;
  std::vector<double> y_control;
  std::vector<double> tau;
  std::vector<double> q;
};

struct TrainResult {
  UpliftModel model;
  std::vector<double> loss_trace;  // one entry per epoch
  bool single_arm = false;         // labeled set had one treatment arm
};

// ---------------------------------------------------------------------------
// Plain (tape-free, double precision) forward pieces. These mirror the tape
// graph exactly and serve as hand-checkable references.

// X = stack-by-rows(ReLU(x_u W_U), ReLU(x_p W_P)); users occupy rows 0..n-1.
Matrix<double> project_features(const Matrix<double>& x_u,
                                const Matrix<double>& x_p,
                                const Matrix<double>& w_u,
                                const Matrix<double>& w_p);

// One GNN encoding of X over the bipartite adjacency. `gnn_weights` follows
// the ModelParams layout for the kind; LGC ignores it and averages
// propagation layers 0..lgc_layers. The adjacency mode must match the kind
// (mean aggregation for SAGE, symmetric normalization otherwise).
Matrix<double> encode(const SparseAdjacency& adj, const Matrix<double>& x,
                      GnnKind kind,
                      const std::vector<Matrix<double>>& gnn_weights,
                      std::size_t lgc_layers = 3);

// One branch head over the first n rows of X and H1 (dropout off):
// concat columns, hidden ReLU layer, linear scalar output.
std::vector<double> head_forward(const Matrix<double>& x,
                                 const Matrix<double>& h1, std::size_t n,
                                 const Matrix<double>& w1,
                                 const Matrix<double>& w_out);

// Mean over masked users of T(ŷt − Y)² + (1 − T)(ŷc − Y)².
double loss_y(const std::vector<double>& y_hat_t,
              const std::vector<double>& y_hat_c,
              const std::vector<double>& y, const std::vector<int>& t,
              const std::vector<char>& mask);

// Mean binary cross-entropy of sigmoid(logit) against T over masked users.
double loss_t(const std::vector<double>& logits, const std::vector<int>& t,
              const std::vector<char>& mask);

// ---------------------------------------------------------------------------
// Tape graph construction, shared by training, inference, and the
// finite-difference checks (which need double precision).

template <typename T>
struct ForwardLeaves {
  typename Tape<T>::Ref w_u, w_p;
  std::vector<typename Tape<T>::Ref> gnn;
  typename Tape<T>::Ref w_t1, w_t_out, w_c1, w_c_out, w_treat;
};

// Register every parameter as a differentiable leaf, canonical order.
template <typename T>
ForwardLeaves<T> register_leaves(Tape<T>& tape, const ModelParams<T>& params);

template <typename T>
struct ForwardOutputs {
  typename Tape<T>::Ref y_treat;   // n×1
  typename Tape<T>::Ref y_control; // n×1
  typename Tape<T>::Ref t_logits;  // n×1, valid iff has_t_logits
  bool has_t_logits = false;
  // Inputs of every ReLU in the graph, for kink-distance guards around
  // finite-difference probes.
  std::vector<typename Tape<T>::Ref> relu_inputs;
};

// Build the full two-headed forward pass. `adj` must cover n+m nodes with
// the mode `adjacency_for` picks for cfg.gnn. Dropout layers are recorded
// only when use_dropout is true and cfg.dropout > 0 (then dropout_rng must
// be non-null; masks are drawn treatment branch first).
template <typename T>
ForwardOutputs<T> build_forward(Tape<T>& tape, const ModelConfig& cfg,
                                const ForwardLeaves<T>& leaves,
                                const SparseAdjacency& adj,
                                const Matrix<T>& x_u, const Matrix<T>& x_p,
                                bool use_dropout, Rng* dropout_rng);

// Factual loss (plus α-weighted treatment loss for the Dr variant) over the
// given labeled users. Throws ParameterError when `labeled` is empty.
template <typename T>
typename Tape<T>::Ref build_loss(Tape<T>& tape, const ModelConfig& cfg,
                                 const ForwardOutputs<T>& fwd,
                                 const Dataset& ds,
                                 const std::vector<std::size_t>& labeled);

// The adjacency normalization each GNN kind expects.
SparseAdjacency adjacency_for(const ModelConfig& cfg,
                              const BipartiteGraph& graph);

// ---------------------------------------------------------------------------
// Training and inference.

// Full-batch training on the labeled subset. Deterministic given cfg.seed.
// Empty labeled set → ParameterError; a single treatment arm trains anyway
// and sets TrainResult::single_arm.
TrainResult train(const Dataset& ds, const std::vector<std::size_t>& labeled,
                  const ModelConfig& cfg);

// Deterministic prediction (dropout off): q is all zeros.
UpliftPrediction predict(const UpliftModel& model, const Dataset& ds);

// MC-dropout inference: τ̂ and per-arm outputs are means across passes, q is
// the per-user population variance of τ̂ across passes. passes = 0 →
// ParameterError; one pass or dropout 0 gives q ≡ 0.
UpliftPrediction mc_dropout_predict(const UpliftModel& model,
                                    const Dataset& ds, std::size_t passes,
                                    std::uint64_t seed);

}  // namespace upgnn
