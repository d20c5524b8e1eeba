// Shared fc4/fc5 trunk feeding per-domain two-way branches, the two softmax
// readouts (within-domain target-vs-background, cross-domain positive-score
// comparison), and the combined training loss with analytic gradients.
//
// Score layout: [2, D] per sample with row 0 = positive/target score and
// row 1 = background score; batches stack to [N, 2, D]. Domains are indexed
// 0..D-1 throughout.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdt/layers.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

struct HeadConfig {
  int in_features = 0;  // flattened RoI feature width (C * 3 * 3)
  int hidden = 512;     // fc4/fc5 width; 32 at the toy preset
  int domains = 1;
  bool dropout = false;  // optional inverted dropout after each hidden relu
  double dropout_p = 0.5;

  void validate() const {
    if (in_features < 1 || hidden < 1 || domains < 1)
      throw ConfigError("head config requires positive widths and domain count");
    if (dropout_p < 0 || dropout_p >= 1) throw ConfigError("dropout_p must lie in [0,1)");
  }
};

template <typename Scalar>
struct HeadParamsT {
  Tensor<Scalar> w4, b4;               // [hidden, in], [hidden]
  Tensor<Scalar> w5, b5;               // [hidden, hidden], [hidden]
  std::vector<Tensor<Scalar>> w6, b6;  // per domain: [2, hidden], [2]

  int domains() const { return static_cast<int>(w6.size()); }

  template <typename Other>
  HeadParamsT<Other> cast() const {
    HeadParamsT<Other> o;
    o.w4 = w4.template cast<Other>();
    o.b4 = b4.template cast<Other>();
    o.w5 = w5.template cast<Other>();
    o.b5 = b5.template cast<Other>();
    for (const auto& t : w6) o.w6.push_back(t.template cast<Other>());
    for (const auto& t : b6) o.b6.push_back(t.template cast<Other>());
    return o;
  }
};
using HeadParams = HeadParamsT<double>;

Tensord uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng);

inline HeadParams init_head(const HeadConfig& cfg, Rng& rng) {
  cfg.validate();
  HeadParams p;
  p.w4 = uniform_fan_in({cfg.hidden, cfg.in_features}, cfg.in_features, rng);
  p.b4 = uniform_fan_in({cfg.hidden}, cfg.in_features, rng);
  p.w5 = uniform_fan_in({cfg.hidden, cfg.hidden}, cfg.hidden, rng);
  p.b5 = uniform_fan_in({cfg.hidden}, cfg.hidden, rng);
  for (int d = 0; d < cfg.domains; ++d) {
    p.w6.push_back(uniform_fan_in({2, cfg.hidden}, cfg.hidden, rng));
    p.b6.push_back(uniform_fan_in({2}, cfg.hidden, rng));
  }
  return p;
}

/// Scores of one sample across all domain branches.
struct DomainScores {
  Tensord f;  // [2, D]
  int active_domain = 0;
};

/// Cached batch activations for the reverse pass.
template <typename Scalar>
struct HeadTraceT {
  Tensor<Scalar> x;        // [N, in]
  Tensor<Scalar> a4, h4;   // pre-relu, post-relu(+dropout)
  Tensor<Scalar> a5, h5;
  std::vector<char> mask4, mask5;  // kept units when dropout is active
  bool dropout = false;
  double keep = 1.0;
};
using HeadTrace = HeadTraceT<double>;

namespace detail {

template <typename Scalar>
void apply_dropout(Tensor<Scalar>& h, std::vector<char>& mask, double p, Rng& rng) {
  const double keep = 1.0 - p;
  mask.resize(h.data.size());
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    const bool kept = rng.uniform() < keep;
    mask[i] = kept;
    h.data[i] = kept ? h.data[i] / Scalar(keep) : Scalar(0);
  }
}

}  // namespace detail

/// Batched forward over flattened features X [N, in] -> scores [N, 2, D].
/// `rng` enables dropout (training mode); pass nullptr for inference.
template <typename Scalar>
Tensor<Scalar> head_forward_batch(const Tensor<Scalar>& X, const HeadParamsT<Scalar>& p,
                                  HeadTraceT<Scalar>* trace = nullptr, const HeadConfig* cfg = nullptr,
                                  Rng* rng = nullptr) {
  if (X.rank() != 2) throw DimensionError("head forward expects input [N, features]");
  if (X.shape[1] != p.w4.shape[1]) throw DimensionError("head input width does not match fc4");
  const int N = X.shape[0];
  const int D = p.domains();

  Tensor<Scalar> a4 = linear(X, p.w4, p.b4);
  Tensor<Scalar> h4 = relu(a4);
  const bool drop = cfg && cfg->dropout && rng;
  std::vector<char> mask4, mask5;
  if (drop) detail::apply_dropout(h4, mask4, cfg->dropout_p, *rng);
  Tensor<Scalar> a5 = linear(h4, p.w5, p.b5);
  Tensor<Scalar> h5 = relu(a5);
  if (drop) detail::apply_dropout(h5, mask5, cfg->dropout_p, *rng);

  Tensor<Scalar> scores({N, 2, D});
  for (int d = 0; d < D; ++d) {
    Tensor<Scalar> branch = linear(h5, p.w6[d], p.b6[d]);  // [N, 2]
    for (int n = 0; n < N; ++n) {
      scores(n, 0, d) = branch(n, 0);
      scores(n, 1, d) = branch(n, 1);
    }
  }
  if (trace) {
    trace->x = X;
    trace->a4 = std::move(a4);
    trace->h4 = std::move(h4);
    trace->a5 = std::move(a5);
    trace->h5 = std::move(h5);
    trace->mask4 = std::move(mask4);
    trace->mask5 = std::move(mask5);
    trace->dropout = drop;
    trace->keep = drop ? 1.0 - cfg->dropout_p : 1.0;
  }
  return scores;
}

/// Single-sample convenience over a [C,h,w] RoI feature.
inline DomainScores head_forward(const Tensord& roi_feature, const HeadParams& p, int active_domain = 0) {
  Tensord X = roi_feature.reshaped({1, static_cast<int>(roi_feature.data.size())});
  Tensord s = head_forward_batch(X, p);
  DomainScores out;
  out.active_domain = active_domain;
  out.f = s.reshaped({2, p.domains()});
  return out;
}

struct HeadGrads {
  Tensord d_w4, d_b4, d_w5, d_b5;
  std::vector<Tensord> d_w6, d_b6;
  Tensord d_x;  // [N, in], for feature/backbone backprop
};

inline HeadGrads head_backward(const Tensord& d_scores, const HeadTrace& t, const HeadParams& p) {
  const int N = t.x.shape[0];
  const int D = p.domains();
  if (d_scores.rank() != 3 || d_scores.shape[0] != N || d_scores.shape[1] != 2 || d_scores.shape[2] != D)
    throw DimensionError("head_backward gradient shape mismatch");

  HeadGrads g;
  Tensord d_h5({N, p.w5.shape[0]});
  Tensord d_branch({N, 2});
  for (int d = 0; d < D; ++d) {
    for (int n = 0; n < N; ++n) {
      d_branch(n, 0) = d_scores(n, 0, d);
      d_branch(n, 1) = d_scores(n, 1, d);
    }
    LayerGrad gb = linear_backward(t.h5, p.w6[d], d_branch);
    g.d_w6.push_back(std::move(gb.d_params[0]));
    g.d_b6.push_back(std::move(gb.d_params[1]));
    d_h5.mat(N, d_h5.shape[1]) += gb.d_input.mat(N, d_h5.shape[1]);
  }
  if (t.dropout)
    for (std::size_t i = 0; i < d_h5.data.size(); ++i)
      d_h5.data[i] = t.mask5[i] ? d_h5.data[i] / t.keep : 0.0;
  Tensord d_a5 = relu_backward(t.a5, d_h5);
  LayerGrad g5 = linear_backward(t.h4, p.w5, d_a5);
  g.d_w5 = std::move(g5.d_params[0]);
  g.d_b5 = std::move(g5.d_params[1]);
  Tensord d_h4 = std::move(g5.d_input);
  if (t.dropout)
    for (std::size_t i = 0; i < d_h4.data.size(); ++i)
      d_h4.data[i] = t.mask4[i] ? d_h4.data[i] / t.keep : 0.0;
  Tensord d_a4 = relu_backward(t.a4, d_h4);
  LayerGrad g4 = linear_backward(t.x, p.w4, d_a4);
  g.d_w4 = std::move(g4.d_params[0]);
  g.d_b4 = std::move(g4.d_params[1]);
  g.d_x = std::move(g4.d_input);
  return g;
}

// ---------------------------------------------------------------------------
// Softmax readouts
// ---------------------------------------------------------------------------

/// Column-wise two-way softmax: target vs background within each domain.
/// Max-subtraction stabilized; per-column computation, so batch order cannot
/// change any value.
inline Tensord softmax_cls(const Tensord& f) {
  if (f.rank() != 2 || f.shape[0] != 2) throw DimensionError("softmax_cls expects scores [2, D]");
  check_finite(f, "softmax_cls input");
  const int D = f.shape[1];
  Tensord out({2, D});
  for (int d = 0; d < D; ++d) {
    const double m = std::max(f(0, d), f(1, d));
    const double e0 = std::exp(f(0, d) - m), e1 = std::exp(f(1, d) - m);
    out(0, d) = e0 / (e0 + e1);
    out(1, d) = e1 / (e0 + e1);
  }
  return out;
}

/// Row-wise D-way softmax: compares like channels across domains.
inline Tensord softmax_inst(const Tensord& f) {
  if (f.rank() != 2 || f.shape[0] != 2) throw DimensionError("softmax_inst expects scores [2, D]");
  check_finite(f, "softmax_inst input");
  const int D = f.shape[1];
  Tensord out({2, D});
  for (int r = 0; r < 2; ++r) {
    double m = f(r, 0);
    for (int d = 1; d < D; ++d) m = std::max(m, f(r, d));
    double z = 0;
    for (int d = 0; d < D; ++d) z += std::exp(f(r, d) - m);
    for (int d = 0; d < D; ++d) out(r, d) = std::exp(f(r, d) - m) / z;
  }
  return out;
}

/// Positive-class probability of column d: the tracker's confidence score.
inline double positive_score(const Tensord& f, int d) {
  if (f.rank() != 2 || f.shape[0] != 2 || d < 0 || d >= f.shape[1])
    throw DimensionError("positive_score domain index out of range");
  const double m = std::max(f(0, d), f(1, d));
  const double e0 = std::exp(f(0, d) - m), e1 = std::exp(f(1, d) - m);
  return e0 / (e0 + e1);
}

// ---------------------------------------------------------------------------
// Training losses
// ---------------------------------------------------------------------------

namespace detail {

inline void check_batch(const Tensord& scores, const std::vector<int>& labels, int active_domain) {
  if (scores.rank() != 3 || scores.shape[1] != 2)
    throw DimensionError("loss expects batch scores [N, 2, D]");
  if (static_cast<int>(labels.size()) != scores.shape[0])
    throw DimensionError("loss label count does not match batch");
  if (scores.shape[0] < 1) throw ArgumentError("loss batch must be nonempty");
  if (active_domain < 0 || active_domain >= scores.shape[2])
    throw ArgumentError("active domain out of range");
}

}  // namespace detail

/// Mean two-way cross-entropy in the active domain's column. Labels: 1 =
/// target, 0 = background.
inline double loss_cls(const Tensord& scores, const std::vector<int>& labels, int active_domain) {
  detail::check_batch(scores, labels, active_domain);
  const int N = scores.shape[0];
  double loss = 0;
  for (int n = 0; n < N; ++n) {
    const double f0 = scores(n, 0, active_domain), f1 = scores(n, 1, active_domain);
    const double m = std::max(f0, f1);
    const double lse = m + std::log(std::exp(f0 - m) + std::exp(f1 - m));
    loss -= (labels[n] == 1 ? f0 : f1) - lse;
  }
  return loss / N;
}

/// Cross-domain embedding loss: positive samples' row-0 scores, softmaxed
/// over the domain subset S, penalized for mass outside the active domain.
/// Negative samples contribute nothing; normalization is by the full batch.
inline double loss_inst(const Tensord& scores, const std::vector<int>& labels, int active_domain,
                        const std::vector<int>& subset) {
  detail::check_batch(scores, labels, active_domain);
  if (std::find(subset.begin(), subset.end(), active_domain) == subset.end())
    throw ArgumentError("instance loss subset must contain the active domain");
  for (int d : subset)
    if (d < 0 || d >= scores.shape[2]) throw ArgumentError("instance loss subset domain out of range");
  const int N = scores.shape[0];
  double loss = 0;
  for (int n = 0; n < N; ++n) {
    if (labels[n] != 1) continue;
    double m = scores(n, 0, subset[0]);
    for (int d : subset) m = std::max(m, scores(n, 0, d));
    double z = 0;
    for (int d : subset) z += std::exp(scores(n, 0, d) - m);
    loss -= scores(n, 0, active_domain) - m - std::log(z);
  }
  return loss / N;
}

inline double loss_total(double cls, double inst, double alpha) {
  if (alpha < 0) throw ArgumentError("loss weight alpha must be >= 0");
  return cls + alpha * inst;
}

struct LossResult {
  double cls = 0, inst = 0, total = 0;
  Tensord d_scores;  // [N, 2, D], gradient of total
};

/// Both loss terms plus the analytic gradient w.r.t. the raw scores.
inline LossResult multi_task_loss(const Tensord& scores, const std::vector<int>& labels,
                                  int active_domain, const std::vector<int>& subset, double alpha) {
  LossResult r;
  r.cls = loss_cls(scores, labels, active_domain);
  r.inst = loss_inst(scores, labels, active_domain, subset);
  r.total = loss_total(r.cls, r.inst, alpha);

  const int N = scores.shape[0];
  r.d_scores = Tensord(scores.shape);
  for (int n = 0; n < N; ++n) {
    const double f0 = scores(n, 0, active_domain), f1 = scores(n, 1, active_domain);
    const double m = std::max(f0, f1);
    const double e0 = std::exp(f0 - m), e1 = std::exp(f1 - m);
    const double p0 = e0 / (e0 + e1);
    r.d_scores(n, 0, active_domain) = (p0 - (labels[n] == 1 ? 1.0 : 0.0)) / N;
    r.d_scores(n, 1, active_domain) = ((1.0 - p0) - (labels[n] == 1 ? 0.0 : 1.0)) / N;
    if (labels[n] == 1 && subset.size() > 1) {
      double ms = scores(n, 0, subset[0]);
      for (int d : subset) ms = std::max(ms, scores(n, 0, d));
      double z = 0;
      for (int d : subset) z += std::exp(scores(n, 0, d) - ms);
      for (int d : subset) {
        const double q = std::exp(scores(n, 0, d) - ms) / z;
        r.d_scores(n, 0, d) += alpha * (q - (d == active_domain ? 1.0 : 0.0)) / N;
      }
    }
  }
  return r;
}

}  // namespace mdt
