// SGD with classical momentum, coupled weight decay, and the gradient
// accumulator used by the offline trainer.
//
// Update rule (velocity form): v <- momentum*v - lr*(g + weight_decay*p),
// then p <- p + v. A per-parameter lr_scale multiplies lr so late layers can
// train faster than shared ones.
#pragma once

#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

struct SgdState {
  std::vector<Tensord> velocity;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<double> lr_scale;  // optional, one entry per parameter

  SgdState() = default;
  SgdState(const std::vector<Tensord*>& params, double lr, double mu = 0.9, double wd = 5e-4)
      : learning_rate(lr), momentum(mu), weight_decay(wd) {
    if (lr <= 0) throw ArgumentError("learning rate must be positive");
    if (mu < 0 || mu >= 1) throw ArgumentError("momentum must be in [0,1)");
    if (wd < 0) throw ArgumentError("weight decay must be >= 0");
    velocity.reserve(params.size());
    for (const Tensord* p : params) velocity.push_back(Tensord(p->shape));
  }
};

inline void sgd_step(const std::vector<Tensord*>& params, const std::vector<const Tensord*>& grads,
                     SgdState& state) {
  if (params.size() != grads.size() || params.size() != state.velocity.size())
    throw DimensionError("sgd_step parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensord& p = *params[i];
    const Tensord& g = *grads[i];
    Tensord& v = state.velocity[i];
    if (!p.same_shape(g) || !p.same_shape(v)) throw DimensionError("sgd_step shape mismatch");
    if (!g.all_finite()) throw NumericError("sgd_step gradient is not finite");
    const double lr = state.learning_rate * (i < state.lr_scale.size() ? state.lr_scale[i] : 1.0);
    for (std::size_t n = 0; n < p.data.size(); ++n) {
      v.data[n] = state.momentum * v.data[n] - lr * (g.data[n] + state.weight_decay * p.data[n]);
      p.data[n] += v.data[n];
    }
  }
}

inline void sgd_step(const std::vector<Tensord*>& params, const std::vector<Tensord>& grads, SgdState& state) {
  std::vector<const Tensord*> gp;
  gp.reserve(grads.size());
  for (const auto& g : grads) gp.push_back(&g);
  sgd_step(params, gp, state);
}

/// Elementwise sum of grads into buffer.
inline void accumulate_gradients(std::vector<Tensord>& buffer, const std::vector<Tensord>& grads) {
  if (buffer.size() != grads.size()) throw DimensionError("accumulate_gradients count mismatch");
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    if (!buffer[i].same_shape(grads[i])) throw DimensionError("accumulate_gradients shape mismatch");
    buffer[i].vec() += grads[i].vec();
  }
}

/// Sums incoming gradients and applies one optimizer step on the accumulated
/// sum every `flush_every` additions, then clears the buffer.
class GradAccumulator {
 public:
  GradAccumulator(const std::vector<Tensord*>& params, int flush_every) : flush_every_(flush_every) {
    if (flush_every < 1) throw ArgumentError("flush_every must be >= 1");
    buffer_.reserve(params.size());
    for (const Tensord* p : params) buffer_.push_back(Tensord(p->shape));
  }

  /// Returns true when this addition triggered a flush.
  bool add(const std::vector<Tensord>& grads, const std::vector<Tensord*>& params, SgdState& state) {
    accumulate_gradients(buffer_, grads);
    if (++count_ % flush_every_ != 0) return false;
    sgd_step(params, buffer_, state);
    for (auto& b : buffer_) b.set_zero();
    return true;
  }

  const std::vector<Tensord>& buffer() const { return buffer_; }
  int pending() const { return count_ % flush_every_; }
  long long flush_count() const { return count_ / flush_every_; }

 private:
  std::vector<Tensord> buffer_;
  int flush_every_;
  long long count_ = 0;
};

}  // namespace mdt
