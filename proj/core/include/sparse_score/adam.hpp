#pragma once

#include "sparse_score/types.hpp"

namespace sparse_score {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;

  explicit AdamState(Index size = 0) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// Bias-corrected Adam, elementwise:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws std::invalid_argument if shapes disagree.
void adam_step(Vector& params, const Vector& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace sparse_score
