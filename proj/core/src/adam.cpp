#include "sparse_score/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sparse_score {

void adam_step(Vector& params, const Vector& grads, AdamState& state, const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes must match");
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= cfg.learning_rate * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace sparse_score
