#include "psamp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace psamp {

void adam_step(Matrix& params, const Matrix& grads, AdamState& state) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols())
    throw std::invalid_argument("adam_step: params/grads shape mismatch");
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(params.rows(), params.cols());
    state.v = Matrix::Zero(params.rows(), params.cols());
  }
  if (state.m.rows() != params.rows() || state.m.cols() != params.cols())
    throw std::invalid_argument("adam_step: state shape mismatch");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double lr_t = state.lr * std::pow(state.lr_decay, t - 1.0);

  if (state.weight_decay != 0.0) params *= (1.0 - lr_t * state.weight_decay);

  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grads.array().square().matrix();

  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -=
      lr_t * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

}  // namespace psamp
