#pragma once

#include "psamp/numeric.hpp"

#include <cstdint>

namespace psamp {

/// Adam with decoupled weight decay. Moment buffers take the shape of the
/// parameters on first use; the step counter advances by exactly one per
/// update.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
  double lr_decay = 1.0;  // multiplicative per-step decay; 1.0 = none
  std::int64_t step = 0;
  Matrix m;
  Matrix v;
};

/// One Adam update. Decay shrink params *= (1 - lr_t * wd) is applied
/// before the bias-corrected moment delta.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state);

}  // namespace psamp
