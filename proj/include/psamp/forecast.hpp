#pragma once

#include "psamp/arm.hpp"
#include "psamp/gumbel.hpp"

#include <optional>
#include <vector>

namespace psamp {

/// Per-offset affine heads on the last valid hidden row. Head t in 1..T
/// predicts the model's distribution t steps past the conditioning row.
/// Optional input blocks: one-hot of the last settled token and the
/// noise row of the predicted position (both default off).
struct ForecasterConfig {
  Index T = 1;
  Index H = 0;  // paired hidden width
  Index K = 0;  // paired category count
  bool condition_on_last_token = false;
  bool condition_on_noise = false;
};

struct Forecaster {
  ForecasterConfig cfg;
  std::vector<Matrix> w;  // per offset, input_width x K
  std::vector<Matrix> b;  // per offset, 1 x K

  Index input_width() const {
    return cfg.H + (cfg.condition_on_last_token ? cfg.K : 0) +
           (cfg.condition_on_noise ? cfg.K : 0);
  }
};

/// Zero-initialized heads (uniform predictions).
Forecaster make_forecaster(const ForecasterConfig& cfg);
Forecaster make_forecaster_random(const ForecasterConfig& cfg, Rng& rng);

/// T normalized log-probability rows from the hidden row of the last valid
/// position. eps_rows (T x K) is required when conditioning on noise; row t
/// is the noise row of the position head t predicts. share_representation
/// = false zeroes the hidden input block (the representation-sharing
/// ablation).
Matrix forecast_logits(const Forecaster& f, const RowVector& h_row, std::int32_t last_token,
                       const Matrix* eps_rows, bool share_representation = true);

/// Token per row via the reparametrized argmax; with use_reparam_noise off,
/// the plain argmax of each forecast row (noise-ablation behavior).
std::vector<std::int32_t> forecast_tokens(const Matrix& logit_rows, const Matrix& eps_rows,
                                          bool use_reparam_noise = true);

/// KL(p || q) for normalized log-probability rows: sum exp(p) (p - q).
template <typename D1, typename D2>
double kl_categorical(const Eigen::MatrixBase<D1>& p_logp, const Eigen::MatrixBase<D2>& q_logp) {
  if (p_logp.size() != q_logp.size())
    throw std::invalid_argument("kl_categorical: length mismatch");
  double kl = 0.0;
  for (Index c = 0; c < p_logp.size(); ++c)
    kl += std::exp(p_logp(c)) * (p_logp(c) - q_logp(c));
  return kl;
}

struct ForecasterGradients {
  std::vector<Matrix> w;  // per offset
  std::vector<Matrix> b;
  void set_zero();
};
ForecasterGradients make_gradients(const Forecaster& f);

struct ForecastLossOptions {
  bool share_representation = true;  // zero the h block when false
  const NoiseGrid* eps = nullptr;    // required when conditioning on noise
};

struct ForecastLossResult {
  double kl_sum = 0.0;   // sum over (j, t) pairs with j + t < d, in nats
  std::int64_t pairs = 0;
  Matrix dhidden;        // d x H, gradient into the shared representation
};

/// KL between detached teacher-forced model rows and the forecast heads,
/// accumulated over every (row j, offset t) pair with j + t < d. Gradients
/// flow into the heads and, through dhidden, into the representation path
/// only; the model rows are treated as constants.
ForecastLossResult forecaster_loss(const ArmModel& model, const Forecaster& f,
                                   const TokenBuffer& x, ForecasterGradients& grads,
                                   const ForecastLossOptions& opts = {});

/// Loss only, no gradients (evaluation and finite-difference probes).
double forecaster_loss_value(const ArmModel& model, const Forecaster& f, const TokenBuffer& x,
                             const ForecastLossOptions& opts = {});

}  // namespace psamp
