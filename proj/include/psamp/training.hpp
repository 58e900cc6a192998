#pragma once

#include "psamp/adam.hpp"
#include "psamp/arm.hpp"
#include "psamp/forecast.hpp"

#include <vector>

namespace psamp {

struct TrainConfig {
  std::int64_t steps = 5000;
  Index batch_size = 32;
  double lr = 1e-3;
  double lr_decay = 1.0;
  double weight_decay = 1e-6;
  std::int64_t eval_every = 250;
  Index eval_cap = 256;  // sequences per bpd evaluation

  // Joint forecasting heads; null trains the likelihood objective alone.
  Forecaster* forecaster = nullptr;
  double forecast_weight = 0.01;
  bool forecast_share_representation = true;
};

struct TrainPoint {
  std::int64_t step = 0;
  double train_bpd = 0.0;
  double val_bpd = 0.0;
  double forecast_loss = 0.0;  // mean KL per pair in nats; NaN when no heads
};
using TrainCurve = std::vector<TrainPoint>;

double mean_bpd(const ArmModel& model, const std::vector<TokenBuffer>& data, Index cap);

/// Minibatch Adam on mean teacher-forced NLL, optionally joint with the
/// down-weighted forecasting KL. Deterministic given the rng seed; throws
/// on a non-finite loss.
TrainCurve train_arm(ArmModel& model, const std::vector<TokenBuffer>& train,
                     const std::vector<TokenBuffer>& val, const TrainConfig& cfg, Rng& rng);

struct ForecastTrainConfig {
  std::int64_t steps = 2000;
  Index batch_size = 32;
  double lr = 1e-2;
  double lr_decay = 1.0;
  std::int64_t eval_every = 100;
  bool share_representation = true;  // h block zeroed when false
};

struct ForecastTrainPoint {
  std::int64_t step = 0;
  double loss = 0.0;  // mean KL per pair in nats
};
using ForecastCurve = std::vector<ForecastTrainPoint>;

/// Post-hoc head training against a frozen model. Data sequences come from
/// the data distribution; when the heads condition on noise, each item
/// draws posterior reparametrization noise for its sequence.
ForecastCurve train_forecaster(const ArmModel& model, Forecaster& f,
                               const std::vector<TokenBuffer>& train,
                               const ForecastTrainConfig& cfg, Rng& rng);

}  // namespace psamp
