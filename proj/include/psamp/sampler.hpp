#pragma once

#include "psamp/arm.hpp"
#include "psamp/forecast.hpp"
#include "psamp/gumbel.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace psamp {

enum class StrategyKind { Zeros, PredictLast, Fpi, Learned };

std::string to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string& s);

struct ForecastStrategy {
  StrategyKind kind = StrategyKind::Fpi;
  const Forecaster* forecaster = nullptr;  // required for Learned
  bool use_reparam_noise = true;       // off: forecasts take the plain argmax
  bool share_representation = true;    // off: heads see a zeroed hidden row
};

struct SampleReport {
  std::int64_t arm_calls = 0;
  std::int64_t baseline_calls = 0;  // = d
  double call_percentage = 0.0;     // arm_calls / d * 100
  std::int64_t iterations = 0;      // loop iterations (lockstep count for batches)
  std::vector<std::int64_t> mistakes;  // per position; batch runs sum over samples
  std::vector<double> convergence;     // per position, 1-based call index; batch runs average
  double wall_time_s = 0.0;
  double arm_cost_s = 0.0;         // median seconds per model call
  double forecaster_cost_s = 0.0;  // median seconds per forecast fill
  bool breakeven_satisfied = false;  // m * cost(F) <= (d - m) * cost(ARM)
};

/// One model call per position; the reference sample for a (model, eps)
/// pair. Convergence entry i is i + 1 by construction.
std::pair<TokenBuffer, SampleReport> ancestral_sample(const ArmModel& model,
                                                      const NoiseGrid& eps);

/// Frontier-tracked predictive sampling: fill the suffix with forecasts,
/// run one parallel pass, settle every leading position whose forecast
/// matched the reparametrized output, overwrite the first mismatch. The
/// returned tokens are bit-identical to ancestral_sample under the same
/// noise; arm_calls <= d.
std::pair<TokenBuffer, SampleReport> predictive_sample(const ArmModel& model,
                                                       const ForecastStrategy& strategy,
                                                       const NoiseGrid& eps);

/// Predictive sampling with the model's own previous outputs as forecasts
/// (the fixed-point iteration of the sampling map), plus per-position
/// convergence accounting.
std::pair<TokenBuffer, SampleReport> fixed_point_sample(const ArmModel& model,
                                                        const NoiseGrid& eps);

/// Lockstep batch: every iteration advances all unfinished sequences with
/// one batched pass; reported arm_calls is the number of lockstep
/// iterations (the slowest sequence dictates it).
std::pair<std::vector<TokenBuffer>, SampleReport> batch_sample(
    const ArmModel& model, const ForecastStrategy& strategy, std::span<const NoiseGrid> eps_batch);

/// Mean count of leading successes of i.i.d. Bernoulli(p) streams; the
/// closed form is p / (1 - p).
double simulate_run_length(double p, std::int64_t trials, Rng& rng);

}  // namespace psamp
