#include "psamp/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <stdexcept>

namespace psamp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Per-sequence state of one predictive run, advanced one iteration at a
// time so single runs and lockstep batches share the same loop body.
struct RunState {
  TokenBuffer buffer;
  const NoiseGrid* eps = nullptr;
  std::optional<ForwardResult> prev;
  std::vector<std::int64_t> mistakes;
  std::vector<std::int64_t> last_change;  // call index of the last value change
  std::int64_t iterations = 0;
  std::vector<double> arm_times;
  std::vector<double> fill_times;

  RunState(Index d, Index K, const NoiseGrid& e)
      : buffer(d, K), eps(&e), mistakes(static_cast<size_t>(d), 0),
        last_change(static_cast<size_t>(d), 0) {}

  bool done() const { return buffer.frontier == buffer.d; }

  void write(Index j, std::int32_t tok, std::int64_t call) {
    if (buffer[j] != tok) {
      buffer.set(j, tok);
      last_change[static_cast<size_t>(j)] = call;
    }
  }
};

void validate_strategy(const ArmModel& model, const ForecastStrategy& s) {
  if (s.kind == StrategyKind::Learned) {
    if (!s.forecaster) throw std::invalid_argument("learned strategy requires a forecaster");
    if (s.forecaster->cfg.H != model.cfg.H || s.forecaster->cfg.K != model.cfg.K)
      throw std::invalid_argument("forecaster/model shape mismatch");
  }
}

void fill_forecasts(RunState& st, const ArmModel& model, const ForecastStrategy& strategy,
                    std::int64_t call) {
  const Index d = st.buffer.d;
  const Index i = st.buffer.frontier;
  if (!st.prev) return;  // first iteration keeps the all-zeros forecast

  switch (strategy.kind) {
    case StrategyKind::Zeros:
      for (Index j = i; j < d; ++j) st.write(j, 0, call);
      break;
    case StrategyKind::PredictLast: {
      const std::int32_t v = i > 0 ? st.buffer[i - 1] : 0;
      for (Index j = i; j < d; ++j) st.write(j, v, call);
      break;
    }
    case StrategyKind::Fpi:
      for (Index j = i; j < d; ++j) {
        Index tok;
        if (strategy.use_reparam_noise) {
          tok = gumbel_argmax(st.prev->logits.row(j), st.eps->row(j));
        } else {
          st.prev->logits.row(j).maxCoeff(&tok);
        }
        st.write(j, static_cast<std::int32_t>(tok), call);
      }
      break;
    case StrategyKind::Learned: {
      const Forecaster& f = *strategy.forecaster;
      const Index T = f.cfg.T;
      if (i > 0) {
        RowVector h_row = strategy.share_representation
                              ? RowVector(st.prev->hidden.row(i - 1))
                              : RowVector(RowVector::Zero(model.cfg.H));
        Matrix eps_rows = Matrix::Zero(T, model.cfg.K);
        for (Index t = 1; t <= T; ++t)
          if (i - 1 + t < d) eps_rows.row(t - 1) = st.eps->row(i - 1 + t);
        Matrix rows = forecast_logits(f, h_row, st.buffer[i - 1],
                                      f.cfg.condition_on_noise ? &eps_rows : nullptr,
                                      strategy.share_representation);
        std::vector<std::int32_t> toks =
            forecast_tokens(rows, eps_rows, strategy.use_reparam_noise);
        for (Index t = 1; t <= T; ++t) {
          const Index p = i - 1 + t;
          if (p >= d) break;
          if (p >= i) st.write(p, toks[static_cast<size_t>(t - 1)], call);
        }
      }
      // Positions past the forecast window reuse the previous model output.
      for (Index j = std::max(i, i - 1 + T + 1); j < d; ++j) {
        Index tok;
        if (strategy.use_reparam_noise) {
          tok = gumbel_argmax(st.prev->logits.row(j), st.eps->row(j));
        } else {
          st.prev->logits.row(j).maxCoeff(&tok);
        }
        st.write(j, static_cast<std::int32_t>(tok), call);
      }
      break;
    }
  }
}

// One predictive iteration: forecast fill, one model pass, frontier
// advance, and the mismatch overwrite. Returns after the pass.
void run_iteration(RunState& st, const ArmModel& model, const ForecastStrategy& strategy) {
  const Index d = st.buffer.d;
  const std::int64_t call = st.iterations + 1;

  auto t0 = Clock::now();
  fill_forecasts(st, model, strategy, call);
  st.fill_times.push_back(seconds_since(t0));

  t0 = Clock::now();
  ForwardResult fr = arm_forward(model, st.buffer);
  st.arm_times.push_back(seconds_since(t0));
  st.iterations = call;

  Index i = st.buffer.frontier;
  while (i < d) {
    const Index out = gumbel_argmax(fr.logits.row(i), st.eps->row(i));
    if (st.buffer[i] == static_cast<std::int32_t>(out)) {
      ++i;
      continue;
    }
    st.write(i, static_cast<std::int32_t>(out), call);
    // A mismatch costs an extra pass unless it lands on the last position,
    // which settles the sequence anyway; mistakes count the former so that
    // sum(mistakes) == arm_calls - 1 holds for every run.
    if (i + 1 < d) st.mistakes[static_cast<size_t>(i)] += 1;
    ++i;
    break;
  }
  st.buffer.advance_frontier(i);
  st.prev = std::move(fr);
}

SampleReport finish_report(const RunState& st, double wall) {
  const Index d = st.buffer.d;
  SampleReport rep;
  rep.arm_calls = st.iterations;
  rep.baseline_calls = d;
  rep.call_percentage = 100.0 * static_cast<double>(rep.arm_calls) / static_cast<double>(d);
  rep.iterations = st.iterations;
  rep.mistakes = st.mistakes;
  rep.convergence.resize(static_cast<size_t>(d));
  for (Index j = 0; j < d; ++j)
    rep.convergence[static_cast<size_t>(j)] =
        static_cast<double>(std::max<std::int64_t>(1, st.last_change[static_cast<size_t>(j)]));
  rep.wall_time_s = wall;
  rep.arm_cost_s = median(st.arm_times);
  rep.forecaster_cost_s = median(st.fill_times);
  const double m = static_cast<double>(rep.arm_calls);
  rep.breakeven_satisfied =
      m * rep.forecaster_cost_s <= (static_cast<double>(d) - m) * rep.arm_cost_s;
  return rep;
}

}  // namespace

std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Zeros: return "zeros";
    case StrategyKind::PredictLast: return "predict-last";
    case StrategyKind::Fpi: return "fpi";
    case StrategyKind::Learned: return "learned";
  }
  return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
  if (s == "zeros") return StrategyKind::Zeros;
  if (s == "predict-last") return StrategyKind::PredictLast;
  if (s == "fpi") return StrategyKind::Fpi;
  if (s == "learned") return StrategyKind::Learned;
  throw std::invalid_argument("unknown strategy: " + s);
}

std::pair<TokenBuffer, SampleReport> ancestral_sample(const ArmModel& model,
                                                      const NoiseGrid& eps) {
  const Index d = model.cfg.d;
  const Index K = model.cfg.K;
  if (eps.rows() != d || eps.cols() != K)
    throw std::invalid_argument("ancestral_sample: noise shape mismatch");

  TokenBuffer buffer(d, K);
  SampleReport rep;
  rep.mistakes.assign(static_cast<size_t>(d), 0);
  rep.convergence.resize(static_cast<size_t>(d));
  std::vector<double> arm_times;

  const auto start = Clock::now();
  for (Index i = 0; i < d; ++i) {
    const auto t0 = Clock::now();
    ForwardResult fr = arm_forward(model, buffer);
    arm_times.push_back(seconds_since(t0));
    const Index tok = gumbel_argmax(fr.logits.row(i), eps.row(i));
    buffer.set(i, static_cast<std::int32_t>(tok));
    buffer.advance_frontier(i + 1);
    rep.convergence[static_cast<size_t>(i)] = static_cast<double>(i + 1);
  }
  rep.wall_time_s = seconds_since(start);
  rep.arm_calls = d;
  rep.baseline_calls = d;
  rep.call_percentage = 100.0;
  rep.iterations = d;
  rep.arm_cost_s = median(arm_times);
  rep.forecaster_cost_s = 0.0;
  rep.breakeven_satisfied = false;
  return {std::move(buffer), std::move(rep)};
}

std::pair<TokenBuffer, SampleReport> predictive_sample(const ArmModel& model,
                                                       const ForecastStrategy& strategy,
                                                       const NoiseGrid& eps) {
  const Index d = model.cfg.d;
  const Index K = model.cfg.K;
  if (eps.rows() != d || eps.cols() != K)
    throw std::invalid_argument("predictive_sample: noise shape mismatch");
  validate_strategy(model, strategy);

  RunState st(d, K, eps);
  const auto start = Clock::now();
  while (!st.done()) run_iteration(st, model, strategy);
  SampleReport rep = finish_report(st, seconds_since(start));
  return {std::move(st.buffer), std::move(rep)};
}

std::pair<TokenBuffer, SampleReport> fixed_point_sample(const ArmModel& model,
                                                        const NoiseGrid& eps) {
  ForecastStrategy s;
  s.kind = StrategyKind::Fpi;
  return predictive_sample(model, s, eps);
}

std::pair<std::vector<TokenBuffer>, SampleReport> batch_sample(
    const ArmModel& model, const ForecastStrategy& strategy,
    std::span<const NoiseGrid> eps_batch) {
  if (eps_batch.empty()) throw std::invalid_argument("batch_sample: empty batch");
  const Index d = model.cfg.d;
  const Index K = model.cfg.K;
  for (const NoiseGrid& e : eps_batch)
    if (e.rows() != d || e.cols() != K)
      throw std::invalid_argument("batch_sample: noise shape mismatch");
  validate_strategy(model, strategy);

  std::vector<RunState> states;
  states.reserve(eps_batch.size());
  for (const NoiseGrid& e : eps_batch) states.emplace_back(d, K, e);

  const auto start = Clock::now();
  std::int64_t lockstep = 0;
  for (;;) {
    bool any = false;
    for (auto& st : states)
      if (!st.done()) {
        run_iteration(st, model, strategy);
        any = true;
      }
    if (!any) break;
    ++lockstep;
  }
  const double wall = seconds_since(start);

  SampleReport rep;
  rep.arm_calls = lockstep;
  rep.baseline_calls = d;
  rep.call_percentage = 100.0 * static_cast<double>(lockstep) / static_cast<double>(d);
  rep.iterations = lockstep;
  rep.mistakes.assign(static_cast<size_t>(d), 0);
  rep.convergence.assign(static_cast<size_t>(d), 0.0);
  std::vector<double> arm_times;
  std::vector<double> fill_times;
  for (const auto& st : states) {
    for (Index j = 0; j < d; ++j) {
      rep.mistakes[static_cast<size_t>(j)] += st.mistakes[static_cast<size_t>(j)];
      rep.convergence[static_cast<size_t>(j)] +=
          static_cast<double>(std::max<std::int64_t>(1, st.last_change[static_cast<size_t>(j)]));
    }
    arm_times.insert(arm_times.end(), st.arm_times.begin(), st.arm_times.end());
    fill_times.insert(fill_times.end(), st.fill_times.begin(), st.fill_times.end());
  }
  for (auto& c : rep.convergence) c /= static_cast<double>(states.size());
  rep.wall_time_s = wall;
  rep.arm_cost_s = median(arm_times);
  rep.forecaster_cost_s = median(fill_times);
  const double m = static_cast<double>(lockstep);
  rep.breakeven_satisfied =
      m * rep.forecaster_cost_s <= (static_cast<double>(d) - m) * rep.arm_cost_s;

  std::vector<TokenBuffer> out;
  out.reserve(states.size());
  for (auto& st : states) out.push_back(std::move(st.buffer));
  return {std::move(out), std::move(rep)};
}

double simulate_run_length(double p, std::int64_t trials, Rng& rng) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("simulate_run_length: p out of range");
  if (trials < 1) throw std::invalid_argument("simulate_run_length: trials must be >= 1");
  std::int64_t total = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    while (rng.uniform_open() < p) ++total;
  }
  return static_cast<double>(total) / static_cast<double>(trials);
}

}  // namespace psamp
