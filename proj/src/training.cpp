#include "psamp/training.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace psamp {

namespace {
constexpr double kLn2 = 0.6931471805599453;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<AdamState> make_states(size_t n, double lr, double lr_decay, double wd) {
  std::vector<AdamState> states(n);
  for (auto& s : states) {
    s.lr = lr;
    s.lr_decay = lr_decay;
    s.weight_decay = wd;
  }
  return states;
}
}  // namespace

double mean_bpd(const ArmModel& model, const std::vector<TokenBuffer>& data, Index cap) {
  if (data.empty()) return kNan;
  const size_t n = std::min<size_t>(data.size(), static_cast<size_t>(cap));
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += arm_nll(model, data[i]);
  return sum / static_cast<double>(n);
}

TrainCurve train_arm(ArmModel& model, const std::vector<TokenBuffer>& train,
                     const std::vector<TokenBuffer>& val, const TrainConfig& cfg, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("train_arm: empty dataset");
  for (const auto& x : train)
    if (x.d != model.cfg.d || x.K != model.cfg.K)
      throw std::invalid_argument("train_arm: sequence shape mismatch");

  Rng batch_rng = rng.split("batches");
  Rng noise_rng = rng.split("posterior-noise");

  auto params = model.param_list();
  auto states = make_states(params.size(), cfg.lr, cfg.lr_decay, cfg.weight_decay);
  ArmGradients grads = make_gradients(model);

  Forecaster* fc = cfg.forecaster;
  ForecasterGradients fgrads;
  std::vector<AdamState> fstates;
  if (fc) {
    fgrads = make_gradients(*fc);
    fstates = make_states(fc->w.size() + fc->b.size(), cfg.lr, cfg.lr_decay, cfg.weight_decay);
  }

  TrainCurve curve;
  const auto evaluate = [&](std::int64_t step) {
    TrainPoint pt;
    pt.step = step;
    pt.train_bpd = mean_bpd(model, train, cfg.eval_cap);
    pt.val_bpd = val.empty() ? kNan : mean_bpd(model, val, cfg.eval_cap);
    pt.forecast_loss = kNan;
    if (fc) {
      double kl = 0.0;
      std::int64_t pairs = 0;
      const size_t n = std::min<size_t>(train.size(), 32);
      for (size_t i = 0; i < n; ++i) {
        ForecastLossOptions opts;
        opts.share_representation = cfg.forecast_share_representation;
        NoiseGrid eps;
        if (fc->cfg.condition_on_noise) {
          ForwardResult fr = arm_forward(model, train[i]);
          Rng probe = noise_rng.split("eval/" + std::to_string(i));
          eps = sample_posterior_noise(train[i], fr.logits, probe);
          opts.eps = &eps;
        }
        ForecasterGradients tmp = make_gradients(*fc);
        ForecastLossResult r = forecaster_loss(model, *fc, train[i], tmp, opts);
        kl += r.kl_sum;
        pairs += r.pairs;
      }
      pt.forecast_loss = pairs > 0 ? kl / static_cast<double>(pairs) : 0.0;
    }
    curve.push_back(pt);
  };

  evaluate(0);

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    grads.set_zero();
    if (fc) fgrads.set_zero();

    double loss_bits = 0.0;
    const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
    for (Index b = 0; b < cfg.batch_size; ++b) {
      const auto& x = train[batch_rng.below(train.size())];
      if (!fc) {
        loss_bits += arm_nll_with_gradients(model, x, grads) * inv_b;
        continue;
      }
      // Joint objective: mean bpd + weight * mean KL (bits) per pair. The
      // KL term reaches the model only through the shared representation.
      ArmTrace tr = arm_forward_traced(model, x);
      const double nll_scale = -1.0 / (static_cast<double>(x.d) * kLn2);
      Matrix dlogp = Matrix::Zero(x.d, x.K);
      double logp_sum = 0.0;
      for (Index i = 0; i < x.d; ++i) {
        logp_sum += tr.logp(i, x[i]);
        dlogp(i, x[i]) = nll_scale * inv_b;
      }
      loss_bits += nll_scale * logp_sum * inv_b;

      ForecastLossOptions opts;
      opts.share_representation = cfg.forecast_share_representation;
      NoiseGrid eps;
      if (fc->cfg.condition_on_noise) {
        Rng item = noise_rng.split("step/" + std::to_string(step) + "/" + std::to_string(b));
        eps = sample_posterior_noise(x, tr.logp, item);
        opts.eps = &eps;
      }
      ForecasterGradients item_fg = make_gradients(*fc);
      ForecastLossResult fr = forecaster_loss(model, *fc, x, item_fg, opts);
      const double pair_scale =
          fr.pairs > 0 ? cfg.forecast_weight / (static_cast<double>(fr.pairs) * kLn2) : 0.0;
      loss_bits += fr.kl_sum * pair_scale * inv_b;
      for (size_t t = 0; t < fc->w.size(); ++t) {
        fgrads.w[t] += item_fg.w[t] * (pair_scale * inv_b);
        fgrads.b[t] += item_fg.b[t] * (pair_scale * inv_b);
      }
      Matrix dhidden = fr.dhidden * (pair_scale * inv_b);
      arm_backward(model, x, tr, dlogp, &dhidden, grads);
    }

    if (!std::isfinite(loss_bits))
      throw std::runtime_error("train_arm: non-finite loss at step " + std::to_string(step));

    auto gs = grads.param_list();
    for (size_t p = 0; p < params.size(); ++p) adam_step(*params[p], *gs[p], states[p]);
    if (fc) {
      size_t s = 0;
      for (size_t t = 0; t < fc->w.size(); ++t) adam_step(fc->w[t], fgrads.w[t], fstates[s++]);
      for (size_t t = 0; t < fc->b.size(); ++t) adam_step(fc->b[t], fgrads.b[t], fstates[s++]);
    }

    if (step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0)) evaluate(step);
  }
  return curve;
}

ForecastCurve train_forecaster(const ArmModel& model, Forecaster& f,
                               const std::vector<TokenBuffer>& train,
                               const ForecastTrainConfig& cfg, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("train_forecaster: empty dataset");

  Rng batch_rng = rng.split("batches");
  Rng noise_rng = rng.split("posterior-noise");

  std::vector<AdamState> states = make_states(f.w.size() + f.b.size(), cfg.lr, cfg.lr_decay, 0.0);
  ForecasterGradients grads = make_gradients(f);

  ForecastCurve curve;
  const auto evaluate = [&](std::int64_t step) {
    double kl = 0.0;
    std::int64_t pairs = 0;
    const size_t n = std::min<size_t>(train.size(), 64);
    for (size_t i = 0; i < n; ++i) {
      ForecastLossOptions opts;
      opts.share_representation = cfg.share_representation;
      NoiseGrid eps;
      if (f.cfg.condition_on_noise) {
        ForwardResult fr = arm_forward(model, train[i]);
        Rng probe = noise_rng.split("eval/" + std::to_string(i));
        eps = sample_posterior_noise(train[i], fr.logits, probe);
        opts.eps = &eps;
      }
      ForecasterGradients tmp = make_gradients(f);
      ForecastLossResult r = forecaster_loss(model, f, train[i], tmp, opts);
      kl += r.kl_sum;
      pairs += r.pairs;
    }
    curve.push_back(ForecastTrainPoint{step, pairs > 0 ? kl / static_cast<double>(pairs) : 0.0});
  };

  evaluate(0);

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    grads.set_zero();
    double loss = 0.0;
    std::int64_t pairs = 0;
    for (Index b = 0; b < cfg.batch_size; ++b) {
      const auto& x = train[batch_rng.below(train.size())];
      ForecastLossOptions opts;
      opts.share_representation = cfg.share_representation;
      NoiseGrid eps;
      if (f.cfg.condition_on_noise) {
        ForwardResult fr = arm_forward(model, x);
        Rng item = noise_rng.split("step/" + std::to_string(step) + "/" + std::to_string(b));
        eps = sample_posterior_noise(x, fr.logits, item);
        opts.eps = &eps;
      }
      ForecastLossResult r = forecaster_loss(model, f, x, grads, opts);
      loss += r.kl_sum;
      pairs += r.pairs;
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("train_forecaster: non-finite loss at step " + std::to_string(step));

    const double scale = pairs > 0 ? 1.0 / static_cast<double>(pairs) : 0.0;
    size_t s = 0;
    for (size_t t = 0; t < f.w.size(); ++t) {
      Matrix g = grads.w[t] * scale;
      adam_step(f.w[t], g, states[s++]);
    }
    for (size_t t = 0; t < f.b.size(); ++t) {
      Matrix g = grads.b[t] * scale;
      adam_step(f.b[t], g, states[s++]);
    }
    if (step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0)) evaluate(step);
  }
  return curve;
}

}  // namespace psamp
