#include "psamp/forecast.hpp"

#include <stdexcept>

namespace psamp {

namespace {
void validate_cfg(const ForecasterConfig& cfg) {
  if (cfg.T < 1 || cfg.H < 1 || cfg.K < 1)
    throw std::invalid_argument("ForecasterConfig: T, H, K must be >= 1");
}
}  // namespace

Forecaster make_forecaster(const ForecasterConfig& cfg) {
  validate_cfg(cfg);
  Forecaster f;
  f.cfg = cfg;
  for (Index t = 0; t < cfg.T; ++t) {
    f.w.push_back(Matrix::Zero(f.input_width(), cfg.K));
    f.b.push_back(Matrix::Zero(1, cfg.K));
  }
  return f;
}

Forecaster make_forecaster_random(const ForecasterConfig& cfg, Rng& rng) {
  Forecaster f = make_forecaster(cfg);
  const double a = std::sqrt(3.0 / static_cast<double>(f.input_width()));
  for (Index t = 0; t < cfg.T; ++t) {
    for (Index i = 0; i < f.w[t].rows(); ++i)
      for (Index j = 0; j < f.w[t].cols(); ++j) f.w[t](i, j) = rng.uniform_symmetric(a);
    for (Index j = 0; j < f.b[t].cols(); ++j) f.b[t](0, j) = rng.uniform_symmetric(a);
  }
  return f;
}

namespace {

RowVector head_input(const Forecaster& f, const RowVector& h_row, std::int32_t last_token,
                     const Matrix* eps_rows, Index t, bool share_representation) {
  const auto& cfg = f.cfg;
  RowVector in = RowVector::Zero(f.input_width());
  if (share_representation) in.head(cfg.H) = h_row;
  Index off = cfg.H;
  if (cfg.condition_on_last_token) {
    if (last_token < 0 || last_token >= cfg.K)
      throw std::invalid_argument("forecast_logits: last_token out of range");
    in(off + last_token) = 1.0;
    off += cfg.K;
  }
  if (cfg.condition_on_noise) {
    if (!eps_rows || eps_rows->rows() <= t || eps_rows->cols() != cfg.K)
      throw std::invalid_argument("forecast_logits: noise rows required");
    in.segment(off, cfg.K) = eps_rows->row(t);
  }
  return in;
}

}  // namespace

Matrix forecast_logits(const Forecaster& f, const RowVector& h_row, std::int32_t last_token,
                       const Matrix* eps_rows, bool share_representation) {
  if (h_row.size() != f.cfg.H) throw std::invalid_argument("forecast_logits: hidden width mismatch");
  Matrix rows(f.cfg.T, f.cfg.K);
  for (Index t = 0; t < f.cfg.T; ++t) {
    RowVector in = head_input(f, h_row, last_token, eps_rows, t, share_representation);
    RowVector z = in * f.w[static_cast<size_t>(t)] + f.b[static_cast<size_t>(t)].row(0);
    rows.row(t) = log_softmax(z);
  }
  return rows;
}

std::vector<std::int32_t> forecast_tokens(const Matrix& logit_rows, const Matrix& eps_rows,
                                          bool use_reparam_noise) {
  if (logit_rows.rows() != eps_rows.rows() || logit_rows.cols() != eps_rows.cols())
    throw std::invalid_argument("forecast_tokens: shape mismatch");
  std::vector<std::int32_t> toks(static_cast<size_t>(logit_rows.rows()));
  for (Index t = 0; t < logit_rows.rows(); ++t) {
    if (use_reparam_noise) {
      toks[static_cast<size_t>(t)] = static_cast<std::int32_t>(gumbel_argmax(logit_rows.row(t), eps_rows.row(t)));
    } else {
      Index best;
      logit_rows.row(t).maxCoeff(&best);
      toks[static_cast<size_t>(t)] = static_cast<std::int32_t>(best);
    }
  }
  return toks;
}

void ForecasterGradients::set_zero() {
  for (auto& m : w) m.setZero();
  for (auto& m : b) m.setZero();
}

ForecasterGradients make_gradients(const Forecaster& f) {
  ForecasterGradients g;
  for (Index t = 0; t < f.cfg.T; ++t) {
    g.w.push_back(Matrix::Zero(f.input_width(), f.cfg.K));
    g.b.push_back(Matrix::Zero(1, f.cfg.K));
  }
  return g;
}

namespace {

ForecastLossResult loss_impl(const ArmModel& model, const Forecaster& f, const TokenBuffer& x,
                             ForecasterGradients* grads, const ForecastLossOptions& opts) {
  if (!x.fully_valid()) throw std::invalid_argument("forecaster_loss: buffer not fully valid");
  if (f.cfg.H != model.cfg.H || f.cfg.K != model.cfg.K)
    throw std::invalid_argument("forecaster_loss: forecaster/model shape mismatch");
  if (f.cfg.condition_on_noise && !opts.eps)
    throw std::invalid_argument("forecaster_loss: noise grid required");

  ArmTrace tr = arm_forward_traced(model, x);
  const Matrix& hidden = tr.act.back();
  const Index d = model.cfg.d;

  ForecastLossResult out;
  out.dhidden = Matrix::Zero(d, model.cfg.H);

  for (Index j = 0; j < d; ++j) {
    const RowVector h_row = hidden.row(j);
    const std::int32_t last = x[j];
    Matrix eps_rows;
    if (f.cfg.condition_on_noise) {
      eps_rows = Matrix::Zero(f.cfg.T, f.cfg.K);
      for (Index t = 1; t <= f.cfg.T && j + t < d; ++t) eps_rows.row(t - 1) = opts.eps->row(j + t);
    }
    for (Index t = 1; t <= f.cfg.T; ++t) {
      if (j + t >= d) break;
      RowVector in = head_input(f, h_row, last, f.cfg.condition_on_noise ? &eps_rows : nullptr,
                                t - 1, opts.share_representation);
      RowVector z = in * f.w[static_cast<size_t>(t - 1)] + f.b[static_cast<size_t>(t - 1)].row(0);
      RowVector q = log_softmax(z);
      const auto p_log = tr.logp.row(j + t);
      out.kl_sum += kl_categorical(p_log, q);
      out.pairs += 1;
      if (grads) {
        // d KL / d z = softmax(z) - p, with p detached.
        RowVector dz = q.array().exp().matrix() - p_log.array().exp().matrix();
        (*grads).w[static_cast<size_t>(t - 1)].noalias() += in.transpose() * dz;
        (*grads).b[static_cast<size_t>(t - 1)].row(0) += dz;
        if (opts.share_representation)
          out.dhidden.row(j) += (f.w[static_cast<size_t>(t - 1)].topRows(f.cfg.H) * dz.transpose()).transpose();
      }
    }
  }
  return out;
}

}  // namespace

ForecastLossResult forecaster_loss(const ArmModel& model, const Forecaster& f,
                                   const TokenBuffer& x, ForecasterGradients& grads,
                                   const ForecastLossOptions& opts) {
  return loss_impl(model, f, x, &grads, opts);
}

double forecaster_loss_value(const ArmModel& model, const Forecaster& f, const TokenBuffer& x,
                             const ForecastLossOptions& opts) {
  return loss_impl(model, f, x, nullptr, opts).kl_sum;
}

}  // namespace psamp
