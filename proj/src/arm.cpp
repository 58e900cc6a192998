#include "psamp/arm.hpp"

#include <cmath>
#include <stdexcept>

namespace psamp {

namespace {
constexpr double kLn2 = 0.6931471805599453;

void validate_cfg(const ArmConfig& cfg) {
  if (cfg.d < 1 || cfg.K < 1 || cfg.H < 1 || cfg.E < 1 || cfg.L < 1)
    throw std::invalid_argument("ArmConfig: all dimensions must be >= 1");
}
}  // namespace

std::vector<Matrix*> ArmModel::param_list() {
  std::vector<Matrix*> ps{&embed, &pos, &sos};
  for (auto& l : layers) {
    ps.push_back(&l.w_prev);
    ps.push_back(&l.w_curr);
    ps.push_back(&l.bias);
  }
  ps.push_back(&w_out);
  ps.push_back(&b_out);
  return ps;
}

std::vector<const Matrix*> ArmModel::param_list() const {
  auto ps = const_cast<ArmModel*>(this)->param_list();
  return {ps.begin(), ps.end()};
}

Index ArmModel::param_count() const {
  Index n = 0;
  for (const Matrix* p : param_list()) n += p->size();
  return n;
}

std::vector<Matrix*> ArmGradients::param_list() {
  std::vector<Matrix*> ps{&embed, &pos, &sos};
  for (auto& l : layers) {
    ps.push_back(&l.w_prev);
    ps.push_back(&l.w_curr);
    ps.push_back(&l.bias);
  }
  ps.push_back(&w_out);
  ps.push_back(&b_out);
  return ps;
}

void ArmGradients::set_zero() {
  for (Matrix* p : param_list()) p->setZero();
}

ArmGradients make_gradients(const ArmModel& model) {
  ArmGradients g;
  g.embed = Matrix::Zero(model.embed.rows(), model.embed.cols());
  g.pos = Matrix::Zero(model.pos.rows(), model.pos.cols());
  g.sos = Matrix::Zero(1, model.sos.cols());
  g.layers.resize(model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l) {
    g.layers[l].w_prev = Matrix::Zero(model.layers[l].w_prev.rows(), model.layers[l].w_prev.cols());
    g.layers[l].w_curr = Matrix::Zero(model.layers[l].w_curr.rows(), model.layers[l].w_curr.cols());
    g.layers[l].bias = Matrix::Zero(1, model.layers[l].bias.cols());
  }
  g.w_out = Matrix::Zero(model.w_out.rows(), model.w_out.cols());
  g.b_out = Matrix::Zero(1, model.b_out.cols());
  return g;
}

namespace {

Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform_symmetric(a);
  return m;
}

ArmModel build_arm(const ArmConfig& cfg, Rng& rng, bool random_output) {
  validate_cfg(cfg);
  ArmModel m;
  m.cfg = cfg;
  m.embed = uniform_init(cfg.K, cfg.E, cfg.E, rng);
  m.pos = uniform_init(cfg.d, cfg.E, cfg.E, rng);
  m.sos = uniform_init(1, cfg.E, cfg.E, rng);
  m.layers.resize(static_cast<size_t>(cfg.L));
  Index in = cfg.E;
  Index dil = 1;
  for (auto& layer : m.layers) {
    layer.w_prev = uniform_init(in, cfg.H, 2 * in, rng);
    layer.w_curr = uniform_init(in, cfg.H, 2 * in, rng);
    layer.bias = Matrix::Zero(1, cfg.H);
    layer.dilation = dil;
    in = cfg.H;
    dil *= 2;
  }
  if (random_output) {
    m.w_out = uniform_init(cfg.H, cfg.K, cfg.H, rng);
    m.b_out = uniform_init(1, cfg.K, cfg.H, rng);
  } else {
    m.w_out = Matrix::Zero(cfg.H, cfg.K);
    m.b_out = Matrix::Zero(1, cfg.K);
  }
  return m;
}

}  // namespace

ArmModel make_arm(const ArmConfig& cfg, Rng& rng) { return build_arm(cfg, rng, false); }
ArmModel make_arm_random(const ArmConfig& cfg, Rng& rng) { return build_arm(cfg, rng, true); }

ArmTrace arm_forward_traced(const ArmModel& model, const TokenBuffer& buffer, bool shift_input) {
  const ArmConfig& cfg = model.cfg;
  if (buffer.d != cfg.d || buffer.K != cfg.K)
    throw std::invalid_argument("arm_forward: buffer shape mismatch");

  ArmTrace tr;
  tr.input.resize(cfg.d, cfg.E);
  if (shift_input) {
    tr.input.row(0) = model.sos.row(0);
    for (Index i = 1; i < cfg.d; ++i) tr.input.row(i) = model.embed.row(buffer[i - 1]);
  } else {
    for (Index i = 0; i < cfg.d; ++i) tr.input.row(i) = model.embed.row(buffer[i]);
  }
  tr.input += model.pos;

  tr.pre.resize(model.layers.size());
  tr.act.resize(model.layers.size());
  const Matrix* a = &tr.input;
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Matrix& pre = tr.pre[l];
    pre.noalias() = (*a) * layer.w_curr;
    const Index dil = layer.dilation;
    if (cfg.d > dil)
      pre.bottomRows(cfg.d - dil).noalias() += a->topRows(cfg.d - dil) * layer.w_prev;
    pre.rowwise() += layer.bias.row(0);
    tr.act[l] = pre.cwiseMax(0.0);
    a = &tr.act[l];
  }

  tr.logp.noalias() = (*a) * model.w_out;
  tr.logp.rowwise() += model.b_out.row(0);
  log_softmax_rows_inplace(tr.logp);
  return tr;
}

ForwardResult arm_forward(const ArmModel& model, const TokenBuffer& buffer) {
  ArmTrace tr = arm_forward_traced(model, buffer);
  model.calls.n.fetch_add(1, std::memory_order_relaxed);
  return ForwardResult{std::move(tr.logp), std::move(tr.act.back())};
}

void arm_backward(const ArmModel& model, const TokenBuffer& buffer, const ArmTrace& trace,
                  const Matrix& dlogp, const Matrix* dhidden_extra, ArmGradients& grads) {
  const ArmConfig& cfg = model.cfg;

  // logp = z - lse(z) per row: dz = dlogp - softmax(z) * rowsum(dlogp).
  Matrix dz = dlogp;
  for (Index i = 0; i < cfg.d; ++i) {
    const double s = dlogp.row(i).sum();
    dz.row(i) -= s * trace.logp.row(i).array().exp().matrix();
  }

  const Matrix& hidden = trace.act.back();
  grads.w_out.noalias() += hidden.transpose() * dz;
  grads.b_out.row(0) += dz.colwise().sum();

  Matrix dh;
  dh.noalias() = dz * model.w_out.transpose();
  if (dhidden_extra) dh += *dhidden_extra;

  for (int l = static_cast<int>(model.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = model.layers[static_cast<size_t>(l)];
    const Matrix& a_in = (l == 0) ? trace.input : trace.act[static_cast<size_t>(l - 1)];
    Matrix dpre = (trace.pre[static_cast<size_t>(l)].array() > 0.0).cast<double>() * dh.array();
    auto& lg = grads.layers[static_cast<size_t>(l)];
    lg.w_curr.noalias() += a_in.transpose() * dpre;
    lg.bias.row(0) += dpre.colwise().sum();
    const Index dil = layer.dilation;
    Matrix da(cfg.d, a_in.cols());
    da.noalias() = dpre * layer.w_curr.transpose();
    if (cfg.d > dil) {
      lg.w_prev.noalias() += a_in.topRows(cfg.d - dil).transpose() * dpre.bottomRows(cfg.d - dil);
      da.topRows(cfg.d - dil).noalias() += dpre.bottomRows(cfg.d - dil) * layer.w_prev.transpose();
    }
    dh = std::move(da);
  }

  grads.pos += dh;
  grads.sos.row(0) += dh.row(0);
  for (Index i = 1; i < cfg.d; ++i) grads.embed.row(buffer[i - 1]) += dh.row(i);
}

double arm_nll(const ArmModel& model, const TokenBuffer& x) {
  if (!x.fully_valid()) throw std::invalid_argument("arm_nll: buffer not fully valid");
  ForwardResult fr = arm_forward(model, x);
  double sum = 0.0;
  for (Index i = 0; i < x.d; ++i) sum += fr.logits(i, x[i]);
  return -sum / (static_cast<double>(x.d) * kLn2);
}

double arm_nll_with_gradients(const ArmModel& model, const TokenBuffer& x, ArmGradients& grads) {
  if (!x.fully_valid()) throw std::invalid_argument("arm_nll: buffer not fully valid");
  ArmTrace tr = arm_forward_traced(model, x);
  double sum = 0.0;
  const double scale = -1.0 / (static_cast<double>(x.d) * kLn2);
  Matrix dlogp = Matrix::Zero(x.d, x.K);
  for (Index i = 0; i < x.d; ++i) {
    sum += tr.logp(i, x[i]);
    dlogp(i, x[i]) = scale;
  }
  arm_backward(model, x, tr, dlogp, nullptr, grads);
  return scale * sum;
}

CausalityResult check_causality_fn(const ForwardFn& forward, Index d, Index K, Index trials,
                                   Rng& rng) {
  if (trials < 1) throw std::invalid_argument("check_causality: trials must be >= 1");
  for (Index t = 0; t < trials; ++t) {
    TokenBuffer base(d, K);
    for (Index i = 0; i < d; ++i) base.set(i, static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(K))));
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)));
    TokenBuffer perturbed = base;
    if (K > 1) {
      std::int32_t alt =
          static_cast<std::int32_t>((perturbed[j] + 1 + static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(K - 1)))) % K);
      perturbed.set(j, alt);
    }
    ForwardResult a = forward(base);
    ForwardResult b = forward(perturbed);
    for (Index i = 0; i <= j; ++i) {
      bool same = true;
      for (Index c = 0; c < a.logits.cols() && same; ++c)
        same = a.logits(i, c) == b.logits(i, c);
      for (Index c = 0; c < a.hidden.cols() && same; ++c)
        same = a.hidden(i, c) == b.hidden(i, c);
      if (!same) return CausalityResult{false, t, i};
    }
  }
  return CausalityResult{};
}

CausalityResult check_causality(const ArmModel& model, Index trials, Rng& rng) {
  return check_causality_fn([&](const TokenBuffer& b) { return arm_forward(model, b); },
                            model.cfg.d, model.cfg.K, trials, rng);
}

}  // namespace psamp
