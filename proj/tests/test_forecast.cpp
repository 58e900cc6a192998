#include <doctest.h>

#include "psamp/forecast.hpp"
#include "psamp/io.hpp"
#include "psamp/training.hpp"

#include <cmath>
#include <filesystem>

using namespace psamp;

namespace {

TokenBuffer random_buffer(Index d, Index K, Rng& rng) {
  TokenBuffer b(d, K);
  for (Index i = 0; i < d; ++i) b.set(i, static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(K))));
  b.advance_frontier(d);
  return b;
}

}  // namespace

TEST_CASE("zero-initialized heads forecast uniform rows") {
  Forecaster f = make_forecaster({2, 4, 3, false, false});
  RowVector h = RowVector::Ones(4);
  Matrix rows = forecast_logits(f, h, 0, nullptr);
  CHECK(rows.rows() == 2);
  for (Index t = 0; t < 2; ++t)
    for (Index c = 0; c < 3; ++c) CHECK(rows(t, c) == -std::log(3.0));
}

TEST_CASE("zero hidden input reduces to the bias distribution") {
  Forecaster f = make_forecaster({1, 3, 2, false, false});
  f.w[0].setRandom();
  f.b[0] << 0.7, -0.4;
  RowVector h = RowVector::Zero(3);
  Matrix rows = forecast_logits(f, h, 0, nullptr);
  RowVector expected = log_softmax(f.b[0].row(0));
  CHECK((rows.row(0) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hand-set head matches an affine plus log_softmax evaluation") {
  Forecaster f = make_forecaster({1, 2, 2, false, false});
  f.w[0] << 0.5, -0.25, 0.1, 0.75;
  f.b[0] << 0.05, -0.15;
  RowVector h(2);
  h << 1.5, -2.0;
  Matrix rows = forecast_logits(f, h, 0, nullptr);
  const double z0 = 1.5 * 0.5 + (-2.0) * 0.1 + 0.05;
  const double z1 = 1.5 * (-0.25) + (-2.0) * 0.75 + (-0.15);
  const double lse = std::log(std::exp(z0) + std::exp(z1));
  CHECK(rows(0, 0) == doctest::Approx(z0 - lse).epsilon(1e-14));
  CHECK(rows(0, 1) == doctest::Approx(z1 - lse).epsilon(1e-14));
}

TEST_CASE("forecast tokens follow the reparametrized argmax") {
  Matrix rows(1, 2), eps(1, 2);

  // Identical distributions mean identical argmax inputs: guaranteed agreement.
  rows << std::log(0.3), std::log(0.7);
  eps << 0.9, 0.1;
  CHECK(forecast_tokens(rows, eps)[0] == gumbel_argmax(rows.row(0), eps.row(0)));

  // Uniform forecast: the noise decides.
  rows.setConstant(-std::log(2.0));
  CHECK(forecast_tokens(rows, eps)[0] == 0);

  // Constructed disagreement with the model's row under zero noise.
  Matrix model_row(1, 2);
  rows << std::log(0.9), std::log(0.1);
  model_row << std::log(0.1), std::log(0.9);
  eps.setZero();
  CHECK(forecast_tokens(rows, eps)[0] == 0);
  CHECK(gumbel_argmax(model_row.row(0), eps.row(0)) == 1);

  // Noise ablation takes the plain argmax.
  eps << 0.0, 5.0;
  CHECK(forecast_tokens(rows, eps, /*use_reparam_noise=*/false)[0] == 0);
  CHECK(forecast_tokens(rows, eps, /*use_reparam_noise=*/true)[0] == 1);
}

TEST_CASE("kl_categorical values") {
  RowVector p(2), q(2);
  p << std::log(0.5), std::log(0.5);
  CHECK(kl_categorical(p, p) == 0.0);

  q << std::log(0.9), std::log(0.1);
  CHECK(kl_categorical(p, q) ==
        doctest::Approx(0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1)).epsilon(1e-12));
  CHECK(kl_categorical(p, q) == doctest::Approx(0.510826).epsilon(1e-6));

  RowVector near_point(2), uniform(2);
  near_point << std::log(1.0 - 1e-12), std::log(1e-12);
  uniform << -std::log(2.0), -std::log(2.0);
  CHECK(kl_categorical(near_point, uniform) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("kl is non-negative and zero only at equality") {
  Rng rng(61);
  for (int t = 0; t < 500; ++t) {
    const Index K = 2 + static_cast<Index>(rng.below(8));
    RowVector a(K), b(K);
    for (Index c = 0; c < K; ++c) {
      a(c) = rng.uniform_symmetric(3.0);
      b(c) = rng.uniform_symmetric(3.0);
    }
    RowVector p = log_softmax(a), q = log_softmax(b);
    const double kl = kl_categorical(p, q);
    CHECK(kl >= 0.0);
    if ((p - q).cwiseAbs().maxCoeff() > 1e-6) CHECK(kl > 0.0);
    CHECK(kl_categorical(p, p) == 0.0);
  }
}

TEST_CASE("heads that reproduce an input-independent model reach zero loss") {
  Rng rng(62);
  ArmModel model = make_arm({6, 3, 8, 4, 2}, rng);
  model.b_out << 0.4, -0.2, 0.9;  // w_out stays zero: every row is log_softmax(b_out)

  Forecaster f = make_forecaster({2, 8, 3, false, false});
  f.b[0] = model.b_out;
  f.b[1] = model.b_out;

  TokenBuffer x = random_buffer(6, 3, rng);
  CHECK(forecaster_loss_value(model, f, x) == doctest::Approx(0.0).epsilon(1e-15));

  // Zero heads on a uniform model: both sides uniform, loss 0.
  ArmModel uniform_model = make_arm({6, 3, 8, 4, 2}, rng);
  Forecaster zero_heads = make_forecaster({2, 8, 3, false, false});
  CHECK(forecaster_loss_value(uniform_model, zero_heads, x) == 0.0);
}

TEST_CASE("head gradients agree with central differences") {
  Rng rng(63);
  ArmModel model = make_arm_random({8, 3, 10, 4, 2}, rng);
  ForecasterConfig fcfg{2, 10, 3, true, false};
  Forecaster f = make_forecaster_random(fcfg, rng);
  TokenBuffer x = random_buffer(8, 3, rng);

  ForecasterGradients grads = make_gradients(f);
  forecaster_loss(model, f, x, grads);

  for (Index t = 0; t < f.cfg.T; ++t) {
    Forecaster probe = f;
    auto loss_w = [&](const Matrix& candidate) {
      probe.w[static_cast<size_t>(t)] = candidate;
      return forecaster_loss_value(model, probe, x);
    };
    CHECK(finite_diff_check(loss_w, f.w[static_cast<size_t>(t)], grads.w[static_cast<size_t>(t)], 1e-5) < 1e-4);
    probe = f;
    auto loss_b = [&](const Matrix& candidate) {
      probe.b[static_cast<size_t>(t)] = candidate;
      return forecaster_loss_value(model, probe, x);
    };
    CHECK(finite_diff_check(loss_b, f.b[static_cast<size_t>(t)], grads.b[static_cast<size_t>(t)], 1e-5) < 1e-4);
  }
}

TEST_CASE("hidden-path gradient agrees with central differences through the model") {
  // The teacher rows are detached, so the probe loss must hold them fixed
  // at the base model's values; only the heads' hidden input may move.
  Rng rng(64);
  ArmModel model = make_arm_random({6, 2, 8, 4, 2}, rng);
  Forecaster f = make_forecaster_random({1, 8, 2, false, false}, rng);
  TokenBuffer x = random_buffer(6, 2, rng);

  const Matrix p_fixed = arm_forward_traced(model, x).logp;
  auto fixed_teacher_loss = [&](const ArmModel& m) {
    ArmTrace tr = arm_forward_traced(m, x);
    const Matrix& hidden = tr.act.back();
    double kl = 0.0;
    for (Index j = 0; j + 1 < 6; ++j) {
      RowVector h_row = hidden.row(j);
      Matrix rows = forecast_logits(f, h_row, x[j], nullptr);
      kl += kl_categorical(p_fixed.row(j + 1), rows.row(0));
    }
    return kl;
  };

  ForecasterGradients fg = make_gradients(f);
  ForecastLossResult r = forecaster_loss(model, f, x, fg);
  ArmGradients grads = make_gradients(model);
  ArmTrace tr = arm_forward_traced(model, x);
  arm_backward(model, x, tr, Matrix::Zero(6, 2), &r.dhidden, grads);

  auto params = model.param_list();
  auto gs = grads.param_list();
  for (size_t p = 0; p < params.size(); ++p) {
    ArmModel probe = model;
    Matrix* target = probe.param_list()[p];
    auto loss = [&](const Matrix& candidate) {
      *target = candidate;
      return fixed_teacher_loss(probe);
    };
    CHECK(finite_diff_check(loss, *params[p], *gs[p], 1e-5, 48) < 1e-4);
  }
}

TEST_CASE("forecasts use only valid information") {
  Rng rng(65);
  ArmModel model = make_arm_random({10, 3, 8, 4, 2}, rng);
  Forecaster f = make_forecaster_random({3, 8, 3, true, false}, rng);

  const Index frontier = 4;
  TokenBuffer a = random_buffer(10, 3, rng);
  TokenBuffer b = a;
  for (Index j = frontier; j < 10; ++j) b.set(j, (a[j] + 1) % 3);

  ForwardResult fa = arm_forward(model, a);
  ForwardResult fb = arm_forward(model, b);
  RowVector ha = fa.hidden.row(frontier - 1);
  RowVector hb = fb.hidden.row(frontier - 1);
  Matrix ra = forecast_logits(f, ha, a[frontier - 1], nullptr);
  Matrix rb = forecast_logits(f, hb, b[frontier - 1], nullptr);
  CHECK((ra - rb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("post-hoc head training leaves model parameters bitwise unchanged") {
  Rng rng(66);
  ArmModel model = make_arm_random({6, 2, 8, 4, 2}, rng);
  ArmModel before = model;
  Forecaster f = make_forecaster({1, 8, 2, false, false});
  std::vector<TokenBuffer> data;
  for (int i = 0; i < 8; ++i) data.push_back(random_buffer(6, 2, rng));

  ForecastTrainConfig cfg;
  cfg.steps = 20;
  cfg.batch_size = 4;
  Rng train_rng(67);
  ForecastCurve curve = train_forecaster(model, f, data, cfg, train_rng);
  CHECK(curve.size() >= 2);

  auto pa = model.param_list();
  auto pb = before.param_list();
  for (size_t p = 0; p < pa.size(); ++p) CHECK((*pa[p] - *pb[p]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("heads on an input-independent model train to near-zero loss") {
  Rng rng(68);
  ArmModel model = make_arm({6, 2, 8, 4, 2}, rng);
  model.b_out << 1.2, -0.6;
  Forecaster f = make_forecaster({2, 8, 2, false, false});
  std::vector<TokenBuffer> data;
  for (int i = 0; i < 16; ++i) data.push_back(random_buffer(6, 2, rng));

  ForecastTrainConfig cfg;
  cfg.steps = 800;
  cfg.batch_size = 8;
  cfg.lr = 5e-2;
  cfg.eval_every = 800;
  Rng train_rng(69);
  ForecastCurve curve = train_forecaster(model, f, data, cfg, train_rng);
  CHECK(curve.back().loss < 1e-3);
}

TEST_CASE("forecaster checkpoint round-trip") {
  Rng rng(70);
  Forecaster f = make_forecaster_random({2, 6, 3, true, true}, rng);
  const std::string path = "test_fc.psfc";
  save_forecaster(path, f);
  Forecaster back = load_forecaster(path);
  CHECK(back.cfg.T == 2);
  CHECK(back.cfg.condition_on_last_token);
  CHECK(back.cfg.condition_on_noise);
  for (Index t = 0; t < 2; ++t) {
    CHECK((back.w[static_cast<size_t>(t)] - f.w[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.b[static_cast<size_t>(t)] - f.b[static_cast<size_t>(t)]).cwiseAbs().maxCoeff() == 0.0);
  }
  std::filesystem::remove(path);
}
