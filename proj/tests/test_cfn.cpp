#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "entangle/cfn.hpp"
#include "entangle/experiments.hpp"
#include "entangle/grad_check.hpp"

using namespace entangle;

namespace {

CfnConfig small_config() {
  CfnConfig cfg;
  cfg.input_dim = 4;
  cfg.num_tasks = 8;
  cfg.num_functions = 3;
  cfg.controller_hidden = 5;
  return cfg;
}

}  // namespace

TEST_CASE("sharpen reproduces the worked example") {
  WeightVector w{Tensor::vec({0.49, 0.51})};
  WeightVector out = sharpen(w, 100.0, 0.0, nullptr);

  // Direct power-and-normalize reference of the same expression.
  double a = std::pow(0.49, 100.0), b = std::pow(0.51, 100.0);
  CHECK(out.w[0] == doctest::Approx(a / (a + b)).epsilon(1e-10));
  CHECK(out.w[1] == doctest::Approx(b / (a + b)).epsilon(1e-10));

  CHECK(std::abs(out.w[0] - 0.018) <= 5e-3);
  CHECK(std::abs(out.w[1] - 0.982) <= 5e-3);
}

TEST_CASE("sharpen degenerate cases") {
  WeightVector w{Tensor::vec({0.3, 0.2, 0.5})};
  WeightVector id = sharpen(w, 1.0, 0.0, nullptr);
  for (std::size_t i = 0; i < 3; ++i) CHECK(id.w[i] == doctest::Approx(w.w[i]).epsilon(1e-12));

  WeightVector sym = sharpen(WeightVector{Tensor::vec({0.5, 0.5})}, 2.0, 0.0, nullptr);
  CHECK(sym.w[0] == doctest::Approx(0.5));
  CHECK(sym.w[1] == doctest::Approx(0.5));
}

TEST_CASE("sharpen output is a distribution for any finite input") {
  Rng rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 2 + rng.uniform_int(6);
    Tensor w = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.uniform(-0.2, 1.2);
    double gamma = 1.0 + rng.uniform(0, 200);
    double sigma = rng.uniform(0, 0.3);
    WeightVector out = sharpen(WeightVector{w}, gamma, sigma, &rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(out.w[i] >= 0.0);
      sum += out.w[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    CHECK(out.w.all_finite());
  }
}

TEST_CASE("sharpen at large gamma approaches one-hot and preserves the argmax") {
  Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor w;
    std::size_t argmax = 0;
    // A unique maximum: near-ties need gamma far beyond 1000 to empty out.
    for (bool separated = false; !separated;) {
      w = softmax([&] {
        Tensor t = Tensor::zeros({6});
        for (std::size_t i = 0; i < 6; ++i) t[i] = rng.uniform(-2, 2);
        return t;
      }());
      argmax = 0;
      for (std::size_t i = 1; i < 6; ++i)
        if (w[i] > w[argmax]) argmax = i;
      separated = true;
      for (std::size_t i = 0; i < 6; ++i)
        if (i != argmax && w[i] > 0.97 * w[argmax]) separated = false;
    }

    WeightVector hard = sharpen(WeightVector{w}, 1000.0, 0.0, nullptr);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(std::abs(hard.w[i] - (i == argmax ? 1.0 : 0.0)) <= 1e-6);

    for (double gamma : {1.0, 2.5, 10.0, 100.0}) {
      WeightVector s = sharpen(WeightVector{w}, gamma, 0.0, nullptr);
      std::size_t got = 0;
      for (std::size_t i = 1; i < 6; ++i)
        if (s.w[i] > s.w[got]) got = i;
      CHECK(got == argmax);
    }
  }
}

TEST_CASE("controller_weights: softmax contract, zero params, determinism") {
  CfnModel model(small_config(), 5);
  Tensor x = Tensor::vec({0.1, 0.9, 0.4, 0.7});
  Tensor hot = one_hot_of(PrimitiveId::kSwitch);

  model.reset_controller();
  WeightVector w = controller_weights(model, x, hot);
  double sum = 0.0;
  for (std::size_t i = 0; i < w.w.size(); ++i) sum += w.w[i];
  CHECK(std::abs(sum - 1.0) <= 1e-12);

  model.reset_controller();
  WeightVector w2 = controller_weights(model, x, hot);
  for (std::size_t i = 0; i < w.w.size(); ++i) CHECK(w.w[i] == w2.w[i]);

  for (auto& [name, e] : model.params().entries()) e.value.fill(0.0);
  model.reset_controller();
  WeightVector uniform = controller_weights(model, x, hot);
  for (std::size_t i = 0; i < uniform.w.size(); ++i)
    CHECK(uniform.w[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("cfn_combine selection and convexity") {
  CfnModel model(small_config(), 6);
  Tensor x = Tensor::vec({0.2, 0.4, 0.6, 0.8});

  SUBCASE("one-hot weights select a single function") {
    Tensor w = Tensor::vec({0, 1, 0});
    Tensor out = cfn_combine(model, x, w);
    Tensor f1 = function_output(model, 1, x);
    for (std::size_t j = 0; j < out.size(); ++j) CHECK(out[j] == doctest::Approx(f1[j]));
  }

  SUBCASE("identical functions make the weights irrelevant") {
    ParamStore& p = model.params();
    p.value("fn1.W") = p.value("fn0.W");
    p.value("fn1.b") = p.value("fn0.b");
    p.value("fn1.slope") = p.value("fn0.slope");
    p.value("fn2.W") = p.value("fn0.W");
    p.value("fn2.b") = p.value("fn0.b");
    p.value("fn2.slope") = p.value("fn0.slope");
    Tensor f0 = function_output(model, 0, x);
    Tensor out = cfn_combine(model, x, Tensor::vec({0.2, 0.5, 0.3}));
    for (std::size_t j = 0; j < out.size(); ++j)
      CHECK(out[j] == doctest::Approx(f0[j]).epsilon(1e-12));
  }

  SUBCASE("hand-computed two-function blend") {
    CfnConfig cfg = small_config();
    cfg.input_dim = 2;
    cfg.num_functions = 2;
    CfnModel two(cfg, 1);
    ParamStore& p = two.params();
    p.value("fn0.W") = Tensor::matrix(2, 2, {1, 0, 0, 1});
    p.value("fn0.b") = Tensor::vec({0, 0});
    p.value("fn0.slope")[0] = 1.0;
    p.value("fn1.W") = Tensor::matrix(2, 2, {2, 0, 0, 2});
    p.value("fn1.b") = Tensor::vec({1, 1});
    p.value("fn1.slope")[0] = 1.0;
    Tensor out = cfn_combine(two, Tensor::vec({1, 2}), Tensor::vec({0.3, 0.7}));
    // 0.3*[1,2] + 0.7*[3,5]
    CHECK(out[0] == doctest::Approx(0.3 * 1 + 0.7 * 3));
    CHECK(out[1] == doctest::Approx(0.3 * 2 + 0.7 * 5));
  }
}

TEST_CASE("cfn end-to-end gradient passes the finite-difference oracle at sigma 0") {
  CfnModel model(small_config(), 21);
  TaskSample sample = sample_batch(22, 4, 1)[0];
  for (double gamma : {1.0, 3.0, 25.0}) {
    auto fn = [&](ParamStore&) { return cfn_loss_and_grad(model, sample, gamma); };
    CHECK(grad_check(fn, model.params(), 1e-5).max_rel_error <= 1e-4);
  }
}

TEST_CASE("controller gradient does not require differentiable functions") {
  // Function layers replaced by opaque fixed maps; only controller parameters
  // live in the store, and the loss still passes the finite-difference oracle.
  Rng rng(77);
  ParamStore ps;
  LstmCell ctrl = make_lstm(ps, "c", 6, 5, rng);
  DenseLayer head = make_dense(ps, "h", 5, 3, rng);

  Tensor x = Tensor::vec({0.3, 0.6, 0.1, 0.8, 0.5, 0.2});
  Tensor target = Tensor::vec({0.4, 0.1, 0.9, 0.2, 0.6, 0.3});
  auto opaque = [](std::size_t i, const Tensor& in) {
    Tensor out = Tensor::zeros(in.shape());
    for (std::size_t j = 0; j < in.size(); ++j)
      out[j] = std::sin(static_cast<double>(i + 1) * in[j]) + static_cast<double>(i);
    return out;
  };

  auto fn = [&](ParamStore& p) {
    ctrl.reset();
    LstmStepCache cache;
    Tensor h = lstm_step(ctrl, x, p, &cache);
    Tensor logits = dense_forward(head, h, p);
    Tensor w = softmax(logits);
    WeightVector sharp = sharpen(WeightVector{w}, 4.0, 0.0, nullptr);

    Tensor out = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor fi = opaque(i, x);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += sharp.w[i] * fi[j];
    }
    double loss = l2_loss(out, target);

    // d(loss)/d(w_i') = <dout, f_i(x)> needs only the function VALUES.
    Tensor dout = l2_loss_backward(out, target);
    Tensor dw_sharp = Tensor::zeros({3});
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor fi = opaque(i, x);
      for (std::size_t j = 0; j < dout.size(); ++j) dw_sharp[i] += dout[j] * fi[j];
    }
    // Backward through sharpening at sigma = 0 via its quotient rule.
    double dot = 0.0;
    for (std::size_t i = 0; i < 3; ++i) dot += dw_sharp[i] * sharp.w[i];
    Tensor dw = Tensor::zeros({3});
    for (std::size_t i = 0; i < 3; ++i) dw[i] = 4.0 * sharp.w[i] * (dw_sharp[i] - dot) / w[i];
    Tensor dlogits = softmax_backward(w, dw);
    Tensor dh = dense_backward(head, h, dlogits, p);
    lstm_step_backward(ctrl, cache, dh, Tensor(), p, nullptr, nullptr, nullptr);
    return loss;
  };
  CHECK(grad_check(fn, ps, 1e-5).max_rel_error <= 1e-4);
}

TEST_CASE("cfn training: single-task sanity run and finite loss at hard gamma") {
  SUBCASE("zero primitive trains below 1e-3") {
    CfnConfig cfg;
    cfg.input_dim = 10;
    cfg.num_functions = 4;
    cfg.controller_hidden = 8;
    cfg.sharpen_gamma = Schedule::constant(1.0);
    cfg.noise_sigma = 0.0;
    CfnModel model(cfg, 3);
    RmspropConfig opt;
    Rng rng(4);
    Rng batch_rng(5);
    double loss = 1.0;
    for (int step = 0; step < 4000; ++step) {
      auto batch = sample_batch(batch_rng.fork_seed(), 10, 20, PrimitiveId::kZero);
      loss = cfn_train_step(model, batch, step, cfg, opt, rng);
    }
    auto val = sample_batch(999, 10, 128, PrimitiveId::kZero);
    CHECK(cfn_validation_loss(model, val, 1.0) < 1e-3);
  }

  SUBCASE("loss finite at gamma 100 with noise") {
    CfnConfig cfg;
    cfg.input_dim = 10;
    cfg.sharpen_gamma = Schedule::constant(100.0);
    cfg.noise_sigma = 0.05;
    CfnModel model(cfg, 8);
    RmspropConfig opt;
    Rng rng(9);
    auto batch = sample_batch(10, 10, 20);
    double loss = cfn_train_step(model, batch, 0, cfg, opt, rng);
    CHECK(std::isfinite(loss));
  }
}

TEST_CASE("disentanglement metric endpoints") {
  std::vector<WeightVector> one_hot;
  for (int i = 0; i < 4; ++i) {
    Tensor w = Tensor::zeros({8});
    w[static_cast<std::size_t>(i)] = 1.0;
    one_hot.push_back(WeightVector{w});
  }
  CHECK(disentanglement(one_hot) == doctest::Approx(1.0));

  std::vector<WeightVector> uniform(3, WeightVector{Tensor::full({8}, 1.0 / 8.0)});
  CHECK(disentanglement(uniform) == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-12));

  std::vector<WeightVector> half{WeightVector{Tensor::vec({0.5, 0.5})}};
  CHECK(disentanglement(half) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
}

TEST_CASE("default cfn configuration parameter count") {
  CfnConfig cfg;  // 10-dim data, 8 tasks, 8 functions, hidden 10
  CfnModel model(cfg, 0);
  std::size_t n = count_params(model.params());
  CHECK(n >= 2068);  // within 5% of 2176
  CHECK(n <= 2284);
  MESSAGE("default cfn parameter count: ", n);
}
