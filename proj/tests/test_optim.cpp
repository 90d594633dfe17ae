#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "entangle/optim.hpp"
#include "entangle/rng.hpp"

using namespace entangle;

TEST_CASE("rmsprop_step hand-evaluated updates") {
  SUBCASE("zero gradient and zero weight decay is a no-op") {
    ParamStore ps;
    ps.add("w", {3});
    ps.value("w") = Tensor::vec({1.0, -2.0, 0.5});
    RmspropConfig cfg;
    cfg.weight_decay = 0.0;
    rmsprop_step(ps, cfg);
    CHECK(ps.value("w")[0] == 1.0);
    CHECK(ps.value("w")[1] == -2.0);
    CHECK(ps.value("w")[2] == 0.5);
  }

  SUBCASE("one-step update with full cache replacement") {
    ParamStore ps;
    ps.add("w", {1});
    ps.value("w")[0] = 1.0;
    ps.grad("w")[0] = 1.0;
    RmspropConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum_decay = 1.0 - 1e-12;  // the hand evaluation uses decay = 1
    cfg.weight_decay = 0.0;
    cfg.epsilon = 1e-15;
    rmsprop_step(ps, cfg);
    CHECK(ps.entry("w").rms_cache[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ps.value("w")[0] == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(ps.grad("w")[0] == 0.0);  // grads zeroed afterwards
  }

  SUBCASE("pure weight-decay step") {
    ParamStore ps;
    ps.add("w", {1});
    ps.value("w")[0] = 1.0;
    RmspropConfig cfg;  // lr 0.0005, wd 0.01
    rmsprop_step(ps, cfg);
    CHECK(ps.value("w")[0] == doctest::Approx(0.999995).epsilon(1e-12));
  }
}

TEST_CASE("rmsprop cache stays non-negative across random update sequences") {
  Rng rng(17);
  ParamStore ps;
  ps.add_uniform("w", {8}, 4, rng);
  RmspropConfig cfg;
  for (int step = 0; step < 200; ++step) {
    for (std::size_t i = 0; i < 8; ++i) ps.grad("w")[i] = rng.uniform(-3, 3);
    rmsprop_step(ps, cfg);
    for (std::size_t i = 0; i < 8; ++i) CHECK(ps.entry("w").rms_cache[i] >= 0.0);
  }
}

TEST_CASE("schedule_value endpoints, midpoint, clamping, monotonicity") {
  Schedule ramp = Schedule::linear_ramp(1.0, 100.0, 0, 1000);
  CHECK(schedule_value(ramp, 0) == doctest::Approx(1.0));
  CHECK(schedule_value(ramp, 1000) == doctest::Approx(100.0));
  CHECK(schedule_value(ramp, 500) == doctest::Approx(50.5));
  CHECK(schedule_value(ramp, 5000) == doctest::Approx(100.0));

  Schedule flat = Schedule::constant(7.0);
  CHECK(schedule_value(flat, 0) == 7.0);
  CHECK(schedule_value(flat, 123456) == 7.0);

  double prev = schedule_value(ramp, 0);
  for (std::int64_t s = 1; s <= 1200; s += 7) {
    double v = schedule_value(ramp, s);
    CHECK(v >= prev);
    prev = v;
  }

  CHECK_THROWS_AS(Schedule::linear_ramp(0, 1, 10, 5), std::invalid_argument);
}
