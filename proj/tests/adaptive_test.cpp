#include "spamp/adaptive.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "spamp/error.hpp"
#include "support.hpp"

namespace spamp {
namespace {

using testing::Draws;

Eigen::VectorXd vec2(double a, double b) { return Eigen::Vector2d(a, b); }

LayerShaperState state_with_tau(double tau, double beta = 0.99) {
  auto s = make_layer_state("layer", SpampParams{});
  s.tau = EmaTracker::seeded(beta, tau);
  return s;
}

// ---- EMA ----

TEST(Ema, Examples) {
  EXPECT_DOUBLE_EQ(ema_update(EmaTracker::seeded(0.99, 1.0), 2.0).value(), 1.01);
  EXPECT_EQ(ema_update(EmaTracker(0.99), 3.5).value(), 3.5);
  EXPECT_EQ(ema_update(EmaTracker::seeded(0.0, 5.0), 2.0).value(), 2.0);
}

TEST(Ema, Errors) {
  EXPECT_THROW(EmaTracker(1.0), InvalidParameter);
  EXPECT_THROW(EmaTracker(-0.1), InvalidParameter);
  EXPECT_THROW(EmaTracker(0.9).value(), InvalidState);
  EXPECT_THROW(ema_update(EmaTracker(0.9), NAN), InvalidInput);
  EXPECT_THROW(ema_update(EmaTracker::seeded(0.9, 1.0), INFINITY), InvalidInput);
}

TEST(Ema, UpdateReturnsNewTracker) {
  const auto t = EmaTracker::seeded(0.5, 4.0);
  const auto u = ema_update(t, 0.0);
  EXPECT_EQ(t.value(), 4.0);
  EXPECT_EQ(u.value(), 2.0);
}

class EmaGeometric : public ::testing::TestWithParam<double> {};

TEST_P(EmaGeometric, ConstantStreamMatchesClosedForm) {
  const double beta = GetParam();
  const double v0 = 7.25;
  const double c = -1.5;
  auto tracker = EmaTracker::seeded(beta, v0);
  for (int t = 1; t <= 50; ++t) {
    tracker = ema_update(tracker, c);
    const double expected = std::pow(beta, t) * std::abs(v0 - c);
    const double actual = std::abs(tracker.value() - c);
    if (expected == 0.0) {
      EXPECT_EQ(actual, 0.0);
    } else {
      EXPECT_NEAR(actual, expected, 1e-12 * expected) << "t=" << t;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Betas, EmaGeometric, ::testing::Values(0.0, 0.9, 0.99, 0.999));

// ---- dynamic exponent ----

TEST(DynamicAlpha, Examples) {
  const auto s = make_layer_state("l", SpampParams{});
  EXPECT_EQ(dynamic_alpha(0.5, s), 1.0);
  EXPECT_NEAR(dynamic_alpha(2.0, s), 0.7, 1e-15);
  EXPECT_EQ(dynamic_alpha(1.0, s), 1.0);
  EXPECT_EQ(dynamic_alpha(INFINITY, s), 0.7);
  EXPECT_THROW(dynamic_alpha(-1.0, s), InvalidInput);
}

TEST(DynamicAlpha, ZeroKappaIsConstant) {
  SpampParams p;
  p.kappa = 0.0;
  const auto s = make_layer_state("l", p);
  EXPECT_EQ(dynamic_alpha(100.0, s), 1.0);
  EXPECT_EQ(dynamic_alpha(INFINITY, s), 1.0);
}

TEST(DynamicAlpha, MonotoneAndBounded) {
  Draws draws(21);
  for (int i = 0; i < 10000; ++i) {
    SpampParams p;
    p.alpha_min = draws.uniform(0.1, 1.0);
    p.alpha_max = draws.uniform(p.alpha_min, 1.5);
    p.kappa = draws.uniform(0.0, 2.0);
    const auto s = make_layer_state("l", p);
    double r1 = draws.uniform(0.0, 10.0);
    double r2 = draws.uniform(0.0, 10.0);
    if (r1 > r2) std::swap(r1, r2);
    const double a1 = dynamic_alpha(r1, s);
    const double a2 = dynamic_alpha(r2, s);
    ASSERT_GE(a1, a2);
    ASSERT_GE(a2, p.alpha_min);
    ASSERT_LE(a1, p.alpha_max);
    if (p.kappa > 0 && r2 >= 1 + (p.alpha_max - p.alpha_min) / p.kappa) {
      ASSERT_EQ(a2, p.alpha_min);
    }
  }
}

TEST(SpampParams, Validation) {
  EXPECT_THROW(validate(SpampParams{0.99, 0.0, 1.0, 0.3}), InvalidParameter);
  EXPECT_THROW(validate(SpampParams{0.99, 0.9, 0.8, 0.3}), InvalidParameter);
  EXPECT_THROW(validate(SpampParams{0.99, 0.7, 1.0, -0.1}), InvalidParameter);
  EXPECT_THROW(validate(SpampParams{1.0, 0.7, 1.0, 0.3}), InvalidParameter);
  EXPECT_NO_THROW(validate(SpampParams{}));
}

// ---- one SPAMP step ----

// Independent re-derivation of one step on plain doubles.
struct TraceOracle {
  double tau, alpha, pre_norm;
  std::vector<double> shaped;
  bool projected;
};

TraceOracle oracle_step(double tau0, double beta, std::vector<double> g) {
  double norm_sq = 0.0;
  for (double x : g) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  const double tau = beta * tau0 + (1 - beta) * norm;
  const double ratio = norm / tau;
  const double alpha = std::min(1.0, std::max(0.7, 1.0 - 0.3 * std::max(0.0, ratio - 1.0)));
  double pre_sq = 0.0;
  for (double& x : g) {
    x = std::copysign(std::pow(std::abs(x), alpha), x);
    pre_sq += x * x;
  }
  const double pre = std::sqrt(pre_sq);
  const bool projected = pre > tau;
  if (projected) {
    for (double& x : g) x *= tau / pre;
  }
  return {tau, alpha, pre, g, projected};
}

TEST(SpampStep, WorkedExample) {
  const auto result = spamp_layer_step(state_with_tau(1.0), vec2(3, 4), 0.1);
  const auto oracle = oracle_step(1.0, 0.99, {3, 4});
  const auto& d = result.diagnostics;

  EXPECT_NEAR(d.tau_after, 1.04, 1e-12);
  EXPECT_NEAR(d.tau_after, oracle.tau, 1e-15);
  EXPECT_NEAR(5.0 / d.tau_after, 4.80769230769, 1e-9);
  EXPECT_NEAR(d.alpha_used, 0.7, 1e-15);
  EXPECT_NEAR(d.shaped_norm_pre_projection, 3.408803489219505, 1e-9 * 3.4088);
  EXPECT_NEAR(d.shaped_norm_pre_projection, oracle.pre_norm, 1e-12);
  EXPECT_TRUE(d.projected);
  EXPECT_EQ(d.projected, oracle.projected);
  EXPECT_NEAR(result.shaped[0], 0.6582884751996565, 1e-9 * 0.6583);
  EXPECT_NEAR(result.shaped[1], 0.8051436414822582, 1e-9 * 0.8051);
  EXPECT_NEAR(result.shaped[0], oracle.shaped[0], 1e-12);
  EXPECT_NEAR(result.shaped[1], oracle.shaped[1], 1e-12);
  EXPECT_NEAR(result.shaped.norm(), 1.04, 1e-9 * 1.04);
  EXPECT_NEAR(d.update_magnitude, 0.104, 1e-12);
  EXPECT_EQ(d.raw_norm, 5.0);
  EXPECT_EQ(result.state.step_count, 1u);
}

TEST(SpampStep, SubThresholdExampleUnchanged) {
  const auto result = spamp_layer_step(state_with_tau(10.0), vec2(0.3, 0.4), 0.1);
  EXPECT_NEAR(result.diagnostics.tau_after, 9.905, 1e-12);
  EXPECT_NEAR(0.5 / result.diagnostics.tau_after, 0.0504795557799, 1e-12);
  EXPECT_EQ(result.diagnostics.alpha_used, 1.0);
  EXPECT_FALSE(result.diagnostics.projected);
  EXPECT_EQ(result.shaped, vec2(0.3, 0.4));
}

TEST(SpampStep, ZeroGradientIsFixedPoint) {
  const auto result = spamp_layer_step(state_with_tau(2.0, 0.9), vec2(0, 0), 0.5);
  EXPECT_NEAR(result.diagnostics.tau_after, 1.8, 1e-15);
  EXPECT_EQ(result.diagnostics.alpha_used, 1.0);
  EXPECT_FALSE(result.diagnostics.projected);
  EXPECT_EQ(result.shaped, vec2(0, 0));
}

TEST(SpampStep, AllZeroStreamFromColdStart) {
  auto s = make_layer_state("l", SpampParams{});
  for (int i = 0; i < 3; ++i) {
    auto r = spamp_layer_step(s, vec2(0, 0), 0.1);
    EXPECT_EQ(r.diagnostics.tau_after, 0.0);
    EXPECT_EQ(r.shaped, vec2(0, 0));
    s = r.state;
  }
  const auto r = spamp_layer_step(s, vec2(1, 0), 0.1);
  EXPECT_NEAR(r.diagnostics.tau_after, 0.01, 1e-15);
  EXPECT_TRUE(r.diagnostics.projected);
  EXPECT_NEAR(r.shaped.norm(), 0.01, 1e-15);
}

TEST(SpampStep, FirstObservationLeavesGradientUnshaped) {
  const auto s = make_layer_state("l", SpampParams{});
  const auto r = spamp_layer_step(s, vec2(30, 40), 0.1);
  EXPECT_EQ(r.diagnostics.tau_after, 50.0);
  EXPECT_EQ(r.diagnostics.alpha_used, 1.0);
  EXPECT_EQ(r.shaped, vec2(30, 40));
}

TEST(SpampStep, CorruptStateRejected) {
  EXPECT_THROW(spamp_layer_step(state_with_tau(-5.0), vec2(0.1, 0), 0.1), InvalidState);
  EXPECT_THROW(spamp_layer_step(state_with_tau(1.0), vec2(NAN, 0), 0.1), InvalidInput);
  EXPECT_THROW(spamp_layer_step(state_with_tau(1.0), vec2(1, 0), 0.0), InvalidParameter);
}

TEST(SpampStep, RawNormArgumentVariant) {
  auto s = state_with_tau(100.0);
  s.argument = ExponentArgument::kRawNorm;
  // ratio 5/99.05 would give alpha 1; the raw norm 5 gives the floor.
  const auto r = spamp_layer_step(s, vec2(3, 4), 0.1);
  EXPECT_NEAR(r.diagnostics.alpha_used, 0.7, 1e-15);
  EXPECT_FALSE(r.diagnostics.projected);
}

TEST(SpampProperties, NormBoundOverRandomSequences) {
  Draws draws(22);
  for (int seq = 0; seq < 2000; ++seq) {
    SpampParams p;
    p.beta = draws.uniform(0.0, 0.999);
    p.alpha_min = draws.uniform(0.3, 1.0);
    p.alpha_max = draws.uniform(p.alpha_min, 1.0);
    p.kappa = draws.uniform(0.0, 1.0);
    auto s = make_layer_state("l", p);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd g = draws.gradient(8);
      auto r = spamp_layer_step(s, g, 0.1);
      ASSERT_LE(r.shaped.norm(), r.diagnostics.tau_after * (1 + 1e-12));
      ASSERT_EQ(r.diagnostics.projected,
                r.diagnostics.shaped_norm_pre_projection > r.diagnostics.tau_after);
      s = r.state;
    }
  }
}

TEST(SpampProperties, IdentityRegime) {
  Draws draws(23);
  SpampParams p;
  p.alpha_min = 1.0;
  p.alpha_max = 1.0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd g = draws.gradient(8);
    auto s = make_layer_state("l", p);
    s.tau = EmaTracker::seeded(0.99, g.norm() * draws.uniform(1.0, 100.0));
    const auto r = spamp_layer_step(s, g, 0.1);
    if (g.norm() <= r.diagnostics.tau_after) {
      ASSERT_EQ(r.shaped, g);
    }
  }
}

TEST(SpampProperties, LayersAreIndependent) {
  Draws draws(24);
  std::vector<Eigen::VectorXd> a, b;
  for (int t = 0; t < 50; ++t) {
    a.push_back(draws.gradient(6));
    b.push_back(draws.gradient(6));
  }
  auto run_alone = [](const std::vector<Eigen::VectorXd>& stream) {
    auto s = make_layer_state("x", SpampParams{});
    std::vector<Eigen::VectorXd> out;
    for (const auto& g : stream) {
      auto r = spamp_layer_step(s, g, 0.1);
      out.push_back(r.shaped);
      s = r.state;
    }
    return out;
  };
  const auto alone_a = run_alone(a);
  const auto alone_b = run_alone(b);

  // Interleave in reverse-then-forward order.
  auto sa = make_layer_state("x", SpampParams{});
  auto sb = make_layer_state("x", SpampParams{});
  for (std::size_t t = 0; t < a.size(); ++t) {
    auto rb = spamp_layer_step(sb, b[t], 0.1);
    auto ra = spamp_layer_step(sa, a[t], 0.1);
    ASSERT_EQ(ra.shaped, alone_a[t]);
    ASSERT_EQ(rb.shaped, alone_b[t]);
    sa = ra.state;
    sb = rb.state;
  }
}

TEST(SpampProperties, SecondMomentBoundedByProjection) {
  Draws draws(25);
  for (int run = 0; run < 200; ++run) {
    const double eta = draws.positive(-3, 0);
    auto s = make_layer_state("l", SpampParams{});
    double sum_sq = 0.0;
    double max_bound = 0.0;
    const int steps = 100;
    for (int t = 0; t < steps; ++t) {
      auto r = spamp_layer_step(s, draws.gradient(5), eta);
      sum_sq += std::pow(r.diagnostics.update_magnitude, 2);
      max_bound = std::max(max_bound, std::pow(eta * r.diagnostics.tau_after, 2));
      s = r.state;
    }
    ASSERT_LE(sum_sq / steps, max_bound * (1 + 1e-12));
  }
}

// ---- update budget ----

TEST(DeltaUpdate, Examples) {
  const auto first = delta_update(UpdateBudgetTracker(0.9, 0.01), 0.1, 10.0);
  EXPECT_NEAR(first.delta, 1.01, 1e-15);

  UpdateBudgetTracker warm(0.9, 0.01);
  warm.ema = EmaTracker::seeded(0.9, 1.0);
  EXPECT_NEAR(delta_update(warm, 0.1, 20.0).delta, 1.11, 1e-14);
  EXPECT_NEAR(delta_update(warm, 0.1, 20.0).tracker.ema.value(), 1.1, 1e-14);
  EXPECT_NEAR(delta_update(warm, 0.1, 0.0).delta, 0.91, 1e-14);
}

TEST(DeltaUpdate, Errors) {
  EXPECT_THROW(UpdateBudgetTracker(0.9, 0.0), InvalidParameter);
  EXPECT_THROW(delta_update(UpdateBudgetTracker(0.9, 0.1), 0.0, 1.0), InvalidParameter);
  EXPECT_THROW(delta_update(UpdateBudgetTracker(0.9, 0.1), 0.1, -1.0), InvalidInput);
}

TEST(DeltaUpdate, AlwaysPositive) {
  Draws draws(26);
  UpdateBudgetTracker t(0.95, 1e-9);
  for (int i = 0; i < 10000; ++i) {
    const double norm = draws.coin(0.3) ? 0.0 : draws.positive(-6, 6);
    auto next = delta_update(t, draws.positive(-4, 0), norm);
    ASSERT_GT(next.delta, 0.0);
    t = next.tracker;
  }
}

// ---- norm history and quantiles ----

NormHistory history_of(std::initializer_list<double> xs, std::size_t capacity = 64) {
  NormHistory h(capacity);
  for (double x : xs) h.push(x);
  return h;
}

TEST(Quantile, Examples) {
  EXPECT_EQ(quantile_threshold(history_of({1, 2, 3, 4, 5}), 0.5), 3.0);
  EXPECT_EQ(quantile_threshold(history_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.8), 8.0);
  for (double q : {0.0, 0.3, 1.0}) EXPECT_EQ(quantile_threshold(history_of({7}), q), 7.0);
}

TEST(Quantile, OrderInsensitiveAndClamped) {
  EXPECT_EQ(quantile_threshold(history_of({5, 1, 4, 2, 3}), 0.5), 3.0);
  EXPECT_EQ(quantile_threshold(history_of({5, 1, 4, 2, 3}), 0.0), 1.0);
  EXPECT_EQ(quantile_threshold(history_of({5, 1, 4, 2, 3}), 1.0), 5.0);
  EXPECT_EQ(quantile_threshold(history_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.7), 7.0);
}

TEST(Quantile, Errors) {
  EXPECT_THROW(quantile_threshold(NormHistory(4), 0.5), EmptyInput);
  EXPECT_THROW(quantile_threshold(history_of({1}), 1.5), InvalidParameter);
}

TEST(NormHistory, RingKeepsMostRecent) {
  NormHistory h(3);
  for (double x : {1.0, 2.0, 3.0, 4.0, 5.0}) h.push(x);
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.samples(), (std::vector<double>{3, 4, 5}));
  EXPECT_THROW(h.push(-1.0), InvalidInput);
  EXPECT_THROW(h.push(NAN), InvalidInput);
  EXPECT_THROW(NormHistory(0), InvalidParameter);
}

}  // namespace
}  // namespace spamp
