#include "spamp/problems.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "spamp/error.hpp"
#include "support.hpp"

namespace spamp {
namespace {

Eigen::VectorXd random_theta(testing::Draws& draws, Eigen::Index n, double scale) {
  Eigen::VectorXd theta(n);
  for (Eigen::Index i = 0; i < n; ++i) theta[i] = draws.uniform(-scale, scale);
  return theta;
}

TEST(Quadratic, GradientExamples) {
  const ToyProblem identity = make_quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  const auto g = exact_gradient(identity, Eigen::Vector2d(1, 2));
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].layer_id, "theta");
  EXPECT_EQ(g[0].components, Eigen::VectorXd(Eigen::Vector2d(1, 2)));

  const ToyProblem at_min =
      make_quadratic(Eigen::Vector2d(2, 4).asDiagonal().toDenseMatrix(), Eigen::Vector2d(2, 4));
  EXPECT_EQ(exact_gradient(at_min, Eigen::Vector2d(1, 1))[0].components,
            Eigen::VectorXd(Eigen::Vector2d(0, 0)));
  EXPECT_DOUBLE_EQ(loss(at_min, Eigen::Vector2d(1, 1)), -3.0);
}

TEST(Quadratic, ConstructionErrors) {
  Eigen::MatrixXd nonsym(2, 2);
  nonsym << 1, 2, 0, 1;
  EXPECT_THROW(make_quadratic(nonsym, Eigen::VectorXd::Zero(2)), InvalidInput);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  EXPECT_THROW(make_quadratic(indefinite, Eigen::VectorXd::Zero(2)), InvalidInput);
  EXPECT_THROW(make_quadratic(Eigen::MatrixXd::Identity(2, 3), Eigen::VectorXd::Zero(2)),
               InvalidInput);
  EXPECT_THROW(make_quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(3)),
               InvalidInput);
}

TEST(Problems, DimensionMismatch) {
  const ToyProblem q = make_quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(exact_gradient(q, Eigen::VectorXd::Zero(3)), InvalidInput);
  EXPECT_THROW(loss(q, Eigen::VectorXd::Zero(1)), InvalidInput);
  const ToyProblem m = make_mlp({3, 4, 2}, 5, 1);
  EXPECT_THROW(flat_gradient(m, Eigen::VectorXd::Zero(parameter_count(m) + 1)), InvalidInput);
}

TEST(Logistic, GradientAtZeroIsClosedForm) {
  const auto lp = make_logistic(50, 4, 0.1, 3);
  const ToyProblem p = lp;
  const Eigen::VectorXd g = flat_gradient(p, Eigen::VectorXd::Zero(4));
  const Eigen::VectorXd expected = lp.X.transpose() * (Eigen::VectorXd::Constant(50, 0.5) - lp.y) / 50.0;
  EXPECT_LT((g - expected).norm(), 1e-14);
  EXPECT_NEAR(loss(p, Eigen::VectorXd::Zero(4)), std::log(2.0), 1e-14);
}

TEST(Logistic, Errors) {
  EXPECT_THROW(make_logistic(0, 3, 0.0, 1), InvalidInput);
  EXPECT_THROW(make_logistic(10, 3, -1.0, 1), InvalidInput);
}

TEST(Mlp, LayoutAndInit) {
  const auto mp = make_mlp({4, 16, 16, 2}, 32, 1);
  const ToyProblem p = mp;
  const auto layout = layer_layout(p);
  ASSERT_EQ(layout.size(), 3u);
  EXPECT_EQ(layout[0].layer_id, "layer0");
  EXPECT_EQ(layout[0].size, 4 * 16 + 16);
  EXPECT_EQ(layout[1].offset, 80);
  EXPECT_EQ(layout[2].size, 16 * 2 + 2);
  EXPECT_EQ(parameter_count(p), 80 + 272 + 34);

  const auto unit = init_mlp_parameters(mp, {1, 1, 1}, 9);
  const auto scaled = init_mlp_parameters(mp, {10, 1, 0.1}, 9);
  EXPECT_LT((scaled.segment(0, 80) - 10 * unit.segment(0, 80)).norm(), 1e-12);
  EXPECT_EQ(scaled.segment(80, 272), unit.segment(80, 272));
  EXPECT_EQ(unit.segment(64, 16), Eigen::VectorXd::Zero(16));  // first-layer bias
  EXPECT_THROW(init_mlp_parameters(mp, {1, 1}, 9), InvalidInput);
}

TEST(Mlp, Errors) {
  EXPECT_THROW(make_mlp({4}, 8, 1), InvalidInput);
  EXPECT_THROW(make_mlp({4, 2}, 8, 1), InvalidInput);
  EXPECT_THROW(make_mlp({4, 0, 2}, 8, 1), InvalidInput);
  EXPECT_THROW(make_mlp({4, 3, 2}, 0, 1), InvalidInput);
}

TEST(Problems, SplitLayersMatchesFlat) {
  const ToyProblem p = make_mlp({3, 5, 4, 2}, 10, 2);
  const Eigen::VectorXd theta = init_mlp_parameters(std::get<MlpProblem>(p), {1, 1, 1}, 4);
  const auto split = exact_gradient(p, theta);
  const Eigen::VectorXd flat = flat_gradient(p, theta);
  Eigen::Index offset = 0;
  for (const auto& g : split) {
    EXPECT_EQ(g.components, flat.segment(offset, g.components.size()));
    offset += g.components.size();
  }
  EXPECT_EQ(offset, flat.size());
}

TEST(FiniteDifference, StepValidation) {
  const ToyProblem q = make_quadratic(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  EXPECT_THROW(finite_diff_check(q, Eigen::Vector2d(1, 1), 1e-2), InvalidParameter);
  EXPECT_THROW(finite_diff_check(q, Eigen::Vector2d(1, 1), 1e-9), InvalidParameter);
}

// Twenty random parameter draws per problem.

TEST(FiniteDifference, Quadratic) {
  testing::Draws draws(41);
  Eigen::MatrixXd M(5, 5);
  for (int i = 0; i < 25; ++i) M(i / 5, i % 5) = draws.uniform(-1, 1);
  const Eigen::MatrixXd A = M * M.transpose() + Eigen::MatrixXd::Identity(5, 5);
  const ToyProblem p = make_quadratic(A, random_theta(draws, 5, 1.0));
  for (int i = 0; i < 20; ++i) {
    EXPECT_LT(finite_diff_check(p, random_theta(draws, 5, 2.0), 1e-5), 1e-8);
  }
}

TEST(FiniteDifference, Logistic) {
  testing::Draws draws(42);
  const ToyProblem p = make_logistic(200, 10, 1e-3, 5);
  for (int i = 0; i < 20; ++i) {
    EXPECT_LT(finite_diff_check(p, random_theta(draws, 10, 1.0), 1e-5), 1e-5);
  }
}

TEST(FiniteDifference, Mlp) {
  const auto mp = make_mlp({4, 16, 16, 2}, 64, 6);
  const ToyProblem p = mp;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto theta = init_mlp_parameters(mp, {1, 1, 1}, 100 + i);
    EXPECT_LT(finite_diff_check(p, theta, 1e-5), 1e-4);
  }
}

}  // namespace
}  // namespace spamp
