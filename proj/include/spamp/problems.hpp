#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "spamp/shaping.hpp"

namespace spamp {

/// L(theta) = 1/2 theta' A theta - b' theta, A symmetric positive definite.
struct QuadraticProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// Mean binary cross-entropy of sigmoid(X theta) plus (penalty / 2) ||theta||^2.
struct LogisticProblem {
  Eigen::MatrixXd X;  // samples x features
  Eigen::VectorXd y;  // 0/1 labels
  double penalty = 0.0;
};

/// Fully connected tanh network, linear output, loss 1/(2N) sum ||f(x) - y||^2.
/// Each weight layer's parameters are W (column-major) followed by the bias.
struct MlpProblem {
  std::vector<int> sizes;   // input, hidden..., output
  Eigen::MatrixXd inputs;   // sizes.front() x N
  Eigen::MatrixXd targets;  // sizes.back() x N
};

using ToyProblem = std::variant<QuadraticProblem, LogisticProblem, MlpProblem>;

QuadraticProblem make_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b);
LogisticProblem make_logistic(std::size_t samples, std::size_t features, double penalty,
                              std::uint64_t seed);
MlpProblem make_mlp(std::vector<int> sizes, std::size_t samples, std::uint64_t seed);

std::string problem_name(const ToyProblem& problem);

/// Contiguous slice of the flat parameter vector owned by one layer.
struct LayerSlice {
  std::string layer_id;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

std::vector<LayerSlice> layer_layout(const ToyProblem& problem);
Eigen::Index parameter_count(const ToyProblem& problem);

/// Weights ~ N(0, 1/fan_in) times a per-layer scale, biases zero.
Eigen::VectorXd init_mlp_parameters(const MlpProblem& problem,
                                    const std::vector<double>& layer_scales, std::uint64_t seed);

double loss(const ToyProblem& problem, const Eigen::VectorXd& theta);

/// Analytic gradient of the flat parameter vector.
Eigen::VectorXd flat_gradient(const ToyProblem& problem, const Eigen::VectorXd& theta);

/// Analytic gradient split per layer (one entry for single-layer problems).
std::vector<GradientVector> exact_gradient(const ToyProblem& problem,
                                           const Eigen::VectorXd& theta);

std::vector<GradientVector> split_layers(const std::vector<LayerSlice>& layout,
                                         const Eigen::VectorXd& flat);

/// Max relative error between central differences of the loss and the
/// analytic gradient, over components with |g_i| > 1e-8.
double finite_diff_check(const ToyProblem& problem, const Eigen::VectorXd& theta,
                         double step_size);

}  // namespace spamp
