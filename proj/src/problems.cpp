#include "spamp/problems.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "spamp/error.hpp"
#include "spamp/rng.hpp"

namespace spamp {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::Index mlp_layer_size(const MlpProblem& p, std::size_t layer) {
  return static_cast<Eigen::Index>(p.sizes[layer + 1]) * p.sizes[layer] + p.sizes[layer + 1];
}

struct MlpWeights {
  Eigen::Map<const Eigen::MatrixXd> W;
  Eigen::Map<const Eigen::VectorXd> b;
};

std::vector<MlpWeights> view_mlp(const MlpProblem& p, const Eigen::VectorXd& theta) {
  std::vector<MlpWeights> out;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
    const int rows = p.sizes[l + 1];
    const int cols = p.sizes[l];
    out.push_back(MlpWeights{Eigen::Map<const Eigen::MatrixXd>(theta.data() + offset, rows, cols),
                             Eigen::Map<const Eigen::VectorXd>(
                                 theta.data() + offset + Eigen::Index(rows) * cols, rows)});
    offset += mlp_layer_size(p, l);
  }
  return out;
}

// Activations a_0 (inputs) .. a_L (network output).
std::vector<Eigen::MatrixXd> mlp_forward(const MlpProblem& p, const std::vector<MlpWeights>& w) {
  std::vector<Eigen::MatrixXd> acts{p.inputs};
  for (std::size_t l = 0; l < w.size(); ++l) {
    Eigen::MatrixXd z = (w[l].W * acts.back()).colwise() + w[l].b;
    if (l + 1 < w.size()) {
      z = z.array().tanh().matrix();
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

void require_dimension(const ToyProblem& p, const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count(p)) {
    throw InvalidInput("parameter vector has " + std::to_string(theta.size()) +
                       " entries, problem expects " + std::to_string(parameter_count(p)));
  }
}

}  // namespace

QuadraticProblem make_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b) {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw InvalidInput("quadratic matrix must be square and non-empty");
  }
  if (b.size() != A.rows()) {
    throw InvalidInput("quadratic offset length does not match the matrix");
  }
  if (!A.isApprox(A.transpose(), 1e-12) || !A.allFinite() || !b.allFinite()) {
    throw InvalidInput("quadratic matrix must be symmetric and finite");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(A).info() != Eigen::Success) {
    throw InvalidInput("quadratic matrix is not positive definite");
  }
  return QuadraticProblem{std::move(A), std::move(b)};
}

LogisticProblem make_logistic(std::size_t samples, std::size_t features, double penalty,
                              std::uint64_t seed) {
  if (samples == 0 || features == 0) {
    throw InvalidInput("logistic problem needs samples and features");
  }
  if (!(penalty >= 0.0)) {
    throw InvalidInput("logistic penalty must be non-negative");
  }
  Rng rng(derive_seed(seed, 0x10));
  const auto n = static_cast<Eigen::Index>(samples);
  const auto d = static_cast<Eigen::Index>(features);
  Eigen::VectorXd truth(d);
  for (auto& w : truth) w = rng.normal();
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.normal();
  }
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = rng.uniform() < sigmoid(X.row(i).dot(truth)) ? 1.0 : 0.0;
  }
  return LogisticProblem{std::move(X), std::move(y), penalty};
}

MlpProblem make_mlp(std::vector<int> sizes, std::size_t samples, std::uint64_t seed) {
  if (sizes.size() < 3) {
    throw InvalidInput("mlp needs at least two weight layers");
  }
  for (const int s : sizes) {
    if (s <= 0) throw InvalidInput("mlp layer sizes must be positive");
  }
  if (samples == 0) {
    throw InvalidInput("mlp needs at least one sample");
  }
  Rng rng(derive_seed(seed, 0x20));
  const auto n = static_cast<Eigen::Index>(samples);
  Eigen::MatrixXd inputs(sizes.front(), n);
  for (auto& x : inputs.reshaped()) x = rng.normal();
  // Teacher: y = sin(T x), T ~ N(0, 1/fan_in).
  Eigen::MatrixXd teacher(sizes.back(), sizes.front());
  const double scale = 1.0 / std::sqrt(static_cast<double>(sizes.front()));
  for (auto& t : teacher.reshaped()) t = scale * rng.normal();
  Eigen::MatrixXd targets = (teacher * inputs).array().sin().matrix();
  return MlpProblem{std::move(sizes), std::move(inputs), std::move(targets)};
}

std::string problem_name(const ToyProblem& problem) {
  return std::visit(Overloaded{
                        [](const QuadraticProblem&) { return std::string("quadratic"); },
                        [](const LogisticProblem&) { return std::string("logistic"); },
                        [](const MlpProblem&) { return std::string("mlp"); },
                    },
                    problem);
}

std::vector<LayerSlice> layer_layout(const ToyProblem& problem) {
  return std::visit(Overloaded{
                        [](const QuadraticProblem& p) {
                          return std::vector<LayerSlice>{{"theta", 0, p.b.size()}};
                        },
                        [](const LogisticProblem& p) {
                          return std::vector<LayerSlice>{{"theta", 0, p.X.cols()}};
                        },
                        [](const MlpProblem& p) {
                          std::vector<LayerSlice> out;
                          Eigen::Index offset = 0;
                          for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
                            const Eigen::Index size = mlp_layer_size(p, l);
                            out.push_back({"layer" + std::to_string(l), offset, size});
                            offset += size;
                          }
                          return out;
                        },
                    },
                    problem);
}

Eigen::Index parameter_count(const ToyProblem& problem) {
  Eigen::Index total = 0;
  for (const auto& slice : layer_layout(problem)) total += slice.size;
  return total;
}

Eigen::VectorXd init_mlp_parameters(const MlpProblem& problem,
                                    const std::vector<double>& layer_scales, std::uint64_t seed) {
  const std::size_t layers = problem.sizes.size() - 1;
  if (!layer_scales.empty() && layer_scales.size() != layers) {
    throw InvalidInput("mlp layer scale count does not match the number of weight layers");
  }
  Rng rng(derive_seed(seed, 0x30));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(parameter_count(problem));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const double scale = layer_scales.empty() ? 1.0 : layer_scales[l];
    const double std_dev = scale / std::sqrt(static_cast<double>(problem.sizes[l]));
    const Eigen::Index weights = Eigen::Index(problem.sizes[l + 1]) * problem.sizes[l];
    for (Eigen::Index i = 0; i < weights; ++i) theta(offset + i) = std_dev * rng.normal();
    offset += mlp_layer_size(problem, l);
  }
  return theta;
}

double loss(const ToyProblem& problem, const Eigen::VectorXd& theta) {
  require_dimension(problem, theta);
  return std::visit(
      Overloaded{
          [&](const QuadraticProblem& p) { return 0.5 * theta.dot(p.A * theta) - p.b.dot(theta); },
          [&](const LogisticProblem& p) {
            const Eigen::VectorXd z = p.X * theta;
            double total = 0.0;
            for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z(i)) - p.y(i) * z(i);
            return total / static_cast<double>(z.size()) + 0.5 * p.penalty * theta.squaredNorm();
          },
          [&](const MlpProblem& p) {
            const auto acts = mlp_forward(p, view_mlp(p, theta));
            return 0.5 * (acts.back() - p.targets).squaredNorm() /
                   static_cast<double>(p.inputs.cols());
          },
      },
      problem);
}

Eigen::VectorXd flat_gradient(const ToyProblem& problem, const Eigen::VectorXd& theta) {
  require_dimension(problem, theta);
  return std::visit(
      Overloaded{
          [&](const QuadraticProblem& p) -> Eigen::VectorXd { return p.A * theta - p.b; },
          [&](const LogisticProblem& p) -> Eigen::VectorXd {
            const Eigen::VectorXd z = p.X * theta;
            const Eigen::VectorXd residual = z.unaryExpr(&sigmoid) - p.y;
            return p.X.transpose() * residual / static_cast<double>(z.size()) + p.penalty * theta;
          },
          [&](const MlpProblem& p) -> Eigen::VectorXd {
            const auto weights = view_mlp(p, theta);
            const auto acts = mlp_forward(p, weights);
            const auto layout = layer_layout(p);
            Eigen::VectorXd grad(theta.size());
            Eigen::MatrixXd delta = (acts.back() - p.targets) / static_cast<double>(p.inputs.cols());
            for (std::size_t l = weights.size(); l-- > 0;) {
              const Eigen::Index rows = weights[l].W.rows();
              const Eigen::Index cols = weights[l].W.cols();
              Eigen::Map<Eigen::MatrixXd>(grad.data() + layout[l].offset, rows, cols) =
                  delta * acts[l].transpose();
              grad.segment(layout[l].offset + rows * cols, rows) = delta.rowwise().sum();
              if (l > 0) {
                delta = ((weights[l].W.transpose() * delta).array() *
                         (1.0 - acts[l].array().square()))
                            .matrix();
              }
            }
            return grad;
          },
      },
      problem);
}

std::vector<GradientVector> split_layers(const std::vector<LayerSlice>& layout,
                                         const Eigen::VectorXd& flat) {
  std::vector<GradientVector> out;
  out.reserve(layout.size());
  for (const auto& slice : layout) {
    out.push_back(GradientVector{slice.layer_id, flat.segment(slice.offset, slice.size)});
  }
  return out;
}

std::vector<GradientVector> exact_gradient(const ToyProblem& problem,
                                           const Eigen::VectorXd& theta) {
  return split_layers(layer_layout(problem), flat_gradient(problem, theta));
}

double finite_diff_check(const ToyProblem& problem, const Eigen::VectorXd& theta,
                         double step_size) {
  if (!(step_size >= 1e-7 && step_size <= 1e-3)) {
    throw InvalidParameter("finite-difference step must lie in [1e-7, 1e-3]");
  }
  const Eigen::VectorXd grad = flat_gradient(problem, theta);
  Eigen::VectorXd probe = theta;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (std::abs(grad(i)) <= 1e-8) continue;
    probe(i) = theta(i) + step_size;
    const double up = loss(problem, probe);
    probe(i) = theta(i) - step_size;
    const double down = loss(problem, probe);
    probe(i) = theta(i);
    const double numeric = (up - down) / (2.0 * step_size);
    worst = std::max(worst, std::abs(numeric - grad(i)) / std::abs(grad(i)));
  }
  return worst;
}

}  // namespace spamp
