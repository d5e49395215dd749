#include "spamp/descent.hpp"

#include <algorithm>
#include <cmath>

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

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

void require_samples(std::span<const double> samples) {
  if (samples.empty()) {
    throw EmptyInput("no norm samples");
  }
}

}  // namespace

void validate(const TailModel& model) {
  std::visit(Overloaded{
                 [](const ExponentialTail& m) {
                   if (!positive_finite(m.rate)) {
                     throw InvalidModel("exponential rate must be positive");
                   }
                 },
                 [](const LognormalTail& m) {
                   if (!std::isfinite(m.location) || !positive_finite(m.scale)) {
                     throw InvalidModel("lognormal needs finite location and positive scale");
                   }
                 },
                 [](const ParetoTail& m) {
                   if (!positive_finite(m.x_min) || !positive_finite(m.shape)) {
                     throw InvalidModel("pareto needs positive x_min and shape");
                   }
                 },
             },
             model);
}

std::string model_name(const TailModel& model) {
  return std::visit(Overloaded{
                        [](const ExponentialTail&) { return std::string("exponential"); },
                        [](const LognormalTail&) { return std::string("lognormal"); },
                        [](const ParetoTail&) { return std::string("pareto"); },
                    },
                    model);
}

std::vector<double> sample_norms(const TailModel& model, std::size_t n, std::uint64_t seed) {
  validate(model);
  if (n == 0) {
    throw InvalidParameter("sample count must be at least 1");
  }
  Rng rng(seed);
  std::vector<double> out(n);
  std::visit(Overloaded{
                 [&](const ExponentialTail& m) {
                   for (auto& x : out) x = -std::log(rng.uniform()) / m.rate;
                 },
                 [&](const LognormalTail& m) {
                   for (auto& x : out) x = std::exp(m.location + m.scale * rng.normal());
                 },
                 [&](const ParetoTail& m) {
                   for (auto& x : out) x = m.x_min * std::pow(rng.uniform(), -1.0 / m.shape);
                 },
             },
             model);
  return out;
}

double clipped_descent_step(double eta, double grad_norm, const ClipThreshold& tau) {
  detail::require_positive(eta, "learning rate");
  if (!(grad_norm >= 0.0)) {
    throw InvalidInput("gradient norm must be non-negative");
  }
  const double effective = std::min(grad_norm, tau.value());
  return -eta * effective * effective;
}

DescentEstimate expected_clipped_descent_mc(std::span<const double> samples, double eta,
                                            const ClipThreshold& tau) {
  require_samples(samples);
  // Welford: a constant stream yields its value and zero variance exactly.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (const double s : samples) {
    const double x = clipped_descent_step(eta, s, tau);
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  double se = 0.0;
  if (k > 1) {
    const double var = m2 / static_cast<double>(k - 1);
    se = std::sqrt(var / static_cast<double>(k));
  }
  return DescentEstimate{mean, se, k};
}

double empirical_cdf(std::span<const double> samples, double r) {
  require_samples(samples);
  const auto count = std::count_if(samples.begin(), samples.end(), [r](double s) { return s <= r; });
  return static_cast<double>(count) / static_cast<double>(samples.size());
}

ProbeOperator probe_hard_clip(double tau) {
  const ClipThreshold threshold(tau);
  return {"hard_clip", [threshold](const Eigen::VectorXd& g) { return hard_clip(g, threshold); }};
}

ProbeOperator probe_power_shape(double alpha) {
  detail::require_positive(alpha, "shaping exponent");
  return {"power_shape", [alpha](const Eigen::VectorXd& g) { return power_shape(g, alpha); }};
}

ProbeOperator probe_normalize() {
  return {"normalize", [](const Eigen::VectorXd& g) { return normalize(g); }};
}

ProbeOperator probe_update_clip(double eta, double delta) {
  detail::require_positive(eta, "learning rate");
  const UpdateBound bound(delta);
  return {"update_clip",
          [eta, bound](const Eigen::VectorXd& g) { return update_clip(g, eta, bound); }};
}

SmoothnessReport smoothness_probe(const ProbeOperator& op, double probe_norm, double step) {
  if (!positive_finite(probe_norm)) {
    throw InvalidParameter("probe norm must be positive");
  }
  if (!positive_finite(step) || step > probe_norm / 100.0) {
    throw InvalidParameter("probe step must be positive and at most probe_norm / 100");
  }
  const Eigen::Vector2d direction(0.6, 0.8);
  const auto norm_map = [&](double r) { return op.apply(r * direction).norm(); };
  const double center = norm_map(probe_norm);
  const double left = (center - norm_map(probe_norm - step)) / step;
  const double right = (norm_map(probe_norm + step) - center) / step;
  return SmoothnessReport{op.name, probe_norm, left, right, std::abs(left - right)};
}

}  // namespace spamp
