#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "spamp/shaping.hpp"

namespace spamp {

struct ExponentialTail {
  double rate = 1.0;
};
struct LognormalTail {
  double location = 0.0;
  double scale = 1.0;
};
/// Pareto type I: P(X > x) = (x_min / x)^shape for x >= x_min.
struct ParetoTail {
  double x_min = 1.0;
  double shape = 2.0;
};

using TailModel = std::variant<ExponentialTail, LognormalTail, ParetoTail>;

void validate(const TailModel& model);
std::string model_name(const TailModel& model);

/// n i.i.d. norm samples drawn by inverse transform (Box-Muller for lognormal).
std::vector<double> sample_norms(const TailModel& model, std::size_t n, std::uint64_t seed);

/// -eta * ||g||^2 below the threshold, -eta * tau^2 above it.
double clipped_descent_step(double eta, double grad_norm, const ClipThreshold& tau);

struct DescentEstimate {
  double expected_descent = 0.0;
  double standard_error = 0.0;
  std::size_t n_samples = 0;
};

DescentEstimate expected_clipped_descent_mc(std::span<const double> samples, double eta,
                                            const ClipThreshold& tau);

/// Fraction of samples <= r.
double empirical_cdf(std::span<const double> samples, double r);

/// A shaping operator with its parameters bound, as seen by the smoothness probe.
struct ProbeOperator {
  std::string name;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;
};

ProbeOperator probe_hard_clip(double tau);
ProbeOperator probe_power_shape(double alpha);
ProbeOperator probe_normalize();
ProbeOperator probe_update_clip(double eta, double delta);

struct SmoothnessReport {
  std::string operator_name;
  double probe_norm = 0.0;
  double left_slope = 0.0;
  double right_slope = 0.0;
  double slope_gap = 0.0;
};

/// One-sided difference quotients of m(r) = ||S(r u)|| at probe_norm, for the
/// fixed unit direction u = (0.6, 0.8). Requires step <= probe_norm / 100.
SmoothnessReport smoothness_probe(const ProbeOperator& op, double probe_norm, double step);

}  // namespace spamp
