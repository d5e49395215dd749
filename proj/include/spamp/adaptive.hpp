#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spamp {

/// Exponential moving average with first-observation initialization.
///
/// An uninitialized tracker adopts the first observation as its value; after
/// that value' = beta * value + (1 - beta) * x. There is no bias correction.
class EmaTracker {
 public:
  explicit EmaTracker(double beta);
  static EmaTracker seeded(double beta, double value);

  double beta() const { return beta_; }
  bool initialized() const { return initialized_; }
  /// Throws InvalidState when read before the first observation.
  double value() const;

 private:
  friend EmaTracker ema_update(const EmaTracker& tracker, double x);

  double beta_;
  double value_ = 0.0;
  bool initialized_ = false;
};

EmaTracker ema_update(const EmaTracker& tracker, double x);

/// What the shaping exponent map is evaluated on. Algorithm line 3 uses the
/// norm-to-threshold ratio; the raw-norm variant is kept for comparison.
enum class ExponentArgument { kNormRatio, kRawNorm };

struct SpampParams {
  double beta = 0.99;
  double alpha_min = 0.7;
  double alpha_max = 1.0;
  double kappa = 0.3;
  ExponentArgument argument = ExponentArgument::kNormRatio;
};

void validate(const SpampParams& params);

struct LayerShaperState {
  std::string layer_id;
  EmaTracker tau;
  double alpha_min = 0.7;
  double alpha_max = 1.0;
  double kappa = 0.3;
  std::uint64_t step_count = 0;
  ExponentArgument argument = ExponentArgument::kNormRatio;
};

LayerShaperState make_layer_state(std::string layer_id, const SpampParams& params);

/// h(r) = clamp(alpha_max - kappa * max(0, r - 1), alpha_min, alpha_max).
double dynamic_alpha(double ratio, const LayerShaperState& state);

struct SpampDiagnostics {
  double raw_norm = 0.0;
  double tau_after = 0.0;
  double alpha_used = 1.0;
  double shaped_norm_pre_projection = 0.0;
  bool projected = false;
  double update_magnitude = 0.0;
};

struct SpampStepResult {
  Eigen::VectorXd shaped;
  LayerShaperState state;
  SpampDiagnostics diagnostics;
};

/// One layer of one SPAMP step: EMA threshold update on the raw norm, dynamic
/// exponent, power shaping, projection onto the threshold ball. The parameter
/// update itself belongs to the caller.
SpampStepResult spamp_layer_step(const LayerShaperState& state,
                                 const Eigen::Ref<const Eigen::VectorXd>& g, double eta);

/// Adaptive update bound delta_t = EMA(eta * ||g||) + epsilon.
struct UpdateBudgetTracker {
  UpdateBudgetTracker(double beta, double epsilon);

  EmaTracker ema;
  double epsilon;
};

struct DeltaUpdate {
  double delta;
  UpdateBudgetTracker tracker;
};

DeltaUpdate delta_update(const UpdateBudgetTracker& tracker, double eta, double grad_norm);

/// Sliding window of observed gradient norms.
class NormHistory {
 public:
  explicit NormHistory(std::size_t capacity);

  void push(double norm);
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return ring_.empty(); }
  /// Oldest first.
  std::vector<double> samples() const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<double> ring_;
};

/// Nearest-rank quantile: sorted[ceil(q * n) - 1], clamped to the valid range.
double quantile_threshold(const NormHistory& history, double q);

}  // namespace spamp
