#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spamp/adaptive.hpp"
#include "spamp/problems.hpp"

namespace spamp {

/// Alternating noise levels emulating small/large batch phases. Phase 0
/// (steps [0, period)) is the small-batch, high-noise phase.
struct BatchAlternation {
  std::uint64_t period = 1000;
  double low_noise_std = 0.0;
  double high_noise_std = 0.0;
};

struct NoiseSpec {
  double gradient_noise_std = 0.0;
  double spike_probability = 0.02;
  double spike_scale = 5.0;
  std::optional<BatchAlternation> batch_alternation;
};

void validate(const NoiseSpec& noise);

enum class PipelineMode { kBaseline, kFixedClip, kWarmupFixedClip, kGradNorm, kUpdateClip, kSpamp };

std::string mode_name(PipelineMode mode);
/// Throws InvalidParameter on an unknown name.
PipelineMode parse_mode(const std::string& name);

/// Cosine decay from initial_lr to min_lr over decay_horizon steps, constant
/// afterwards. A zero horizon means a constant rate.
struct LrSchedule {
  double initial_lr = 0.1;
  std::uint64_t decay_horizon = 0;
  double min_lr = 0.0;

  double at(std::uint64_t step) const;
};

struct UpdateClipParams {
  double beta = 0.99;
  double epsilon = 1e-3;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kSpamp;
  double tau_fixed = 1.0;
  /// Linear warmup length for warmup_fixed_clip; unset means 5% of the run.
  std::optional<std::uint64_t> warmup_steps;
  SpampParams spamp;
  UpdateClipParams update_clip;
  /// Fixed update bound of the inverse-scaling rule eta_eff = min(eta, delta / ||g||).
  double gradnorm_delta = 0.1;
  LrSchedule lr;
};

void validate(const PipelineConfig& config);

/// Exact gradient plus seeded Gaussian noise; with probability
/// spike_probability the whole gradient of the step is scaled by spike_scale.
/// Deterministic in (seed, step).
std::vector<GradientVector> noisy_gradient(const ToyProblem& problem,
                                           const Eigen::VectorXd& theta, const NoiseSpec& noise,
                                           std::uint64_t step, std::uint64_t seed);

/// One (step, layer) row of telemetry.
struct StepRecord {
  std::uint64_t step = 0;
  std::string layer;
  double loss = 0.0;  // loss before this step's update
  double raw_norm = 0.0;
  double shaped_norm = 0.0;
  double tau = 0.0;  // active threshold of the mode; NaN when the mode has none
  double alpha = 1.0;
  double update_magnitude = 0.0;  // eta_t * ||shaped||
  bool clipped = false;
};

/// Raw norms kept for the end-of-run distribution report.
inline constexpr std::size_t kNormWindow = 1 << 16;

struct RunMetrics {
  std::vector<StepRecord> records;
  std::size_t layer_count = 0;
  std::uint64_t steps_requested = 0;
  std::uint64_t steps_completed = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
  std::vector<double> learning_rates;     // eta_t per completed step
  std::vector<LayerShaperState> layer_states;  // final SPAMP state, spamp mode only
  NormHistory raw_norms{kNormWindow};      // most recent raw norms across layers
};

/// Loss above this multiple of the initial loss (or non-finite) ends the run.
inline constexpr double kDivergenceFactor = 1e6;

RunMetrics train(const ToyProblem& problem, const Eigen::VectorXd& theta0,
                 const PipelineConfig& pipeline, const NoiseSpec& noise, std::uint64_t steps,
                 std::uint64_t seed);

struct StepInterval {
  std::uint64_t begin = 0;  // inclusive
  std::uint64_t end = 0;    // exclusive
};

/// Default interval split in the proportions 1:2:2 of the run.
std::vector<StepInterval> default_intervals(std::uint64_t steps);

struct SummaryOptions {
  std::vector<StepInterval> intervals;
  std::uint64_t checkpoint_every = 1;
  double loss_threshold = 0.0;
};

struct IntervalStats {
  StepInterval interval;
  double mean_update_magnitude = 0.0;
  double std_update_magnitude = 0.0;
  double variance_update_magnitude = 0.0;
  double max_update_magnitude = 0.0;
};

struct IntervalError {
  StepInterval interval;
  std::string reason;
};

/// Inter-layer statistics (population variance) at one checkpoint step.
struct CheckpointStats {
  std::uint64_t step = 0;
  double mean_raw_norm = 0.0;
  double variance_raw_norm = 0.0;
  double mean_shaped_norm = 0.0;
  double variance_shaped_norm = 0.0;
};

struct NormCdfReport {
  double cdf_at_1 = 0.0;
  double cdf_at_2 = 0.0;
  double median = 0.0;
};

struct RunSummary {
  std::uint64_t steps_completed = 0;
  bool diverged = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double loss_threshold = 0.0;
  std::optional<std::uint64_t> steps_to_threshold;
  double clip_frequency = 0.0;
  double max_update_magnitude = 0.0;
  std::vector<IntervalStats> intervals;
  std::vector<IntervalError> interval_errors;
  std::vector<CheckpointStats> checkpoints;
  std::optional<NormCdfReport> norm_cdf;
};

/// Per-step update magnitude: norm of the whole parameter change, combining layers.
std::vector<double> step_update_magnitudes(const RunMetrics& metrics);

RunSummary summarize(const RunMetrics& metrics, const SummaryOptions& options);

}  // namespace spamp
