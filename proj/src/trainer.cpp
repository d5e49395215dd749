#include "spamp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spamp/descent.hpp"
#include "spamp/error.hpp"
#include "spamp/rng.hpp"
#include "spamp/shaping.hpp"

namespace spamp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

double noise_std_at(const NoiseSpec& noise, std::uint64_t step) {
  if (!noise.batch_alternation) {
    return noise.gradient_noise_std;
  }
  const auto& alt = *noise.batch_alternation;
  return (step / alt.period) % 2 == 0 ? alt.high_noise_std : alt.low_noise_std;
}

struct Population {
  double mean = 0.0;
  double variance = 0.0;
};

template <typename Range>
Population population(const Range& values) {
  Population out;
  if (values.empty()) return out;
  const auto n = static_cast<double>(values.size());
  for (const double v : values) out.mean += v;
  out.mean /= n;
  for (const double v : values) out.variance += (v - out.mean) * (v - out.mean);
  out.variance /= n;
  return out;
}

struct ShapedLayer {
  Eigen::VectorXd shaped;
  double tau = kNaN;
  double alpha = 1.0;
  bool clipped = false;
};

}  // namespace

void validate(const NoiseSpec& noise) {
  if (!(noise.gradient_noise_std >= 0.0) || !std::isfinite(noise.gradient_noise_std)) {
    throw InvalidParameter("gradient noise std must be non-negative");
  }
  if (!(noise.spike_probability >= 0.0 && noise.spike_probability <= 1.0)) {
    throw InvalidParameter("spike probability must lie in [0, 1]");
  }
  if (!positive_finite(noise.spike_scale)) {
    throw InvalidParameter("spike scale must be positive");
  }
  if (noise.batch_alternation) {
    const auto& alt = *noise.batch_alternation;
    if (alt.period == 0) throw InvalidParameter("batch alternation period must be positive");
    if (!(alt.low_noise_std >= 0.0) || !(alt.high_noise_std >= 0.0) ||
        !std::isfinite(alt.low_noise_std) || !std::isfinite(alt.high_noise_std)) {
      throw InvalidParameter("batch alternation noise levels must be non-negative");
    }
  }
}

std::string mode_name(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kBaseline: return "baseline";
    case PipelineMode::kFixedClip: return "fixed_clip";
    case PipelineMode::kWarmupFixedClip: return "warmup_fixed_clip";
    case PipelineMode::kGradNorm: return "gradnorm";
    case PipelineMode::kUpdateClip: return "update_clip";
    case PipelineMode::kSpamp: return "spamp";
  }
  return "unknown";
}

PipelineMode parse_mode(const std::string& name) {
  for (const auto mode : {PipelineMode::kBaseline, PipelineMode::kFixedClip,
                          PipelineMode::kWarmupFixedClip, PipelineMode::kGradNorm,
                          PipelineMode::kUpdateClip, PipelineMode::kSpamp}) {
    if (mode_name(mode) == name) return mode;
  }
  throw InvalidParameter("unknown pipeline mode '" + name +
                         "' (valid: baseline, fixed_clip, warmup_fixed_clip, gradnorm, "
                         "update_clip, spamp)");
}

double LrSchedule::at(std::uint64_t step) const {
  if (decay_horizon == 0) {
    return initial_lr;
  }
  const double progress =
      static_cast<double>(std::min(step, decay_horizon)) / static_cast<double>(decay_horizon);
  return min_lr + (initial_lr - min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void validate(const PipelineConfig& config) {
  if (!positive_finite(config.tau_fixed)) {
    throw InvalidParameter("tau_fixed must be positive");
  }
  validate(config.spamp);
  UpdateBudgetTracker(config.update_clip.beta, config.update_clip.epsilon);
  if (!positive_finite(config.gradnorm_delta)) {
    throw InvalidParameter("gradnorm_delta must be positive");
  }
  const auto& lr = config.lr;
  if (!positive_finite(lr.initial_lr)) {
    throw InvalidParameter("initial learning rate must be positive");
  }
  if (!(lr.min_lr >= 0.0) || lr.min_lr > lr.initial_lr) {
    throw InvalidParameter("min learning rate must lie in [0, initial learning rate]");
  }
  if (lr.decay_horizon > 0 && !(lr.min_lr > 0.0)) {
    throw InvalidParameter("a cosine decay horizon needs a positive min learning rate");
  }
}

std::vector<GradientVector> noisy_gradient(const ToyProblem& problem,
                                           const Eigen::VectorXd& theta, const NoiseSpec& noise,
                                           std::uint64_t step, std::uint64_t seed) {
  Eigen::VectorXd flat = flat_gradient(problem, theta);
  Rng rng(derive_seed(seed, step));
  // The spike draw comes first so its outcome does not depend on the dimension.
  const bool spike = rng.uniform() < noise.spike_probability;
  const double std_dev = noise_std_at(noise, step);
  if (std_dev > 0.0) {
    for (auto& x : flat) x += std_dev * rng.normal();
  }
  if (spike) {
    flat *= noise.spike_scale;
  }
  return split_layers(layer_layout(problem), flat);
}

RunMetrics train(const ToyProblem& problem, const Eigen::VectorXd& theta0,
                 const PipelineConfig& pipeline, const NoiseSpec& noise, std::uint64_t steps,
                 std::uint64_t seed) {
  validate(pipeline);
  validate(noise);
  if (steps == 0) {
    throw InvalidParameter("a run needs at least one step");
  }
  const auto layout = layer_layout(problem);

  RunMetrics metrics;
  metrics.layer_count = layout.size();
  metrics.steps_requested = steps;
  metrics.records.reserve(steps * layout.size());
  metrics.learning_rates.reserve(steps);

  std::vector<LayerShaperState> spamp_states;
  std::vector<UpdateBudgetTracker> budgets;
  for (const auto& slice : layout) {
    spamp_states.push_back(make_layer_state(slice.layer_id, pipeline.spamp));
    budgets.emplace_back(pipeline.update_clip.beta, pipeline.update_clip.epsilon);
  }
  std::uint64_t warmup = 0;
  if (pipeline.mode == PipelineMode::kWarmupFixedClip) {
    warmup = pipeline.warmup_steps.value_or(
        static_cast<std::uint64_t>(std::llround(0.05 * static_cast<double>(steps))));
  }
  const ClipThreshold fixed_tau(pipeline.tau_fixed);

  Eigen::VectorXd theta = theta0;
  double current_loss = loss(problem, theta);
  if (!std::isfinite(current_loss)) {
    throw InvalidInput("initial loss is not finite");
  }
  metrics.initial_loss = current_loss;
  const double limit =
      kDivergenceFactor * std::max(std::abs(current_loss), std::numeric_limits<double>::min());

  for (std::uint64_t t = 0; t < steps; ++t) {
    const auto grads = noisy_gradient(problem, theta, noise, t, seed);
    if (std::any_of(grads.begin(), grads.end(),
                    [](const GradientVector& g) { return !g.components.allFinite(); })) {
      metrics.diverged = true;
      break;
    }
    double eta = pipeline.lr.at(t);
    if (warmup > 0) {
      eta *= std::min(1.0, static_cast<double>(t + 1) / static_cast<double>(warmup));
    }

    for (std::size_t l = 0; l < layout.size(); ++l) {
      const Eigen::VectorXd& g = grads[l].components;
      const double raw = g.norm();
      ShapedLayer out;
      switch (pipeline.mode) {
        case PipelineMode::kBaseline:
          out.shaped = g;
          break;
        case PipelineMode::kFixedClip:
        case PipelineMode::kWarmupFixedClip:
          out.shaped = hard_clip(g, fixed_tau);
          out.tau = fixed_tau.value();
          out.clipped = raw > fixed_tau.value();
          break;
        case PipelineMode::kGradNorm: {
          const double delta = pipeline.gradnorm_delta;
          out.tau = delta;
          out.clipped = eta * raw > delta;
          out.shaped = out.clipped ? Eigen::VectorXd((delta / (eta * raw)) * g) : g;
          break;
        }
        case PipelineMode::kUpdateClip: {
          const auto next = delta_update(budgets[l], eta, raw);
          budgets[l] = next.tracker;
          out.shaped = update_clip(g, eta, UpdateBound(next.delta));
          out.tau = next.delta;
          out.clipped = eta * raw > next.delta;
          break;
        }
        case PipelineMode::kSpamp: {
          auto step = spamp_layer_step(spamp_states[l], g, eta);
          spamp_states[l] = std::move(step.state);
          out.shaped = std::move(step.shaped);
          out.tau = step.diagnostics.tau_after;
          out.alpha = step.diagnostics.alpha_used;
          out.clipped = step.diagnostics.projected;
          break;
        }
      }
      const double shaped_norm = out.shaped.norm();
      theta.segment(layout[l].offset, layout[l].size) -= eta * out.shaped;
      metrics.records.push_back(StepRecord{t, layout[l].layer_id, current_loss, raw, shaped_norm,
                                           out.tau, out.alpha, eta * shaped_norm, out.clipped});
      metrics.raw_norms.push(raw);
    }
    metrics.learning_rates.push_back(eta);
    metrics.steps_completed = t + 1;

    current_loss = loss(problem, theta);
    if (!std::isfinite(current_loss) || current_loss > limit) {
      metrics.diverged = true;
      break;
    }
  }
  metrics.final_loss = current_loss;
  if (pipeline.mode == PipelineMode::kSpamp) {
    metrics.layer_states = std::move(spamp_states);
  }
  return metrics;
}

std::vector<StepInterval> default_intervals(std::uint64_t steps) {
  const std::uint64_t first = steps / 5;
  const std::uint64_t second = (3 * steps) / 5;
  return {{0, first}, {first, second}, {second, steps}};
}

std::vector<double> step_update_magnitudes(const RunMetrics& metrics) {
  std::vector<double> out(metrics.steps_completed, 0.0);
  for (const auto& r : metrics.records) {
    out[r.step] += r.update_magnitude * r.update_magnitude;
  }
  for (auto& x : out) x = std::sqrt(x);
  return out;
}

RunSummary summarize(const RunMetrics& metrics, const SummaryOptions& options) {
  if (options.checkpoint_every == 0) {
    throw InvalidParameter("checkpoint interval must be positive");
  }
  RunSummary summary;
  summary.steps_completed = metrics.steps_completed;
  summary.diverged = metrics.diverged;
  summary.initial_loss = metrics.initial_loss;
  summary.final_loss = metrics.final_loss;
  summary.loss_threshold = options.loss_threshold;

  const std::size_t layers = metrics.layer_count;
  const auto magnitudes = step_update_magnitudes(metrics);

  std::uint64_t clipped_steps = 0;
  for (std::uint64_t t = 0; t < metrics.steps_completed; ++t) {
    const auto first = metrics.records.begin() + static_cast<std::ptrdiff_t>(t * layers);
    if (std::any_of(first, first + static_cast<std::ptrdiff_t>(layers),
                    [](const StepRecord& r) { return r.clipped; })) {
      ++clipped_steps;
    }
    if (!summary.steps_to_threshold && first->loss < options.loss_threshold) {
      summary.steps_to_threshold = t;
    }
  }
  if (!summary.steps_to_threshold && metrics.final_loss < options.loss_threshold) {
    summary.steps_to_threshold = metrics.steps_completed;
  }
  if (metrics.steps_completed > 0) {
    summary.clip_frequency =
        static_cast<double>(clipped_steps) / static_cast<double>(metrics.steps_completed);
    summary.max_update_magnitude = *std::max_element(magnitudes.begin(), magnitudes.end());
  }

  for (const auto& iv : options.intervals) {
    if (iv.begin >= iv.end) {
      summary.interval_errors.push_back({iv, "empty interval"});
      continue;
    }
    if (iv.end > metrics.steps_completed) {
      summary.interval_errors.push_back({iv, "interval extends past the completed steps"});
      continue;
    }
    const std::vector<double> window(magnitudes.begin() + static_cast<std::ptrdiff_t>(iv.begin),
                                     magnitudes.begin() + static_cast<std::ptrdiff_t>(iv.end));
    const auto stats = population(window);
    summary.intervals.push_back(IntervalStats{iv, stats.mean, std::sqrt(stats.variance),
                                              stats.variance,
                                              *std::max_element(window.begin(), window.end())});
  }

  for (std::uint64_t t = options.checkpoint_every - 1; t < metrics.steps_completed;
       t += options.checkpoint_every) {
    std::vector<double> raw;
    std::vector<double> shaped;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& r = metrics.records[t * layers + l];
      raw.push_back(r.raw_norm);
      shaped.push_back(r.shaped_norm);
    }
    const auto raw_stats = population(raw);
    const auto shaped_stats = population(shaped);
    summary.checkpoints.push_back(CheckpointStats{t, raw_stats.mean, raw_stats.variance,
                                                  shaped_stats.mean, shaped_stats.variance});
  }

  if (!metrics.raw_norms.empty()) {
    const auto samples = metrics.raw_norms.samples();
    summary.norm_cdf = NormCdfReport{empirical_cdf(samples, 1.0), empirical_cdf(samples, 2.0),
                                     quantile_threshold(metrics.raw_norms, 0.5)};
  }
  return summary;
}

}  // namespace spamp
