#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "spamp/error.hpp"
#include "spamp/problems.hpp"
#include "spamp/trainer.hpp"

namespace spamp {

/// Configuration problem tied to one key (empty when not key-specific).
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error(key.empty() ? message : "config key '" + key + "': " + message),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat run configuration. Every key is optional in the document; unknown
/// keys are rejected. Unset optionals echo as null.
struct RunConfig {
  // problem
  std::string problem = "quadratic";
  std::vector<double> quadratic_diag{1.0, 10.0};
  std::vector<std::vector<double>> quadratic_matrix;  // overrides quadratic_diag when set
  std::vector<double> quadratic_b;                    // zeros when empty
  std::vector<double> theta0;  // quadratic: ones, logistic: zeros, mlp: random init
  std::uint64_t logistic_samples = 200;
  std::uint64_t logistic_features = 10;
  double logistic_penalty = 1e-3;
  std::vector<int> mlp_sizes{4, 16, 16, 2};
  std::uint64_t mlp_samples = 64;
  std::vector<double> mlp_layer_scales;  // all ones when empty
  std::uint64_t problem_seed = 1;

  // pipeline
  std::string mode = "spamp";
  double lr = 0.1;
  std::uint64_t lr_decay_horizon = 0;
  double lr_min = 0.0;
  double tau_fixed = 1.0;
  std::optional<std::uint64_t> warmup_steps;
  double beta = 0.99;
  double alpha_min = 0.7;
  double alpha_max = 1.0;
  double kappa = 0.3;
  std::string exponent_argument = "ratio";  // or "raw_norm"
  double update_beta = 0.99;
  double update_epsilon = 1e-3;
  double gradnorm_delta = 0.1;

  // noise
  double noise_std = 0.0;
  double spike_probability = 0.02;
  double spike_scale = 5.0;
  std::optional<std::uint64_t> batch_period;
  double batch_low_std = 0.0;
  double batch_high_std = 0.0;

  // run
  std::uint64_t steps = 1000;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::optional<double> loss_threshold;  // 1% of the initial loss when unset
  std::vector<StepInterval> intervals;   // default_intervals(steps) when empty
  std::optional<std::uint64_t> checkpoint_every;  // steps / 10 when unset
};

RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

/// Applies "key=value"; value is read as JSON, falling back to a bare string.
void apply_override(RunConfig& config, const std::string& assignment);

/// Every object the trainer needs, built and validated from a RunConfig.
struct ResolvedRun {
  ToyProblem problem;
  Eigen::VectorXd theta0;
  PipelineConfig pipeline;
  NoiseSpec noise;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  std::vector<StepInterval> intervals;
  std::uint64_t checkpoint_every = 1;
  std::optional<double> loss_threshold;
};

ResolvedRun resolve(const RunConfig& config);

/// The threshold in effect: configured value, or 1% of the initial loss.
double effective_loss_threshold(const ResolvedRun& run, double initial_loss);

}  // namespace spamp
