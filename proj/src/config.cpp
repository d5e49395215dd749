#include "spamp/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>

namespace spamp {

namespace {

using nlohmann::json;

// Readers throw ConfigError naming the key on any type mismatch.
double read_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(key, "expected a finite number");
  return x;
}

std::uint64_t read_uint(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw ConfigError(key, "expected a non-negative integer");
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> read_doubles(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(read_double(e, key));
  return out;
}

struct Binding {
  std::function<void(RunConfig&, const json&)> read;
  std::function<json(const RunConfig&)> write;
};

using FieldTable = std::map<std::string, Binding>;

const FieldTable& fields() {
  static const FieldTable table = [] {
    FieldTable t;
    auto num = [&](const char* key, double RunConfig::*m) {
      t[key] = {[m, key](RunConfig& c, const json& v) { c.*m = read_double(v, key); },
                [m](const RunConfig& c) { return json(c.*m); }};
    };
    auto uint = [&](const char* key, std::uint64_t RunConfig::*m) {
      t[key] = {[m, key](RunConfig& c, const json& v) { c.*m = read_uint(v, key); },
                [m](const RunConfig& c) { return json(c.*m); }};
    };
    auto opt_uint = [&](const char* key, std::optional<std::uint64_t> RunConfig::*m) {
      t[key] = {[m, key](RunConfig& c, const json& v) {
                  c.*m = v.is_null() ? std::nullopt : std::optional(read_uint(v, key));
                },
                [m](const RunConfig& c) { return (c.*m) ? json(*(c.*m)) : json(nullptr); }};
    };
    auto str = [&](const char* key, std::string RunConfig::*m) {
      t[key] = {[m, key](RunConfig& c, const json& v) { c.*m = read_string(v, key); },
                [m](const RunConfig& c) { return json(c.*m); }};
    };
    auto nums = [&](const char* key, std::vector<double> RunConfig::*m) {
      t[key] = {[m, key](RunConfig& c, const json& v) { c.*m = read_doubles(v, key); },
                [m](const RunConfig& c) { return json(c.*m); }};
    };

    str("problem", &RunConfig::problem);
    nums("quadratic_diag", &RunConfig::quadratic_diag);
    t["quadratic_matrix"] = {
        [](RunConfig& c, const json& v) {
          if (!v.is_array()) throw ConfigError("quadratic_matrix", "expected an array of rows");
          c.quadratic_matrix.clear();
          for (const auto& row : v) c.quadratic_matrix.push_back(read_doubles(row, "quadratic_matrix"));
        },
        [](const RunConfig& c) { return json(c.quadratic_matrix); }};
    nums("quadratic_b", &RunConfig::quadratic_b);
    nums("theta0", &RunConfig::theta0);
    uint("logistic_samples", &RunConfig::logistic_samples);
    uint("logistic_features", &RunConfig::logistic_features);
    num("logistic_penalty", &RunConfig::logistic_penalty);
    t["mlp_sizes"] = {
        [](RunConfig& c, const json& v) {
          if (!v.is_array()) throw ConfigError("mlp_sizes", "expected an array of integers");
          c.mlp_sizes.clear();
          for (const auto& e : v) {
            const auto s = read_uint(e, "mlp_sizes");
            if (s == 0 || s > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
              throw ConfigError("mlp_sizes", "layer sizes must be positive");
            }
            c.mlp_sizes.push_back(static_cast<int>(s));
          }
        },
        [](const RunConfig& c) { return json(c.mlp_sizes); }};
    uint("mlp_samples", &RunConfig::mlp_samples);
    nums("mlp_layer_scales", &RunConfig::mlp_layer_scales);
    uint("problem_seed", &RunConfig::problem_seed);

    str("mode", &RunConfig::mode);
    num("lr", &RunConfig::lr);
    uint("lr_decay_horizon", &RunConfig::lr_decay_horizon);
    num("lr_min", &RunConfig::lr_min);
    num("tau_fixed", &RunConfig::tau_fixed);
    opt_uint("warmup_steps", &RunConfig::warmup_steps);
    num("beta", &RunConfig::beta);
    num("alpha_min", &RunConfig::alpha_min);
    num("alpha_max", &RunConfig::alpha_max);
    num("kappa", &RunConfig::kappa);
    str("exponent_argument", &RunConfig::exponent_argument);
    num("update_beta", &RunConfig::update_beta);
    num("update_epsilon", &RunConfig::update_epsilon);
    num("gradnorm_delta", &RunConfig::gradnorm_delta);

    num("noise_std", &RunConfig::noise_std);
    num("spike_probability", &RunConfig::spike_probability);
    num("spike_scale", &RunConfig::spike_scale);
    opt_uint("batch_period", &RunConfig::batch_period);
    num("batch_low_std", &RunConfig::batch_low_std);
    num("batch_high_std", &RunConfig::batch_high_std);

    uint("steps", &RunConfig::steps);
    uint("seed", &RunConfig::seed);
    str("out_dir", &RunConfig::out_dir);
    t["loss_threshold"] = {
        [](RunConfig& c, const json& v) {
          c.loss_threshold =
              v.is_null() ? std::nullopt : std::optional(read_double(v, "loss_threshold"));
        },
        [](const RunConfig& c) { return c.loss_threshold ? json(*c.loss_threshold) : json(nullptr); }};
    t["intervals"] = {
        [](RunConfig& c, const json& v) {
          if (!v.is_array()) throw ConfigError("intervals", "expected an array of [begin, end] pairs");
          c.intervals.clear();
          for (const auto& pair : v) {
            if (!pair.is_array() || pair.size() != 2) {
              throw ConfigError("intervals", "each interval is a [begin, end] pair");
            }
            c.intervals.push_back({read_uint(pair[0], "intervals"), read_uint(pair[1], "intervals")});
          }
        },
        [](const RunConfig& c) {
          json out = json::array();
          for (const auto& iv : c.intervals) out.push_back({iv.begin, iv.end});
          return out;
        }};
    opt_uint("checkpoint_every", &RunConfig::checkpoint_every);
    return t;
  }();
  return table;
}

void set_field(RunConfig& config, const std::string& key, const json& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) {
    throw ConfigError(key, "unknown key");
  }
  it->second.read(config, value);
}

}  // namespace

RunConfig parse_config(const json& document) {
  if (!document.is_object()) {
    throw ConfigError("", "configuration must be a JSON object");
  }
  RunConfig config;
  for (const auto& [key, value] : document.items()) {
    set_field(config, key, value);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("", "cannot open config file '" + path + "'");
  }
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(document);
}

json to_json(const RunConfig& config) {
  json out = json::object();
  for (const auto& [key, binding] : fields()) {
    out[key] = binding.write(config);
  }
  return out;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("", "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) {
    value = text;
  }
  set_field(config, key, value);
}

ResolvedRun resolve(const RunConfig& c) {
  ResolvedRun run;
  // Wraps library validation so the failing key is named.
  const auto guard = [](const std::string& key, const auto& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key, e.what());
    }
  };

  if (c.problem == "quadratic") {
    guard(c.quadratic_matrix.empty() ? "quadratic_diag" : "quadratic_matrix", [&] {
      Eigen::MatrixXd A;
      if (!c.quadratic_matrix.empty()) {
        const auto n = static_cast<Eigen::Index>(c.quadratic_matrix.size());
        A.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& row = c.quadratic_matrix[static_cast<std::size_t>(i)];
          if (static_cast<Eigen::Index>(row.size()) != n) {
            throw ConfigError("quadratic_matrix", "matrix must be square");
          }
          for (Eigen::Index j = 0; j < n; ++j) A(i, j) = row[static_cast<std::size_t>(j)];
        }
      } else {
        if (c.quadratic_diag.empty()) throw ConfigError("quadratic_diag", "must not be empty");
        A = Eigen::Map<const Eigen::VectorXd>(c.quadratic_diag.data(),
                                              static_cast<Eigen::Index>(c.quadratic_diag.size()))
                .asDiagonal();
      }
      Eigen::VectorXd b = Eigen::VectorXd::Zero(A.rows());
      if (!c.quadratic_b.empty()) {
        if (static_cast<Eigen::Index>(c.quadratic_b.size()) != A.rows()) {
          throw ConfigError("quadratic_b", "length does not match the matrix");
        }
        b = Eigen::Map<const Eigen::VectorXd>(c.quadratic_b.data(), A.rows());
      }
      run.problem = make_quadratic(std::move(A), std::move(b));
    });
  } else if (c.problem == "logistic") {
    guard("logistic_samples", [&] {
      run.problem = make_logistic(c.logistic_samples, c.logistic_features, c.logistic_penalty,
                                  c.problem_seed);
    });
  } else if (c.problem == "mlp") {
    guard("mlp_sizes", [&] { run.problem = make_mlp(c.mlp_sizes, c.mlp_samples, c.problem_seed); });
  } else {
    throw ConfigError("problem", "unknown problem '" + c.problem +
                                     "' (valid: quadratic, logistic, mlp)");
  }

  const Eigen::Index dim = parameter_count(run.problem);
  if (!c.theta0.empty()) {
    if (static_cast<Eigen::Index>(c.theta0.size()) != dim) {
      throw ConfigError("theta0", "expected " + std::to_string(dim) + " entries, got " +
                                      std::to_string(c.theta0.size()));
    }
    run.theta0 = Eigen::Map<const Eigen::VectorXd>(c.theta0.data(), dim);
  } else if (std::holds_alternative<QuadraticProblem>(run.problem)) {
    run.theta0 = Eigen::VectorXd::Ones(dim);
  } else if (std::holds_alternative<LogisticProblem>(run.problem)) {
    run.theta0 = Eigen::VectorXd::Zero(dim);
  } else {
    guard("mlp_layer_scales", [&] {
      run.theta0 = init_mlp_parameters(std::get<MlpProblem>(run.problem), c.mlp_layer_scales,
                                       c.problem_seed);
    });
  }

  guard("mode", [&] { run.pipeline.mode = parse_mode(c.mode); });
  run.pipeline.tau_fixed = c.tau_fixed;
  run.pipeline.warmup_steps = c.warmup_steps;
  run.pipeline.spamp = SpampParams{c.beta, c.alpha_min, c.alpha_max, c.kappa,
                                   ExponentArgument::kNormRatio};
  if (c.exponent_argument == "raw_norm") {
    run.pipeline.spamp.argument = ExponentArgument::kRawNorm;
  } else if (c.exponent_argument != "ratio") {
    throw ConfigError("exponent_argument", "expected 'ratio' or 'raw_norm'");
  }
  run.pipeline.update_clip = UpdateClipParams{c.update_beta, c.update_epsilon};
  run.pipeline.gradnorm_delta = c.gradnorm_delta;
  run.pipeline.lr = LrSchedule{c.lr, c.lr_decay_horizon, c.lr_min};

  // Validate piecewise so the message names the right key.
  guard("tau_fixed", [&] { (void)ClipThreshold{c.tau_fixed}; });
  guard("beta", [&] { (void)EmaTracker{c.beta}; });
  guard("alpha_min", [&] {
    SpampParams p = run.pipeline.spamp;
    p.beta = 0.0;
    validate(p);
  });
  guard("update_beta", [&] { (void)EmaTracker{c.update_beta}; });
  guard("update_epsilon", [&] { (void)UpdateBudgetTracker(0.0, c.update_epsilon); });
  guard("lr", [&] { validate(run.pipeline); });

  run.noise.gradient_noise_std = c.noise_std;
  run.noise.spike_probability = c.spike_probability;
  run.noise.spike_scale = c.spike_scale;
  if (c.batch_period) {
    run.noise.batch_alternation = BatchAlternation{*c.batch_period, c.batch_low_std, c.batch_high_std};
  }
  guard("noise_std", [&] {
    NoiseSpec n;
    n.gradient_noise_std = c.noise_std;
    validate(n);
  });
  guard("spike_probability", [&] {
    NoiseSpec n;
    n.spike_probability = c.spike_probability;
    validate(n);
  });
  guard("spike_scale", [&] {
    NoiseSpec n;
    n.spike_scale = c.spike_scale;
    validate(n);
  });
  guard("batch_period", [&] { validate(run.noise); });

  if (c.steps == 0) throw ConfigError("steps", "must be at least 1");
  run.steps = c.steps;
  run.seed = c.seed;
  run.intervals = c.intervals.empty() ? default_intervals(c.steps) : c.intervals;
  run.checkpoint_every = c.checkpoint_every.value_or(std::max<std::uint64_t>(1, c.steps / 10));
  if (run.checkpoint_every == 0) throw ConfigError("checkpoint_every", "must be positive");
  run.loss_threshold = c.loss_threshold;
  if (c.out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
  return run;
}

double effective_loss_threshold(const ResolvedRun& run, double initial_loss) {
  return run.loss_threshold.value_or(0.01 * initial_loss);
}

}  // namespace spamp
