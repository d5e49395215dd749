#include "spamp/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>

#include <nlohmann/json.hpp>

#include "spamp/artifacts.hpp"
#include "spamp/config.hpp"
#include "spamp/descent.hpp"
#include "spamp/error.hpp"
#include "spamp/rng.hpp"
#include "spamp/trainer.hpp"

namespace spamp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOutcome {
  RunMetrics metrics;
  RunSummary summary;
};

RunConfig build_config(const RunOptions& options) {
  RunConfig config = options.config_path ? load_config(*options.config_path) : RunConfig{};
  for (const auto& assignment : options.overrides) apply_override(config, assignment);
  if (options.seed) config.seed = *options.seed;
  if (options.out_dir) config.out_dir = *options.out_dir;
  return config;
}

RunOutcome execute(const RunConfig& config) {
  const ResolvedRun run = resolve(config);
  RunOutcome outcome;
  outcome.metrics = train(run.problem, run.theta0, run.pipeline, run.noise, run.steps, run.seed);
  const SummaryOptions options{run.intervals, run.checkpoint_every,
                               effective_loss_threshold(run, outcome.metrics.initial_loss)};
  outcome.summary = summarize(outcome.metrics, options);
  return outcome;
}

void write_run(const fs::path& dir, const RunOutcome& outcome, const RunConfig& config) {
  write_text_file(dir / "steps.csv", steps_csv(outcome.metrics));
  write_text_file(dir / "summary.json",
                  dump_json(summary_json(outcome.summary, outcome.metrics, config)));
}

struct Moments {
  std::size_t count = 0;
  double mean = std::nan("");
  double std_dev = std::nan("");
};

Moments moments(const std::vector<double>& values) {
  Moments m;
  m.count = values.size();
  if (values.empty()) return m;
  double sum = 0.0;
  for (const double v : values) sum += v;
  m.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (const double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std_dev = std::sqrt(ss / static_cast<double>(values.size()));
  return m;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct CellResult {
  std::string mode;
  std::uint64_t seed = 0;
  std::string dir;
  std::optional<RunSummary> summary;
  std::string error;
};

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig config;
  RunOutcome outcome;
  try {
    config = build_config(options);
    outcome = execute(config);
    write_run(config.out_dir, outcome, config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }
  const auto& s = outcome.summary;
  out << "final_loss=" << format_number(s.final_loss)
      << " clip_frequency=" << format_number(s.clip_frequency)
      << " max_update_magnitude=" << format_number(s.max_update_magnitude)
      << " diverged=" << (s.diverged ? "true" : "false") << '\n';
  return s.diverged ? kDiverged : kSuccess;
}

int cmd_compare(const RunOptions& options, const std::vector<std::string>& modes,
                const std::vector<std::uint64_t>& seeds, std::ostream& out, std::ostream& err) {
  if (modes.size() < 2) {
    err << "error: compare needs at least two modes\n";
    return kUserError;
  }
  if (seeds.empty()) {
    err << "error: compare needs at least one seed\n";
    return kUserError;
  }
  RunConfig base;
  try {
    base = build_config(options);
    (void)resolve(base);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }
  const fs::path root = base.out_dir;

  std::vector<std::future<CellResult>> pending;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    for (const auto seed : seeds) {
      const std::size_t index = pending.size();
      pending.push_back(std::async(std::launch::async, [&, m, seed, index] {
        CellResult cell{modes[m], seed, {}, std::nullopt, {}};
        RunConfig config = base;
        config.mode = modes[m];
        config.seed = seed;
        config.out_dir = (root / "cells" /
                          (std::to_string(index) + "_" + modes[m] + "_seed" + std::to_string(seed)))
                             .string();
        cell.dir = config.out_dir;
        try {
          const auto outcome = execute(config);
          write_run(config.out_dir, outcome, config);
          cell.summary = outcome.summary;
        } catch (const Error& e) {
          cell.error = e.what();
        }
        return cell;
      }));
    }
  }
  std::vector<CellResult> cells;
  for (auto& f : pending) cells.push_back(f.get());

  std::string csv =
      "mode,runs,failed,diverged,final_loss_mean,final_loss_std,steps_to_threshold_mean,"
      "steps_to_threshold_std,threshold_reached,max_update_mean,max_update_std,"
      "clip_frequency_mean,clip_frequency_std\n";
  json rows = json::array();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<double> final_loss, steps_to, max_update, clip_freq;
    std::size_t failed = 0;
    std::size_t diverged = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& cell = cells[m * seeds.size() + s];
      if (!cell.summary) {
        ++failed;
        continue;
      }
      diverged += cell.summary->diverged ? 1 : 0;
      final_loss.push_back(cell.summary->final_loss);
      max_update.push_back(cell.summary->max_update_magnitude);
      clip_freq.push_back(cell.summary->clip_frequency);
      if (cell.summary->steps_to_threshold) {
        steps_to.push_back(static_cast<double>(*cell.summary->steps_to_threshold));
      }
    }
    const auto fl = moments(final_loss);
    const auto st = moments(steps_to);
    const auto mu = moments(max_update);
    const auto cf = moments(clip_freq);
    csv += modes[m] + ',' + std::to_string(seeds.size()) + ',' + std::to_string(failed) + ',' +
           std::to_string(diverged);
    for (const double v : {fl.mean, fl.std_dev, st.mean, st.std_dev}) csv += ',' + format_number(v);
    csv += ',' + std::to_string(st.count);
    for (const double v : {mu.mean, mu.std_dev, cf.mean, cf.std_dev}) csv += ',' + format_number(v);
    csv += '\n';
    rows.push_back({{"mode", modes[m]},
                    {"runs", seeds.size()},
                    {"failed", failed},
                    {"diverged", diverged},
                    {"final_loss_mean", nullable(fl.mean)},
                    {"final_loss_std", nullable(fl.std_dev)},
                    {"steps_to_threshold_mean", nullable(st.mean)},
                    {"steps_to_threshold_std", nullable(st.std_dev)},
                    {"threshold_reached", st.count},
                    {"max_update_mean", nullable(mu.mean)},
                    {"max_update_std", nullable(mu.std_dev)},
                    {"clip_frequency_mean", nullable(cf.mean)},
                    {"clip_frequency_std", nullable(cf.std_dev)}});
  }
  json cell_records = json::array();
  for (const auto& cell : cells) {
    json record{{"mode", cell.mode}, {"seed", cell.seed}, {"dir", cell.dir}};
    if (cell.summary) {
      record["diverged"] = cell.summary->diverged;
      record["final_loss"] = nullable(cell.summary->final_loss);
      record["max_update_magnitude"] = cell.summary->max_update_magnitude;
      record["clip_frequency"] = cell.summary->clip_frequency;
    } else {
      record["error"] = cell.error;
    }
    cell_records.push_back(std::move(record));
  }
  const json table{{"config", to_json(base)},
                   {"generator", std::string(kGeneratorName)},
                   {"std_estimator", "population"},
                   {"modes", modes},
                   {"seeds", seeds},
                   {"rows", rows},
                   {"cells", cell_records}};
  try {
    write_text_file(root / "comparison.csv", csv);
    write_text_file(root / "comparison.json", dump_json(table));
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }
  out << "compared " << modes.size() << " modes x " << seeds.size() << " seeds -> "
      << (root / "comparison.csv").string() << '\n';
  for (const auto& cell : cells) {
    if (!cell.summary) err << "cell " << cell.dir << " failed: " << cell.error << '\n';
  }
  return kSuccess;
}

namespace {

void apply_analyze_config(AnalyzeOptions& opts, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "configuration must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    try {
      // Command-line flags take precedence over file values.
      if (key == "model") {
        if (!opts.model) opts.model = v.get<std::string>();
      } else if (key == "rate") {
        if (!opts.rate) opts.rate = v.get<double>();
      } else if (key == "location") {
        if (!opts.location) opts.location = v.get<double>();
      } else if (key == "scale") {
        if (!opts.scale) opts.scale = v.get<double>();
      } else if (key == "x_min") {
        if (!opts.x_min) opts.x_min = v.get<double>();
      } else if (key == "shape") {
        if (!opts.shape) opts.shape = v.get<double>();
      } else if (key == "etas") {
        if (opts.etas.empty()) opts.etas = v.get<std::vector<double>>();
      } else if (key == "taus") {
        if (opts.taus.empty()) opts.taus = v.get<std::vector<double>>();
      } else if (key == "n") {
        if (!opts.n) opts.n = v.get<std::uint64_t>();
      } else if (key == "seed") {
        if (!opts.seed) opts.seed = v.get<std::uint64_t>();
      } else if (key == "out_dir") {
        if (!opts.out_dir) opts.out_dir = v.get<std::string>();
      } else {
        throw ConfigError(key, "unknown key");
      }
    } catch (const json::exception& e) {
      throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
  }
}

TailModel build_model(const AnalyzeOptions& o) {
  const std::string name = o.model.value_or("exponential");
  if (name == "exponential") return ExponentialTail{o.rate.value_or(1.0)};
  if (name == "lognormal") return LognormalTail{o.location.value_or(0.0), o.scale.value_or(1.0)};
  if (name == "pareto") return ParetoTail{o.x_min.value_or(1.0), o.shape.value_or(2.0)};
  throw ConfigError("model", "unknown model '" + name + "' (valid: exponential, lognormal, pareto)");
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err) {
  try {
    AnalyzeOptions opts = options;
    if (opts.config_path) apply_analyze_config(opts, *opts.config_path);
    if (opts.etas.empty()) opts.etas = {1.0};
    if (opts.taus.empty()) opts.taus = {1.0};
    const std::uint64_t n = opts.n.value_or(100000);
    const std::uint64_t seed = opts.seed.value_or(0);
    if (n == 0) throw ConfigError("n", "sample count must be at least 1");
    const TailModel model = build_model(opts);
    validate(model);

    const auto samples = sample_norms(model, n, seed);
    json records = json::array();
    for (const double eta : opts.etas) {
      for (const double tau : opts.taus) {
        const auto est = expected_clipped_descent_mc(samples, eta, ClipThreshold(tau));
        records.push_back({{"model", model_name(model)},
                           {"params", tail_params_json(model)},
                           {"eta", eta},
                           {"tau", tau},
                           {"n", n},
                           {"seed", seed},
                           {"expected_descent", est.expected_descent},
                           {"standard_error", est.standard_error}});
      }
    }
    const fs::path dir = opts.out_dir.value_or("out");
    write_text_file(dir / "analysis.json",
                    dump_json({{"generator", std::string(kGeneratorName)}, {"records", records}}));
    out << "analyzed " << records.size() << " cells -> " << (dir / "analysis.json").string()
        << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }
  return kSuccess;
}

int cmd_probe(const ProbeOptions& options, std::ostream& out, std::ostream& err) {
  try {
    ProbeOperator op;
    json params;
    if (options.op == "hard_clip") {
      op = probe_hard_clip(options.tau);
      params = {{"tau", options.tau}};
    } else if (options.op == "power_shape") {
      op = probe_power_shape(options.alpha);
      params = {{"alpha", options.alpha}};
    } else if (options.op == "normalize") {
      op = probe_normalize();
      params = json::object();
    } else if (options.op == "update_clip") {
      op = probe_update_clip(options.eta, options.delta);
      params = {{"eta", options.eta}, {"delta", options.delta}};
    } else {
      throw ConfigError("operator", "unknown operator '" + options.op +
                                        "' (valid: hard_clip, power_shape, normalize, update_clip)");
    }
    if (options.points.empty()) {
      throw ConfigError("points", "probe grid is empty");
    }
    json reports = json::array();
    for (const double r : options.points) {
      reports.push_back(smoothness_json(smoothness_probe(op, r, options.step)));
    }
    const fs::path dir = options.out_dir;
    write_text_file(dir / "probe.json", dump_json({{"operator", op.name},
                                                   {"parameters", params},
                                                   {"step", options.step},
                                                   {"direction", {0.6, 0.8}},
                                                   {"reports", reports}}));
    out << "probed " << op.name << " at " << options.points.size() << " points -> "
        << (dir / "probe.json").string() << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }
  return kSuccess;
}

}  // namespace spamp::cli
