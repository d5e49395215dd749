#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spamp::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kSuccess = 0, kUserError = 1, kDiverged = 2 };

struct RunOptions {
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

/// Trains once; writes steps.csv and summary.json into the output directory.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// Runs modes x seeds on one problem; writes per-cell artifacts under
/// cells/ plus comparison.csv and comparison.json.
int cmd_compare(const RunOptions& options, const std::vector<std::string>& modes,
                const std::vector<std::uint64_t>& seeds, std::ostream& out, std::ostream& err);

struct AnalyzeOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> model;
  std::optional<double> rate;
  std::optional<double> location;
  std::optional<double> scale;
  std::optional<double> x_min;
  std::optional<double> shape;
  std::vector<double> etas;
  std::vector<double> taus;
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Monte-Carlo expected clipped descent over an (eta, tau) grid -> analysis.json.
int cmd_analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err);

struct ProbeOptions {
  std::string op;
  double tau = 1.0;
  double alpha = 0.8;
  double eta = 0.1;
  double delta = 0.1;
  std::vector<double> points;
  double step = 1e-6;
  std::string out_dir = "out";
};

/// Smoothness reports of one operator across probe points -> probe.json.
int cmd_probe(const ProbeOptions& options, std::ostream& out, std::ostream& err);

}  // namespace spamp::cli
