#include <iostream>

#include "CLI11.hpp"
#include "spamp/commands.hpp"

namespace {

void add_run_options(CLI::App& cmd, spamp::cli::RunOptions& o) {
  cmd.add_option("--config", o.config_path, "JSON run configuration");
  cmd.add_option("--set", o.overrides, "override a config key (key=value), repeatable");
  cmd.add_option("--out", o.out_dir, "output directory (overrides out_dir)");
  cmd.add_option("--seed", o.seed, "noise seed (overrides seed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient shaping toolkit: training harness, descent analysis, operator probes"};
  app.require_subcommand(1);

  spamp::cli::RunOptions run_opts;
  auto* run = app.add_subcommand("run", "train once and write steps.csv + summary.json");
  add_run_options(*run, run_opts);

  spamp::cli::RunOptions compare_opts;
  std::vector<std::string> modes;
  std::vector<std::uint64_t> seeds{0};
  auto* compare = app.add_subcommand("compare", "run modes x seeds and tabulate");
  add_run_options(*compare, compare_opts);
  compare->add_option("--modes", modes, "pipeline modes to compare")->delimiter(',')->required();
  compare->add_option("--seeds", seeds, "noise seeds")->delimiter(',');

  spamp::cli::AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "Monte-Carlo expected clipped descent grid");
  analyze->add_option("--config", analyze_opts.config_path, "JSON analysis configuration");
  analyze->add_option("--model", analyze_opts.model, "exponential | lognormal | pareto");
  analyze->add_option("--rate", analyze_opts.rate, "exponential rate");
  analyze->add_option("--location", analyze_opts.location, "lognormal location");
  analyze->add_option("--scale", analyze_opts.scale, "lognormal scale");
  analyze->add_option("--x-min", analyze_opts.x_min, "pareto minimum");
  analyze->add_option("--shape", analyze_opts.shape, "pareto tail exponent");
  analyze->add_option("--eta", analyze_opts.etas, "learning-rate grid")->delimiter(',');
  analyze->add_option("--tau", analyze_opts.taus, "threshold grid")->delimiter(',');
  analyze->add_option("-n,--samples", analyze_opts.n, "Monte-Carlo sample count");
  analyze->add_option("--seed", analyze_opts.seed, "sampler seed");
  analyze->add_option("--out", analyze_opts.out_dir, "output directory");

  spamp::cli::ProbeOptions probe_opts;
  auto* probe = app.add_subcommand("probe", "finite-difference smoothness of an operator's norm map");
  probe->add_option("--operator", probe_opts.op, "hard_clip | power_shape | normalize | update_clip")
      ->required();
  probe->add_option("--tau", probe_opts.tau, "hard_clip threshold");
  probe->add_option("--alpha", probe_opts.alpha, "power_shape exponent");
  probe->add_option("--eta", probe_opts.eta, "update_clip learning rate");
  probe->add_option("--delta", probe_opts.delta, "update_clip bound");
  probe->add_option("--points", probe_opts.points, "probe norms")->delimiter(',');
  probe->add_option("--step", probe_opts.step, "difference step");
  probe->add_option("--out", probe_opts.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : spamp::cli::kUserError;
  }

  if (*run) return spamp::cli::cmd_run(run_opts, std::cout, std::cerr);
  if (*compare) return spamp::cli::cmd_compare(compare_opts, modes, seeds, std::cout, std::cerr);
  if (*analyze) return spamp::cli::cmd_analyze(analyze_opts, std::cout, std::cerr);
  return spamp::cli::cmd_probe(probe_opts, std::cout, std::cerr);
}
