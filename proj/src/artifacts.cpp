#include "spamp/artifacts.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "spamp/error.hpp"
#include "spamp/rng.hpp"

namespace spamp {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) {
    return {};
  }
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string steps_csv(const RunMetrics& metrics) {
  std::string out = kStepsCsvHeader;
  out += '\n';
  for (const auto& r : metrics.records) {
    out += std::to_string(r.step);
    out += ',';
    out += r.layer;
    for (const double v : {r.loss, r.raw_norm, r.shaped_norm, r.tau, r.alpha, r.update_magnitude}) {
      out += ',';
      out += format_number(v);
    }
    out += r.clipped ? ",1\n" : ",0\n";
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  out.flush();
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
}

std::string dump_json(const json& document) { return document.dump(2) + "\n"; }

json layer_state_json(const LayerShaperState& state) {
  return json{{"layer_id", state.layer_id},
              {"tau", state.tau.initialized() ? json(state.tau.value()) : json(nullptr)},
              {"beta", state.tau.beta()},
              {"alpha_min", state.alpha_min},
              {"alpha_max", state.alpha_max},
              {"kappa", state.kappa},
              {"step_count", state.step_count}};
}

LayerShaperState layer_state_from_json(const json& record) {
  try {
    const double beta = record.at("beta").get<double>();
    const auto& tau = record.at("tau");
    LayerShaperState state{record.at("layer_id").get<std::string>(),
                           tau.is_null() ? EmaTracker(beta)
                                         : EmaTracker::seeded(beta, tau.get<double>()),
                           record.at("alpha_min").get<double>(),
                           record.at("alpha_max").get<double>(),
                           record.at("kappa").get<double>(),
                           record.at("step_count").get<std::uint64_t>(),
                           ExponentArgument::kNormRatio};
    validate(SpampParams{beta, state.alpha_min, state.alpha_max, state.kappa,
                         ExponentArgument::kNormRatio});
    if (state.tau.initialized() && state.tau.value() < 0.0) {
      throw InvalidState("serialized threshold is negative");
    }
    return state;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed layer state record: ") + e.what());
  }
}

json summary_json(const RunSummary& summary, const RunMetrics& metrics, const RunConfig& config) {
  json intervals = json::array();
  for (const auto& iv : summary.intervals) {
    intervals.push_back({{"begin", iv.interval.begin},
                         {"end", iv.interval.end},
                         {"mean_update_magnitude", iv.mean_update_magnitude},
                         {"std_update_magnitude", iv.std_update_magnitude},
                         {"variance_update_magnitude", iv.variance_update_magnitude},
                         {"max_update_magnitude", iv.max_update_magnitude}});
  }
  json interval_errors = json::array();
  for (const auto& e : summary.interval_errors) {
    interval_errors.push_back(
        {{"begin", e.interval.begin}, {"end", e.interval.end}, {"error", e.reason}});
  }
  json checkpoints = json::array();
  for (const auto& c : summary.checkpoints) {
    checkpoints.push_back({{"step", c.step},
                           {"mean_raw_norm", c.mean_raw_norm},
                           {"variance_raw_norm", c.variance_raw_norm},
                           {"mean_shaped_norm", c.mean_shaped_norm},
                           {"variance_shaped_norm", c.variance_shaped_norm}});
  }
  json layer_states = json::array();
  for (const auto& s : metrics.layer_states) layer_states.push_back(layer_state_json(s));

  json norm_cdf = nullptr;
  if (summary.norm_cdf) {
    norm_cdf = {{"cdf_at_1", summary.norm_cdf->cdf_at_1},
                {"cdf_at_2", summary.norm_cdf->cdf_at_2},
                {"median", summary.norm_cdf->median},
                {"window", metrics.raw_norms.size()}};
  }

  return json{
      {"config", to_json(config)},
      {"generator", std::string(kGeneratorName)},
      {"variance_estimator", "population"},
      {"diverged", summary.diverged},
      {"steps_requested", metrics.steps_requested},
      {"steps_completed", summary.steps_completed},
      {"initial_loss", summary.initial_loss},
      {"final_loss", summary.final_loss},
      {"loss_threshold", summary.loss_threshold},
      {"steps_to_threshold",
       summary.steps_to_threshold ? json(*summary.steps_to_threshold) : json(nullptr)},
      {"clip_frequency", summary.clip_frequency},
      {"max_update_magnitude", summary.max_update_magnitude},
      {"intervals", intervals},
      {"interval_errors", interval_errors},
      {"checkpoints", checkpoints},
      {"norm_cdf", norm_cdf},
      {"layer_states", layer_states},
  };
}

json smoothness_json(const SmoothnessReport& report) {
  return json{{"operator", report.operator_name},
              {"probe_norm", report.probe_norm},
              {"left_slope", report.left_slope},
              {"right_slope", report.right_slope},
              {"slope_gap", report.slope_gap}};
}

json tail_params_json(const TailModel& model) {
  if (const auto* m = std::get_if<ExponentialTail>(&model)) {
    return json{{"rate", m->rate}};
  }
  if (const auto* m = std::get_if<LognormalTail>(&model)) {
    return json{{"location", m->location}, {"scale", m->scale}};
  }
  const auto& m = std::get<ParetoTail>(model);
  return json{{"x_min", m.x_min}, {"shape", m.shape}};
}

}  // namespace spamp
