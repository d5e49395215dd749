#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "spamp/adaptive.hpp"
#include "spamp/config.hpp"
#include "spamp/descent.hpp"
#include "spamp/trainer.hpp"

namespace spamp {

inline constexpr const char* kStepsCsvHeader =
    "step,layer,loss,raw_norm,shaped_norm,tau,alpha,update_magnitude,clipped";

/// Shortest decimal that reads back to the same double; empty for NaN.
std::string format_number(double value);

std::string steps_csv(const RunMetrics& metrics);

/// Writes text, creating parent directories. Throws IoError naming the path.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Pretty-printed, newline-terminated.
std::string dump_json(const nlohmann::json& document);

nlohmann::json layer_state_json(const LayerShaperState& state);
LayerShaperState layer_state_from_json(const nlohmann::json& record);

nlohmann::json summary_json(const RunSummary& summary, const RunMetrics& metrics,
                            const RunConfig& config);

nlohmann::json smoothness_json(const SmoothnessReport& report);

nlohmann::json tail_params_json(const TailModel& model);

}  // namespace spamp
