// Tagged model files: every model saved by the CLI is a JSON object with a
// top-level "model" key ("rf", "rfb", or "vrnn") so commands can dispatch on
// the file alone. rf files additionally carry the rollout window.
#pragma once

#include <filesystem>
#include <string>

#include "lcroll/baselines.hpp"
#include "lcroll/forest.hpp"
#include "lcroll/vrnn.hpp"

namespace lcroll::cli {

enum class ModelKind { rf, rfb, vrnn };

std::string model_kind_name(ModelKind kind);

// Reads just the "model" tag. Throws on unreadable files or unknown tags.
ModelKind sniff_model_kind(const std::filesystem::path& path);

struct RfModelFile {
    RegressionForest forest;
    int window = 0;
};

void save_rf_model(const RegressionForest& forest, int window,
                   const std::filesystem::path& path);
RfModelFile load_rf_model(const std::filesystem::path& path);

void save_rfb_model(const StaticForestModel& model, const std::filesystem::path& path);
StaticForestModel load_rfb_model(const std::filesystem::path& path);

void save_vrnn_model(const VrnnModel& model, const std::filesystem::path& path);
VrnnModel load_vrnn_model(const std::filesystem::path& path);

}  // namespace lcroll::cli
