// Non-rollout comparison methods: the last-seen-value heuristic and a static
// forest regressor mapping (config, epoch) straight to a value. The static
// model never sees an observed prefix, so its predictions cannot adapt online.
#pragma once

#include <filesystem>

#include "lcroll/curve_data.hpp"
#include "lcroll/forest.hpp"

namespace lcroll {

// Returns the last observed value regardless of the target epoch. Carries no
// variance. Throws on an empty observation.
double lsv_predict(const std::vector<double>& observed, int target_epoch);

struct StaticForestModel {
    RegressionForest forest;  // features [config, epoch]
    int max_epoch = 0;        // longest curve seen at fit time
    int config_dim = 0;
};

// Fits on one row per (curve, epoch): features = config ++ [t], target = y_t.
// The epoch enters as a raw real feature.
StaticForestModel fit_static(const CurveDataset& dataset, const ForestTrainConfig& cfg);

PredictiveGaussian static_predict(const StaticForestModel& model,
                                  const HyperparameterConfig& config, int target_epoch);

// Forest file format with a "static" type tag and the extra fields above.
std::string static_to_json(const StaticForestModel& model);
StaticForestModel static_from_json(const std::string& text);
void save_static(const StaticForestModel& model, const std::filesystem::path& path);
StaticForestModel load_static(const std::filesystem::path& path);

}  // namespace lcroll
