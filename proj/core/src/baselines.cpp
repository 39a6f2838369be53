#include "lcroll/baselines.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lcroll {

using nlohmann::json;

double lsv_predict(const std::vector<double>& observed, int target_epoch) {
    (void)target_epoch;  // the heuristic ignores how far ahead it is asked
    if (observed.empty()) throw std::invalid_argument("lsv: empty observation");
    return observed.back();
}

StaticForestModel fit_static(const CurveDataset& dataset, const ForestTrainConfig& cfg) {
    dataset.validate();
    if (dataset.curves.empty()) throw std::invalid_argument("static: empty dataset");

    std::size_t rows = 0;
    int max_epoch = 0;
    for (const auto& curve : dataset.curves) {
        rows += curve.values.size();
        max_epoch = std::max(max_epoch, static_cast<int>(curve.values.size()));
    }

    const auto cols = static_cast<Eigen::Index>(dataset.config_dim + 1);
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), cols);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    for (const auto& curve : dataset.curves) {
        for (std::size_t t = 0; t < curve.values.size(); ++t) {
            Eigen::Index col = 0;
            for (double v : curve.config.values) features(row, col++) = v;
            features(row, col) = static_cast<double>(t + 1);  // raw epoch feature
            targets(row) = curve.values[t];
            ++row;
        }
    }

    StaticForestModel model;
    model.forest = fit_forest(features, targets, cfg);
    model.max_epoch = max_epoch;
    model.config_dim = dataset.config_dim;
    return model;
}

PredictiveGaussian static_predict(const StaticForestModel& model,
                                  const HyperparameterConfig& config, int target_epoch) {
    if (static_cast<int>(config.values.size()) != model.config_dim)
        throw std::invalid_argument("static: config dimension mismatch");
    if (target_epoch < 1) throw std::invalid_argument("static: target epoch must be >= 1");
    std::vector<double> x(config.values);
    x.push_back(static_cast<double>(target_epoch));
    return forest_predict(model.forest, x);
}

std::string static_to_json(const StaticForestModel& model) {
    json j = json::parse(forest_to_json(model.forest));
    j["type"] = "static";
    j["max_epoch"] = model.max_epoch;
    j["config_dim"] = model.config_dim;
    return j.dump();
}

StaticForestModel static_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("static model: malformed JSON: ") + e.what());
    }
    StaticForestModel model;
    try {
        if (j.at("type").get<std::string>() != "static")
            throw std::runtime_error("static model: missing 'static' type tag");
        model.max_epoch = j.at("max_epoch").get<int>();
        model.config_dim = j.at("config_dim").get<int>();
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("static model: ") + e.what());
    }
    model.forest = forest_from_json(text);
    if (model.max_epoch < 1 || model.config_dim < 1 ||
        model.forest.feature_dim != model.config_dim + 1)
        throw std::runtime_error("static model: inconsistent dimensions");
    return model;
}

void save_static(const StaticForestModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << static_to_json(model) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

StaticForestModel load_static(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return static_from_json(text);
}

}  // namespace lcroll
