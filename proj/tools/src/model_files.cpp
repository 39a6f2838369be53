#include "model_files.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lcroll::cli {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << text << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

json parse_model_json(const std::string& text, const std::filesystem::path& path) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": malformed model JSON: " + e.what());
    }
}

std::string tag_of(const json& j, const std::filesystem::path& path) {
    if (!j.contains("model") || !j["model"].is_string())
        throw std::runtime_error(path.string() + ": model file lacks a \"model\" tag");
    return j["model"].get<std::string>();
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::rf: return "rf";
        case ModelKind::rfb: return "rfb";
        case ModelKind::vrnn: return "vrnn";
    }
    return "?";
}

ModelKind sniff_model_kind(const std::filesystem::path& path) {
    const json j = parse_model_json(read_file(path), path);
    const std::string tag = tag_of(j, path);
    if (tag == "rf") return ModelKind::rf;
    if (tag == "rfb") return ModelKind::rfb;
    if (tag == "vrnn") return ModelKind::vrnn;
    throw std::runtime_error(path.string() + ": unknown model tag '" + tag + "'");
}

void save_rf_model(const RegressionForest& forest, int window,
                   const std::filesystem::path& path) {
    json j = json::parse(forest_to_json(forest));
    j["model"] = "rf";
    j["window"] = window;
    write_file(j.dump(), path);
}

RfModelFile load_rf_model(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const json j = parse_model_json(text, path);
    if (tag_of(j, path) != "rf")
        throw std::runtime_error(path.string() + ": not an rf model file");
    RfModelFile file;
    file.window = j.at("window").get<int>();
    if (file.window < 1)
        throw std::runtime_error(path.string() + ": rf model window must be >= 1");
    file.forest = forest_from_json(text);
    return file;
}

void save_rfb_model(const StaticForestModel& model, const std::filesystem::path& path) {
    json j = json::parse(static_to_json(model));
    j["model"] = "rfb";
    write_file(j.dump(), path);
}

StaticForestModel load_rfb_model(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const json j = parse_model_json(text, path);
    if (tag_of(j, path) != "rfb")
        throw std::runtime_error(path.string() + ": not an rfb model file");
    return static_from_json(text);
}

void save_vrnn_model(const VrnnModel& model, const std::filesystem::path& path) {
    save_vrnn(model, path);  // already tagged "model": "vrnn"
}

VrnnModel load_vrnn_model(const std::filesystem::path& path) {
    return load_vrnn(path);
}

}  // namespace lcroll::cli
