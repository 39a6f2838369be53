#include "lcroll/curve_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lcroll/rng.hpp"
#include "lcroll/text_format.hpp"

namespace lcroll {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& msg,
                       long line = -1) {
    std::string where = path.string();
    if (line >= 0) where += ":" + std::to_string(line);
    throw std::runtime_error(where + ": " + msg);
}

void check_finite(const std::filesystem::path& path, double v, long line = -1) {
    if (!std::isfinite(v)) fail(path, "non-finite value", line);
}

CurveDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(path, "missing file");

    std::string line;
    if (!std::getline(in, line)) fail(path, "malformed row: empty file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "epoch" ||
        header[2] != "value")
        fail(path, "malformed row: header must start with id,epoch,value", 1);

    CurveDataset ds;
    ds.name = path.stem().string();
    ds.config_dim = static_cast<int>(header.size() - 3);
    for (std::size_t i = 3; i < header.size(); ++i)
        ds.config_names.emplace_back(header[i]);

    struct PendingCurve {
        std::vector<std::pair<long long, double>> points;  // (epoch, value)
        std::vector<double> config;
        long first_line = 0;
    };
    std::vector<std::string> id_order;
    std::map<std::string, PendingCurve> pending;

    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            fail(path, "malformed row: expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                 line_no);

        const std::string id(fields[0]);
        long long epoch = 0;
        double value = 0.0;
        std::vector<double> config(static_cast<std::size_t>(ds.config_dim));
        try {
            epoch = parse_int(fields[1]);
            value = parse_double(fields[2]);
            for (int d = 0; d < ds.config_dim; ++d)
                config[static_cast<std::size_t>(d)] = parse_double(fields[3 + static_cast<std::size_t>(d)]);
        } catch (const std::invalid_argument& e) {
            fail(path, std::string("malformed row: ") + e.what(), line_no);
        }
        check_finite(path, value, line_no);
        for (double c : config) check_finite(path, c, line_no);

        auto [it, inserted] = pending.try_emplace(id);
        if (inserted) {
            id_order.push_back(id);
            it->second.config = config;
            it->second.first_line = line_no;
        } else if (it->second.config != config) {
            fail(path, "inconsistent config dimension or values for id '" + id + "'",
                 line_no);
        }
        it->second.points.emplace_back(epoch, value);
    }

    for (const auto& id : id_order) {
        auto& pc = pending[id];
        std::sort(pc.points.begin(), pc.points.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        LearningCurve curve;
        curve.id = id;
        curve.config.values = pc.config;
        curve.config.names = ds.config_names;
        curve.values.reserve(pc.points.size());
        for (std::size_t t = 0; t < pc.points.size(); ++t) {
            if (pc.points[t].first != static_cast<long long>(t) + 1)
                fail(path, "non-contiguous epochs for id '" + id + "'", pc.first_line);
            curve.values.push_back(pc.points[t].second);
        }
        ds.curves.push_back(std::move(curve));
    }

    ds.validate();
    return ds;
}

CurveDataset load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(path, "missing file");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(path, std::string("malformed row: ") + e.what());
    }

    CurveDataset ds;
    try {
        ds.name = j.at("name").get<std::string>();
        ds.config_names = j.at("config_names").get<std::vector<std::string>>();
        ds.config_dim = static_cast<int>(ds.config_names.size());
        for (const auto& jc : j.at("curves")) {
            LearningCurve curve;
            curve.id = jc.at("id").get<std::string>();
            curve.config.values = jc.at("config").get<std::vector<double>>();
            curve.config.names = ds.config_names;
            curve.values = jc.at("values").get<std::vector<double>>();
            ds.curves.push_back(std::move(curve));
        }
    } catch (const json::exception& e) {
        fail(path, std::string("malformed row: ") + e.what());
    }

    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    return ds;
}

void save_csv(const CurveDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(path, "unwritable path");
    out << "id,epoch,value";
    for (const auto& n : ds.config_names) out << ',' << n;
    out << '\n';
    for (const auto& curve : ds.curves) {
        std::string config_suffix;
        for (double c : curve.config.values) config_suffix += "," + format_double(c);
        for (std::size_t t = 0; t < curve.values.size(); ++t) {
            out << curve.id << ',' << (t + 1) << ',' << format_double(curve.values[t])
                << config_suffix << '\n';
        }
    }
    if (!out) fail(path, "unwritable path");
}

void save_json(const CurveDataset& ds, const std::filesystem::path& path) {
    json j;
    j["name"] = ds.name;
    j["config_names"] = ds.config_names;
    j["curves"] = json::array();
    for (const auto& curve : ds.curves) {
        json jc;
        jc["id"] = curve.id;
        jc["config"] = curve.config.values;
        jc["values"] = curve.values;
        j["curves"].push_back(std::move(jc));
    }
    std::ofstream out(path);
    if (!out) fail(path, "unwritable path");
    out << j.dump(2) << '\n';
    if (!out) fail(path, "unwritable path");
}

}  // namespace

void CurveDataset::validate() const {
    if (static_cast<int>(config_names.size()) != config_dim)
        throw std::invalid_argument("dataset '" + name +
                                    "': config_names length does not match config_dim");
    std::vector<std::string> ids;
    for (const auto& curve : curves) {
        if (curve.values.empty())
            throw std::invalid_argument("curve '" + curve.id + "': empty value sequence");
        if (static_cast<int>(curve.config.values.size()) != config_dim)
            throw std::invalid_argument("curve '" + curve.id +
                                        "': inconsistent config dimension");
        if (curve.config.names != config_names)
            throw std::invalid_argument("curve '" + curve.id +
                                        "': config names differ from dataset names");
        for (double v : curve.values)
            if (!std::isfinite(v))
                throw std::invalid_argument("curve '" + curve.id + "': non-finite value");
        for (double v : curve.config.values)
            if (!std::isfinite(v))
                throw std::invalid_argument("curve '" + curve.id +
                                            "': non-finite config value");
        ids.push_back(curve.id);
    }
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::invalid_argument("dataset '" + name + "': duplicate curve id");
}

CurveDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
    return format == FileFormat::csv ? load_csv(path) : load_json(path);
}

void save_dataset(const CurveDataset& dataset, const std::filesystem::path& path,
                  FileFormat format) {
    dataset.validate();
    if (format == FileFormat::csv)
        save_csv(dataset, path);
    else
        save_json(dataset, path);
}

std::pair<CurveDataset, CurveDataset> split(const CurveDataset& dataset,
                                            const SplitSpec& spec) {
    dataset.validate();
    if (dataset.curves.size() < 2)
        throw std::invalid_argument("split: dataset needs at least 2 curves");
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must be inside (0,1)");

    const std::size_t n = dataset.curves.size();
    const auto n_test = static_cast<std::size_t>(
        std::llround(spec.test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test == n)
        throw std::invalid_argument(
            "split: dataset too small to yield a non-empty side at this fraction");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(spec.seed);
    shuffle(order, rng);

    std::vector<bool> in_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

    CurveDataset train, test;
    train.name = dataset.name + "/train";
    test.name = dataset.name + "/test";
    train.config_dim = test.config_dim = dataset.config_dim;
    train.config_names = test.config_names = dataset.config_names;
    for (std::size_t i = 0; i < n; ++i)
        (in_test[i] ? test : train).curves.push_back(dataset.curves[i]);
    return {std::move(train), std::move(test)};
}

std::pair<CurveDataset, NormalizationRecord> normalize(const CurveDataset& dataset,
                                                       NormalizationScheme scheme) {
    dataset.validate();
    if (dataset.curves.empty())
        throw std::invalid_argument("normalize: empty dataset");

    if (scheme == NormalizationScheme::none)
        return {dataset, NormalizationRecord{NormalizationScheme::none, 0.0, 1.0}};

    double lo = dataset.curves.front().values.front();
    double hi = lo;
    for (const auto& curve : dataset.curves)
        for (double v : curve.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo))
        throw std::invalid_argument("normalize: degenerate dataset (max == min)");

    CurveDataset out = dataset;
    const double range = hi - lo;
    for (auto& curve : out.curves)
        for (double& v : curve.values) v = (v - lo) / range;
    return {std::move(out),
            NormalizationRecord{NormalizationScheme::minmax_per_dataset, lo, hi}};
}

CurveDataset denormalize(const CurveDataset& dataset, const NormalizationRecord& record) {
    if (record.scheme == NormalizationScheme::none) return dataset;
    CurveDataset out = dataset;
    for (auto& curve : out.curves)
        for (double& v : curve.values) v = denormalize_value(v, record);
    return out;
}

double denormalize_value(double value, const NormalizationRecord& record) {
    if (record.scheme == NormalizationScheme::none) return value;
    return record.min + value * (record.max - record.min);
}

double denormalize_variance(double variance, const NormalizationRecord& record) {
    if (record.scheme == NormalizationScheme::none) return variance;
    const double range = record.max - record.min;
    return variance * range * range;
}

}  // namespace lcroll
