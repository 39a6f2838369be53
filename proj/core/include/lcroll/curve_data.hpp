// Canonical data model for learning-curve datasets: a curve is a
// hyperparameter configuration plus a 1-indexed, contiguous sequence of scalar
// performance values. Includes CSV/JSON ingestion, curve-granular train/test
// splitting, and min-max normalization with an invertible record.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lcroll {

struct HyperparameterConfig {
    std::vector<double> values;      // dimension D, already in model space
    std::vector<std::string> names;  // D identifiers, shared across a dataset

    bool operator==(const HyperparameterConfig&) const = default;
};

struct LearningCurve {
    std::string id;  // unique within a dataset
    HyperparameterConfig config;
    std::vector<double> values;  // epoch t = 1..T, all finite

    bool operator==(const LearningCurve&) const = default;
};

struct CurveDataset {
    std::string name;
    int config_dim = 0;
    std::vector<std::string> config_names;
    std::vector<LearningCurve> curves;

    bool operator==(const CurveDataset&) const = default;

    // Throws std::invalid_argument when any invariant is broken: inconsistent
    // config dimension or names, duplicate ids, empty curves, non-finite data.
    void validate() const;
};

enum class FileFormat { csv, json };

// Loads a dataset file. CSV rows with the same id are merged in epoch order;
// epochs must be contiguous starting at 1 and hyperparameter columns must be
// identical within an id. Errors carry file (and line, for CSV) context.
// CSV files have no slot for a dataset name, so it is the file stem there.
CurveDataset load_dataset(const std::filesystem::path& path, FileFormat format);

// Writes a dataset such that load_dataset returns an equal one (for CSV, equal
// up to the name, which round-trips only when the stem matches).
void save_dataset(const CurveDataset& dataset, const std::filesystem::path& path,
                  FileFormat format);

struct SplitSpec {
    double test_fraction = 0.25;  // strictly inside (0,1)
    std::uint64_t seed = 0;
};

// Deterministic curve-granular partition: |test| = round(test_fraction * N).
// Each side preserves the original curve order. Throws when a side would be
// empty.
std::pair<CurveDataset, CurveDataset> split(const CurveDataset& dataset,
                                            const SplitSpec& spec);

enum class NormalizationScheme { none, minmax_per_dataset };

struct NormalizationRecord {
    NormalizationScheme scheme = NormalizationScheme::none;
    double min = 0.0;
    double max = 1.0;

    bool operator==(const NormalizationRecord&) const = default;
};

// minmax maps the global [min, max] over all curve values to [0, 1] and
// records the range; none is the identity. Configs are never touched.
// Throws on an empty dataset or a degenerate (max == min) range.
std::pair<CurveDataset, NormalizationRecord> normalize(const CurveDataset& dataset,
                                                       NormalizationScheme scheme);

// Exact inverse of normalize up to floating-point round-off (<= 1e-12 here).
CurveDataset denormalize(const CurveDataset& dataset, const NormalizationRecord& record);

// Maps a single model-space value (e.g. a predicted mean) back to data space.
double denormalize_value(double value, const NormalizationRecord& record);

// Variances scale by the squared range under the affine minmax map.
double denormalize_variance(double variance, const NormalizationRecord& record);

}  // namespace lcroll
