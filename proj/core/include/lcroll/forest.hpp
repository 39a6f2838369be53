// Regression random forest whose leaves carry the empirical mean, population
// variance, and count of their training targets. A forest prediction combines
// the per-tree leaf statistics through the law of total variance:
//   mean      = (1/B) sum_i mean_i
//   variance  = (1/B) sum_i var_i  +  (1/B) sum_i (mean_i - mean)^2
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcroll/rng.hpp"

namespace lcroll {

struct PredictiveGaussian {
    double mean = 0.0;
    double variance = 0.0;  // >= 0, finite

    bool operator==(const PredictiveGaussian&) const = default;
};

struct LeafStats {
    double mean = 0.0;
    double variance = 0.0;  // population variance (divide by count)
    int count = 0;          // >= 1

    bool operator==(const LeafStats&) const = default;
};

// Flat node. Internal nodes have feature >= 0 and child indices; leaves have
// feature == -1 and carry LeafStats fields. Inputs with x[feature] <= threshold
// go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double mean = 0.0;
    double variance = 0.0;
    int count = 0;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // preorder, root at index 0

    const TreeNode& leaf_for(std::span<const double> x) const;
    bool operator==(const RegressionTree&) const = default;
};

struct ForestTrainConfig {
    int num_trees = 100;
    int max_depth = 64;
    int min_samples_leaf = 1;
    double feature_subsample = 1.0 / 3.0;  // fraction of features tried per node
    bool bootstrap = true;
    std::uint64_t seed = 0;

    bool operator==(const ForestTrainConfig&) const = default;
};

struct RegressionForest {
    std::vector<RegressionTree> trees;
    int feature_dim = 0;
    ForestTrainConfig train_config;

    bool operator==(const RegressionForest&) const = default;
};

// Fits B CART regression trees with greedy variance-reduction splits over a
// per-node random feature subset; thresholds are midpoints between adjacent
// sorted feature values, ties broken by lowest feature index then lowest
// threshold. Deterministic given config.seed; trees are fitted in parallel
// from pre-split seeds.
RegressionForest fit_forest(const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& targets,
                            const ForestTrainConfig& config);

PredictiveGaussian forest_predict(const RegressionForest& forest,
                                  std::span<const double> x);

// Draws from N(mean, variance); a zero-variance Gaussian returns mean exactly
// and consumes no randomness.
double sample_prediction(const PredictiveGaussian& g, Rng& rng);

// JSON model payload: {"feature_dim": n, "train_config": {...}, "trees": [...]}
// with nodes in preorder; the exact schema is documented in docs/formats.md.
std::string forest_to_json(const RegressionForest& forest);
RegressionForest forest_from_json(const std::string& text);

void save_forest(const RegressionForest& forest, const std::filesystem::path& path);
RegressionForest load_forest(const std::filesystem::path& path);

}  // namespace lcroll
