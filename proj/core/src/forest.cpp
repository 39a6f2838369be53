#include "lcroll/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lcroll/parallel.hpp"

namespace lcroll {

namespace {

using nlohmann::json;

LeafStats leaf_stats(const Eigen::VectorXd& y, const std::vector<int>& idx) {
    LeafStats s;
    s.count = static_cast<int>(idx.size());
    double lo = y[idx.front()], hi = lo;
    for (int i : idx) {
        lo = std::min(lo, y[i]);
        hi = std::max(hi, y[i]);
    }
    if (lo == hi) {
        // Constant targets get exact statistics; summation round-off would
        // otherwise leak a ~1e-32 variance into downstream exactness checks.
        s.mean = lo;
        s.variance = 0.0;
        return s;
    }
    double sum = 0.0;
    for (int i : idx) sum += y[i];
    s.mean = sum / static_cast<double>(s.count);
    double ss = 0.0;
    for (int i : idx) {
        const double d = y[i] - s.mean;
        ss += d * d;
    }
    s.variance = ss / static_cast<double>(s.count);
    return s;
}

struct TreeBuilder {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    const ForestTrainConfig& cfg;
    Rng rng;
    std::vector<TreeNode> nodes;
    std::vector<int> all_features;

    TreeBuilder(const Eigen::MatrixXd& X_, const Eigen::VectorXd& y_,
                const ForestTrainConfig& cfg_, std::uint64_t seed)
        : X(X_), y(y_), cfg(cfg_), rng(seed) {
        all_features.resize(static_cast<std::size_t>(X.cols()));
        for (std::size_t f = 0; f < all_features.size(); ++f)
            all_features[f] = static_cast<int>(f);
    }

    int features_per_node() const {
        const int f_total = static_cast<int>(X.cols());
        const int k = static_cast<int>(std::llround(cfg.feature_subsample * f_total));
        return std::clamp(k, 1, f_total);
    }

    int make_leaf(const std::vector<int>& idx) {
        const int me = static_cast<int>(nodes.size());
        TreeNode node;
        const LeafStats s = leaf_stats(y, idx);
        node.mean = s.mean;
        node.variance = s.variance;
        node.count = s.count;
        nodes.push_back(node);
        return me;
    }

    int build(const std::vector<int>& idx, int depth) {
        bool constant = true;
        for (std::size_t i = 1; i < idx.size() && constant; ++i)
            constant = y[idx[i]] == y[idx[0]];
        if (depth >= cfg.max_depth || constant ||
            static_cast<int>(idx.size()) < 2 * cfg.min_samples_leaf)
            return make_leaf(idx);

        // Feature subset for this node: partial Fisher-Yates, then ascending
        // order so the lowest-index tie rule falls out of the scan order.
        const int k = features_per_node();
        std::vector<int> feats = all_features;
        for (int i = 0; i < k; ++i) {
            const auto j = i + static_cast<int>(uniform_below(
                                   rng, static_cast<std::uint64_t>(feats.size()) - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(static_cast<std::size_t>(k));
        std::sort(feats.begin(), feats.end());

        const std::size_t m = idx.size();
        double best_sse = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::pair<double, int>> order(m);
        std::vector<double> pre_sum(m + 1), pre_sum2(m + 1);
        for (int f : feats) {
            for (std::size_t i = 0; i < m; ++i) order[i] = {X(idx[i], f), idx[i]};
            std::sort(order.begin(), order.end());
            pre_sum[0] = pre_sum2[0] = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double t = y[order[i].second];
                pre_sum[i + 1] = pre_sum[i] + t;
                pre_sum2[i + 1] = pre_sum2[i] + t * t;
            }
            const std::size_t min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
            for (std::size_t pos = min_leaf; pos + min_leaf <= m; ++pos) {
                const double v0 = order[pos - 1].first;
                const double v1 = order[pos].first;
                if (!(v0 < v1)) continue;
                const double n_l = static_cast<double>(pos);
                const double n_r = static_cast<double>(m - pos);
                const double sum_l = pre_sum[pos];
                const double sum_r = pre_sum[m] - sum_l;
                const double sum2_l = pre_sum2[pos];
                const double sum2_r = pre_sum2[m] - sum2_l;
                const double sse =
                    (sum2_l - sum_l * sum_l / n_l) + (sum2_r - sum_r * sum_r / n_r);
                if (sse < best_sse) {
                    best_sse = sse;
                    best_feature = f;
                    double thr = 0.5 * (v0 + v1);
                    if (!(thr < v1)) thr = v0;  // midpoint rounded up to v1: pin left
                    best_threshold = thr;
                }
            }
        }

        if (best_feature < 0) return make_leaf(idx);  // sampled features all constant

        std::vector<int> left_idx, right_idx;
        left_idx.reserve(m);
        right_idx.reserve(m);
        for (int i : idx)
            (X(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);

        const int me = static_cast<int>(nodes.size());
        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        nodes.push_back(node);
        const int l = build(left_idx, depth + 1);
        nodes[me].left = l;
        const int r = build(right_idx, depth + 1);
        nodes[me].right = r;
        return me;
    }
};

RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const ForestTrainConfig& cfg, std::uint64_t seed) {
    TreeBuilder builder(X, y, cfg, seed);

    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<int> idx;
    idx.reserve(n);
    if (cfg.bootstrap) {
        for (std::size_t i = 0; i < n; ++i)
            idx.push_back(static_cast<int>(uniform_below(builder.rng, n)));
        std::sort(idx.begin(), idx.end());
    } else {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(static_cast<int>(i));
    }

    builder.build(idx, 0);
    RegressionTree tree;
    tree.nodes = std::move(builder.nodes);
    return tree;
}

void validate_config(const ForestTrainConfig& cfg) {
    if (cfg.num_trees < 1) throw std::invalid_argument("fit_forest: num_trees must be >= 1");
    if (cfg.max_depth < 1) throw std::invalid_argument("fit_forest: max_depth must be >= 1");
    if (cfg.min_samples_leaf < 1)
        throw std::invalid_argument("fit_forest: min_samples_leaf must be >= 1");
    if (!(cfg.feature_subsample > 0.0 && cfg.feature_subsample <= 1.0))
        throw std::invalid_argument("fit_forest: feature_subsample must be in (0,1]");
}

json tree_to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes) {
        json jn;
        if (n.is_leaf()) {
            jn["mean"] = n.mean;
            jn["var"] = n.variance;
            jn["n"] = n.count;
        } else {
            jn["f"] = n.feature;
            jn["t"] = n.threshold;
            jn["l"] = n.left;
            jn["r"] = n.right;
        }
        nodes.push_back(std::move(jn));
    }
    return nodes;
}

RegressionTree tree_from_json(const json& jnodes) {
    RegressionTree tree;
    for (const auto& jn : jnodes) {
        TreeNode n;
        if (jn.contains("f")) {
            n.feature = jn.at("f").get<int>();
            n.threshold = jn.at("t").get<double>();
            n.left = jn.at("l").get<int>();
            n.right = jn.at("r").get<int>();
        } else {
            n.mean = jn.at("mean").get<double>();
            n.variance = jn.at("var").get<double>();
            n.count = jn.at("n").get<int>();
        }
        tree.nodes.push_back(n);
    }
    const int size = static_cast<int>(tree.nodes.size());
    if (size == 0) throw std::runtime_error("forest model: empty tree");
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            if (n.count < 1 || !(n.variance >= 0.0))
                throw std::runtime_error("forest model: invalid leaf statistics");
        } else if (n.left < 0 || n.left >= size || n.right < 0 || n.right >= size) {
            throw std::runtime_error("forest model: child index out of range");
        }
    }
    return tree;
}

}  // namespace

const TreeNode& RegressionTree::leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf()) {
        node = x[static_cast<std::size_t>(node->feature)] <= node->threshold
                   ? &nodes[static_cast<std::size_t>(node->left)]
                   : &nodes[static_cast<std::size_t>(node->right)];
    }
    return *node;
}

RegressionForest fit_forest(const Eigen::MatrixXd& features,
                            const Eigen::VectorXd& targets,
                            const ForestTrainConfig& config) {
    validate_config(config);
    if (features.rows() < 1) throw std::invalid_argument("fit_forest: empty training set");
    if (features.cols() < 1) throw std::invalid_argument("fit_forest: zero feature dim");
    if (features.rows() != targets.size())
        throw std::invalid_argument("fit_forest: features/targets row mismatch");
    if (!features.allFinite() || !targets.allFinite())
        throw std::invalid_argument("fit_forest: non-finite training data");

    RegressionForest forest;
    forest.feature_dim = static_cast<int>(features.cols());
    forest.train_config = config;
    forest.trees.resize(static_cast<std::size_t>(config.num_trees));
    parallel_for(static_cast<std::size_t>(config.num_trees), [&](std::size_t b) {
        forest.trees[b] =
            fit_tree(features, targets, config, derive_seed(config.seed, "tree", b));
    });
    return forest;
}

PredictiveGaussian forest_predict(const RegressionForest& forest,
                                  std::span<const double> x) {
    if (forest.trees.empty()) throw std::invalid_argument("forest_predict: empty forest");
    if (static_cast<int>(x.size()) != forest.feature_dim)
        throw std::invalid_argument("forest_predict: dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forest_predict: non-finite input");

    const std::size_t b = forest.trees.size();
    std::vector<const TreeNode*> leaves(b);
    for (std::size_t i = 0; i < b; ++i) leaves[i] = &forest.trees[i].leaf_for(x);

    // Shifted mean: exact when all per-tree means coincide, so the spread term
    // in the trivial identical-trees case is exactly zero.
    const double base = leaves[0]->mean;
    double delta_sum = 0.0;
    for (const TreeNode* leaf : leaves) delta_sum += leaf->mean - base;
    const double mean = base + delta_sum / static_cast<double>(b);

    double var_term = 0.0;
    double spread_term = 0.0;
    for (const TreeNode* leaf : leaves) {
        var_term += leaf->variance;
        const double d = leaf->mean - mean;
        spread_term += d * d;
    }
    PredictiveGaussian g;
    g.mean = mean;
    g.variance = (var_term + spread_term) / static_cast<double>(b);
    return g;
}

double sample_prediction(const PredictiveGaussian& g, Rng& rng) {
    if (!(g.variance > 0.0)) return g.mean;
    return g.mean + std::sqrt(g.variance) * normal01(rng);
}

std::string forest_to_json(const RegressionForest& forest) {
    json j;
    j["feature_dim"] = forest.feature_dim;
    j["train_config"] = {{"num_trees", forest.train_config.num_trees},
                         {"max_depth", forest.train_config.max_depth},
                         {"min_samples_leaf", forest.train_config.min_samples_leaf},
                         {"feature_subsample", forest.train_config.feature_subsample},
                         {"bootstrap", forest.train_config.bootstrap},
                         {"seed", forest.train_config.seed}};
    j["trees"] = json::array();
    for (const auto& tree : forest.trees) j["trees"].push_back(tree_to_json(tree));
    return j.dump();
}

RegressionForest forest_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("forest model: malformed JSON: ") + e.what());
    }
    RegressionForest forest;
    try {
        forest.feature_dim = j.at("feature_dim").get<int>();
        if (j.contains("train_config")) {
            const auto& tc = j.at("train_config");
            forest.train_config.num_trees = tc.at("num_trees").get<int>();
            forest.train_config.max_depth = tc.at("max_depth").get<int>();
            forest.train_config.min_samples_leaf = tc.at("min_samples_leaf").get<int>();
            forest.train_config.feature_subsample = tc.at("feature_subsample").get<double>();
            forest.train_config.bootstrap = tc.at("bootstrap").get<bool>();
            forest.train_config.seed = tc.at("seed").get<std::uint64_t>();
        }
        for (const auto& jt : j.at("trees")) forest.trees.push_back(tree_from_json(jt));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("forest model: ") + e.what());
    }
    if (forest.feature_dim < 1 || forest.trees.empty())
        throw std::runtime_error("forest model: needs feature_dim >= 1 and >= 1 tree");
    return forest;
}

void save_forest(const RegressionForest& forest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << forest_to_json(forest) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

RegressionForest load_forest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return forest_from_json(text);
}

}  // namespace lcroll
