#include <doctest.h>

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lcroll/forest.hpp"
#include "lcroll/rng.hpp"
#include "test_util.hpp"

using namespace lcroll;

namespace {

// Independent reference: walk each tree by hand, then combine leaf statistics
// with plain loops. Kept deliberately separate from the library's traversal.
const TreeNode& walk(const RegressionTree& tree, std::span<const double> x) {
    int idx = 0;
    for (;;) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
        if (node.feature < 0) return node;
        idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                          : node.right;
    }
}

PredictiveGaussian brute_force_predict(const RegressionForest& forest,
                                       std::span<const double> x) {
    const std::size_t b = forest.trees.size();
    std::vector<double> means, vars;
    for (const auto& tree : forest.trees) {
        const TreeNode& leaf = walk(tree, x);
        means.push_back(leaf.mean);
        vars.push_back(leaf.variance);
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(b);
    double variance = 0.0;
    for (std::size_t i = 0; i < b; ++i)
        variance += vars[i] + (means[i] - mean) * (means[i] - mean);
    variance /= static_cast<double>(b);
    return {mean, variance};
}

// Random tree over feature dim f: splits with decreasing probability by depth,
// leaves carry random statistics.
int grow_random_node(RegressionTree& tree, Rng& rng, int f, int depth) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (depth >= 3 || uniform01(rng) < 0.35) {
        TreeNode& leaf = tree.nodes[static_cast<std::size_t>(idx)];
        leaf.feature = -1;
        leaf.mean = uniform_real(rng, -2.0, 2.0);
        leaf.variance = uniform_real(rng, 0.0, 1.5);
        leaf.count = 1 + static_cast<int>(uniform_below(rng, 9));
        return idx;
    }
    const int feature = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(f)));
    const double threshold = uniform_real(rng, -1.0, 1.0);
    const int left = grow_random_node(tree, rng, f, depth + 1);
    const int right = grow_random_node(tree, rng, f, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = feature;
    node.threshold = threshold;
    node.left = left;
    node.right = right;
    return idx;
}

RegressionForest random_forest(Rng& rng, int max_trees) {
    RegressionForest forest;
    forest.feature_dim = 1 + static_cast<int>(uniform_below(rng, 5));
    const int b = 1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(max_trees)));
    for (int i = 0; i < b; ++i) {
        RegressionTree tree;
        grow_random_node(tree, rng, forest.feature_dim, 0);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace

TEST_SUITE_BEGIN("forest");

TEST_CASE("a single training point makes every tree one exact leaf") {
    Eigen::MatrixXd x(1, 2);
    x << 0.3, 0.7;
    Eigen::VectorXd y(1);
    y << 0.42;
    ForestTrainConfig cfg;
    cfg.num_trees = 5;
    cfg.seed = 1;
    const RegressionForest f = fit_forest(x, y, cfg);
    REQUIRE(f.trees.size() == 5);
    for (const auto& tree : f.trees) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].is_leaf());
        CHECK(tree.nodes[0].mean == 0.42);
        CHECK(tree.nodes[0].variance == 0.0);
    }
    const auto g = forest_predict(f, std::vector<double>{0.0, 0.0});
    CHECK(g.mean == 0.42);
    CHECK(g.variance == 0.0);
}

TEST_CASE("constant targets give zero predictive variance everywhere") {
    Rng rng(2);
    Eigen::MatrixXd x(30, 3);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = uniform01(rng);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 0.75);
    ForestTrainConfig cfg;
    cfg.num_trees = 8;
    cfg.seed = 3;
    const RegressionForest f = fit_forest(x, y, cfg);
    for (int k = 0; k < 10; ++k) {
        const std::vector<double> probe = {uniform01(rng), uniform01(rng),
                                           uniform01(rng)};
        const auto g = forest_predict(f, probe);
        CHECK(g.mean == 0.75);
        CHECK(g.variance == 0.0);
    }
}

TEST_CASE("memorizing settings reproduce every training target") {
    Rng rng(4);
    const int n = 50;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = uniform01(rng);
        x(i, 1) = uniform01(rng);
        y(i) = uniform_real(rng, -1.0, 1.0);
    }
    ForestTrainConfig cfg;
    cfg.num_trees = 10;
    cfg.bootstrap = false;
    cfg.feature_subsample = 1.0;
    cfg.max_depth = 64;
    cfg.min_samples_leaf = 1;
    cfg.seed = 5;
    const RegressionForest f = fit_forest(x, y, cfg);
    for (int i = 0; i < n; ++i) {
        const std::vector<double> xi = {x(i, 0), x(i, 1)};
        const auto g = forest_predict(f, xi);
        CHECK(g.mean == doctest::Approx(y(i)).epsilon(1e-12));
        CHECK(g.variance == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
}

TEST_CASE("forest_predict combines leaf statistics exactly") {
    SUBCASE("single tree is the identity") {
        RegressionForest f;
        f.feature_dim = 1;
        RegressionTree t;
        TreeNode leaf;
        leaf.mean = 0.5;
        leaf.variance = 0.04;
        leaf.count = 3;
        t.nodes.push_back(leaf);
        f.trees.push_back(t);
        const auto g = forest_predict(f, std::vector<double>{0.0});
        CHECK(g.mean == 0.5);
        CHECK(g.variance == 0.04);
    }
    SUBCASE("two trees, hand-computed combination") {
        RegressionForest f;
        f.feature_dim = 1;
        for (double m : {0.4, 0.6}) {
            RegressionTree t;
            TreeNode leaf;
            leaf.mean = m;
            leaf.variance = m == 0.4 ? 0.01 : 0.03;
            leaf.count = 2;
            t.nodes.push_back(leaf);
            f.trees.push_back(t);
        }
        const auto g = forest_predict(f, std::vector<double>{0.0});
        CHECK(g.mean == doctest::Approx(0.5).epsilon(1e-15));
        // (0.01 + 0.03)/2 + ((-0.1)^2 + (0.1)^2)/2 = 0.02 + 0.01
        CHECK(g.variance == doctest::Approx(0.03).epsilon(1e-15));
    }
    SUBCASE("identical trees collapse the spread term") {
        RegressionForest f;
        f.feature_dim = 1;
        for (int i = 0; i < 4; ++i) {
            RegressionTree t;
            TreeNode leaf;
            leaf.mean = 0.3;
            leaf.variance = 0.02;
            leaf.count = 5;
            t.nodes.push_back(leaf);
            f.trees.push_back(t);
        }
        const auto g = forest_predict(f, std::vector<double>{0.0});
        CHECK(g.mean == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(g.variance == doctest::Approx(0.02).epsilon(1e-15));
    }
}

TEST_CASE("forest_predict matches an independent brute force") {
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const RegressionForest f = random_forest(rng, 20);
        std::vector<double> x(static_cast<std::size_t>(f.feature_dim));
        for (auto& v : x) v = uniform_real(rng, -1.5, 1.5);
        const auto got = forest_predict(f, x);
        const auto want = brute_force_predict(f, x);
        CHECK(std::abs(got.mean - want.mean) < 1e-12);
        CHECK(std::abs(got.variance - want.variance) < 1e-12);
        // Spread term is nonnegative: total variance dominates the mean of
        // the per-leaf variances.
        double mean_var = 0.0;
        for (const auto& tree : f.trees) mean_var += walk(tree, x).variance;
        mean_var /= static_cast<double>(f.trees.size());
        CHECK(got.variance >= mean_var - 1e-12);
    }
}

TEST_CASE("appending a tree that predicts the forest mean keeps the mean") {
    RegressionForest f;
    f.feature_dim = 1;
    for (double m : {0.2, 0.5, 0.8}) {
        RegressionTree t;
        TreeNode leaf;
        leaf.mean = m;
        leaf.variance = 0.01;
        leaf.count = 1;
        t.nodes.push_back(leaf);
        f.trees.push_back(t);
    }
    const std::vector<double> x = {0.0};
    const double mean_before = forest_predict(f, x).mean;
    RegressionTree dup;
    TreeNode leaf;
    leaf.mean = mean_before;
    leaf.variance = 0.0;
    leaf.count = 1;
    dup.nodes.push_back(leaf);
    f.trees.push_back(dup);
    CHECK(forest_predict(f, x).mean == doctest::Approx(mean_before).epsilon(1e-15));
}

TEST_CASE("sample_prediction handles degenerate and seeded draws") {
    Rng rng(7);
    CHECK(sample_prediction({0.3, 0.0}, rng) == 0.3);

    SUBCASE("large-sample moments of N(0, 1)") {
        Rng r(8);
        const int n = 100000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = sample_prediction({0.0, 1.0}, r);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / n;
        CHECK(std::abs(mean) < 0.02);
        CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
    }
    SUBCASE("fixed seed reproduces the draw sequence") {
        Rng a(9), b(9);
        for (int i = 0; i < 20; ++i)
            CHECK(sample_prediction({0.1, 0.5}, a) == sample_prediction({0.1, 0.5}, b));
    }
}

TEST_CASE("refitting with the same seed is bit-identical") {
    Rng rng(10);
    Eigen::MatrixXd x(40, 3);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = uniform01(rng);
        y(i) = uniform01(rng);
    }
    ForestTrainConfig cfg;
    cfg.num_trees = 12;
    cfg.seed = 77;
    const RegressionForest a = fit_forest(x, y, cfg);
    const RegressionForest b = fit_forest(x, y, cfg);
    CHECK(a == b);
    cfg.seed = 78;
    const RegressionForest c = fit_forest(x, y, cfg);
    CHECK(!(a == c));
}

TEST_CASE("fit_forest rejects empty or non-finite input") {
    ForestTrainConfig cfg;
    CHECK_THROWS(fit_forest(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), cfg));
    Eigen::MatrixXd x(1, 0);
    CHECK_THROWS(fit_forest(x, Eigen::VectorXd::Zero(1), cfg));
    Eigen::MatrixXd bad(1, 1);
    bad(0, 0) = std::nan("");
    CHECK_THROWS(fit_forest(bad, Eigen::VectorXd::Zero(1), cfg));
}

TEST_CASE("forest_predict rejects a dimension mismatch") {
    Rng rng(11);
    const RegressionForest f = random_forest(rng, 3);
    std::vector<double> x(static_cast<std::size_t>(f.feature_dim) + 1, 0.0);
    CHECK_THROWS(forest_predict(f, x));
}

TEST_CASE("JSON serialization round-trips a fitted forest") {
    test::TempDir tmp;
    Rng rng(12);
    Eigen::MatrixXd x(25, 2);
    Eigen::VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
        x(i, 0) = uniform01(rng);
        x(i, 1) = uniform01(rng);
        y(i) = uniform01(rng);
    }
    ForestTrainConfig cfg;
    cfg.num_trees = 6;
    cfg.seed = 13;
    const RegressionForest f = fit_forest(x, y, cfg);
    CHECK(forest_from_json(forest_to_json(f)) == f);

    save_forest(f, tmp / "f.json");
    CHECK(load_forest(tmp / "f.json") == f);
    CHECK_THROWS(load_forest(tmp / "absent.json"));
}

TEST_SUITE_END();
