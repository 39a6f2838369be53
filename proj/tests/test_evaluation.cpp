#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "lcroll/evaluation.hpp"
#include "lcroll/rollout.hpp"
#include "lcroll/text_format.hpp"
#include "test_util.hpp"

using namespace lcroll;

namespace {

// Deterministic pseudo-predictor: mean depends on (curve, observed, target)
// through a fixed hash, variance stays positive. Exercises aggregation without
// any model machinery.
NamedMethod hashing_method(const std::string& name) {
    return custom_method(name, [](const LearningCurve& curve, int observed,
                                  int target) {
        const std::uint64_t h =
            derive_seed(hash_bytes(curve.id), static_cast<std::uint64_t>(observed),
                        static_cast<std::uint64_t>(target));
        Rng rng(h);
        return PredictiveGaussian{uniform01(rng), 0.01 + 0.1 * uniform01(rng)};
    });
}

NamedMethod oracle_method(const std::string& name, double variance) {
    return custom_method(name,
                         [variance](const LearningCurve& curve, int, int target) {
                             return PredictiveGaussian{
                                 curve.values[static_cast<std::size_t>(target - 1)],
                                 variance};
                         });
}

const EvalCell& cell_of(const EvalReport& report, const std::string& method,
                        int observed, int target) {
    for (const auto& c : report.cells)
        if (c.method == method && c.observed == observed && c.target == target)
            return c;
    FAIL("missing cell " << method << " M=" << observed << " t=" << target);
    static EvalCell dummy;
    return dummy;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("gaussian log density matches the closed form") {
    // -0.5 * ln(2 pi) for the standard normal at its mean.
    CHECK(gaussian_log_density(0.0, 0.0, 1.0) ==
          doctest::Approx(-0.9189385332046727).epsilon(1e-12));
    const double v = 0.04, y = 0.3, mu = 0.1;
    const double want =
        -0.5 * std::log(2.0 * std::numbers::pi * v) - (y - mu) * (y - mu) / (2.0 * v);
    CHECK(gaussian_log_density(y, mu, v) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("the variance floor keeps degenerate predictors finite") {
    const double at_floor = gaussian_log_density(0.5, 0.5, 0.0);
    CHECK(std::isfinite(at_floor));
    CHECK(at_floor == gaussian_log_density(0.5, 0.5, 1e-8));
    CHECK(at_floor == gaussian_log_density(0.5, 0.5, 1e-12));
    // Above the floor the variance passes through untouched.
    CHECK(gaussian_log_density(0.5, 0.5, 0.04) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * 0.04))
              .epsilon(1e-12));
}

TEST_CASE("widening the variance lowers the density of an exact hit") {
    double prev = gaussian_log_density(0.2, 0.2, 1e-6);
    for (double v : {1e-4, 1e-2, 1.0, 100.0}) {
        const double ll = gaussian_log_density(0.2, 0.2, v);
        CHECK(ll < prev);
        prev = ll;
    }
}

TEST_CASE("lower_median picks the lower of the two middle values") {
    CHECK(lower_median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(lower_median({4.0, 1.0, 3.0, 2.0}) == 2.0);  // even count: lower middle
    CHECK(lower_median({7.0}) == 7.0);
    CHECK_THROWS(lower_median({}));

    // Against a sort-based re-implementation on random data.
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + uniform_below(rng, 20));
        for (auto& x : v) x = uniform01(rng);
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        CHECK(lower_median(v) == sorted[(sorted.size() - 1) / 2]);
    }
}

TEST_CASE("a perfect oracle scores zero error everywhere") {
    const CurveDataset data = test::grid_dataset(6, 10);
    EvalProtocol protocol;
    protocol.observed_epochs = {2, 4};
    protocol.target_epochs = {6, 8, 10};
    protocol.seed = 1;
    const EvalReport report = evaluate({oracle_method("oracle", 0.01)}, data, protocol);
    REQUIRE(report.cells.size() == 6);
    for (const auto& c : report.cells) {
        CHECK(c.mse == 0.0);
        CHECK(c.mse_std == 0.0);
        CHECK(c.num_curves == 6);
        CHECK(c.has_ll);
    }
    for (const auto& s : report.summaries) CHECK(s.avg_mse == 0.0);
}

TEST_CASE("a unit normal over true zeros scores the textbook density") {
    CurveDataset zeros;
    zeros.name = "zeros";
    zeros.config_dim = 1;
    zeros.config_names = {"h"};
    for (int i = 0; i < 3; ++i)
        zeros.curves.push_back({"z" + std::to_string(i), {{0.1 * i}, zeros.config_names},
                                std::vector<double>(6, 0.0)});
    const auto n01 = custom_method("n01", [](const LearningCurve&, int, int) {
        return PredictiveGaussian{0.0, 1.0};
    });
    EvalProtocol protocol;
    protocol.observed_epochs = {2};
    protocol.target_epochs = {5};
    const EvalReport report = evaluate({n01}, zeros, protocol);
    REQUIRE(report.cells.size() == 1);
    CHECK(report.cells[0].mse == 0.0);
    CHECK(report.cells[0].median_ll ==
          doctest::Approx(-0.9189385332046727).epsilon(1e-9));
}

TEST_CASE("last-seen-value rows carry no likelihood") {
    const CurveDataset data = test::grid_dataset(4, 8);
    EvalProtocol protocol;
    protocol.observed_epochs = {3};
    protocol.target_epochs = {6, 8};
    const EvalReport report = evaluate({lsv_method()}, data, protocol);
    REQUIRE(report.cells.size() == 2);
    for (const auto& c : report.cells) {
        CHECK(c.method == "lsv");
        CHECK(!c.has_ll);
    }
    for (const auto& s : report.summaries) CHECK(!s.has_ll);
    for (const auto& p : report.predictions) {
        CHECK(!p.has_var);
        // LSV predicts the value at the reveal boundary.
        const LearningCurve* curve = nullptr;
        for (const auto& c : data.curves)
            if (c.id == p.curve_id) curve = &c;
        REQUIRE(curve != nullptr);
        CHECK(p.pred_mean == curve->values[2]);
    }
}

TEST_CASE("cells agree with a brute-force pass over the prediction records") {
    const CurveDataset data = test::grid_dataset(7, 12);
    EvalProtocol protocol;
    protocol.observed_epochs = {2, 5};
    protocol.target_epochs = {7, 9, 12};
    protocol.seed = 11;
    const EvalReport report =
        evaluate({hashing_method("hash"), lsv_method()}, data, protocol);

    for (const auto& cell : report.cells) {
        std::vector<double> sq, lls;
        for (const auto& p : report.predictions) {
            if (p.method != cell.method || p.observed != cell.observed ||
                p.target != cell.target)
                continue;
            sq.push_back((p.pred_mean - p.true_value) * (p.pred_mean - p.true_value));
            if (p.has_var) lls.push_back(p.ll);
        }
        REQUIRE(static_cast<int>(sq.size()) == cell.num_curves);
        double mse = 0.0;
        for (double e : sq) mse += e;
        mse /= static_cast<double>(sq.size());
        CHECK(std::abs(cell.mse - mse) < 1e-12);
        double var = 0.0;
        for (double e : sq) var += (e - mse) * (e - mse);
        var /= static_cast<double>(sq.size());
        CHECK(std::abs(cell.mse_std - std::sqrt(var)) < 1e-12);
        if (cell.has_ll) {
            CHECK(lls.size() == sq.size());
            CHECK(cell.median_ll == lower_median(lls));
        } else {
            CHECK(lls.empty());
        }
    }
}

TEST_CASE("summaries recompute from their cells and pooled records") {
    const CurveDataset data = test::grid_dataset(5, 10);
    EvalProtocol protocol;
    protocol.observed_epochs = {2, 4};
    protocol.target_epochs = {6, 8, 10};
    protocol.seed = 4;
    const EvalReport report = evaluate({hashing_method("hash")}, data, protocol);

    for (const auto& s : report.summaries) {
        double avg = 0.0;
        int count = 0;
        std::vector<double> pooled;
        for (const auto& c : report.cells)
            if (c.method == s.method && c.observed == s.observed) {
                avg += c.mse;
                ++count;
            }
        for (const auto& p : report.predictions)
            if (p.method == s.method && p.observed == s.observed && p.has_var)
                pooled.push_back(p.ll);
        REQUIRE(count == s.num_targets);
        CHECK(std::abs(s.avg_mse - avg / count) < 1e-12);
        CHECK(s.median_ll == lower_median(pooled));
    }
}

TEST_CASE("empty target list means every epoch up to the shortest curve") {
    CurveDataset data = test::grid_dataset(3, 9);
    data.curves[1].values.resize(7);  // shortest test curve caps the sweep
    EvalProtocol protocol;
    protocol.observed_epochs = {3};
    protocol.target_epochs = {};
    const EvalReport report = evaluate({lsv_method()}, data, protocol);
    REQUIRE(report.cells.size() == 4);  // targets 4, 5, 6, 7
    for (int i = 0; i < 4; ++i) CHECK(report.cells[static_cast<std::size_t>(i)].target == 4 + i);
}

TEST_CASE("rollout cells do not depend on evaluation company or target set") {
    // Forest rollout method over a small dataset: the per-cell seed derivation
    // makes each (method, observed, curve) stream self-contained.
    const CurveDataset data = test::grid_dataset(4, 10);
    const auto [x, y] = make_training_windows(data, 2);
    ForestTrainConfig fc;
    fc.num_trees = 10;
    fc.seed = 5;
    auto predictor = std::shared_ptr<const OneStepPredictor>(
        windowed_forest_predictor(fit_forest(x, y, fc), 2));

    EvalProtocol protocol;
    protocol.observed_epochs = {3};
    protocol.target_epochs = {6, 9};
    protocol.num_rollouts = 20;
    protocol.seed = 8;
    const EvalReport alone =
        evaluate({rollout_method("rf", predictor)}, data, protocol);
    const EvalReport with_others = evaluate(
        {lsv_method(), rollout_method("rf", predictor)}, data, protocol);

    EvalProtocol shifted = protocol;
    shifted.target_epochs = {6, 7, 9};  // extra target shares the same stream
    const EvalReport extra =
        evaluate({rollout_method("rf", predictor)}, data, shifted);

    for (int target : {6, 9}) {
        const EvalCell& a = cell_of(alone, "rf", 3, target);
        const EvalCell& b = cell_of(with_others, "rf", 3, target);
        const EvalCell& c = cell_of(extra, "rf", 3, target);
        CHECK(a.mse == b.mse);
        CHECK(a.median_ll == b.median_ll);
        CHECK(a.mse == c.mse);
        CHECK(a.median_ll == c.median_ll);
    }
}

TEST_CASE("evaluate validates methods, targets, and curve lengths") {
    const CurveDataset data = test::grid_dataset(3, 6);
    EvalProtocol protocol;
    protocol.observed_epochs = {2};
    protocol.target_epochs = {5};

    CHECK_THROWS(evaluate({}, data, protocol));
    CHECK_THROWS(evaluate({lsv_method("a"), lsv_method("a")}, data, protocol));

    EvalProtocol bad = protocol;
    bad.target_epochs = {2};  // target not beyond the observed prefix
    CHECK_THROWS(evaluate({lsv_method()}, data, bad));

    bad = protocol;
    bad.target_epochs = {7};  // beyond the shortest curve
    CHECK_THROWS(evaluate({lsv_method()}, data, bad));

    NamedMethod hollow;
    hollow.name = "hollow";
    hollow.kind = MethodKind::rollout;  // no predictor attached
    CHECK_THROWS(evaluate({hollow}, data, protocol));
}

TEST_CASE("adaptation series: static stays flat, lsv improves on ramps") {
    // Monotone curves saturating at distinct levels.
    CurveDataset data;
    data.name = "ramps";
    data.config_dim = 1;
    data.config_names = {"h"};
    for (int i = 0; i < 5; ++i) {
        LearningCurve c;
        c.id = "r" + std::to_string(i);
        c.config = {{0.2 * i}, data.config_names};
        const double a = 0.6 + 0.05 * i;
        for (int t = 1; t <= 12; ++t)
            c.values.push_back(a * (1.0 - std::exp(-0.4 * t)));
        data.curves.push_back(std::move(c));
    }

    ForestTrainConfig fc;
    fc.num_trees = 10;
    fc.seed = 2;
    auto static_model =
        std::make_shared<const StaticForestModel>(fit_static(data, fc));
    const std::vector<int> grid = {2, 4, 6, 8};

    const auto flat =
        adaptation_curve(static_method("rfb", static_model), data, 10, grid, 10, 3);
    REQUIRE(flat.size() == 4);
    for (const auto& p : flat) CHECK(p.mse == flat[0].mse);

    const auto lsv = adaptation_curve(lsv_method(), data, 10, grid, 10, 3);
    for (std::size_t i = 1; i < lsv.size(); ++i) CHECK(lsv[i].mse <= lsv[i - 1].mse);
    CHECK(lsv[0].mse > lsv.back().mse);
}

TEST_CASE("plot CSVs round-trip the report cells") {
    test::TempDir tmp;
    const CurveDataset data = test::grid_dataset(4, 9);
    EvalProtocol protocol;
    protocol.observed_epochs = {2, 4};
    protocol.target_epochs = {7, 9};
    protocol.seed = 6;
    const EvalReport report =
        evaluate({hashing_method("hash"), lsv_method()}, data, protocol);
    emit_plot_data(report, tmp.path());

    const auto lines = test::read_lines(tmp / "metrics_by_target.csv");
    REQUIRE(lines.size() == 1 + report.cells.size());
    CHECK(lines[0] == "method,observed,target,mse,median_ll");
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        const auto f = split_csv_line(lines[i + 1]);
        REQUIRE(f.size() == 5);
        const EvalCell& c = report.cells[i];
        CHECK(f[0] == c.method);
        CHECK(parse_int(f[1]) == c.observed);
        CHECK(parse_int(f[2]) == c.target);
        CHECK(parse_double(f[3]) == c.mse);
        if (c.has_ll)
            CHECK(parse_double(f[4]) == c.median_ll);
        else
            CHECK(f[4] == "");
    }

    const auto adapt = test::read_lines(tmp / "adaptation.csv");
    CHECK(adapt[0] == "method,observed,avg_mse,median_ll,num_targets");
    CHECK(adapt.size() == 1 + report.summaries.size());

    const auto scatter = test::read_lines(tmp / "predicted_vs_true.csv");
    CHECK(scatter[0] == "method,observed,target,true,pred_mean,pred_var,ll");
    REQUIRE(scatter.size() == 1 + report.predictions.size());
    const auto f = split_csv_line(scatter[1]);
    REQUIRE(f.size() == 7);
    CHECK(parse_double(f[4]) == report.predictions[0].pred_mean);
}

TEST_CASE("an empty report writes header-only files") {
    test::TempDir tmp;
    EvalReport empty;
    emit_plot_data(empty, tmp / "sub");
    CHECK(test::read_lines(tmp / "sub" / "metrics_by_target.csv").size() == 1);
    CHECK(test::read_lines(tmp / "sub" / "adaptation.csv").size() == 1);
    CHECK(test::read_lines(tmp / "sub" / "predicted_vs_true.csv").size() == 1);
}

TEST_CASE("report JSON bytes are deterministic and carry the protocol") {
    test::TempDir tmp;
    const CurveDataset data = test::grid_dataset(3, 8);
    EvalProtocol protocol;
    protocol.observed_epochs = {2};
    protocol.target_epochs = {};
    protocol.seed = 9;
    const EvalReport r1 = evaluate({lsv_method()}, data, protocol);
    const EvalReport r2 = evaluate({lsv_method()}, data, protocol);
    const std::string j1 = report_to_json(r1);
    CHECK(j1 == report_to_json(r2));
    CHECK(j1.find("\"target_epochs\": \"all\"") != std::string::npos);
    CHECK(j1.find("\"value_space\": \"raw\"") != std::string::npos);
    save_report_json(r1, tmp / "report.json");
    CHECK(test::slurp(tmp / "report.json") == j1 + "\n");
}

TEST_SUITE_END();
