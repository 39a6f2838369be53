// Evaluation harness: reveal the first M values of each test curve, query each
// method for predictive Gaussians at later target epochs, and score squared
// error plus Gaussian log-likelihood. Cells use seeds derived from
// (protocol seed, method name, M, curve id), so any execution order gives
// bit-identical reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcroll/baselines.hpp"
#include "lcroll/curve_data.hpp"
#include "lcroll/rollout.hpp"

namespace lcroll {

// Floor applied to predictive variances inside log-likelihoods so degenerate
// (zero-spread) predictors score finitely.
inline constexpr double kVarianceFloor = 1e-8;

// log N(y; mean, max(variance, kVarianceFloor)).
double gaussian_log_density(double y, double mean, double variance);

// Lower median: element (n-1)/2 of the sorted values. Throws on empty input.
double lower_median(std::vector<double> values);

struct EvalProtocol {
    std::vector<int> observed_epochs = {4, 8, 16, 32};
    // Explicit target epochs (all above every observed count). Empty means
    // "all targets up to T": for each M, epochs M+1 .. min test-curve length.
    std::vector<int> target_epochs;
    int num_rollouts = 100;
    std::uint64_t seed = 0;
    std::string value_space = "raw";  // echoed into the report ("raw"/"normalized")
};

enum class MethodKind { rollout, static_regressor, last_seen_value, custom };

// Gaussian supplied by a custom method for (curve, observed count, target).
using DirectPredictor =
    std::function<PredictiveGaussian(const LearningCurve&, int, int)>;

struct NamedMethod {
    std::string name;
    MethodKind kind = MethodKind::rollout;
    std::shared_ptr<const OneStepPredictor> predictor;      // rollout
    std::shared_ptr<const StaticForestModel> static_model;  // static_regressor
    DirectPredictor direct;                                 // custom
};

NamedMethod rollout_method(std::string name,
                           std::shared_ptr<const OneStepPredictor> predictor);
NamedMethod static_method(std::string name,
                          std::shared_ptr<const StaticForestModel> model);
NamedMethod lsv_method(std::string name = "lsv");
NamedMethod custom_method(std::string name, DirectPredictor direct);

struct EvalCell {
    std::string method;
    int observed = 0;
    int target = 0;
    double mse = 0.0;
    double mse_std = 0.0;  // population std of squared errors over curves
    double median_ll = 0.0;
    bool has_ll = false;  // false for methods without predictive variance
    int num_curves = 0;
};

struct PredictionRecord {
    std::string method;
    int observed = 0;
    int target = 0;
    std::string curve_id;
    double true_value = 0.0;
    double pred_mean = 0.0;
    double pred_var = 0.0;
    double ll = 0.0;
    bool has_var = false;
};

struct MethodObservedSummary {
    std::string method;
    int observed = 0;
    double avg_mse = 0.0;    // mean of per-target mse cells
    double median_ll = 0.0;  // lower median pooled over (curve, target)
    bool has_ll = false;
    int num_targets = 0;
};

struct EvalReport {
    EvalProtocol protocol;
    std::vector<EvalCell> cells;
    std::vector<MethodObservedSummary> summaries;
    std::vector<PredictionRecord> predictions;
};

// Runs the full sweep. Rollout methods run one roll_out per (method, M, curve)
// to the farthest target and read every target from it. Throws when a test
// curve is shorter than the largest target or a method entry lacks its model.
EvalReport evaluate(const std::vector<NamedMethod>& methods, const CurveDataset& test,
                    const EvalProtocol& protocol);

struct AdaptationPoint {
    int observed = 0;
    double mse = 0.0;
    double median_ll = 0.0;
    bool has_ll = false;
};

// Fixed target epoch, sweeping the observed count over observed_grid.
std::vector<AdaptationPoint> adaptation_curve(const NamedMethod& method,
                                              const CurveDataset& test,
                                              int target_epoch,
                                              const std::vector<int>& observed_grid,
                                              int num_rollouts, std::uint64_t seed);

// Tidy CSVs under out_dir: metrics_by_target.csv
// (method,observed,target,mse,median_ll), adaptation.csv
// (method,observed,avg_mse,median_ll,num_targets), predicted_vs_true.csv
// (method,observed,target,true,pred_mean,pred_var,ll). Methods without a
// variance leave median_ll/pred_var/ll cells empty.
void emit_plot_data(const EvalReport& report, const std::filesystem::path& out_dir);

// Full report as sorted-key JSON (deterministic bytes for a given report).
std::string report_to_json(const EvalReport& report);
void save_report_json(const EvalReport& report, const std::filesystem::path& path);

}  // namespace lcroll
