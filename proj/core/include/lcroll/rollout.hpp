// Model-agnostic rollout engine. A predictor exposes a one-step sampling
// interface; the engine extends a partially observed curve to a horizon with R
// independent stochastic trajectories and aggregates them into a per-step
// Gaussian (mean and population variance).
//
// Trajectory r draws from its own stream seeded by (seed, "traj", r), so
// trajectories can run in any order or in parallel with identical results, and
// extending the horizon with the same seed leaves earlier steps bit-identical.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lcroll/curve_data.hpp"
#include "lcroll/forest.hpp"
#include "lcroll/rng.hpp"
#include "lcroll/vrnn.hpp"

namespace lcroll {

struct RolloutConfig {
    int num_rollouts = 100;
    int horizon = 0;  // absolute epoch T; must exceed the observed length
    std::uint64_t seed = 0;
};

struct RolloutResult {
    int first_epoch = 0;  // epoch of column 0 (observed length + 1)
    std::vector<std::vector<double>> trajectories;  // R rows, horizon - M columns
    std::vector<double> mean;
    std::vector<double> variance;  // population (1/R)
};

// Per-trajectory state owned by the predictor (recurrent state, dropout masks).
struct RolloutContext {
    virtual ~RolloutContext() = default;
};

class OneStepPredictor {
public:
    virtual ~OneStepPredictor() = default;

    // Window length K the step function consumes.
    virtual int window_size() const = 0;
    // Minimum observed prefix: K for windowed predictors, 0 for recurrent ones
    // (their state starts from the dummy y_0 = 0).
    virtual int min_observed() const = 0;

    // Called once per trajectory before stepping. Recurrent predictors sample
    // dropout masks from rng here and consume the dummy y_0 plus all observed
    // values except the last (the last enters through the first step window).
    virtual std::unique_ptr<RolloutContext> begin_rollout(
        const HyperparameterConfig& config, const std::vector<double>& observed,
        Rng& rng) const = 0;

    // Samples the next value. window holds the last K values, oldest first.
    // Deterministic given (ctx, window, rng state).
    virtual double sample_step(RolloutContext& ctx, const HyperparameterConfig& config,
                               const std::vector<double>& window, Rng& rng) const = 0;
};

// Computes per-step mean and population variance of an R x H trajectory
// matrix. Identical trajectories (R = 1 included) give exactly zero variance.
void aggregate_trajectories(const std::vector<std::vector<double>>& trajectories,
                            std::vector<double>& mean, std::vector<double>& variance);

// Extends observed = [y_1..y_M] to epoch cfg.horizon with cfg.num_rollouts
// trajectories. Trajectories never alter observed values; predictions start at
// epoch M+1. Throws when horizon <= M or M < predictor.min_observed().
RolloutResult roll_out(const OneStepPredictor& predictor,
                       const HyperparameterConfig& config,
                       const std::vector<double>& observed, const RolloutConfig& cfg);

// Forest over inputs [config, y_{t-K}, .., y_{t-1}]; each step samples from the
// forest's predictive Gaussian. Requires forest.feature_dim > window.
std::unique_ptr<OneStepPredictor> windowed_forest_predictor(RegressionForest forest,
                                                            int window);

// Recurrent predictor: one dropout mask set per trajectory, held fixed across
// steps; the step output is the network output itself (spread comes from the
// masks alone).
std::unique_ptr<OneStepPredictor> vrnn_predictor(VrnnModel model);

// One row per (curve, t) for t in K+1..T: features = config ++ [y_{t-K}..y_{t-1}],
// target = y_t. Rows ordered by curve, then t. Throws when a curve is shorter
// than K+1.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> make_training_windows(
    const CurveDataset& dataset, int window);

// CSV with header epoch,mean,variance.
void save_rollout_csv(const RolloutResult& result, const std::filesystem::path& path);
// CSV with header epoch,rollout_idx,value; one block per trajectory.
void save_trajectories_csv(const RolloutResult& result,
                           const std::filesystem::path& path);

}  // namespace lcroll
