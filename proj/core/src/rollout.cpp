#include "lcroll/rollout.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lcroll/parallel.hpp"
#include "lcroll/text_format.hpp"

namespace lcroll {

namespace {

struct ForestContext : RolloutContext {};

class ForestPredictor final : public OneStepPredictor {
public:
    ForestPredictor(RegressionForest forest, int window)
        : forest_(std::move(forest)), window_(window) {
        if (window_ < 1)
            throw std::invalid_argument("rollout: window must be >= 1");
        if (forest_.feature_dim <= window_)
            throw std::invalid_argument(
                "rollout: forest feature_dim must exceed the window size");
    }

    int window_size() const override { return window_; }
    int min_observed() const override { return window_; }

    std::unique_ptr<RolloutContext> begin_rollout(const HyperparameterConfig& config,
                                                  const std::vector<double>&,
                                                  Rng&) const override {
        if (static_cast<int>(config.values.size()) + window_ != forest_.feature_dim)
            throw std::invalid_argument(
                "rollout: config dimension does not match forest features");
        return std::make_unique<ForestContext>();
    }

    double sample_step(RolloutContext&, const HyperparameterConfig& config,
                       const std::vector<double>& window, Rng& rng) const override {
        std::vector<double> x(config.values);
        x.insert(x.end(), window.begin(), window.end());
        const PredictiveGaussian g = forest_predict(forest_, x);
        return sample_prediction(g, rng);
    }

private:
    RegressionForest forest_;
    int window_;
};

struct VrnnContext : RolloutContext {
    DropoutMasks masks;
    VrnnState state;
};

class VrnnPredictor final : public OneStepPredictor {
public:
    explicit VrnnPredictor(VrnnModel model) : model_(std::move(model)) {
        if (model_.levels.empty())
            throw std::invalid_argument("rollout: model has no levels");
    }

    int window_size() const override { return 1; }
    int min_observed() const override { return 0; }

    std::unique_ptr<RolloutContext> begin_rollout(const HyperparameterConfig& config,
                                                  const std::vector<double>& observed,
                                                  Rng& rng) const override {
        auto ctx = std::make_unique<VrnnContext>();
        ctx->masks = sample_masks(model_, rng);
        ctx->state = zero_state(model_);
        // Consume y_0 = 0 plus all observed values but the last; the last (or
        // the dummy itself when nothing was observed) arrives via the window.
        double prev = 0.0;
        for (double obs : observed) {
            ctx->state = mc_rollout_step(model_, config, prev, ctx->state, ctx->masks).second;
            prev = obs;
        }
        return ctx;
    }

    double sample_step(RolloutContext& ctx, const HyperparameterConfig& config,
                       const std::vector<double>& window, Rng&) const override {
        auto& vc = static_cast<VrnnContext&>(ctx);
        auto [y, next] =
            mc_rollout_step(model_, config, window.back(), vc.state, vc.masks);
        vc.state = std::move(next);
        return y;
    }

private:
    VrnnModel model_;
};

}  // namespace

void aggregate_trajectories(const std::vector<std::vector<double>>& trajectories,
                            std::vector<double>& mean, std::vector<double>& variance) {
    if (trajectories.empty())
        throw std::invalid_argument("rollout: no trajectories to aggregate");
    const std::size_t num = trajectories.size();
    const std::size_t len = trajectories.front().size();
    for (const auto& traj : trajectories)
        if (traj.size() != len)
            throw std::invalid_argument("rollout: ragged trajectory matrix");

    mean.assign(len, 0.0);
    variance.assign(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
        // Shifted mean keeps identical trajectories at exactly zero variance.
        const double base = trajectories[0][t];
        double delta_sum = 0.0;
        for (std::size_t r = 0; r < num; ++r) delta_sum += trajectories[r][t] - base;
        const double mu = base + delta_sum / static_cast<double>(num);
        double sq_sum = 0.0;
        for (std::size_t r = 0; r < num; ++r) {
            const double d = trajectories[r][t] - mu;
            sq_sum += d * d;
        }
        mean[t] = mu;
        variance[t] = sq_sum / static_cast<double>(num);
    }
}

RolloutResult roll_out(const OneStepPredictor& predictor,
                       const HyperparameterConfig& config,
                       const std::vector<double>& observed, const RolloutConfig& cfg) {
    if (cfg.num_rollouts < 1)
        throw std::invalid_argument("rollout: num_rollouts must be >= 1");
    const int observed_len = static_cast<int>(observed.size());
    if (cfg.horizon <= observed_len)
        throw std::invalid_argument("rollout: horizon must exceed the observed length");
    if (observed_len < predictor.min_observed())
        throw std::invalid_argument(
            "rollout: observed prefix shorter than the predictor window");
    for (double v : observed)
        if (!std::isfinite(v))
            throw std::invalid_argument("rollout: non-finite observed value");

    const int window = predictor.window_size();
    const std::size_t steps = static_cast<std::size_t>(cfg.horizon - observed_len);

    RolloutResult result;
    result.first_epoch = observed_len + 1;
    result.trajectories.resize(static_cast<std::size_t>(cfg.num_rollouts));

    parallel_for(static_cast<std::size_t>(cfg.num_rollouts), [&](std::size_t r) {
        Rng rng(derive_seed(cfg.seed, "traj", static_cast<std::uint64_t>(r)));
        auto ctx = predictor.begin_rollout(config, observed, rng);

        std::vector<double> win;
        if (observed_len >= window) {
            win.assign(observed.end() - window, observed.end());
        } else {
            // Recurrent cold start: pad the window with the dummy start value.
            win.assign(static_cast<std::size_t>(window - observed_len), 0.0);
            win.insert(win.end(), observed.begin(), observed.end());
        }

        std::vector<double>& traj = result.trajectories[r];
        traj.reserve(steps);
        for (std::size_t s = 0; s < steps; ++s) {
            const double y = predictor.sample_step(*ctx, config, win, rng);
            traj.push_back(y);
            win.erase(win.begin());
            win.push_back(y);
        }
    });

    aggregate_trajectories(result.trajectories, result.mean, result.variance);
    return result;
}

std::unique_ptr<OneStepPredictor> windowed_forest_predictor(RegressionForest forest,
                                                            int window) {
    return std::make_unique<ForestPredictor>(std::move(forest), window);
}

std::unique_ptr<OneStepPredictor> vrnn_predictor(VrnnModel model) {
    return std::make_unique<VrnnPredictor>(std::move(model));
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> make_training_windows(
    const CurveDataset& dataset, int window) {
    if (window < 1) throw std::invalid_argument("rollout: window must be >= 1");
    dataset.validate();

    std::size_t rows = 0;
    for (const auto& curve : dataset.curves) {
        if (static_cast<int>(curve.values.size()) < window + 1)
            throw std::invalid_argument("rollout: curve '" + curve.id +
                                        "' shorter than window + 1");
        rows += curve.values.size() - static_cast<std::size_t>(window);
    }

    const auto cols = static_cast<Eigen::Index>(dataset.config_dim + window);
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), cols);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    for (const auto& curve : dataset.curves) {
        for (std::size_t t = static_cast<std::size_t>(window); t < curve.values.size();
             ++t) {
            Eigen::Index col = 0;
            for (double v : curve.config.values) features(row, col++) = v;
            for (std::size_t k = t - static_cast<std::size_t>(window); k < t; ++k)
                features(row, col++) = curve.values[k];
            targets(row) = curve.values[t];
            ++row;
        }
    }
    return {std::move(features), std::move(targets)};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    return out;
}

}  // namespace

void save_rollout_csv(const RolloutResult& result, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "epoch,mean,variance\n";
    for (std::size_t t = 0; t < result.mean.size(); ++t)
        out << result.first_epoch + static_cast<int>(t) << ','
            << format_double(result.mean[t]) << ',' << format_double(result.variance[t])
            << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

void save_trajectories_csv(const RolloutResult& result,
                           const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "epoch,rollout_idx,value\n";
    for (std::size_t r = 0; r < result.trajectories.size(); ++r)
        for (std::size_t t = 0; t < result.trajectories[r].size(); ++t)
            out << result.first_epoch + static_cast<int>(t) << ',' << r << ','
                << format_double(result.trajectories[r][t]) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

}  // namespace lcroll
