#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>

#include "lcroll/curve_data.hpp"
#include "lcroll/evaluation.hpp"
#include "lcroll/rollout.hpp"
#include "lcroll/synth_bench.hpp"
#include "lcroll/text_format.hpp"
#include "manifest.hpp"
#include "model_files.hpp"

namespace lcroll::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Semantic flag problems that CLI11's own checks cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Removes every tracked file unless the command committed, so failures leave
// no partial outputs behind.
class OutputGuard {
public:
    ~OutputGuard() {
        if (committed_) return;
        for (const auto& path : paths_) {
            std::error_code ec;
            fs::remove(path, ec);
        }
    }
    void track(const fs::path& path) { paths_.push_back(path); }
    void commit() { committed_ = true; }

private:
    std::vector<fs::path> paths_;
    bool committed_ = false;
};

class WallClock {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

FileFormat infer_format(const fs::path& path, const std::string& flag) {
    if (flag == "csv") return FileFormat::csv;
    if (flag == "json") return FileFormat::json;
    if (!flag.empty()) throw UsageError("unknown --format '" + flag + "'");
    const std::string ext = path.extension().string();
    if (ext == ".csv") return FileFormat::csv;
    if (ext == ".json") return FileFormat::json;
    throw UsageError(path.string() +
                     ": cannot infer file format from the extension; pass --format");
}

fs::path manifest_path_for(const fs::path& out) {
    fs::path p = out;
    p += ".manifest.json";
    return p;
}

const LearningCurve& find_curve(const CurveDataset& dataset, const std::string& id) {
    for (const auto& curve : dataset.curves)
        if (curve.id == id) return curve;
    std::string msg = "curve id '" + id + "' not in dataset; available:";
    const std::size_t shown = std::min<std::size_t>(dataset.curves.size(), 50);
    for (std::size_t i = 0; i < shown; ++i) msg += ' ' + dataset.curves[i].id;
    if (shown < dataset.curves.size()) msg += " ...";
    throw std::runtime_error(msg);
}

// ---- generate ----

struct GenerateParams {
    int configs = 0;
    int epochs = 50;
    double noise = 0.01;
    std::uint64_t seed = 0;
    std::string out;
    std::string format;
};

void cmd_generate(const GenerateParams& p) {
    const WallClock clock;
    GeneratorSpec spec;
    spec.num_configs = p.configs;
    spec.num_epochs = p.epochs;
    spec.noise_std = p.noise;
    spec.seed = p.seed;

    const CurveDataset dataset = generate_benchmark(ConfigSpace::mlp_benchmark(), spec);

    const fs::path out(p.out);
    const FileFormat format = infer_format(out, p.format);
    OutputGuard guard;
    guard.track(out);
    save_dataset(dataset, out, format);

    RunManifest manifest;
    manifest.command = "generate";
    manifest.config = {{"configs", p.configs},
                       {"epochs", p.epochs},
                       {"noise", p.noise},
                       {"curve_family", "exp_saturation"},
                       {"out", p.out},
                       {"format", format == FileFormat::csv ? "csv" : "json"}};
    manifest.seeds = {{"root", p.seed},
                      {"configs", derive_seed(p.seed, "configs")}};
    manifest.add_output(out);
    manifest.wall_ms = clock.ms();
    const fs::path mpath = manifest_path_for(out);
    guard.track(mpath);
    write_manifest(manifest, mpath);
    guard.commit();

    std::cout << "wrote " << dataset.curves.size() << " curves x " << p.epochs
              << " epochs to " << p.out << '\n';
}

// ---- train ----

struct ForestFlags {
    int trees = ForestTrainConfig{}.num_trees;
    int max_depth = ForestTrainConfig{}.max_depth;
    int min_leaf = ForestTrainConfig{}.min_samples_leaf;
    double feature_subsample = ForestTrainConfig{}.feature_subsample;
    bool no_bootstrap = false;
};

struct VrnnFlags {
    VrnnArch arch;
    double dropout = 0.1;
    double lr = VrnnTrainConfig{}.initial_lr;
    double final_lr_fraction = VrnnTrainConfig{}.final_lr_fraction;
    double momentum = VrnnTrainConfig{}.momentum;
    int batch = VrnnTrainConfig{}.batch_size;
    int epochs = VrnnTrainConfig{}.epochs;
    std::string scheduler = "cos";
    int curriculum = VrnnTrainConfig{}.curriculum_initial_len;
};

struct TrainParams {
    std::string model;
    std::string data;
    std::string out;
    std::string format;
    std::uint64_t seed = 0;
    double test_fraction = 0.25;
    int window = 4;
    ForestFlags forest;
    VrnnFlags vrnn;
};

LrScheduler parse_scheduler(const std::string& name) {
    if (name == "cos") return LrScheduler::cos;
    if (name == "exp") return LrScheduler::exp;
    if (name == "const") return LrScheduler::constant;
    throw UsageError("unknown --scheduler '" + name + "'");
}

void write_split_record(const fs::path& path, const CurveDataset& full,
                        const CurveDataset& train_side, const CurveDataset& test_side,
                        const TrainParams& p, std::uint64_t split_seed) {
    json j;
    j["format_version"] = 1;
    j["dataset_name"] = full.name;
    j["data_path"] = p.data;
    j["test_fraction"] = p.test_fraction;
    j["root_seed"] = p.seed;
    j["split_seed"] = split_seed;
    auto ids = [](const CurveDataset& d) {
        std::vector<std::string> out;
        out.reserve(d.curves.size());
        for (const auto& c : d.curves) out.push_back(c.id);
        return out;
    };
    j["train_ids"] = ids(train_side);
    j["test_ids"] = ids(test_side);
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

void cmd_train(const TrainParams& p) {
    const WallClock clock;
    const fs::path data_path(p.data);
    const CurveDataset dataset =
        load_dataset(data_path, infer_format(data_path, p.format));

    SplitSpec split_spec;
    split_spec.test_fraction = p.test_fraction;
    split_spec.seed = derive_seed(p.seed, "split");
    const auto [train_side, test_side] = split(dataset, split_spec);

    const fs::path out(p.out);
    fs::path split_path = out;
    split_path += ".split.json";

    OutputGuard guard;
    RunManifest manifest;
    manifest.command = "train";
    manifest.seeds["root"] = p.seed;
    manifest.seeds["split"] = split_spec.seed;
    manifest.config = {{"model", p.model},
                       {"data", p.data},
                       {"out", p.out},
                       {"test_fraction", p.test_fraction}};

    guard.track(out);
    if (p.model == "rf" || p.model == "rfb") {
        ForestTrainConfig cfg;
        cfg.num_trees = p.forest.trees;
        cfg.max_depth = p.forest.max_depth;
        cfg.min_samples_leaf = p.forest.min_leaf;
        cfg.feature_subsample = p.forest.feature_subsample;
        cfg.bootstrap = !p.forest.no_bootstrap;
        cfg.seed = derive_seed(p.seed, "forest");
        manifest.seeds["forest"] = cfg.seed;
        manifest.config["trees"] = cfg.num_trees;
        manifest.config["max_depth"] = cfg.max_depth;
        manifest.config["min_samples_leaf"] = cfg.min_samples_leaf;
        manifest.config["feature_subsample"] = cfg.feature_subsample;
        manifest.config["bootstrap"] = cfg.bootstrap;

        if (p.model == "rf") {
            manifest.config["window"] = p.window;
            const auto [features, targets] = make_training_windows(train_side, p.window);
            const RegressionForest forest = fit_forest(features, targets, cfg);
            save_rf_model(forest, p.window, out);
        } else {
            const StaticForestModel model = fit_static(train_side, cfg);
            save_rfb_model(model, out);
        }
    } else {  // vrnn
        VrnnTrainConfig cfg;
        cfg.initial_lr = p.vrnn.lr;
        cfg.final_lr_fraction = p.vrnn.final_lr_fraction;
        cfg.momentum = p.vrnn.momentum;
        cfg.batch_size = p.vrnn.batch;
        cfg.epochs = p.vrnn.epochs;
        cfg.scheduler = parse_scheduler(p.vrnn.scheduler);
        cfg.curriculum_initial_len = p.vrnn.curriculum;
        cfg.seed = derive_seed(p.seed, "train");
        const std::uint64_t init_seed = derive_seed(p.seed, "init");
        manifest.seeds["init"] = init_seed;
        manifest.seeds["train"] = cfg.seed;
        manifest.config["lstm_units"] = p.vrnn.arch.lstm_units;
        manifest.config["mlp_units"] = p.vrnn.arch.mlp_units;
        manifest.config["config_mlp_units"] = p.vrnn.arch.config_mlp_units;
        manifest.config["stacks"] = p.vrnn.arch.num_stacked_lstms;
        manifest.config["mlp_layers"] = p.vrnn.arch.mlp_layers;
        manifest.config["config_mlp_layers"] = p.vrnn.arch.config_mlp_layers;
        manifest.config["dropout"] = p.vrnn.dropout;
        manifest.config["lr"] = cfg.initial_lr;
        manifest.config["final_lr_fraction"] = cfg.final_lr_fraction;
        manifest.config["momentum"] = cfg.momentum;
        manifest.config["batch"] = cfg.batch_size;
        manifest.config["epochs"] = cfg.epochs;
        manifest.config["scheduler"] = p.vrnn.scheduler;
        manifest.config["curriculum"] = cfg.curriculum_initial_len;

        VrnnModel model =
            init_model(dataset.config_dim, p.vrnn.arch, p.vrnn.dropout, init_seed);
        auto [trained, log] = lcroll::train(std::move(model), train_side, cfg);
        for (const auto& e : log.epochs) {
            std::cout << "epoch " << e.epoch << '/' << cfg.epochs
                      << " lr=" << format_double(e.lr) << " len=" << e.curriculum_len
                      << " loss=" << format_double(e.mean_loss);
            if (e.skipped_batches > 0)
                std::cout << " skipped_batches=" << e.skipped_batches;
            std::cout << '\n';
        }
        save_vrnn_model(trained, out);
    }

    guard.track(split_path);
    write_split_record(split_path, dataset, train_side, test_side, p, split_spec.seed);

    manifest.add_input(data_path);
    manifest.add_output(out);
    manifest.add_output(split_path);
    manifest.wall_ms = clock.ms();
    const fs::path mpath = manifest_path_for(out);
    guard.track(mpath);
    write_manifest(manifest, mpath);
    guard.commit();

    std::cout << "trained " << p.model << " on " << train_side.curves.size()
              << " curves (" << test_side.curves.size() << " held out); wrote " << p.out
              << '\n';
}

// ---- rollout ----

struct RolloutParams {
    std::string model;
    std::string data;
    std::string format;
    std::string curve;
    int observed = 0;
    int horizon = 0;
    int rollouts = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string trajectories;
};

void cmd_rollout(const RolloutParams& p) {
    const WallClock clock;
    const fs::path model_path(p.model);
    std::unique_ptr<OneStepPredictor> predictor;
    switch (sniff_model_kind(model_path)) {
        case ModelKind::rf: {
            RfModelFile file = load_rf_model(model_path);
            predictor = windowed_forest_predictor(std::move(file.forest), file.window);
            break;
        }
        case ModelKind::vrnn:
            predictor = vrnn_predictor(load_vrnn_model(model_path));
            break;
        case ModelKind::rfb:
            throw UsageError(
                "an rfb model is a static regressor and cannot roll out; use evaluate");
    }

    const fs::path data_path(p.data);
    const CurveDataset dataset =
        load_dataset(data_path, infer_format(data_path, p.format));
    const LearningCurve& curve = find_curve(dataset, p.curve);
    if (p.observed > static_cast<int>(curve.values.size()))
        throw std::runtime_error("curve '" + p.curve + "' has only " +
                                 std::to_string(curve.values.size()) + " epochs");
    const std::vector<double> observed(curve.values.begin(),
                                       curve.values.begin() + p.observed);

    RolloutConfig cfg;
    cfg.num_rollouts = p.rollouts;
    cfg.horizon = p.horizon;
    cfg.seed = p.seed;
    const RolloutResult result = roll_out(*predictor, curve.config, observed, cfg);

    const fs::path out(p.out);
    OutputGuard guard;
    guard.track(out);
    save_rollout_csv(result, out);

    RunManifest manifest;
    manifest.command = "rollout";
    manifest.config = {{"model", p.model}, {"data", p.data},
                       {"curve", p.curve},  {"observed", p.observed},
                       {"horizon", p.horizon}, {"rollouts", p.rollouts},
                       {"out", p.out}};
    manifest.seeds = {{"root", p.seed}};
    manifest.add_input(model_path);
    manifest.add_input(data_path);
    manifest.add_output(out);
    if (!p.trajectories.empty()) {
        const fs::path traj_path(p.trajectories);
        guard.track(traj_path);
        save_trajectories_csv(result, traj_path);
        manifest.config["trajectories"] = p.trajectories;
        manifest.add_output(traj_path);
    }
    manifest.wall_ms = clock.ms();
    const fs::path mpath = manifest_path_for(out);
    guard.track(mpath);
    write_manifest(manifest, mpath);
    guard.commit();

    std::cout << "rolled out '" << p.curve << "' to epoch " << p.horizon << " with "
              << p.rollouts << " trajectories; wrote " << p.out << '\n';
}

// ---- evaluate ----

struct EvaluateParams {
    std::string data;
    std::string format;
    std::string split;
    std::vector<std::string> model_specs;  // NAME=PATH
    bool no_lsv = false;
    std::vector<int> observed = {4, 8, 16, 32};
    std::string targets = "all";
    int rollouts = 100;
    std::uint64_t seed = 0;
    std::string out;
};

std::vector<int> parse_targets(const std::string& text) {
    if (text == "all") return {};
    std::vector<int> targets;
    for (std::string_view token : split_csv_line(text)) {
        const long long t = parse_int(token);
        if (t < 1) throw UsageError("--targets entries must be >= 1");
        targets.push_back(static_cast<int>(t));
    }
    if (targets.empty()) throw UsageError("--targets needs 'all' or a list of epochs");
    return targets;
}

CurveDataset apply_split_record(const CurveDataset& dataset, const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": malformed split record: " + e.what());
    }
    std::vector<std::string> test_ids;
    try {
        test_ids = j.at("test_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": malformed split record: " + e.what());
    }
    const std::set<std::string> wanted(test_ids.begin(), test_ids.end());
    for (const auto& id : test_ids)
        if (std::none_of(dataset.curves.begin(), dataset.curves.end(),
                         [&](const LearningCurve& c) { return c.id == id; }))
            throw std::runtime_error(path.string() +
                                     ": split record references unknown curve id '" +
                                     id + "'");
    CurveDataset test = dataset;
    test.curves.clear();
    for (const auto& curve : dataset.curves)
        if (wanted.count(curve.id)) test.curves.push_back(curve);
    return test;
}

void cmd_evaluate(const EvaluateParams& p) {
    const WallClock clock;
    const fs::path data_path(p.data);
    CurveDataset dataset = load_dataset(data_path, infer_format(data_path, p.format));
    if (!p.split.empty()) dataset = apply_split_record(dataset, fs::path(p.split));

    std::vector<NamedMethod> methods;
    std::vector<fs::path> model_paths;
    for (const std::string& spec : p.model_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw UsageError("--model expects NAME=PATH, got '" + spec + "'");
        const std::string name = spec.substr(0, eq);
        const fs::path path(spec.substr(eq + 1));
        model_paths.push_back(path);
        switch (sniff_model_kind(path)) {
            case ModelKind::rf: {
                auto file = std::make_shared<RfModelFile>(load_rf_model(path));
                methods.push_back(rollout_method(
                    name, std::shared_ptr<const OneStepPredictor>(
                              windowed_forest_predictor(std::move(file->forest),
                                                        file->window))));
                break;
            }
            case ModelKind::rfb:
                methods.push_back(static_method(
                    name, std::make_shared<const StaticForestModel>(
                              load_rfb_model(path))));
                break;
            case ModelKind::vrnn:
                methods.push_back(rollout_method(
                    name, std::shared_ptr<const OneStepPredictor>(
                              vrnn_predictor(load_vrnn_model(path)))));
                break;
        }
    }
    if (!p.no_lsv) methods.push_back(lsv_method());
    if (methods.empty())
        throw UsageError("nothing to evaluate: pass --model NAME=PATH or drop --no-lsv");

    EvalProtocol protocol;
    protocol.observed_epochs = p.observed;
    protocol.target_epochs = parse_targets(p.targets);
    protocol.num_rollouts = p.rollouts;
    protocol.seed = p.seed;
    const EvalReport report = evaluate(methods, dataset, protocol);

    const fs::path out_dir(p.out);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": unwritable path");

    OutputGuard guard;
    const fs::path report_path = out_dir / "report.json";
    guard.track(report_path);
    guard.track(out_dir / "metrics_by_target.csv");
    guard.track(out_dir / "adaptation.csv");
    guard.track(out_dir / "predicted_vs_true.csv");
    save_report_json(report, report_path);
    emit_plot_data(report, out_dir);

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config = {{"data", p.data},
                       {"models", p.model_specs},
                       {"lsv", !p.no_lsv},
                       {"observed", p.observed},
                       {"targets", p.targets},
                       {"rollouts", p.rollouts},
                       {"out", p.out}};
    if (!p.split.empty()) manifest.config["split"] = p.split;
    manifest.seeds = {{"root", p.seed}};
    manifest.add_input(data_path);
    if (!p.split.empty()) manifest.add_input(fs::path(p.split));
    for (const auto& path : model_paths) manifest.add_input(path);
    manifest.add_output(report_path);
    manifest.add_output(out_dir / "metrics_by_target.csv");
    manifest.add_output(out_dir / "adaptation.csv");
    manifest.add_output(out_dir / "predicted_vs_true.csv");
    manifest.wall_ms = clock.ms();
    const fs::path mpath = out_dir / "manifest.json";
    guard.track(mpath);
    write_manifest(manifest, mpath);
    guard.commit();

    auto pad = [](std::string text, std::size_t width) {
        while (text.size() < width) text += ' ';
        return text + "  ";
    };
    std::cout << pad("method", 14) << pad("observed", 8) << pad("avg_mse", 22)
              << "median_ll\n";
    for (const auto& s : report.summaries)
        std::cout << pad(s.method, 14) << pad(std::to_string(s.observed), 8)
                  << pad(format_double(s.avg_mse), 22)
                  << (s.has_ll ? format_double(s.median_ll) : std::string("-")) << '\n';
    std::cout << "wrote " << report_path.string() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Probabilistic learning-curve extrapolation toolkit"};
    app.require_subcommand(1);

    GenerateParams gen;
    auto* sub_gen = app.add_subcommand("generate", "Generate a synthetic benchmark");
    sub_gen->add_option("--configs", gen.configs, "Number of sampled configurations")
        ->required()
        ->check(CLI::PositiveNumber);
    sub_gen->add_option("--epochs", gen.epochs, "Curve length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub_gen->add_option("--noise", gen.noise, "Per-epoch noise std")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub_gen->add_option("--seed", gen.seed, "Root seed")->capture_default_str();
    sub_gen->add_option("--out", gen.out, "Output dataset path")->required();
    sub_gen->add_option("--format", gen.format, "csv or json (default: by extension)");
    sub_gen->callback([&] { cmd_generate(gen); });

    TrainParams tr;
    auto* sub_tr = app.add_subcommand("train", "Split a dataset and train a model");
    sub_tr->add_option("--model", tr.model, "vrnn, rf (windowed rollout), or rfb (static)")
        ->required()
        ->check(CLI::IsMember({"vrnn", "rf", "rfb"}));
    sub_tr->add_option("--data", tr.data, "Dataset path")->required();
    sub_tr->add_option("--out", tr.out, "Output model path")->required();
    sub_tr->add_option("--format", tr.format, "csv or json (default: by extension)");
    sub_tr->add_option("--seed", tr.seed, "Root seed")->capture_default_str();
    sub_tr->add_option("--test-fraction", tr.test_fraction, "Held-out curve fraction")
        ->capture_default_str();
    auto* opt_window =
        sub_tr->add_option("--window", tr.window, "rf only: lagged-value window K")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    auto* opt_trees = sub_tr->add_option("--trees", tr.forest.trees, "Forest size")
                          ->check(CLI::PositiveNumber)
                          ->capture_default_str();
    auto* opt_depth =
        sub_tr->add_option("--max-depth", tr.forest.max_depth, "Maximum tree depth")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    auto* opt_leaf =
        sub_tr->add_option("--min-leaf", tr.forest.min_leaf, "Minimum samples per leaf")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    auto* opt_subs = sub_tr->add_option("--feature-subsample",
                                        tr.forest.feature_subsample,
                                        "Fraction of features tried per split")
                         ->capture_default_str();
    auto* opt_boot = sub_tr->add_flag("--no-bootstrap", tr.forest.no_bootstrap,
                                      "Disable bootstrap resampling");
    auto* opt_lstm = sub_tr->add_option("--lstm-units", tr.vrnn.arch.lstm_units)
                         ->check(CLI::PositiveNumber)
                         ->capture_default_str();
    auto* opt_mlp = sub_tr->add_option("--mlp-units", tr.vrnn.arch.mlp_units)
                        ->check(CLI::PositiveNumber)
                        ->capture_default_str();
    auto* opt_cmlp =
        sub_tr->add_option("--config-mlp-units", tr.vrnn.arch.config_mlp_units)
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    auto* opt_stacks = sub_tr->add_option("--stacks", tr.vrnn.arch.num_stacked_lstms,
                                          "Stacked recurrent levels (1 or 2)")
                           ->check(CLI::Range(1, 2))
                           ->capture_default_str();
    auto* opt_mlpl = sub_tr->add_option("--mlp-layers", tr.vrnn.arch.mlp_layers)
                         ->check(CLI::Range(1, 2))
                         ->capture_default_str();
    auto* opt_cmlpl =
        sub_tr->add_option("--config-mlp-layers", tr.vrnn.arch.config_mlp_layers)
            ->check(CLI::Range(1, 2))
            ->capture_default_str();
    auto* opt_drop = sub_tr->add_option("--dropout", tr.vrnn.dropout)
                         ->check(CLI::Range(0.0, 0.999))
                         ->capture_default_str();
    auto* opt_lr = sub_tr->add_option("--lr", tr.vrnn.lr)->capture_default_str();
    auto* opt_flf =
        sub_tr->add_option("--final-lr-fraction", tr.vrnn.final_lr_fraction)
            ->capture_default_str();
    auto* opt_mom = sub_tr->add_option("--momentum", tr.vrnn.momentum)
                        ->capture_default_str();
    auto* opt_batch = sub_tr->add_option("--batch", tr.vrnn.batch)
                          ->check(CLI::PositiveNumber)
                          ->capture_default_str();
    auto* opt_ep = sub_tr->add_option("--epochs", tr.vrnn.epochs, "Training epochs")
                       ->check(CLI::PositiveNumber)
                       ->capture_default_str();
    auto* opt_sched = sub_tr->add_option("--scheduler", tr.vrnn.scheduler)
                          ->check(CLI::IsMember({"cos", "exp", "const"}))
                          ->capture_default_str();
    auto* opt_curr =
        sub_tr->add_option("--curriculum", tr.vrnn.curriculum,
                           "Initial truncation length of the linear ramp")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    sub_tr->callback([&] {
        const bool is_vrnn = tr.model == "vrnn";
        const bool is_rf = tr.model == "rf";
        const std::vector<std::pair<const CLI::Option*, const char*>> forest_only = {
            {opt_trees, "--trees"},         {opt_depth, "--max-depth"},
            {opt_leaf, "--min-leaf"},       {opt_subs, "--feature-subsample"},
            {opt_boot, "--no-bootstrap"}};
        const std::vector<std::pair<const CLI::Option*, const char*>> vrnn_only = {
            {opt_lstm, "--lstm-units"},     {opt_mlp, "--mlp-units"},
            {opt_cmlp, "--config-mlp-units"}, {opt_stacks, "--stacks"},
            {opt_mlpl, "--mlp-layers"},     {opt_cmlpl, "--config-mlp-layers"},
            {opt_drop, "--dropout"},        {opt_lr, "--lr"},
            {opt_flf, "--final-lr-fraction"}, {opt_mom, "--momentum"},
            {opt_batch, "--batch"},         {opt_ep, "--epochs"},
            {opt_sched, "--scheduler"},     {opt_curr, "--curriculum"}};
        if (is_vrnn) {
            if (opt_window->count() > 0)
                throw UsageError("--window only applies to --model rf");
            for (const auto& [opt, name] : forest_only)
                if (opt->count() > 0)
                    throw UsageError(std::string(name) +
                                     " only applies to --model rf or rfb");
        } else {
            if (!is_rf && opt_window->count() > 0)
                throw UsageError("--window only applies to --model rf");
            for (const auto& [opt, name] : vrnn_only)
                if (opt->count() > 0)
                    throw UsageError(std::string(name) +
                                     " only applies to --model vrnn");
        }
        cmd_train(tr);
    });

    RolloutParams ro;
    auto* sub_ro = app.add_subcommand("rollout", "Extrapolate one curve with a model");
    sub_ro->add_option("--model", ro.model, "Model file (rf or vrnn)")->required();
    sub_ro->add_option("--data", ro.data, "Dataset path")->required();
    sub_ro->add_option("--format", ro.format, "csv or json (default: by extension)");
    sub_ro->add_option("--curve", ro.curve, "Curve id")->required();
    sub_ro->add_option("--observed", ro.observed, "Observed prefix length M")
        ->required()
        ->check(CLI::NonNegativeNumber);
    sub_ro->add_option("--horizon", ro.horizon, "Final epoch T")
        ->required()
        ->check(CLI::PositiveNumber);
    sub_ro->add_option("--rollouts", ro.rollouts, "Trajectory count R")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub_ro->add_option("--seed", ro.seed, "Root seed")->capture_default_str();
    sub_ro->add_option("--out", ro.out, "Output CSV (epoch,mean,variance)")->required();
    sub_ro->add_option("--trajectories", ro.trajectories,
                       "Optional per-trajectory CSV path");
    sub_ro->callback([&] { cmd_rollout(ro); });

    EvaluateParams ev;
    auto* sub_ev = app.add_subcommand("evaluate", "Score models on a test dataset");
    sub_ev->add_option("--data", ev.data, "Dataset path")->required();
    sub_ev->add_option("--format", ev.format, "csv or json (default: by extension)");
    sub_ev->add_option("--split", ev.split,
                       "Split record from train; restricts --data to its test ids");
    sub_ev->add_option("--model", ev.model_specs, "NAME=PATH (repeatable)");
    sub_ev->add_flag("--no-lsv", ev.no_lsv, "Drop the last-seen-value baseline");
    sub_ev->add_option("--observed", ev.observed, "Observed-epoch grid")
        ->delimiter(',')
        ->capture_default_str();
    sub_ev->add_option("--targets,--target", ev.targets,
                       "'all' or a comma-separated list of target epochs")
        ->capture_default_str();
    sub_ev->add_option("--rollouts", ev.rollouts, "Trajectory count R")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub_ev->add_option("--seed", ev.seed, "Root seed")->capture_default_str();
    sub_ev->add_option("--out", ev.out, "Output directory")->required();
    sub_ev->callback([&] { cmd_evaluate(ev); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("lcroll");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& a : full) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lcroll::cli
