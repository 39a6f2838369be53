// Configuration-conditioned stacked-LSTM regressor with variational dropout.
// One prediction step, with two stacked levels:
//
//   e_l   = encoder_l(theta)            config MLP, computed once per sequence
//   x1_t  = [e_1 (.) z_1 , y_{t-1}]     z_l Bernoulli(1-d), fixed across t
//   ht1_t = lstm_1(x1_t)                states start at zero, carried over t
//   x2_t  = [e_2 (.) z_2 , ht1_t]
//   ht2_t = lstm_2(x2_t)
//   y~_t  = head(ht2_t)
//
// Masks are applied raw (no 1/(1-d) rescaling) at train and test; Monte-Carlo
// rollouts average over masks instead. Exact BPTT gradients; SGD + momentum
// training with cos/exp/const LR schedules and a sequence-length curriculum.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcroll/curve_data.hpp"
#include "lcroll/rng.hpp"

namespace lcroll {

// L = 1 or 2 affine layers; tanh between layers, identity on the output.
struct MlpBlock {
    std::vector<Eigen::MatrixXd> weights;  // layer l: out_l x in_l
    std::vector<Eigen::VectorXd> biases;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_dim() const { return static_cast<int>(weights.back().rows()); }

    // hidden_out, when given, receives the post-tanh hidden activation of a
    // 2-layer block (needed by backprop).
    Eigen::VectorXd forward(const Eigen::VectorXd& x,
                            Eigen::VectorXd* hidden_out = nullptr) const;
};

// Standard LSTM: sigmoid input/forget/output gates, tanh cell candidate.
struct LstmBlock {
    Eigen::MatrixXd w_input, w_forget, w_cell, w_output;  // H x X
    Eigen::MatrixXd u_input, u_forget, u_cell, u_output;  // H x H
    Eigen::VectorXd b_input, b_forget, b_cell, b_output;  // H

    int hidden_size() const { return static_cast<int>(w_input.rows()); }
    int input_size() const { return static_cast<int>(w_input.cols()); }
};

struct LstmState {
    Eigen::VectorXd h, c;
};

struct VrnnArch {
    int lstm_units = 6;
    int mlp_units = 103;         // head hidden width (used when mlp_layers == 2)
    int config_mlp_units = 115;  // encoder output width
    int num_stacked_lstms = 2;   // 1 or 2
    int mlp_layers = 1;          // head depth, 1 or 2
    int config_mlp_layers = 1;   // encoder depth, 1 or 2

    bool operator==(const VrnnArch&) const = default;
};

struct VrnnLevel {
    MlpBlock config_encoder;
    LstmBlock lstm;
};

// Parameter container shared by models and gradients. Flatten order: levels in
// stack order (encoder layers W then b; then gates input/forget/cell/output as
// W, U, b), then the output head layers.
struct VrnnParams {
    std::vector<VrnnLevel> levels;
    MlpBlock output_head;

    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& flat);
    std::size_t parameter_count() const;
    VrnnParams zeros_like() const;
};

struct VrnnModel : VrnnParams {
    double dropout_rate = 0.1;  // d in [0,1)
    int config_dim = 0;
    VrnnArch arch;
};

// One binary mask per level, matching that level's encoder output width.
// Sampled once per sequence/rollout and held fixed across time steps.
struct DropoutMasks {
    std::vector<Eigen::VectorXd> z;
};

struct VrnnState {
    std::vector<LstmState> levels;
};

// Instrumentation hook: a copy of every mask vector as it is read at each time
// step, so tests can verify the dropped units never change within a sequence.
struct ForwardTrace {
    std::vector<std::vector<Eigen::VectorXd>> masks_read;  // [t][level]
};

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] init, deterministic per seed.
// fan_in is the layer input width; for LSTM gates it is input + hidden width.
VrnnModel init_model(int config_dim, const VrnnArch& arch, double dropout_rate,
                     std::uint64_t seed);

// Each entry is 1 with probability 1 - dropout_rate, else 0.
DropoutMasks sample_masks(const VrnnModel& model, Rng& rng);

VrnnState zero_state(const VrnnModel& model);

// inputs = [y_0 .. y_{T-1}] (y_0 conventionally the dummy 0); returns
// [y~_1 .. y~_T]. States start at zero; masks constant across steps.
std::vector<double> forward_sequence(const VrnnModel& model,
                                     const HyperparameterConfig& config,
                                     const std::vector<double>& inputs,
                                     const DropoutMasks& masks,
                                     ForwardTrace* trace = nullptr);

// Teacher-forced sequence MSE against targets = [y_1 .. y_T] (inputs are the
// dummy 0 followed by y_1 .. y_{T-1}) and exact BPTT gradients.
std::pair<double, VrnnParams> loss_and_gradients(const VrnnModel& model,
                                                 const HyperparameterConfig& config,
                                                 const std::vector<double>& targets,
                                                 const DropoutMasks& masks);

// One Monte-Carlo dropout step: deterministic given (masks, state, prev_y);
// all rollout stochasticity lives in the masks.
std::pair<double, VrnnState> mc_rollout_step(const VrnnModel& model,
                                             const HyperparameterConfig& config,
                                             double prev_y, const VrnnState& state,
                                             const DropoutMasks& masks);

enum class LrScheduler { cos, exp, constant };

struct VrnnTrainConfig {
    double initial_lr = 0.027;
    double final_lr_fraction = 0.0008;  // lr(last) = initial_lr * this
    double momentum = 0.9;
    int batch_size = 22;
    int epochs = 100;
    LrScheduler scheduler = LrScheduler::cos;
    int curriculum_initial_len = 5;
    std::uint64_t seed = 0;
};

struct TrainingLogEntry {
    int epoch = 0;
    double lr = 0.0;
    int curriculum_len = 0;
    double mean_loss = 0.0;  // over non-skipped batches
    int skipped_batches = 0;  // batches dropped on a non-finite loss
};

struct TrainingLog {
    std::vector<TrainingLogEntry> epochs;
};

// Learning rate for 1-based epoch e of E. const: initial_lr. exp: geometric
// interpolation initial_lr -> initial_lr*final_lr_fraction. cos: cosine
// interpolation between the same endpoints. A 1-epoch run uses initial_lr.
double learning_rate_at(LrScheduler scheduler, double initial_lr,
                        double final_lr_fraction, int epoch, int total_epochs);

// Linear ramp from initial_len (epoch 1) to full_len (final epoch), rounded
// half up. A 1-epoch run trains at full length.
int curriculum_length(int epoch, int total_epochs, int initial_len, int full_len);

// SGD with momentum over teacher-forced sequence MSE; fresh masks per sequence
// per epoch; deterministic per cfg.seed. Sequences are truncated per epoch by
// the curriculum (clamped to each curve's own length).
std::pair<VrnnModel, TrainingLog> train(VrnnModel model, const CurveDataset& dataset,
                                        const VrnnTrainConfig& cfg);

// JSON model file with a format version, architecture hyperparameters, dropout
// rate, and flat parameter arrays per block (see docs/formats.md).
std::string vrnn_to_json(const VrnnModel& model);
VrnnModel vrnn_from_json(const std::string& text);
void save_vrnn(const VrnnModel& model, const std::filesystem::path& path);
VrnnModel load_vrnn(const std::filesystem::path& path);

}  // namespace lcroll
