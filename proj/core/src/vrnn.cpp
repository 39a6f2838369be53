#include "lcroll/vrnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace lcroll {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

VectorXd sigmoid(const VectorXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Traversal shared by flatten/unflatten/zeros_like; visit order is the
// documented flat layout.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
    for (auto& lv : p.levels) {
        for (std::size_t i = 0; i < lv.config_encoder.weights.size(); ++i) {
            fn(lv.config_encoder.weights[i]);
            fn(lv.config_encoder.biases[i]);
        }
        auto& l = lv.lstm;
        fn(l.w_input);
        fn(l.u_input);
        fn(l.b_input);
        fn(l.w_forget);
        fn(l.u_forget);
        fn(l.b_forget);
        fn(l.w_cell);
        fn(l.u_cell);
        fn(l.b_cell);
        fn(l.w_output);
        fn(l.u_output);
        fn(l.b_output);
    }
    for (std::size_t i = 0; i < p.output_head.weights.size(); ++i) {
        fn(p.output_head.weights[i]);
        fn(p.output_head.biases[i]);
    }
}

void validate_arch(int config_dim, const VrnnArch& a, double d) {
    if (config_dim < 1) throw std::invalid_argument("vrnn: config_dim must be >= 1");
    if (a.lstm_units < 1 || a.mlp_units < 1 || a.config_mlp_units < 1)
        throw std::invalid_argument("vrnn: unit counts must be >= 1");
    if (a.num_stacked_lstms < 1 || a.num_stacked_lstms > 2)
        throw std::invalid_argument("vrnn: num_stacked_lstms must be 1 or 2");
    if (a.mlp_layers < 1 || a.mlp_layers > 2 || a.config_mlp_layers < 1 ||
        a.config_mlp_layers > 2)
        throw std::invalid_argument("vrnn: MLP depths must be 1 or 2");
    if (!(d >= 0.0 && d < 1.0))
        throw std::invalid_argument("vrnn: dropout rate must be in [0,1)");
}

void check_masks(const VrnnModel& m, const DropoutMasks& masks) {
    if (masks.z.size() != m.levels.size())
        throw std::invalid_argument("vrnn: mask count does not match stacked levels");
    for (std::size_t l = 0; l < m.levels.size(); ++l)
        if (masks.z[l].size() != m.levels[l].config_encoder.output_dim())
            throw std::invalid_argument("vrnn: mask width does not match encoder output");
}

void check_config(const VrnnModel& m, const HyperparameterConfig& config) {
    if (static_cast<int>(config.values.size()) != m.config_dim)
        throw std::invalid_argument("vrnn: config dimension mismatch");
}

struct EncoderCache {
    VectorXd hidden;  // post-tanh activation of a 2-layer encoder
    VectorXd out;     // raw (pre-mask) encoder output
};

std::vector<VectorXd> masked_encodings(const VrnnModel& m, const VectorXd& theta,
                                       const DropoutMasks& masks,
                                       std::vector<EncoderCache>* caches) {
    std::vector<VectorXd> masked(m.levels.size());
    if (caches) caches->resize(m.levels.size());
    for (std::size_t l = 0; l < m.levels.size(); ++l) {
        EncoderCache cache;
        cache.out = m.levels[l].config_encoder.forward(theta, &cache.hidden);
        masked[l] = cache.out.cwiseProduct(masks.z[l]);
        if (caches) (*caches)[l] = std::move(cache);
    }
    return masked;
}

struct LevelStepCache {
    VectorXd x, h_prev, c_prev, i, f, g, o, c, tanh_c, h;
};

struct StepCache {
    std::vector<LevelStepCache> lv;
    VectorXd head_hidden;
    double y = 0.0;
};

// One forward step through all levels plus the head; mutates states in place.
double step_forward(const VrnnModel& m, const std::vector<VectorXd>& masked,
                    double input, std::vector<LstmState>& states, StepCache* cache) {
    if (cache) cache->lv.resize(m.levels.size());
    VectorXd carry(1);
    carry[0] = input;
    for (std::size_t l = 0; l < m.levels.size(); ++l) {
        const LstmBlock& lstm = m.levels[l].lstm;
        LstmState& st = states[l];
        VectorXd x(masked[l].size() + carry.size());
        x << masked[l], carry;

        const VectorXd i = sigmoid(lstm.w_input * x + lstm.u_input * st.h + lstm.b_input);
        const VectorXd f =
            sigmoid(lstm.w_forget * x + lstm.u_forget * st.h + lstm.b_forget);
        const VectorXd g =
            (lstm.w_cell * x + lstm.u_cell * st.h + lstm.b_cell).array().tanh().matrix();
        const VectorXd o =
            sigmoid(lstm.w_output * x + lstm.u_output * st.h + lstm.b_output);
        const VectorXd c = f.cwiseProduct(st.c) + i.cwiseProduct(g);
        const VectorXd tanh_c = c.array().tanh().matrix();
        const VectorXd h = o.cwiseProduct(tanh_c);

        if (cache) {
            LevelStepCache& lc = cache->lv[l];
            lc.x = x;
            lc.h_prev = st.h;
            lc.c_prev = st.c;
            lc.i = i;
            lc.f = f;
            lc.g = g;
            lc.o = o;
            lc.c = c;
            lc.tanh_c = tanh_c;
            lc.h = h;
        }
        st.h = h;
        st.c = c;
        carry = h;
    }
    VectorXd head_hidden;
    const VectorXd out = m.output_head.forward(carry, cache ? &head_hidden : nullptr);
    if (cache) {
        cache->head_hidden = std::move(head_hidden);
        cache->y = out[0];
    }
    return out[0];
}

// Backprop through an MLP given the cached input/hidden; accumulates into
// grad_block and returns d(input) through d_x (when non-null).
void mlp_backward(const MlpBlock& block, const VectorXd& x, const VectorXd& hidden,
                  const VectorXd& d_out, MlpBlock& grad_block, VectorXd* d_x) {
    if (block.num_layers() == 1) {
        grad_block.weights[0] += d_out * x.transpose();
        grad_block.biases[0] += d_out;
        if (d_x) *d_x = block.weights[0].transpose() * d_out;
    } else {
        grad_block.weights[1] += d_out * hidden.transpose();
        grad_block.biases[1] += d_out;
        const VectorXd d_hidden = block.weights[1].transpose() * d_out;
        const VectorXd d_pre =
            (d_hidden.array() * (1.0 - hidden.array().square())).matrix();
        grad_block.weights[0] += d_pre * x.transpose();
        grad_block.biases[0] += d_pre;
        if (d_x) *d_x = block.weights[0].transpose() * d_pre;
    }
}

MlpBlock make_mlp(const std::vector<std::pair<int, int>>& shapes, Rng& rng) {
    MlpBlock block;
    for (const auto& [rows, cols] : shapes) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        MatrixXd w(rows, cols);
        for (Eigen::Index k = 0; k < w.size(); ++k)
            w.data()[k] = uniform_real(rng, -bound, bound);
        VectorXd b(rows);
        for (Eigen::Index k = 0; k < b.size(); ++k)
            b[k] = uniform_real(rng, -bound, bound);
        block.weights.push_back(std::move(w));
        block.biases.push_back(std::move(b));
    }
    return block;
}

LstmBlock make_lstm(int input_size, int hidden_size, Rng& rng) {
    // The true fan-in of every gate is input + hidden (gates read [x, h]).
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size));
    auto draw_m = [&](int rows, int cols) {
        MatrixXd m(rows, cols);
        for (Eigen::Index k = 0; k < m.size(); ++k)
            m.data()[k] = uniform_real(rng, -bound, bound);
        return m;
    };
    auto draw_v = [&](int rows) {
        VectorXd v(rows);
        for (Eigen::Index k = 0; k < v.size(); ++k)
            v[k] = uniform_real(rng, -bound, bound);
        return v;
    };
    LstmBlock l;
    l.w_input = draw_m(hidden_size, input_size);
    l.u_input = draw_m(hidden_size, hidden_size);
    l.b_input = draw_v(hidden_size);
    l.w_forget = draw_m(hidden_size, input_size);
    l.u_forget = draw_m(hidden_size, hidden_size);
    l.b_forget = draw_v(hidden_size);
    l.w_cell = draw_m(hidden_size, input_size);
    l.u_cell = draw_m(hidden_size, hidden_size);
    l.b_cell = draw_v(hidden_size);
    l.w_output = draw_m(hidden_size, input_size);
    l.u_output = draw_m(hidden_size, hidden_size);
    l.b_output = draw_v(hidden_size);
    return l;
}

json mlp_to_json(const MlpBlock& block) {
    json layers = json::array();
    for (std::size_t i = 0; i < block.weights.size(); ++i) {
        const MatrixXd& w = block.weights[i];
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
        std::vector<double> bias(block.biases[i].data(),
                                 block.biases[i].data() + block.biases[i].size());
        layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"w", flat}, {"b", bias}});
    }
    return layers;
}

MlpBlock mlp_from_json(const json& jlayers) {
    MlpBlock block;
    for (const auto& jl : jlayers) {
        const auto rows = jl.at("rows").get<Eigen::Index>();
        const auto cols = jl.at("cols").get<Eigen::Index>();
        const auto flat = jl.at("w").get<std::vector<double>>();
        const auto bias = jl.at("b").get<std::vector<double>>();
        if (rows < 1 || cols < 1 ||
            flat.size() != static_cast<std::size_t>(rows * cols) ||
            bias.size() != static_cast<std::size_t>(rows))
            throw std::runtime_error("vrnn model: inconsistent MLP layer shape");
        MatrixXd w(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[k++];
        block.weights.push_back(std::move(w));
        block.biases.push_back(Eigen::Map<const VectorXd>(bias.data(), rows));
    }
    if (block.weights.empty()) throw std::runtime_error("vrnn model: empty MLP block");
    return block;
}

std::vector<double> matrix_flat(const MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

MatrixXd matrix_from_flat(const std::vector<double>& flat, Eigen::Index rows,
                          Eigen::Index cols) {
    if (flat.size() != static_cast<std::size_t>(rows * cols))
        throw std::runtime_error("vrnn model: inconsistent LSTM tensor shape");
    MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
    return m;
}

json lstm_to_json(const LstmBlock& l) {
    auto vec = [](const VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    return {{"input_size", l.input_size()},
            {"hidden_size", l.hidden_size()},
            {"w_input", matrix_flat(l.w_input)},
            {"u_input", matrix_flat(l.u_input)},
            {"b_input", vec(l.b_input)},
            {"w_forget", matrix_flat(l.w_forget)},
            {"u_forget", matrix_flat(l.u_forget)},
            {"b_forget", vec(l.b_forget)},
            {"w_cell", matrix_flat(l.w_cell)},
            {"u_cell", matrix_flat(l.u_cell)},
            {"b_cell", vec(l.b_cell)},
            {"w_output", matrix_flat(l.w_output)},
            {"u_output", matrix_flat(l.u_output)},
            {"b_output", vec(l.b_output)}};
}

LstmBlock lstm_from_json(const json& j) {
    const auto x = j.at("input_size").get<Eigen::Index>();
    const auto h = j.at("hidden_size").get<Eigen::Index>();
    if (x < 1 || h < 1) throw std::runtime_error("vrnn model: invalid LSTM sizes");
    auto mat = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
        return matrix_from_flat(j.at(key).get<std::vector<double>>(), rows, cols);
    };
    auto vec = [&](const char* key) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != static_cast<std::size_t>(h))
            throw std::runtime_error("vrnn model: inconsistent LSTM bias shape");
        return VectorXd(Eigen::Map<const VectorXd>(v.data(), h));
    };
    LstmBlock l;
    l.w_input = mat("w_input", h, x);
    l.u_input = mat("u_input", h, h);
    l.b_input = vec("b_input");
    l.w_forget = mat("w_forget", h, x);
    l.u_forget = mat("u_forget", h, h);
    l.b_forget = vec("b_forget");
    l.w_cell = mat("w_cell", h, x);
    l.u_cell = mat("u_cell", h, h);
    l.b_cell = vec("b_cell");
    l.w_output = mat("w_output", h, x);
    l.u_output = mat("u_output", h, h);
    l.b_output = vec("b_output");
    return l;
}

}  // namespace

VectorXd MlpBlock::forward(const VectorXd& x, VectorXd* hidden_out) const {
    if (num_layers() == 1) {
        if (hidden_out) hidden_out->resize(0);
        return weights[0] * x + biases[0];
    }
    const VectorXd hidden = (weights[0] * x + biases[0]).array().tanh().matrix();
    if (hidden_out) *hidden_out = hidden;
    return weights[1] * hidden + biases[1];
}

Eigen::VectorXd VrnnParams::flatten() const {
    VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index offset = 0;
    for_each_tensor(*this, [&](const auto& tensor) {
        flat.segment(offset, tensor.size()) =
            Eigen::Map<const VectorXd>(tensor.data(), tensor.size());
        offset += tensor.size();
    });
    return flat;
}

void VrnnParams::unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
        throw std::invalid_argument("vrnn: flat parameter size mismatch");
    Eigen::Index offset = 0;
    for_each_tensor(*this, [&](auto& tensor) {
        Eigen::Map<VectorXd>(tensor.data(), tensor.size()) =
            flat.segment(offset, tensor.size());
        offset += tensor.size();
    });
}

std::size_t VrnnParams::parameter_count() const {
    std::size_t n = 0;
    for_each_tensor(*this, [&](const auto& tensor) {
        n += static_cast<std::size_t>(tensor.size());
    });
    return n;
}

VrnnParams VrnnParams::zeros_like() const {
    VrnnParams z = *this;
    for_each_tensor(z, [](auto& tensor) { tensor.setZero(); });
    return z;
}

VrnnModel init_model(int config_dim, const VrnnArch& arch, double dropout_rate,
                     std::uint64_t seed) {
    validate_arch(config_dim, arch, dropout_rate);
    VrnnModel m;
    m.dropout_rate = dropout_rate;
    m.config_dim = config_dim;
    m.arch = arch;
    Rng rng(seed);
    for (int l = 0; l < arch.num_stacked_lstms; ++l) {
        VrnnLevel level;
        std::vector<std::pair<int, int>> enc_shapes;
        if (arch.config_mlp_layers == 1) {
            enc_shapes = {{arch.config_mlp_units, config_dim}};
        } else {
            enc_shapes = {{arch.config_mlp_units, config_dim},
                          {arch.config_mlp_units, arch.config_mlp_units}};
        }
        level.config_encoder = make_mlp(enc_shapes, rng);
        const int carry = l == 0 ? 1 : arch.lstm_units;
        level.lstm = make_lstm(arch.config_mlp_units + carry, arch.lstm_units, rng);
        m.levels.push_back(std::move(level));
    }
    std::vector<std::pair<int, int>> head_shapes;
    if (arch.mlp_layers == 1) {
        head_shapes = {{1, arch.lstm_units}};
    } else {
        head_shapes = {{arch.mlp_units, arch.lstm_units}, {1, arch.mlp_units}};
    }
    m.output_head = make_mlp(head_shapes, rng);
    return m;
}

DropoutMasks sample_masks(const VrnnModel& model, Rng& rng) {
    DropoutMasks masks;
    const double keep = 1.0 - model.dropout_rate;
    for (const auto& level : model.levels) {
        VectorXd z(level.config_encoder.output_dim());
        for (Eigen::Index k = 0; k < z.size(); ++k)
            z[k] = uniform01(rng) < keep ? 1.0 : 0.0;
        masks.z.push_back(std::move(z));
    }
    return masks;
}

VrnnState zero_state(const VrnnModel& model) {
    VrnnState s;
    for (const auto& level : model.levels) {
        LstmState st;
        st.h = VectorXd::Zero(level.lstm.hidden_size());
        st.c = VectorXd::Zero(level.lstm.hidden_size());
        s.levels.push_back(std::move(st));
    }
    return s;
}

std::vector<double> forward_sequence(const VrnnModel& model,
                                     const HyperparameterConfig& config,
                                     const std::vector<double>& inputs,
                                     const DropoutMasks& masks, ForwardTrace* trace) {
    if (inputs.empty()) throw std::invalid_argument("vrnn: empty input sequence");
    check_config(model, config);
    check_masks(model, masks);

    const VectorXd theta = to_eigen(config.values);
    const std::vector<VectorXd> masked = masked_encodings(model, theta, masks, nullptr);
    std::vector<LstmState> states = zero_state(model).levels;

    std::vector<double> outputs;
    outputs.reserve(inputs.size());
    for (double input : inputs) {
        if (trace) trace->masks_read.push_back(masks.z);
        outputs.push_back(step_forward(model, masked, input, states, nullptr));
    }
    return outputs;
}

std::pair<double, VrnnParams> loss_and_gradients(const VrnnModel& model,
                                                 const HyperparameterConfig& config,
                                                 const std::vector<double>& targets,
                                                 const DropoutMasks& masks) {
    if (targets.empty()) throw std::invalid_argument("vrnn: empty target sequence");
    check_config(model, config);
    check_masks(model, masks);

    const auto T = targets.size();
    const VectorXd theta = to_eigen(config.values);
    std::vector<EncoderCache> enc_caches;
    const std::vector<VectorXd> masked =
        masked_encodings(model, theta, masks, &enc_caches);

    // Teacher-forced forward with full step caches.
    std::vector<LstmState> states = zero_state(model).levels;
    std::vector<StepCache> caches(T);
    double loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double input = t == 0 ? 0.0 : targets[t - 1];  // dummy y_0 = 0
        const double y = step_forward(model, masked, input, states, &caches[t]);
        const double err = y - targets[t];
        loss += err * err;
    }
    loss /= static_cast<double>(T);

    VrnnParams grads = static_cast<const VrnnParams&>(model).zeros_like();
    const std::size_t num_levels = model.levels.size();

    std::vector<VectorXd> d_masked(num_levels);
    std::vector<VectorXd> dh_carry(num_levels), dc_carry(num_levels);
    for (std::size_t l = 0; l < num_levels; ++l) {
        d_masked[l] = VectorXd::Zero(masked[l].size());
        dh_carry[l] = VectorXd::Zero(model.levels[l].lstm.hidden_size());
        dc_carry[l] = VectorXd::Zero(model.levels[l].lstm.hidden_size());
    }

    for (std::size_t ti = T; ti-- > 0;) {
        const StepCache& sc = caches[ti];
        VectorXd dy(1);
        dy[0] = 2.0 * (sc.y - targets[ti]) / static_cast<double>(T);

        VectorXd dh_above;
        mlp_backward(model.output_head, sc.lv.back().h, sc.head_hidden, dy,
                     grads.output_head, &dh_above);

        for (std::size_t li = num_levels; li-- > 0;) {
            const LevelStepCache& lc = sc.lv[li];
            const LstmBlock& lstm = model.levels[li].lstm;
            LstmBlock& glstm = grads.levels[li].lstm;

            const VectorXd dh = dh_above + dh_carry[li];
            const VectorXd d_o = dh.cwiseProduct(lc.tanh_c);
            const VectorXd dc =
                dc_carry[li] +
                (dh.array() * lc.o.array() * (1.0 - lc.tanh_c.array().square())).matrix();
            const VectorXd d_i = dc.cwiseProduct(lc.g);
            const VectorXd d_g = dc.cwiseProduct(lc.i);
            const VectorXd d_f = dc.cwiseProduct(lc.c_prev);
            dc_carry[li] = dc.cwiseProduct(lc.f);

            const VectorXd dz_i =
                (d_i.array() * lc.i.array() * (1.0 - lc.i.array())).matrix();
            const VectorXd dz_f =
                (d_f.array() * lc.f.array() * (1.0 - lc.f.array())).matrix();
            const VectorXd dz_o =
                (d_o.array() * lc.o.array() * (1.0 - lc.o.array())).matrix();
            const VectorXd dz_g = (d_g.array() * (1.0 - lc.g.array().square())).matrix();

            glstm.w_input += dz_i * lc.x.transpose();
            glstm.u_input += dz_i * lc.h_prev.transpose();
            glstm.b_input += dz_i;
            glstm.w_forget += dz_f * lc.x.transpose();
            glstm.u_forget += dz_f * lc.h_prev.transpose();
            glstm.b_forget += dz_f;
            glstm.w_cell += dz_g * lc.x.transpose();
            glstm.u_cell += dz_g * lc.h_prev.transpose();
            glstm.b_cell += dz_g;
            glstm.w_output += dz_o * lc.x.transpose();
            glstm.u_output += dz_o * lc.h_prev.transpose();
            glstm.b_output += dz_o;

            const VectorXd dx = lstm.w_input.transpose() * dz_i +
                                lstm.w_forget.transpose() * dz_f +
                                lstm.w_cell.transpose() * dz_g +
                                lstm.w_output.transpose() * dz_o;
            dh_carry[li] = lstm.u_input.transpose() * dz_i +
                           lstm.u_forget.transpose() * dz_f +
                           lstm.u_cell.transpose() * dz_g +
                           lstm.u_output.transpose() * dz_o;

            const Eigen::Index enc_width = masked[li].size();
            d_masked[li] += dx.head(enc_width);
            if (li > 0) dh_above = dx.tail(dx.size() - enc_width);
            // li == 0: the tail is d(input), which is data, not a parameter.
        }
    }

    for (std::size_t l = 0; l < num_levels; ++l) {
        const VectorXd d_enc = d_masked[l].cwiseProduct(masks.z[l]);
        mlp_backward(model.levels[l].config_encoder, theta, enc_caches[l].hidden, d_enc,
                     grads.levels[l].config_encoder, nullptr);
    }

    return {loss, std::move(grads)};
}

std::pair<double, VrnnState> mc_rollout_step(const VrnnModel& model,
                                             const HyperparameterConfig& config,
                                             double prev_y, const VrnnState& state,
                                             const DropoutMasks& masks) {
    check_config(model, config);
    check_masks(model, masks);
    const VectorXd theta = to_eigen(config.values);
    const std::vector<VectorXd> masked = masked_encodings(model, theta, masks, nullptr);
    VrnnState next = state;
    const double y = step_forward(model, masked, prev_y, next.levels, nullptr);
    return {y, std::move(next)};
}

double learning_rate_at(LrScheduler scheduler, double initial_lr,
                        double final_lr_fraction, int epoch, int total_epochs) {
    if (total_epochs < 1) throw std::invalid_argument("scheduler: total_epochs >= 1");
    if (epoch < 1 || epoch > total_epochs)
        throw std::invalid_argument("scheduler: epoch out of range");
    if (!(initial_lr > 0.0)) throw std::invalid_argument("scheduler: initial_lr > 0");
    if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
        throw std::invalid_argument("scheduler: final_lr_fraction in (0,1]");

    if (scheduler == LrScheduler::constant) return initial_lr;
    if (epoch == 1 || total_epochs == 1) return initial_lr;
    const double final_lr = initial_lr * final_lr_fraction;
    if (epoch == total_epochs) return final_lr;
    const double frac =
        static_cast<double>(epoch - 1) / static_cast<double>(total_epochs - 1);
    if (scheduler == LrScheduler::exp) return initial_lr * std::pow(final_lr_fraction, frac);
    return final_lr +
           (initial_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

int curriculum_length(int epoch, int total_epochs, int initial_len, int full_len) {
    if (total_epochs < 1 || epoch < 1 || epoch > total_epochs)
        throw std::invalid_argument("curriculum: epoch out of range");
    if (initial_len < 1 || full_len < 1)
        throw std::invalid_argument("curriculum: lengths must be >= 1");
    if (total_epochs == 1 || epoch == total_epochs) return full_len;
    const double ramp = static_cast<double>(initial_len) +
                        static_cast<double>(full_len - initial_len) *
                            static_cast<double>(epoch - 1) /
                            static_cast<double>(total_epochs - 1);
    return static_cast<int>(std::llround(ramp));  // half rounds up for positives
}

std::pair<VrnnModel, TrainingLog> train(VrnnModel model, const CurveDataset& dataset,
                                        const VrnnTrainConfig& cfg) {
    if (!(cfg.initial_lr > 0.0)) throw std::invalid_argument("train: initial_lr > 0");
    if (!(cfg.final_lr_fraction > 0.0 && cfg.final_lr_fraction <= 1.0))
        throw std::invalid_argument("train: final_lr_fraction in (0,1]");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
        throw std::invalid_argument("train: momentum in [0,1)");
    if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.curriculum_initial_len < 1)
        throw std::invalid_argument("train: batch_size, epochs, curriculum length >= 1");
    if (dataset.curves.empty()) throw std::invalid_argument("train: empty dataset");

    int full_len = 0;
    for (const auto& curve : dataset.curves) {
        if (static_cast<int>(curve.values.size()) < cfg.curriculum_initial_len)
            throw std::invalid_argument("train: curve '" + curve.id +
                                        "' shorter than curriculum_initial_len");
        check_config(model, curve.config);
        full_len = std::max(full_len, static_cast<int>(curve.values.size()));
    }

    const std::size_t n = dataset.curves.size();
    VectorXd theta = model.flatten();
    VectorXd velocity = VectorXd::Zero(theta.size());
    TrainingLog log;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg.scheduler, cfg.initial_lr,
                                           cfg.final_lr_fraction, epoch, cfg.epochs);
        const int clen = curriculum_length(epoch, cfg.epochs,
                                           cfg.curriculum_initial_len, full_len);

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng order_rng(derive_seed(cfg.seed, "order", static_cast<std::uint64_t>(epoch)));
        shuffle(order, order_rng);

        double loss_sum = 0.0;
        int batches = 0;
        int skipped = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const auto members = static_cast<double>(stop - start);

            VectorXd grad_sum = VectorXd::Zero(theta.size());
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const auto& curve = dataset.curves[order[k]];
                const int len =
                    std::min(clen, static_cast<int>(curve.values.size()));
                const std::vector<double> targets(curve.values.begin(),
                                                  curve.values.begin() + len);
                Rng mask_rng(derive_seed(cfg.seed, "mask",
                                         static_cast<std::uint64_t>(epoch),
                                         static_cast<std::uint64_t>(order[k])));
                const DropoutMasks masks = sample_masks(model, mask_rng);
                auto [loss, grads] =
                    loss_and_gradients(model, curve.config, targets, masks);
                batch_loss += loss;
                grad_sum += grads.flatten();
            }
            batch_loss /= members;
            if (!std::isfinite(batch_loss)) {
                ++skipped;  // reported in the log; the batch is dropped
                continue;
            }
            velocity = cfg.momentum * velocity + grad_sum / members;
            theta -= lr * velocity;
            model.unflatten(theta);
            loss_sum += batch_loss;
            ++batches;
        }

        TrainingLogEntry entry;
        entry.epoch = epoch;
        entry.lr = lr;
        entry.curriculum_len = clen;
        entry.mean_loss = batches > 0 ? loss_sum / batches
                                      : std::numeric_limits<double>::quiet_NaN();
        entry.skipped_batches = skipped;
        log.epochs.push_back(entry);
    }
    return {std::move(model), std::move(log)};
}

std::string vrnn_to_json(const VrnnModel& model) {
    json j;
    j["format_version"] = 1;
    j["model"] = "vrnn";
    j["config_dim"] = model.config_dim;
    j["dropout_rate"] = model.dropout_rate;
    j["arch"] = {{"lstm_units", model.arch.lstm_units},
                 {"mlp_units", model.arch.mlp_units},
                 {"config_mlp_units", model.arch.config_mlp_units},
                 {"num_stacked_lstms", model.arch.num_stacked_lstms},
                 {"mlp_layers", model.arch.mlp_layers},
                 {"config_mlp_layers", model.arch.config_mlp_layers}};
    j["levels"] = json::array();
    for (const auto& level : model.levels)
        j["levels"].push_back({{"config_encoder", mlp_to_json(level.config_encoder)},
                               {"lstm", lstm_to_json(level.lstm)}});
    j["output_head"] = mlp_to_json(model.output_head);
    return j.dump();
}

VrnnModel vrnn_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("vrnn model: malformed JSON: ") + e.what());
    }
    VrnnModel m;
    try {
        if (j.at("format_version").get<int>() != 1)
            throw std::runtime_error("vrnn model: unsupported format version");
        m.config_dim = j.at("config_dim").get<int>();
        m.dropout_rate = j.at("dropout_rate").get<double>();
        const auto& ja = j.at("arch");
        m.arch.lstm_units = ja.at("lstm_units").get<int>();
        m.arch.mlp_units = ja.at("mlp_units").get<int>();
        m.arch.config_mlp_units = ja.at("config_mlp_units").get<int>();
        m.arch.num_stacked_lstms = ja.at("num_stacked_lstms").get<int>();
        m.arch.mlp_layers = ja.at("mlp_layers").get<int>();
        m.arch.config_mlp_layers = ja.at("config_mlp_layers").get<int>();
        for (const auto& jl : j.at("levels")) {
            VrnnLevel level;
            level.config_encoder = mlp_from_json(jl.at("config_encoder"));
            level.lstm = lstm_from_json(jl.at("lstm"));
            m.levels.push_back(std::move(level));
        }
        m.output_head = mlp_from_json(j.at("output_head"));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("vrnn model: ") + e.what());
    }
    validate_arch(m.config_dim, m.arch, m.dropout_rate);
    if (static_cast<int>(m.levels.size()) != m.arch.num_stacked_lstms)
        throw std::runtime_error("vrnn model: level count does not match arch");
    return m;
}

void save_vrnn(const VrnnModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    out << vrnn_to_json(model) << '\n';
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

VrnnModel load_vrnn(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": missing file");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return vrnn_from_json(text);
}

}  // namespace lcroll
