#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "lcroll/synth_bench.hpp"
#include "test_util.hpp"

using namespace lcroll;

namespace {

const ConfigParameter& param_by_name(const ConfigSpace& space,
                                     const std::string& raw_name) {
    for (const auto& p : space.parameters)
        if (p.name == raw_name) return p;
    FAIL("no parameter named " << raw_name);
    static ConfigParameter dummy;
    return dummy;
}

double value_of(const HyperparameterConfig& config, const std::string& storage_name) {
    for (std::size_t i = 0; i < config.names.size(); ++i)
        if (config.names[i] == storage_name) return config.values[i];
    FAIL("config lacks " << storage_name);
    return 0.0;
}

}  // namespace

TEST_SUITE_BEGIN("synth_bench");

TEST_CASE("the benchmark space carries the eight documented parameters") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    REQUIRE(space.parameters.size() == 8);
    CHECK_NOTHROW(space.validate());

    const auto& lr = param_by_name(space, "initial_learning_rate");
    CHECK(lr.lower == 1e-6);
    CHECK(lr.upper == 1e-2);
    CHECK(lr.log_scale);
    CHECK(!lr.integer);
    CHECK(lr.storage_name() == "log10_initial_learning_rate");
    CHECK(lr.stored_lower() == doctest::Approx(-6.0).epsilon(1e-12));
    CHECK(lr.stored_upper() == doctest::Approx(-2.0).epsilon(1e-12));

    const auto& batch = param_by_name(space, "batch_size");
    CHECK(batch.lower == 16);
    CHECK(batch.upper == 256);
    CHECK(batch.log_scale);
    CHECK(batch.integer);

    const auto& units = param_by_name(space, "average_units_per_layer");
    CHECK(units.log_scale);
    CHECK(units.integer);

    const auto& frac = param_by_name(space, "final_learning_rate_fraction");
    CHECK(frac.lower == 1e-4);
    CHECK(frac.upper == 1.0);
    CHECK(frac.log_scale);

    // The shape parameter starts at zero, so it stays on a linear scale.
    const auto& shape = param_by_name(space, "shape_parameter_1");
    CHECK(shape.lower == 0.0);
    CHECK(shape.upper == 1.0);
    CHECK(!shape.log_scale);
    CHECK(shape.storage_name() == "shape_parameter_1");

    for (const auto& name : {"dropout_0", "dropout_1"}) {
        const auto& p = param_by_name(space, name);
        CHECK(p.lower == 0.0);
        CHECK(p.upper == 0.5);
        CHECK(!p.log_scale);
    }

    const auto& layers = param_by_name(space, "number_of_layers");
    CHECK(layers.lower == 1);
    CHECK(layers.upper == 5);
    CHECK(layers.integer);
}

TEST_CASE("space validation rejects inverted and non-positive log ranges") {
    ConfigSpace space;
    space.parameters.push_back({"x", 2.0, 1.0, false, false});
    CHECK_THROWS(space.validate());
    space.parameters[0] = {"x", 0.0, 1.0, true, false};
    CHECK_THROWS(space.validate());  // log scale needs a positive lower bound
    space.parameters[0] = {"x", 0.5, 1.0, true, false};
    CHECK_NOTHROW(space.validate());
}

TEST_CASE("integer parameters land on whole raw values inside their bounds") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto configs = sample_configs(space, 300, 5);
    REQUIRE(configs.size() == 300);
    std::set<long long> layer_values;
    for (const auto& c : configs) {
        const double layers = value_of(c, "number_of_layers");
        CHECK(layers == std::round(layers));
        CHECK(layers >= 1.0);
        CHECK(layers <= 5.0);
        layer_values.insert(static_cast<long long>(layers));

        // Log-stored integers decode to whole raw values.
        const double stored = value_of(c, "log10_batch_size");
        const double raw = std::pow(10.0, stored);
        CHECK(std::abs(raw - std::round(raw)) < 1e-9);
        CHECK(std::round(raw) >= 16);
        CHECK(std::round(raw) <= 256);
    }
    CHECK(layer_values.size() == 5);  // all five layer counts show up in 300 draws
}

TEST_CASE("log-scaled samples are uniform in the transformed space") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto configs = sample_configs(space, 10000, 7);
    std::vector<double> u;
    for (const auto& c : configs)
        u.push_back((value_of(c, "log10_initial_learning_rate") + 6.0) / 4.0);
    std::sort(u.begin(), u.end());
    // Kolmogorov-Smirnov distance against the uniform CDF.
    double d = 0.0;
    const double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        REQUIRE(u[i] >= 0.0);
        REQUIRE(u[i] <= 1.0);
        d = std::max(d, std::abs(u[i] - (static_cast<double>(i) + 0.5) / n));
    }
    CHECK(d < 0.02);  // ~1.95/sqrt(10000) at the 0.1% level
}

TEST_CASE("sampling is deterministic per seed") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto a = sample_configs(space, 3, 11);
    const auto b = sample_configs(space, 3, 11);
    CHECK(a == b);
    const auto c = sample_configs(space, 3, 12);
    CHECK(!(a == c));
}

TEST_CASE("curve parameters react to the config as documented") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto configs = sample_configs(space, 200, 13);
    for (const auto& c : configs) {
        const SaturationParams p = curve_parameters(c);
        CHECK(p.asymptote >= 0.58);
        CHECK(p.asymptote <= 0.99);
        CHECK(p.start >= 0.1);
        CHECK(p.start <= 0.15);
        CHECK(p.rate >= 0.05);
        CHECK(p.rate <= 0.75);
        CHECK(p.shape >= 0.5);
        CHECK(p.shape <= 1.5);
        CHECK(p.asymptote > p.start);
    }
    HyperparameterConfig wrong;
    wrong.values = {0.5};
    wrong.names = {"mystery"};
    CHECK_THROWS(curve_parameters(wrong));
}

TEST_CASE("noise-free curves rise monotonically toward their asymptote") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto configs = sample_configs(space, 20, 17);
    GeneratorSpec spec;
    spec.num_configs = 1;
    spec.num_epochs = 60;
    spec.noise_std = 0.0;
    for (const auto& c : configs) {
        Rng rng(1);
        const LearningCurve curve = generate_curve(c, spec, rng);
        REQUIRE(curve.values.size() == 60);
        const SaturationParams p = curve_parameters(c);
        for (std::size_t t = 1; t < curve.values.size(); ++t)
            CHECK(curve.values[t] >= curve.values[t - 1]);
        for (double v : curve.values) {
            CHECK(v >= 0.0);
            CHECK(v <= p.asymptote + 1e-12);
        }
        // The tail closes in on the asymptote.
        CHECK(curve.values.back() > curve.values.front());
        CHECK(p.asymptote - curve.values.back() <
              p.asymptote - curve.values.front());
    }
}

TEST_CASE("identical configs and seeds give identical curves") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    const auto configs = sample_configs(space, 1, 19);
    GeneratorSpec spec;
    spec.num_epochs = 25;
    spec.noise_std = 0.02;
    Rng a(5), b(5);
    const LearningCurve ca = generate_curve(configs[0], spec, a);
    const LearningCurve cb = generate_curve(configs[0], spec, b);
    CHECK(ca.values == cb.values);
    Rng c(6);
    const LearningCurve cc = generate_curve(configs[0], spec, c);
    CHECK(ca.values != cc.values);
}

TEST_CASE("the noise has the configured scale and near-zero mean") {
    // Mid-space config: its clean curve stays well inside (0, 1), so the
    // clamp never bites and the added noise can be recovered by subtraction.
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    HyperparameterConfig mid;
    for (const auto& par : space.parameters) {
        mid.names.push_back(par.storage_name());
        mid.values.push_back((par.stored_lower() + par.stored_upper()) / 2.0);
    }
    const std::vector<HyperparameterConfig> configs = {mid};
    GeneratorSpec noisy;
    noisy.num_epochs = 10000;
    noisy.noise_std = 0.01;
    GeneratorSpec clean = noisy;
    clean.noise_std = 0.0;
    Rng rng(9);
    const LearningCurve with_noise = generate_curve(configs[0], noisy, rng);
    Rng unused(9);
    const LearningCurve base = generate_curve(configs[0], clean, unused);

    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < with_noise.values.size(); ++t) {
        // Skip samples the [0,1] clamp could have touched.
        if (base.values[t] < 0.06 || base.values[t] > 0.94) continue;
        const double eps = with_noise.values[t] - base.values[t];
        sum += eps;
        sum2 += eps * eps;
        ++n;
    }
    REQUIRE(n > 5000);
    const double mean = sum / n;
    CHECK(std::abs(mean) < 3.0 * 0.01 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(std::sqrt(sum2 / n - mean * mean) - 0.01) < 0.001);
}

TEST_CASE("generate_benchmark assembles a valid named dataset") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    GeneratorSpec spec;
    spec.num_configs = 10;
    spec.num_epochs = 8;
    spec.seed = 3;
    const CurveDataset d = generate_benchmark(space, spec);
    CHECK_NOTHROW(d.validate());
    REQUIRE(d.curves.size() == 10);
    CHECK(d.config_dim == 8);
    CHECK(d.name == "synthetic_exp_saturation_seed3");
    CHECK(d.curves[0].id == "c00000");
    CHECK(d.curves[9].id == "c00009");
    for (const auto& c : d.curves) {
        CHECK(c.values.size() == 8);
        for (double v : c.values) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    const CurveDataset same = generate_benchmark(space, spec);
    CHECK(same == d);
    GeneratorSpec other = spec;
    other.seed = 4;
    CHECK(!(generate_benchmark(space, other) == d));
}

TEST_CASE("paper-scale generation stays in bounds") {
    const ConfigSpace space = ConfigSpace::mlp_benchmark();
    GeneratorSpec spec;
    spec.num_configs = 500;  // trimmed-down stand-in for the full 5000 x 50 run
    spec.num_epochs = 50;
    spec.seed = 29;
    const CurveDataset d = generate_benchmark(space, spec);
    CHECK(d.curves.size() == 500);
    double lo = 1.0, hi = 0.0;
    for (const auto& c : d.curves)
        for (double v : c.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.7);  // saturating curves actually climb
}

TEST_SUITE_END();
