#include "lcroll/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lcroll/text_format.hpp"

namespace lcroll {

using nlohmann::json;

double gaussian_log_density(double y, double mean, double variance) {
    const double v = std::max(variance, kVarianceFloor);
    const double d = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
}

double lower_median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("evaluation: median of empty set");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

NamedMethod rollout_method(std::string name,
                           std::shared_ptr<const OneStepPredictor> predictor) {
    NamedMethod m;
    m.name = std::move(name);
    m.kind = MethodKind::rollout;
    m.predictor = std::move(predictor);
    return m;
}

NamedMethod static_method(std::string name,
                          std::shared_ptr<const StaticForestModel> model) {
    NamedMethod m;
    m.name = std::move(name);
    m.kind = MethodKind::static_regressor;
    m.static_model = std::move(model);
    return m;
}

NamedMethod lsv_method(std::string name) {
    NamedMethod m;
    m.name = std::move(name);
    m.kind = MethodKind::last_seen_value;
    return m;
}

NamedMethod custom_method(std::string name, DirectPredictor direct) {
    NamedMethod m;
    m.name = std::move(name);
    m.kind = MethodKind::custom;
    m.direct = std::move(direct);
    return m;
}

namespace {

void validate_methods(const std::vector<NamedMethod>& methods) {
    if (methods.empty()) throw std::invalid_argument("evaluation: no methods given");
    std::set<std::string> names;
    for (const auto& m : methods) {
        if (m.name.empty()) throw std::invalid_argument("evaluation: unnamed method");
        if (m.name.find_first_of(",\n\r") != std::string::npos)
            throw std::invalid_argument("evaluation: method name must not contain ','");
        if (!names.insert(m.name).second)
            throw std::invalid_argument("evaluation: duplicate method name '" + m.name +
                                        "'");
        const bool wired = (m.kind == MethodKind::rollout && m.predictor) ||
                           (m.kind == MethodKind::static_regressor && m.static_model) ||
                           (m.kind == MethodKind::last_seen_value) ||
                           (m.kind == MethodKind::custom && m.direct);
        if (!wired)
            throw std::invalid_argument("evaluation: method '" + m.name +
                                        "' has no predictor wired for its kind");
    }
}

std::vector<int> resolve_targets(const EvalProtocol& p, int observed, int t_eval) {
    if (!p.target_epochs.empty()) return p.target_epochs;
    std::vector<int> targets;
    for (int t = observed + 1; t <= t_eval; ++t) targets.push_back(t);
    return targets;
}

}  // namespace

EvalReport evaluate(const std::vector<NamedMethod>& methods, const CurveDataset& test,
                    const EvalProtocol& protocol) {
    validate_methods(methods);
    test.validate();
    if (protocol.observed_epochs.empty())
        throw std::invalid_argument("evaluation: no observed epochs");
    for (int m_obs : protocol.observed_epochs)
        if (m_obs < 1)
            throw std::invalid_argument("evaluation: observed epochs must be >= 1");
    if (protocol.num_rollouts < 1)
        throw std::invalid_argument("evaluation: num_rollouts must be >= 1");

    int min_len = std::numeric_limits<int>::max();
    for (const auto& curve : test.curves)
        min_len = std::min(min_len, static_cast<int>(curve.values.size()));
    const int max_obs =
        *std::max_element(protocol.observed_epochs.begin(), protocol.observed_epochs.end());

    EvalProtocol proto = protocol;
    if (!proto.target_epochs.empty()) {
        std::sort(proto.target_epochs.begin(), proto.target_epochs.end());
        proto.target_epochs.erase(
            std::unique(proto.target_epochs.begin(), proto.target_epochs.end()),
            proto.target_epochs.end());
        if (proto.target_epochs.front() <= max_obs)
            throw std::invalid_argument(
                "evaluation: every target must exceed every observed count");
        if (proto.target_epochs.back() > min_len)
            throw std::invalid_argument("evaluation: curve too short for target epoch " +
                                        std::to_string(proto.target_epochs.back()));
    } else if (min_len <= max_obs) {
        throw std::invalid_argument(
            "evaluation: curve too short for the largest observed count");
    }
    const int t_eval = min_len;

    EvalReport report;
    report.protocol = proto;

    for (const auto& method : methods) {
        for (int m_obs : proto.observed_epochs) {
            const std::vector<int> targets = resolve_targets(proto, m_obs, t_eval);
            const int horizon = targets.back();
            const std::size_t num_t = targets.size();

            std::vector<std::vector<double>> sq(num_t), lls(num_t);
            for (const auto& curve : test.curves) {
                const std::vector<double> observed(
                    curve.values.begin(), curve.values.begin() + m_obs);
                const std::uint64_t cell_seed =
                    derive_seed(proto.seed, method.name,
                                static_cast<std::uint64_t>(m_obs), curve.id);

                std::vector<PredictiveGaussian> gs(num_t);
                bool has_var = true;
                switch (method.kind) {
                    case MethodKind::rollout: {
                        RolloutConfig rc;
                        rc.num_rollouts = proto.num_rollouts;
                        rc.horizon = horizon;
                        rc.seed = cell_seed;
                        const RolloutResult rr =
                            roll_out(*method.predictor, curve.config, observed, rc);
                        for (std::size_t ti = 0; ti < num_t; ++ti) {
                            const auto idx =
                                static_cast<std::size_t>(targets[ti] - m_obs - 1);
                            gs[ti] = {rr.mean[idx], rr.variance[idx]};
                        }
                        break;
                    }
                    case MethodKind::static_regressor:
                        for (std::size_t ti = 0; ti < num_t; ++ti)
                            gs[ti] = static_predict(*method.static_model, curve.config,
                                                    targets[ti]);
                        break;
                    case MethodKind::last_seen_value:
                        has_var = false;
                        for (std::size_t ti = 0; ti < num_t; ++ti)
                            gs[ti] = {lsv_predict(observed, targets[ti]), 0.0};
                        break;
                    case MethodKind::custom:
                        for (std::size_t ti = 0; ti < num_t; ++ti)
                            gs[ti] = method.direct(curve, m_obs, targets[ti]);
                        break;
                }

                for (std::size_t ti = 0; ti < num_t; ++ti) {
                    const double truth =
                        curve.values[static_cast<std::size_t>(targets[ti] - 1)];
                    const double err = gs[ti].mean - truth;
                    sq[ti].push_back(err * err);

                    PredictionRecord rec;
                    rec.method = method.name;
                    rec.observed = m_obs;
                    rec.target = targets[ti];
                    rec.curve_id = curve.id;
                    rec.true_value = truth;
                    rec.pred_mean = gs[ti].mean;
                    rec.has_var = has_var;
                    if (has_var) {
                        rec.pred_var = gs[ti].variance;
                        rec.ll = gaussian_log_density(truth, gs[ti].mean,
                                                      gs[ti].variance);
                        lls[ti].push_back(rec.ll);
                    }
                    report.predictions.push_back(std::move(rec));
                }
            }

            double mse_sum = 0.0;
            std::vector<double> pooled;
            for (std::size_t ti = 0; ti < num_t; ++ti) {
                EvalCell cell;
                cell.method = method.name;
                cell.observed = m_obs;
                cell.target = targets[ti];
                cell.num_curves = static_cast<int>(sq[ti].size());
                double mean = 0.0;
                for (double s : sq[ti]) mean += s;
                mean /= static_cast<double>(sq[ti].size());
                double var = 0.0;
                for (double s : sq[ti]) var += (s - mean) * (s - mean);
                var /= static_cast<double>(sq[ti].size());
                cell.mse = mean;
                cell.mse_std = std::sqrt(var);
                if (!lls[ti].empty()) {
                    cell.median_ll = lower_median(lls[ti]);
                    cell.has_ll = true;
                    pooled.insert(pooled.end(), lls[ti].begin(), lls[ti].end());
                }
                mse_sum += cell.mse;
                report.cells.push_back(std::move(cell));
            }

            MethodObservedSummary summary;
            summary.method = method.name;
            summary.observed = m_obs;
            summary.num_targets = static_cast<int>(num_t);
            summary.avg_mse = mse_sum / static_cast<double>(num_t);
            if (!pooled.empty()) {
                summary.median_ll = lower_median(std::move(pooled));
                summary.has_ll = true;
            }
            report.summaries.push_back(std::move(summary));
        }
    }
    return report;
}

std::vector<AdaptationPoint> adaptation_curve(const NamedMethod& method,
                                              const CurveDataset& test,
                                              int target_epoch,
                                              const std::vector<int>& observed_grid,
                                              int num_rollouts, std::uint64_t seed) {
    EvalProtocol p;
    p.observed_epochs = observed_grid;
    p.target_epochs = {target_epoch};
    p.num_rollouts = num_rollouts;
    p.seed = seed;
    const EvalReport report = evaluate({method}, test, p);

    std::vector<AdaptationPoint> points;
    points.reserve(report.cells.size());
    for (const auto& cell : report.cells) {
        AdaptationPoint pt;
        pt.observed = cell.observed;
        pt.mse = cell.mse;
        pt.median_ll = cell.median_ll;
        pt.has_ll = cell.has_ll;
        points.push_back(pt);
    }
    return points;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
    return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error(path.string() + ": unwritable path");
}

}  // namespace

void emit_plot_data(const EvalReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir.string() + ": unwritable path");

    {
        const auto path = out_dir / "metrics_by_target.csv";
        auto out = open_out(path);
        out << "method,observed,target,mse,median_ll\n";
        for (const auto& cell : report.cells) {
            out << cell.method << ',' << cell.observed << ',' << cell.target << ','
                << format_double(cell.mse) << ',';
            if (cell.has_ll) out << format_double(cell.median_ll);
            out << '\n';
        }
        close_checked(out, path);
    }
    {
        const auto path = out_dir / "adaptation.csv";
        auto out = open_out(path);
        out << "method,observed,avg_mse,median_ll,num_targets\n";
        for (const auto& s : report.summaries) {
            out << s.method << ',' << s.observed << ',' << format_double(s.avg_mse)
                << ',';
            if (s.has_ll) out << format_double(s.median_ll);
            out << ',' << s.num_targets << '\n';
        }
        close_checked(out, path);
    }
    {
        const auto path = out_dir / "predicted_vs_true.csv";
        auto out = open_out(path);
        out << "method,observed,target,true,pred_mean,pred_var,ll\n";
        for (const auto& r : report.predictions) {
            out << r.method << ',' << r.observed << ',' << r.target << ','
                << format_double(r.true_value) << ',' << format_double(r.pred_mean)
                << ',';
            if (r.has_var)
                out << format_double(r.pred_var) << ',' << format_double(r.ll);
            else
                out << ',';
            out << '\n';
        }
        close_checked(out, path);
    }
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["format_version"] = 1;
    json jp;
    jp["observed_epochs"] = report.protocol.observed_epochs;
    if (report.protocol.target_epochs.empty())
        jp["target_epochs"] = "all";
    else
        jp["target_epochs"] = report.protocol.target_epochs;
    jp["num_rollouts"] = report.protocol.num_rollouts;
    jp["seed"] = report.protocol.seed;
    jp["value_space"] = report.protocol.value_space;
    j["protocol"] = std::move(jp);

    j["cells"] = json::array();
    for (const auto& cell : report.cells) {
        json jc;
        jc["method"] = cell.method;
        jc["observed"] = cell.observed;
        jc["target"] = cell.target;
        jc["mse"] = cell.mse;
        jc["mse_std_over_curves"] = cell.mse_std;
        jc["num_curves"] = cell.num_curves;
        if (cell.has_ll) jc["median_ll"] = cell.median_ll;
        j["cells"].push_back(std::move(jc));
    }

    j["summaries"] = json::array();
    for (const auto& s : report.summaries) {
        json js;
        js["method"] = s.method;
        js["observed"] = s.observed;
        js["avg_mse"] = s.avg_mse;
        js["num_targets"] = s.num_targets;
        if (s.has_ll) js["median_ll"] = s.median_ll;
        j["summaries"].push_back(std::move(js));
    }

    j["predictions"] = json::array();
    for (const auto& r : report.predictions) {
        json jr;
        jr["method"] = r.method;
        jr["observed"] = r.observed;
        jr["target"] = r.target;
        jr["curve_id"] = r.curve_id;
        jr["true"] = r.true_value;
        jr["pred_mean"] = r.pred_mean;
        if (r.has_var) {
            jr["pred_var"] = r.pred_var;
            jr["ll"] = r.ll;
        }
        j["predictions"].push_back(std::move(jr));
    }
    return j.dump(2);
}

void save_report_json(const EvalReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << report_to_json(report) << '\n';
    close_checked(out, path);
}

}  // namespace lcroll
