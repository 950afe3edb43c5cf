#include "mlhat/evaluation.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mlhat {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

EvalReport run_prequential(StreamClassifier& model, InstanceStream& stream, const EvalConfig& config,
                           const std::function<void(const ReportRow&)>& on_row) {
    if (config.report_every == 0) throw std::invalid_argument("report_every must be >= 1");
    const std::size_t L = stream.schema().label_count;
    MetricSuite exact(L, 1.0);
    MetricSuite forgotten(L, config.alpha);

    EvalReport report;
    report.model_name = model.name();
    const auto start = Clock::now();
    auto emit = [&] {
        ReportRow row;
        row.instance_index = report.instances;
        row.exact = exact.values();
        row.forgotten = forgotten.values();
        row.time_s = std::chrono::duration<double>(Clock::now() - start).count();
        row.model = model.report();
        report.rows.push_back(row);
        if (on_row) on_row(report.rows.back());
    };

    try {
        while (config.max_instances == 0 || report.instances < config.max_instances) {
            auto instance = stream.next();
            if (!instance) break;
            if (!instance->labels) throw SchemaError("prequential evaluation needs labelled instances");

            const auto t0 = Clock::now();
            Prediction z = model.ready() ? model.predict_one(instance->features)
                                         : Prediction::from_labelset(LabelsetKey(L));
            const auto t1 = Clock::now();
            exact.update(instance->y(), z.labelset);
            forgotten.update(instance->y(), z.labelset);
            const auto t2 = Clock::now();
            model.learn_one(*instance);
            const auto t3 = Clock::now();

            report.test_seconds += std::chrono::duration<double>(t1 - t0).count();
            report.train_seconds += std::chrono::duration<double>(t3 - t2).count();
            ++report.instances;
            if (report.instances % config.report_every == 0) emit();
        }
    } catch (const std::exception& e) {
        report.error = e.what();
    }
    if (report.instances > 0 && (report.rows.empty() || report.rows.back().instance_index != report.instances)) {
        emit();
    }
    return report;
}

std::string report_csv_header(bool with_model_column) {
    std::string h = with_model_column ? "model,instance_index" : "instance_index";
    for (auto name : kMetricNames) {
        h += ",";
        h += name;
        h += "_exact,";
        h += name;
        h += "_forgotten";
    }
    h += ",time_s,nodes,depth,alternates,replacements";
    return h;
}

void write_report_row(std::ostream& out, const ReportRow& row, const std::string* model) {
    if (model) out << *model << ',';
    out << row.instance_index;
    for (std::size_t i = 0; i < kMetricCount; ++i) out << ',' << fmt(row.exact[i]) << ',' << fmt(row.forgotten[i]);
    out << ',' << fmt(row.time_s) << ',' << row.model.nodes << ',' << row.model.depth << ',' << row.model.alternates
        << ',' << row.model.replacements << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report, bool with_model_column) {
    out << report_csv_header(with_model_column) << '\n';
    for (const auto& row : report.rows) write_report_row(out, row, with_model_column ? &report.model_name : nullptr);
}

std::string report_summary_json(const EvalReport& report, const ConfigEntries& config) {
    nlohmann::ordered_json j;
    j["model"] = report.model_name;
    j["instances"] = report.instances;
    j["complete"] = report.complete();
    if (!report.complete()) j["error"] = report.error;
    j["test_seconds"] = report.test_seconds;
    j["train_seconds"] = report.train_seconds;
    if (!report.rows.empty()) {
        const auto& row = report.final_row();
        for (std::size_t i = 0; i < kMetricCount; ++i) {
            j["final"][std::string(kMetricNames[i]) + "_exact"] = row.exact[i];
            j["final"][std::string(kMetricNames[i]) + "_forgotten"] = row.forgotten[i];
        }
        const auto& m = row.model;
        j["model_report"] = {{"nodes", m.nodes},
                             {"leaves", m.leaves},
                             {"depth", m.depth},
                             {"alternates", m.alternates},
                             {"splits", m.splits},
                             {"split_attempts", m.split_attempts},
                             {"warnings", m.warnings},
                             {"replacements", m.replacements},
                             {"prunes", m.prunes}};
    }
    auto& cfg = j["config"] = nlohmann::ordered_json::object();
    for (const auto& [key, value] : config) cfg[key] = value;
    return j.dump(2) + "\n";
}

}  // namespace mlhat
