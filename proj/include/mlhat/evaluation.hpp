#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mlhat/classifier.hpp"
#include "mlhat/metrics.hpp"
#include "mlhat/stream.hpp"

namespace mlhat {

struct EvalConfig {
    std::size_t report_every = 50;
    double alpha = 0.995;
    /// 0 evaluates the whole stream.
    std::uint64_t max_instances = 0;
};

struct ReportRow {
    std::uint64_t instance_index = 0;  // instances scored so far
    MetricValues exact{};
    MetricValues forgotten{};
    double time_s = 0.0;
    ModelReport model;
};

struct EvalReport {
    std::string model_name;
    std::vector<ReportRow> rows;
    std::uint64_t instances = 0;
    double test_seconds = 0.0;
    double train_seconds = 0.0;
    /// Empty when the stream was consumed without error.
    std::string error;

    bool complete() const noexcept { return error.empty(); }
    const ReportRow& final_row() const { return rows.back(); }
};

/// Test-then-train over `stream`. Rows are taken every `report_every`
/// instances and once more at the end. A stream or model error stops the run
/// and is recorded in `error`; the rows collected so far are kept.
/// `on_row`, when set, sees every row as it is produced.
EvalReport run_prequential(StreamClassifier& model, InstanceStream& stream, const EvalConfig& config,
                           const std::function<void(const ReportRow&)>& on_row = {});

std::string report_csv_header(bool with_model_column = false);
void write_report_row(std::ostream& out, const ReportRow& row, const std::string* model = nullptr);
void write_report_csv(std::ostream& out, const EvalReport& report, bool with_model_column = false);

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// JSON summary: final metrics, totals, and every config entry echoed verbatim.
std::string report_summary_json(const EvalReport& report, const ConfigEntries& config);

}  // namespace mlhat
