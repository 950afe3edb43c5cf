#include <doctest.h>

#include <json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "mlhat/evaluation.hpp"
#include "mlhat/models.hpp"
#include "oracles.hpp"

using namespace mlhat;

namespace {

/// Records every call and fails if it is asked to predict an instance whose labels it already saw.
class SpyModel final : public StreamClassifier {
public:
    explicit SpyModel(std::size_t L) : L_(L) {}
    std::string name() const override { return "spy"; }
    bool ready() const override { return learned_ > 0; }
    Prediction predict_one(std::span<const double> x) const override {
        calls.push_back("p" + std::to_string(static_cast<int>(x[0])));
        for (double seen : seen_) {
            if (seen == x[0]) leaked = true;
        }
        return Prediction::from_labelset(LabelsetKey(L_));
    }
    void learn_one(const Instance& instance) override {
        calls.push_back("l" + std::to_string(static_cast<int>(instance.features[0])));
        seen_.push_back(instance.features[0]);
        ++learned_;
        if (fail_at && learned_ == fail_at) throw std::runtime_error("boom");
    }
    ModelReport report() const override { return {}; }

    mutable std::vector<std::string> calls;
    mutable bool leaked = false;
    std::size_t fail_at = 0;

private:
    std::size_t L_;
    std::size_t learned_ = 0;
    std::vector<double> seen_;
};

VectorStream counting_stream(std::size_t n) {
    StreamSchema schema({FeatureKind::Numerical}, 2);
    std::vector<Instance> xs;
    for (std::size_t i = 0; i < n; ++i) {
        xs.push_back({{double(i)}, encode_labelset(std::vector<std::uint8_t>{std::uint8_t(i % 2), 1}, 2), 1.0});
    }
    return VectorStream(std::move(schema), std::move(xs));
}

}  // namespace

TEST_SUITE("metrics-eval") {

TEST_CASE("test strictly before train") {
    auto s = counting_stream(120);
    SpyModel spy(2);
    auto report = run_prequential(spy, s, {});
    CHECK_FALSE(spy.leaked);
    REQUIRE(spy.calls.size() == 239);  // the first instance is not predicted by an unready model
    CHECK(spy.calls[0] == "l0");
    for (std::size_t i = 1; i < 120; ++i) {
        CHECK(spy.calls[2 * i - 1] == "p" + std::to_string(i));
        CHECK(spy.calls[2 * i] == "l" + std::to_string(i));
    }
    CHECK(report.complete());
    CHECK(report.instances == 120);
}

TEST_CASE("rows every report interval plus a final row") {
    auto s = counting_stream(120);
    SpyModel spy(2);
    std::vector<std::uint64_t> seen;
    auto report = run_prequential(spy, s, {50, 0.995, 0}, [&](const ReportRow& r) { seen.push_back(r.instance_index); });
    CHECK(seen == std::vector<std::uint64_t>{50, 100, 120});
    REQUIRE(report.rows.size() == 3);
    // the empty prediction against truth (i%2, 1): hamming 1 or 0.5
    CHECK(report.final_row().exact[1] == doctest::Approx(0.75));
}

TEST_CASE("max instances stops early") {
    auto s = counting_stream(120);
    SpyModel spy(2);
    auto report = run_prequential(spy, s, {50, 0.995, 70});
    CHECK(report.instances == 70);
    CHECK(report.final_row().instance_index == 70);
}

TEST_CASE("model errors keep the partial report") {
    auto s = counting_stream(200);
    SpyModel spy(2);
    spy.fail_at = 130;
    auto report = run_prequential(spy, s, {});
    CHECK_FALSE(report.complete());
    CHECK(report.error == "boom");
    CHECK(report.rows.size() == 3);
    CHECK(report.final_row().instance_index == 129);
}

TEST_CASE("exact metrics equal the batch oracle over the logged predictions") {
    auto s = fixtures::separable_stream(3, 600);
    auto model = make_model("mlhat", s.schema(), {});
    std::vector<std::vector<int>> ys, zs;
    auto replay = fixtures::separable_stream(3, 600);
    auto shadow = make_model("mlhat", s.schema(), {});
    while (auto x = replay.next()) {
        auto z = shadow->ready() ? shadow->predict_one(x->features).labelset : LabelsetKey(2);
        ys.push_back({x->y().test(0), x->y().test(1)});
        zs.push_back({z.test(0), z.test(1)});
        shadow->learn_one(*x);
    }
    auto report = run_prequential(*model, s, {});
    const auto ref = oracle::batch_metrics(ys, zs);
    for (std::size_t m = 0; m < kMetricCount; ++m) CHECK(report.final_row().exact[m] == doctest::Approx(ref[m]).epsilon(1e-12));
}

TEST_CASE("csv and json outputs") {
    auto s = counting_stream(60);
    SpyModel spy(2);
    auto report = run_prequential(spy, s, {});
    std::ostringstream csv;
    write_report_csv(csv, report, true);
    std::istringstream lines(csv.str());
    std::string header, row1, row2, extra;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    CHECK_FALSE(std::getline(lines, extra));
    CHECK(header.rfind("model,instance_index,subset_accuracy_exact,subset_accuracy_forgotten", 0) == 0);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row1.begin(), row1.end(), ','));
    CHECK(row1.rfind("spy,50,", 0) == 0);
    CHECK(row2.rfind("spy,60,", 0) == 0);
    CHECK(report_csv_header().rfind("instance_index,", 0) == 0);

    ConfigEntries cfg{{"alpha", "0.995"}, {"model", "spy"}, {"mlhat.split_grace", "200"}};
    auto j = nlohmann::json::parse(report_summary_json(report, cfg));
    CHECK(j["config"]["alpha"] == "0.995");
    CHECK(j["config"]["mlhat.split_grace"] == "200");
    CHECK(j["instances"] == 60);
    CHECK(j["final"].contains("example_f1_exact"));
}

TEST_CASE("describe echoes every config field") {
    MLHATConfig cfg;
    cfg.split_confidence = 1e-7;
    cfg.seed = 42;
    auto entries = describe(cfg);
    CHECK(entries.size() == 18);
    auto find = [&](const std::string& k) {
        for (const auto& [key, v] : entries)
            if (key == k) return v;
        return std::string("?");
    };
    CHECK(find("split_confidence") == "1e-07");
    CHECK(find("seed") == "42");
    CHECK(format_number(0.1) == "0.1");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("model factory") {
    StreamSchema schema({FeatureKind::Numerical}, 2);
    for (const auto& name : model_names()) CHECK(make_model(name, schema, {})->name() == name);
    CHECK_THROWS_AS(make_model("nope", schema, {}), std::invalid_argument);
}

}
