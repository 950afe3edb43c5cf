#include <doctest.h>

#include "fixtures.hpp"
#include "mlhat/synth.hpp"

using namespace mlhat;

TEST_SUITE("synth-gen") {

TEST_CASE("presets cover the twelve layouts") {
    const auto names = preset_names();
    CHECK(names.size() == 12);
    for (const auto& n : names) {
        auto spec = preset(n, 1000, 1);
        spec.validate();
        CHECK(spec.name == n);
    }
    CHECK(preset("synhpsud", 1000).kind == GeneratorKind::Hyperplane);
    CHECK_THROWS_AS(preset("SynFoo", 1000), std::invalid_argument);
    auto tree = preset("SynTreeSud", 1000);
    CHECK(tree.numeric == 20);
    CHECK(tree.categorical == 10);
    CHECK(tree.labels == 8);
    auto rbf = preset("SynRBFGrad", 1000);
    CHECK(rbf.numeric == 80);
    CHECK(rbf.labels == 25);
    CHECK(rbf.schedule.width == 500);
    CHECK(preset("SynHPInc", 1000).schedule.width == 275);
    CHECK(preset("SynHPSud", 1000).schedule.width == 1);
}

TEST_CASE("standard schedule positions and recurrence") {
    auto s = DriftSchedule::standard(DriftType::Sudden, 50'000);
    CHECK(s.positions == std::vector<std::uint64_t>{12'500, 25'000, 37'500});
    auto r = DriftSchedule::standard(DriftType::Recurrent, 1000);
    CHECK(r.concepts == std::vector<std::size_t>{0, 2, 0, 2});
    CHECK(DriftSchedule::standard(DriftType::None, 1000).segment_count() == 1);
    auto bad = s;
    bad.positions = {10, 5, 20};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("ramp reaches its endpoints and sudden drift has no band") {
    CHECK(transition_ramp(-250, 500) == 0.0);
    CHECK(transition_ramp(250, 500) == 1.0);
    CHECK(transition_ramp(0, 500) == doctest::Approx(0.5));
    double prev = 0;
    for (double o = -260; o <= 260; o += 5) {
        const double r = transition_ramp(o, 500);
        CHECK(r >= prev);
        prev = r;
    }
    auto sudden = DriftSchedule::standard(DriftType::Sudden, 40'000);
    for (std::uint64_t t = 0; t < 40'000; ++t) {
        auto mix = active_concept(sudden, t);
        CHECK(mix.mixing == 0.0);
        CHECK(mix.from == mix.to);
    }
    CHECK(active_concept(sudden, 9'999).to == 0);
    CHECK(active_concept(sudden, 10'000).to == 1);
}

TEST_CASE("outside transition bands the concept is constant") {
    auto g = DriftSchedule::standard(DriftType::Gradual, 40'000);
    for (std::uint64_t t = 0; t < 40'000; ++t) {
        auto mix = active_concept(g, t);
        bool in_band = false;
        for (auto p : g.positions) in_band |= (double(t) - double(p) >= -250.0 && double(t) - double(p) < 250.0);
        if (!in_band) {
            CHECK(mix.mixing == 0.0);
            CHECK(mix.from == mix.to);
        }
    }
}

TEST_CASE("same spec and seed give identical streams") {
    for (const auto& n : {"SynTreeGrad", "SynRBFInc", "SynHPRec"}) {
        SyntheticStream a(preset(n, 2000, 4)), b(preset(n, 2000, 4)), c(preset(n, 2000, 5));
        bool differs = false;
        std::size_t count = 0;
        while (auto x = a.next()) {
            auto y = b.next();
            auto z = c.next();
            REQUIRE(y);
            CHECK(x->features == y->features);
            CHECK(x->y() == y->y());
            differs |= x->features != z->features;
            ++count;
        }
        CHECK_FALSE(b.next());
        CHECK(count == 2000);
        CHECK(differs);
    }
}

TEST_CASE("schema of the generated stream") {
    SyntheticStream s(preset("SynTreeSud", 100, 1));
    CHECK(s.schema().feature_count() == 30);
    CHECK(s.schema().is_categorical(20));
    CHECK(s.schema().symbols[20].size() == 5);
    auto x = s.next();
    for (std::size_t f = 20; f < 30; ++f) CHECK((x->features[f] >= 0 && x->features[f] < 5));
}

TEST_CASE("per-segment cardinality tracks the configured value") {
    for (const auto& n : {"SynHPSud", "SynTreeInc", "SynRBFGrad", "SynHPRec"}) {
        INFO(n);
        CHECK(fixtures::worst_cardinality_gap(preset(n, 24'000, 3)) <= 0.15);
    }
}

TEST_CASE("label dependency grows with the mixing coefficient") {
    std::vector<double> mean(4, 0.0);
    const double us[] = {0.0, 0.15, 0.25, 0.5};
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (int i = 0; i < 4; ++i) {
            auto spec = default_spec(GeneratorKind::Hyperplane, DriftType::None, 6000, seed);
            spec.schedule.segments[0].dependency = us[i];
            SyntheticStream s(spec);
            mean[i] += fixtures::mean_label_correlation(s, 6000) / 5.0;
        }
    }
    CHECK(mean[0] < mean[1]);
    CHECK(mean[1] < mean[2]);
    CHECK(mean[2] < mean[3]);
}

TEST_CASE("metadata describes the spec") {
    SyntheticStream s(preset("SynHPGrad", 1000, 9));
    bool has_seed = false;
    for (const auto& [k, v] : s.metadata()) has_seed |= k == "seed" && v == "9";
    CHECK(has_seed);
}

}
