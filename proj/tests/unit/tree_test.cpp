#include <doctest.h>

#include <functional>
#include <sstream>

#include "fixtures.hpp"
#include "mlhat/serialization.hpp"
#include "mlhat/synth.hpp"
#include "mlhat/tree.hpp"
#include "oracles.hpp"

using namespace mlhat;

namespace {

SyntheticStream hp_stream(DriftType drift, std::uint64_t n, std::uint64_t seed) {
    return SyntheticStream(default_spec(GeneratorKind::Hyperplane, drift, n, seed));
}

void walk(const Node& n, const std::function<void(const Node&, bool)>& f, bool in_alt = false) {
    f(n, in_alt);
    if (n.alternate) walk(*n.alternate, f, true);
    if (!n.is_leaf()) {
        walk(*n.left, f, in_alt);
        walk(*n.right, f, in_alt);
    }
}

}  // namespace

TEST_SUITE("mlhat-tree") {

TEST_CASE("split bound closed form") {
    CHECK(split_bound(4, 1e-5, 200) == doctest::Approx(0.33931).epsilon(1e-4 / 0.33931));
    CHECK(split_bound(4, 1e-5, 200) == doctest::Approx(oracle::split_bound(4, 1e-5, 200)).epsilon(1e-12));
    CHECK(split_bound(1, 1e-5, 200) == 0.0);
    for (double w : {10.0, 100.0, 1000.0, 1e5}) {
        // eps * sqrt(W) is constant
        CHECK(split_bound(8, 1e-3, w) * std::sqrt(w) == doctest::Approx(split_bound(8, 1e-3, 1.0)));
    }
    CHECK_THROWS_AS(split_bound(0, 1e-5, 200), std::invalid_argument);
}

TEST_CASE("alternate bound closed form and outcomes") {
    CHECK(alt_bound(0.3, 0.2, 1000, 1000, 0.05) == doctest::Approx(0.05951).epsilon(1e-4 / 0.05951));
    CHECK(alt_bound(0.3, 0.2, 1000, 1000, 0.05) ==
          doctest::Approx(oracle::alt_bound(0.3, 0.2, 1000, 1000, 0.05)).epsilon(1e-12));
    double prev = 1e9;
    for (double w = 10; w <= 1e7; w *= 10) {
        const double e = alt_bound(0.3, 0.2, w, w, 0.05);
        CHECK(e < prev);
        prev = e;
    }
    CHECK(prev < 1e-3);
    CHECK(compare_alternate(0.5, 0.2, 1000, 1000, 0.05) == AlternateOutcome::Replaced);
    CHECK(compare_alternate(0.2, 0.5, 1000, 1000, 0.05) == AlternateOutcome::Pruned);
    CHECK(compare_alternate(0.30, 0.29, 1000, 1000, 0.05) == AlternateOutcome::Kept);
    CHECK(compare_alternate(0.3, 0.2, 0, 1000, 0.05) == AlternateOutcome::Deferred);
}

TEST_CASE("config validation") {
    StreamSchema schema({FeatureKind::Numerical}, 2);
    MLHATConfig bad;
    bad.split_confidence = 0.0;
    CHECK_THROWS_AS(MLHAT(schema, bad), std::invalid_argument);
    bad = {};
    bad.split_grace = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.decision_threshold = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(MLHATConfig{}.effective_knn_window() == 750);
}

TEST_CASE("anytime prediction after one instance") {
    auto s = fixtures::separable_stream(1, 3);
    MLHAT tree(s.schema(), {});
    CHECK_FALSE(tree.ready());
    CHECK_THROWS_AS(tree.predict_one(std::vector<double>{0.1, 0.2}), std::logic_error);
    tree.learn_one(*s.next());
    REQUIRE(tree.ready());
    auto p = tree.predict_one(std::vector<double>{0.1, 0.2});
    CHECK(p.probabilities.size() == 2);
    CHECK_THROWS_AS(tree.predict_one(std::vector<double>{0.1}), SchemaError);
}

TEST_CASE("first split equals the batch oracle argmax") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto c = fixtures::first_split_check(seed);
        INFO("seed " << seed);
        REQUIRE(c.split);
        CHECK(c.on_grace);
        CHECK(c.matches);
        CHECK(c.instance % 200 == 0);
    }
}

TEST_CASE("split attempts only at multiples of the grace period") {
    auto s = fixtures::separable_stream(3, 8000);
    MLHATConfig cfg;
    cfg.split_grace = 50;
    MLHAT tree(s.schema(), cfg);
    while (auto x = s.next()) tree.learn_one(*x);
    REQUIRE_FALSE(tree.events().split_attempts.empty());
    for (const auto& a : tree.events().split_attempts) CHECK(a.leaf_seen % 50 == 0);
    CHECK(tree.report().splits > 1);
}

TEST_CASE("drift produces alternates, replacements and memory contraction") {
    auto s = hp_stream(DriftType::Sudden, 40'000, 4);
    MLHAT tree(s.schema(), {});
    std::size_t max_alternates_per_node = 0;
    bool nested = false;
    std::size_t i = 0;
    while (auto x = s.next()) {
        tree.learn_one(*x);
        if (++i % 500 == 0) {
            walk(tree.root(), [&](const Node& n, bool in_alt) {
                if (n.alternate) max_alternates_per_node = std::max<std::size_t>(max_alternates_per_node, 1);
                if (in_alt && n.alternate) nested = true;
            });
        }
    }
    CHECK_FALSE(nested);
    CHECK(tree.report().warnings > 0);
    REQUIRE(tree.report().replacements > 0);
    for (const auto& r : tree.events().replacements) {
        CHECK(r.nodes_after <= r.nodes_before + r.alternate_size - r.replaced_size);
        CHECK(r.nodes_after < r.nodes_before);
    }
}

TEST_CASE("fixed seed runs are identical") {
    auto run = [](std::uint64_t seed) {
        auto s = hp_stream(DriftType::Sudden, 6000, 2);
        MLHATConfig cfg;
        cfg.seed = seed;
        cfg.split_confidence = 0.01;
        MLHAT tree(s.schema(), cfg);
        std::vector<double> probs;
        while (auto x = s.next()) {
            auto p = tree.ready() ? tree.predict_one(x->features).probabilities : std::vector<double>{};
            probs.insert(probs.end(), p.begin(), p.end());
            tree.learn_one(*x);
        }
        return std::make_pair(probs, tree.report());
    };
    auto a = run(7), b = run(7), c = run(8);
    CHECK(a.first == b.first);
    CHECK(a.second.nodes == b.second.nodes);
    CHECK(a.second.splits == b.second.splits);
    CHECK(a.second.warnings == b.second.warnings);
    CHECK(a.first != c.first);
}

TEST_CASE("alternates are inert until a warning fires") {
    auto run = [](bool adaptation, bool combine) {
        auto s = fixtures::separable_stream(5, 3000);
        MLHATConfig cfg;
        cfg.adwin_delta = 1e-12;
        cfg.drift_adaptation = adaptation;
        cfg.combine_alternates = combine;
        MLHAT tree(s.schema(), cfg);
        std::vector<double> probs;
        while (auto x = s.next()) {
            if (tree.ready()) {
                auto p = tree.predict_one(x->features).probabilities;
                probs.insert(probs.end(), p.begin(), p.end());
            }
            tree.learn_one(*x);
        }
        return std::make_pair(probs, tree.events().warnings.size());
    };
    auto with = run(true, false);
    auto without = run(false, false);
    REQUIRE(with.second == 0);
    CHECK(with.first == without.first);
    CHECK(run(false, true).first == without.first);
}

TEST_CASE("zero poisson weight only feeds detectors and raw counts") {
    auto s = fixtures::separable_stream(2, 500);
    MLHATConfig cfg;
    cfg.poisson_lambda = 0.0;
    MLHAT tree(s.schema(), cfg);
    while (auto x = s.next()) {
        tree.learn_one(*x);
        CHECK(tree.last_weight() == 0.0);
    }
    const Node& root = tree.root();
    REQUIRE(root.is_leaf());
    CHECK(root.leaf->stats.total_weight() == 0.0);
    CHECK(root.leaf->seen == 500);
    CHECK(root.seen == 500);
    CHECK(root.weight == 0.0);
    CHECK(root.detector.width() > 0);
    CHECK_FALSE(root.leaf->knn.can_vote());
    // an empty leaf answers its fallback labelset
    CHECK(tree.predict_one(std::vector<double>{0.5, 0.5}).labelset.none());
}

TEST_CASE("snapshot round trip is bit stable") {
    auto s = hp_stream(DriftType::Sudden, 9000, 6);
    MLHATConfig cfg;
    cfg.split_confidence = 0.01;
    MLHAT tree(s.schema(), cfg);
    for (int i = 0; i < 6000; ++i) tree.learn_one(*s.next());
    std::stringstream one;
    tree.save(one);
    std::stringstream copy(one.str());
    MLHAT back = MLHAT::load(copy);
    std::stringstream two;
    back.save(two);
    CHECK(one.str() == two.str());
    CHECK(back.report().nodes == tree.report().nodes);
    while (auto x = s.next()) {
        CHECK(back.predict_one(x->features).probabilities == tree.predict_one(x->features).probabilities);
        tree.learn_one(*x);
        back.learn_one(*x);
    }
    std::stringstream bad("not a snapshot");
    CHECK_THROWS_AS(MLHAT::load(bad), SnapshotError);
    std::string truncated = one.str().substr(0, one.str().size() / 2);
    std::stringstream cut(truncated);
    CHECK_THROWS_AS(MLHAT::load(cut), SnapshotError);
}

TEST_CASE("refresh schema requires the same shape") {
    StreamSchema schema({FeatureKind::Numerical, FeatureKind::Categorical}, 2);
    MLHAT tree(schema, {});
    StreamSchema other({FeatureKind::Numerical}, 2);
    CHECK_THROWS_AS(tree.refresh_schema(other), SchemaError);
    schema.finalize();
    schema.symbols[1].intern("a");
    tree.refresh_schema(schema);
    CHECK(tree.schema().symbols[1].size() == 1);
}

TEST_CASE("unlabelled and malformed instances are rejected") {
    StreamSchema schema({FeatureKind::Numerical}, 2);
    MLHAT tree(schema, {});
    Instance x{{1.0}, std::nullopt, 1.0};
    CHECK_THROWS_AS(tree.learn_one(x), SchemaError);
    Instance y{{1.0, 2.0}, encode_labelset(std::vector<std::uint8_t>{1, 0}, 2), 1.0};
    CHECK_THROWS_AS(tree.learn_one(y), SchemaError);
}

}
