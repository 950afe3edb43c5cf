#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mlhat/classifier.hpp"
#include "mlhat/leaf_models.hpp"
#include "mlhat/serialization.hpp"

using namespace mlhat;

namespace {

LabelsetKey key(const std::string& bits) {
    std::vector<std::uint8_t> v;
    for (char c : bits) v.push_back(c == '1');
    return encode_labelset(v, v.size());
}

Instance inst(std::vector<double> x, const std::string& bits, double w = 1.0) { return {std::move(x), key(bits), w}; }

const std::vector<FeatureKind> kNum2{FeatureKind::Numerical, FeatureKind::Numerical};

}  // namespace

TEST_SUITE("leaf-models") {

TEST_CASE("majority prediction and ties") {
    LabelsetHistogram h{{key("10"), 3.0}, {key("01"), 1.0}};
    CHECK(majority_predict(h).labelset == key("10"));
    CHECK(majority_predict(h).probabilities == std::vector<double>{1, 0});
    LabelsetHistogram tie{{key("10"), 2.0}, {key("01"), 2.0}};
    CHECK(majority_predict(tie).labelset == key("01"));
    CHECK_THROWS_AS(majority_predict(LabelsetHistogram{}), std::logic_error);
}

TEST_CASE("majority model answers the heaviest labelset") {
    StreamSchema schema(kNum2, 2);
    MajorityLabelsetModel m(schema);
    CHECK_FALSE(m.ready());
    m.learn_one(inst({0, 0}, "11"));
    m.learn_one(inst({0, 0}, "01"));
    m.learn_one(inst({0, 0}, "01"));
    m.learn_one(inst({0, 0}, "11", 0.0));
    CHECK(m.predict_one(std::vector<double>{5, 5}).labelset == key("01"));
}

TEST_CASE("knn window evicts first in first out") {
    LabelPowersetKnn knn(kNum2, 2, 1, 3);
    for (int i = 0; i < 4; ++i) knn.learn(inst({double(i), 0}, "10"), 1.0);
    CHECK(knn.size() == 3);
    CHECK(knn.window().front().features[0] == 1.0);
    knn.learn(inst({9, 9}, "01"), 1.0);
    knn.learn(inst({9, 9}, "01"), 1.0);
    CHECK(knn.size() == 3);
    CHECK(knn.window()[1].features == knn.window()[2].features);
}

TEST_CASE("knn with k=1 on a stored point returns its labelset") {
    LabelPowersetKnn knn(kNum2, 3, 1, 10);
    knn.learn(inst({0, 0}, "101"), 1.0);
    knn.learn(inst({1, 1}, "010"), 1.0);
    knn.learn(inst({0.5, 0.2}, "111"), 1.0);
    auto p = knn.predict(std::vector<double>{1, 1});
    CHECK(p.labelset == key("010"));
    CHECK(p.probabilities == std::vector<double>{0, 1, 0});
}

TEST_CASE("single labelset window predicts it for any k") {
    for (std::size_t k : {1u, 3u, 7u, 50u}) {
        LabelPowersetKnn knn(kNum2, 2, k, 20);
        std::mt19937_64 rng(k);
        std::uniform_real_distribution<double> u(0, 1);
        for (int i = 0; i < 15; ++i) knn.learn(inst({u(rng), u(rng)}, "01"), 1.0);
        CHECK(knn.predict(std::vector<double>{0.3, 0.3}).labelset == key("01"));
    }
}

TEST_CASE("zero weight entries are stored but never vote") {
    LabelPowersetKnn knn(kNum2, 2, 1, 10);
    knn.learn(inst({0, 0}, "11"), 0.0);
    CHECK(knn.size() == 1);
    CHECK_FALSE(knn.can_vote());
    CHECK(knn.predict(std::vector<double>{0, 0}).probabilities == std::vector<double>{0, 0});
    knn.learn(inst({5, 5}, "10"), 1.0);
    CHECK(knn.predict(std::vector<double>{0, 0}).labelset == key("10"));
}

TEST_CASE("empty knn refuses to predict") {
    LabelPowersetKnn knn(kNum2, 2, 3, 10);
    CHECK_THROWS_AS(knn.predict(std::vector<double>{0, 0}), std::logic_error);
}

TEST_CASE("neighbours match a brute force distance sort with insertion order ties") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<FeatureKind> kinds{FeatureKind::Numerical, FeatureKind::Categorical};
        LabelPowersetKnn knn(kinds, 2, 5, 40);
        // coarse grid values create many exact distance ties
        for (int i = 0; i < 40; ++i) {
            knn.learn(inst({double(rng() % 4), double(rng() % 2)}, (rng() & 1) ? "10" : "01"), 1.0);
        }
        const std::vector<double> q{double(rng() % 4), double(rng() % 2)};
        std::vector<std::size_t> order(knn.size());
        std::iota(order.begin(), order.end(), 0);
        double lo = 1e9, hi = -1e9;
        for (const auto& e : knn.window()) lo = std::min(lo, e.features[0]), hi = std::max(hi, e.features[0]);
        REQUIRE(hi > lo);
        std::vector<double> d(knn.size());
        for (std::size_t i = 0; i < knn.size(); ++i) {
            const auto& e = knn.window()[i].features;
            const double dx = (e[0] - q[0]) / (hi - lo);
            d[i] = std::sqrt(dx * dx + (e[1] != q[1] ? 1.0 : 0.0));
            CHECK(knn.distance(e, q) == doctest::Approx(d[i]));
        }
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
        order.resize(5);
        CHECK(knn.neighbours(q) == order);
    }
}

TEST_CASE("knn top labelset is always in the window") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    const char* sets[] = {"110", "011", "101"};
    LabelPowersetKnn knn(kNum2, 3, 5, 30);
    std::set<std::string> seen;
    for (int i = 0; i < 30; ++i) {
        const char* s = sets[rng() % 3];
        seen.insert(s);
        knn.learn(inst({u(rng), u(rng)}, s), 1.0);
    }
    for (int i = 0; i < 200; ++i) {
        const std::vector<double> q{u(rng), u(rng)};
        auto top = knn.top_labelset(q);
        REQUIRE(top);
        CHECK(seen.count(top->to_string()) == 1);
        for (double p : knn.predict(q).probabilities) CHECK((p >= 0.0 && p <= 1.0));
    }
}

TEST_CASE("logistic step matches the finite-difference gradient") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0, 1);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 1 + rng() % 6;
        std::vector<double> w(d), x(d);
        for (auto& v : w) v = n(rng);
        for (auto& v : x) v = n(rng);
        const double b = n(rng);
        const bool y = rng() & 1;
        const double weight = 0.5 + std::abs(n(rng));
        const double lr = 0.01;

        auto loss = [&](const std::vector<double>& ww, double bb) {
            double z = bb;
            for (std::size_t i = 0; i < d; ++i) z += ww[i] * x[i];
            const double p = 1.0 / (1.0 + std::exp(-z));
            return -weight * (y ? std::log(p) : std::log(1.0 - p));
        };
        LogisticRegressor m(d, lr);
        m.set_parameters(w, b);
        m.learn(x, y, weight);
        const double h = 1e-6;
        for (std::size_t i = 0; i < d; ++i) {
            auto wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            const double grad = (loss(wp, b) - loss(wm, b)) / (2 * h);
            const double step = (m.weights()[i] - w[i]) / lr;
            CHECK(std::abs(step + grad) <= 1e-6 * std::max(1.0, std::abs(grad)));
        }
        const double gb = (loss(w, b + h) - loss(w, b - h)) / (2 * h);
        CHECK(std::abs((m.bias() - b) / lr + gb) <= 1e-6 * std::max(1.0, std::abs(gb)));
    }
}

TEST_CASE("logistic weight zero is a no-op and repeated positives push towards one") {
    LogisticRegressor m(1, 0.1);
    const std::vector<double> x{1.0};
    m.learn(x, true, 0.0);
    CHECK(m.weights()[0] == 0.0);
    CHECK(m.predict_proba(x) == doctest::Approx(0.5));
    double prev = m.predict_proba(x);
    for (int i = 0; i < 200; ++i) {
        m.learn(x, true, 1.0);
        const double p = m.predict_proba(x);
        CHECK(p > prev);
        prev = p;
    }
    CHECK(prev > 0.95);
    CHECK(sigmoid(1e6) < 1.0);
    CHECK(sigmoid(-1e6) > 0.0);
}

TEST_CASE("feature encoder standardizes and one-hot encodes") {
    const std::vector<FeatureKind> kinds{FeatureKind::Categorical, FeatureKind::Numerical};
    FeatureEncoder enc(kinds);
    for (double v : {2.0, 4.0, 6.0}) enc.observe(std::vector<double>{v == 4.0 ? 1.0 : 0.0, v});
    std::vector<double> out;
    enc.encode(std::vector<double>{1.0, 6.0}, out);
    REQUIRE(enc.dims() == 3);
    CHECK(out[0] == doctest::Approx(1.0));  // (6 - 4) / 2
    CHECK(out[1] == 0.0);
    CHECK(out[2] == 1.0);
    enc.encode(std::vector<double>{3.0, 4.0}, out);  // unseen category: all zeros
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("bagging untrained predicts one half and lambda zero freezes") {
    BinaryRelevanceBagging br(kNum2, 3, BaggingConfig{10, 0.01, 0.0, true}, 1);
    const std::vector<double> q{0.3, 0.7};
    for (double p : br.predict(q).probabilities) CHECK(p == doctest::Approx(0.5));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i) br.learn(inst({u(rng), u(rng)}, "101"), 1.0);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t m = 0; m < 10; ++m) CHECK(br.member(l, m).bias() == 0.0);
}

TEST_CASE("bagging draws have mean one") {
    BinaryRelevanceBagging br(kNum2, 1, BaggingConfig{10, 0.01, 1.0, true}, 99);
    for (int i = 0; i < 1000; ++i) br.learn(inst({0.0, 1.0}, "1"), 1.0);
    CHECK(br.mean_draw() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("single member without resampling is plain logistic regression") {
    BinaryRelevanceBagging br(kNum2, 2, BaggingConfig{1, 0.05, 1.0, false}, 3);
    FeatureEncoder enc(kNum2);
    LogisticRegressor a(0, 0.05), b(0, 0.05);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> z;
    for (int i = 0; i < 300; ++i) {
        auto x = inst({u(rng), u(rng)}, (i % 3) ? "10" : "01", 1.0 + (i % 2));
        br.learn(x, x.weight);
        enc.observe(x.features);
        enc.encode(x.features, z);
        a.resize(z.size());
        b.resize(z.size());
        a.learn(z, x.y().test(0), x.weight);
        b.learn(z, x.y().test(1), x.weight);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(br.member(0, 0).weights()[i] == doctest::Approx(a.weights()[i]).epsilon(1e-12));
        CHECK(br.member(1, 0).weights()[i] == doctest::Approx(b.weights()[i]).epsilon(1e-12));
    }
}

TEST_CASE("bagging prediction is the mean of its members and deterministic by seed") {
    auto train = [](std::uint64_t seed) {
        BinaryRelevanceBagging br(kNum2, 2, BaggingConfig{}, seed);
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0, 1);
        for (int i = 0; i < 500; ++i) {
            const double a = u(rng), b = u(rng);
            br.learn(inst({a, b}, std::string(a > 0.5 ? "1" : "0") + (b > 0.5 ? "1" : "0")), 1.0);
        }
        return br;
    };
    auto one = train(5);
    auto two = train(5);
    const std::vector<double> q{0.8, 0.1};
    CHECK(one.predict(q).probabilities == two.predict(q).probabilities);
    std::vector<double> z;
    one.encoder().encode(q, z);
    for (std::size_t l = 0; l < 2; ++l) {
        double s = 0;
        for (std::size_t m = 0; m < one.ensemble_size(); ++m) s += one.member(l, m).predict_proba(z);
        CHECK(one.predict(q).probabilities[l] == doctest::Approx(s / one.ensemble_size()).epsilon(1e-12));
    }
    CHECK(one.predict(q).labelset == key("10"));

    std::stringstream buf;
    BinaryWriter w(buf);
    one.save(w);
    BinaryReader r(buf);
    auto back = BinaryRelevanceBagging::load(r);
    CHECK(back.predict(q).probabilities == one.predict(q).probabilities);
    auto extra = inst({0.2, 0.9}, "01");
    back.learn(extra, 1.0);
    one.learn(extra, 1.0);
    CHECK(back.predict(q).probabilities == one.predict(q).probabilities);
}

TEST_CASE("knn snapshot round trip") {
    LabelPowersetKnn knn(kNum2, 2, 3, 8);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 12; ++i) knn.learn(inst({u(rng), u(rng)}, (i & 1) ? "10" : "11"), double(i % 3));
    std::stringstream buf;
    BinaryWriter w(buf);
    knn.save(w);
    BinaryReader r(buf);
    auto back = LabelPowersetKnn::load(r);
    const std::vector<double> q{0.4, 0.6};
    CHECK(back.predict(q).probabilities == knn.predict(q).probabilities);
    CHECK(back.neighbours(q) == knn.neighbours(q));
}

}
