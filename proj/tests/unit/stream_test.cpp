#include <doctest.h>

#include <random>

#include "mlhat/stream.hpp"

using namespace mlhat;

TEST_SUITE("stream-core") {

TEST_CASE("labelset encoding round trips random vectors") {
    std::mt19937_64 rng(7);
    for (std::size_t L : {1u, 5u, 63u, 64u, 65u, 130u, 600u}) {
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<std::uint8_t> v(L);
            for (auto& b : v) b = rng() & 1;
            const auto key = encode_labelset(v, L);
            CHECK(decode_labelset(key) == v);
            std::size_t ones = 0;
            for (auto b : v) ones += b;
            CHECK(key.count() == ones);
        }
    }
}

TEST_CASE("distinct vectors give distinct keys and keys order lexicographically") {
    const std::size_t L = 6;
    std::vector<LabelsetKey> keys;
    for (unsigned m = 0; m < (1u << L); ++m) {
        std::vector<std::uint8_t> v(L);
        for (std::size_t l = 0; l < L; ++l) v[l] = (m >> (L - 1 - l)) & 1;
        keys.push_back(encode_labelset(v, L));
    }
    for (std::size_t i = 1; i < keys.size(); ++i) CHECK(keys[i - 1] < keys[i]);
    CHECK(keys[5].to_string() == "000101");
}

TEST_CASE("key helpers") {
    auto a = encode_labelset(std::vector<std::uint8_t>{1, 0, 1, 1}, 4);
    auto b = encode_labelset(std::vector<std::uint8_t>{1, 1, 0, 1}, 4);
    CHECK(a.intersection_count(b) == 2);
    CHECK(a.hamming_distance(b) == 2);
    CHECK(LabelsetKeyHash{}(a) != LabelsetKeyHash{}(b));
    CHECK_THROWS_AS(LabelsetKey::from_words(3, {~0ull}), SchemaError);
}

TEST_CASE("wrong label count is a schema error") {
    CHECK_THROWS_AS(encode_labelset(std::vector<std::uint8_t>{1, 0}, 3), SchemaError);
}

TEST_CASE("interning grows symbol tables and validates kinds") {
    StreamSchema schema({FeatureKind::Numerical, FeatureKind::Categorical}, 2);
    schema.finalize();
    RawInstance raw{{1.5, std::string("red")}, std::vector<std::uint8_t>{1, 0}, 1.0};
    auto a = intern_instance(raw, schema);
    raw.features[1] = std::string("blue");
    auto b = intern_instance(raw, schema);
    raw.features[1] = std::string("red");
    auto c = intern_instance(raw, schema);
    CHECK(a.features[1] == 0.0);
    CHECK(b.features[1] == 1.0);
    CHECK(c.features[1] == 0.0);
    CHECK(schema.symbols[1].size() == 2);

    RawInstance bad{{std::string("x"), std::string("red")}, std::vector<std::uint8_t>{1, 0}, 1.0};
    CHECK_THROWS_AS(intern_instance(bad, schema), SchemaError);
    RawInstance short_labels{{1.0, std::string("red")}, std::vector<std::uint8_t>{1}, 1.0};
    CHECK_THROWS_AS(intern_instance(short_labels, schema), SchemaError);
    RawInstance arity{{1.0}, std::vector<std::uint8_t>{1, 0}, 1.0};
    CHECK_THROWS_AS(intern_instance(arity, schema), SchemaError);
}

TEST_CASE("prediction binarization uses the threshold") {
    // a probability equal to the threshold counts as positive
    auto p = Prediction::from_probabilities({0.2, 0.5, 0.49, 0.9});
    CHECK(p.labelset.to_string() == "0101");
    auto q = Prediction::from_probabilities({0.2, 0.5, 0.49, 0.9}, 0.3);
    CHECK(q.labelset.to_string() == "0111");
    auto r = Prediction::from_labelset(p.labelset);
    CHECK(r.probabilities == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("vector and take streams iterate deterministically") {
    StreamSchema schema({FeatureKind::Numerical}, 1);
    schema.finalize();
    std::vector<Instance> xs;
    for (int i = 0; i < 10; ++i) xs.push_back({{double(i)}, encode_labelset(std::vector<std::uint8_t>{uint8_t(i & 1)}, 1), 1.0});
    VectorStream s(schema, xs);
    auto first = collect(s);
    s.rewind();
    auto second = collect(s);
    REQUIRE(first.size() == 10);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i].features == second[i].features);
    s.rewind();
    TakeStream t(s, 3);
    CHECK(collect(t).size() == 3);
}

}
