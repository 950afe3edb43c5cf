#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace mlhat {

inline constexpr std::size_t kMaxLabels = 4096;

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by stream sources; `record()` is the 1-based record (or line) number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t record, const std::string& what);
    std::size_t record() const noexcept { return record_; }

private:
    std::size_t record_;
};

enum class FeatureKind : std::uint8_t { Numerical, Categorical };

/// Canonical encoding of one binary label vector.
///
/// Label i lives at bit (63 - i % 64) of word i / 64, so comparing the word
/// arrays as unsigned integers orders keys lexicographically by label index.
class LabelsetKey {
public:
    LabelsetKey() = default;
    explicit LabelsetKey(std::size_t label_count);
    /// Rebuilds a key from its word array; throws SchemaError if bits beyond size are set.
    static LabelsetKey from_words(std::size_t label_count, std::vector<std::uint64_t> words);

    std::size_t size() const noexcept { return size_; }
    bool test(std::size_t label) const noexcept {
        return (words_[label >> 6] >> (63 - (label & 63))) & 1u;
    }
    void set(std::size_t label, bool value = true) noexcept;
    std::size_t count() const noexcept;
    bool none() const noexcept { return count() == 0; }

    std::span<const std::uint64_t> words() const noexcept { return words_; }
    std::vector<std::uint8_t> to_vector() const;
    std::string to_string() const;  // "101" for labels (1,0,1)

    std::size_t intersection_count(const LabelsetKey& other) const noexcept;
    std::size_t hamming_distance(const LabelsetKey& other) const noexcept;

    friend bool operator==(const LabelsetKey&, const LabelsetKey&) = default;
    friend std::strong_ordering operator<=>(const LabelsetKey& a, const LabelsetKey& b);

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct LabelsetKeyHash {
    std::size_t operator()(const LabelsetKey& key) const noexcept;
};

LabelsetKey encode_labelset(std::span<const std::uint8_t> labels, std::size_t label_count);
std::vector<std::uint8_t> decode_labelset(const LabelsetKey& key);

/// Per-feature interning of categorical symbols to dense ids.
class SymbolTable {
public:
    std::size_t intern(const std::string& symbol);
    std::optional<std::size_t> find(const std::string& symbol) const;
    const std::string& symbol(std::size_t id) const { return symbols_.at(id); }
    std::size_t size() const noexcept { return symbols_.size(); }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, std::size_t> ids_;
};

struct StreamSchema {
    std::vector<FeatureKind> feature_kinds;
    std::size_t label_count = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;
    /// One table per feature; empty for numerical features.
    std::vector<SymbolTable> symbols;

    StreamSchema() = default;
    StreamSchema(std::vector<FeatureKind> kinds, std::size_t labels);

    std::size_t feature_count() const noexcept { return feature_kinds.size(); }
    bool is_categorical(std::size_t f) const { return feature_kinds[f] == FeatureKind::Categorical; }

    /// Fills missing names and symbol tables; throws SchemaError on inconsistency.
    void finalize();
    bool same_shape(const StreamSchema& other) const;
};

/// A feature value before interning: a number or a categorical symbol.
using RawValue = std::variant<double, std::string>;

struct RawInstance {
    std::vector<RawValue> features;
    std::optional<std::vector<std::uint8_t>> labels;
    double weight = 1.0;
};

/// Features are stored densely; a categorical slot holds its interned id.
struct Instance {
    std::vector<double> features;
    std::optional<LabelsetKey> labels;
    double weight = 1.0;

    const LabelsetKey& y() const { return labels.value(); }
};

/// Throws SchemaError when `raw` does not fit `schema`.
void validate_instance(const RawInstance& raw, const StreamSchema& schema);

/// Same checks for an already interned instance.
void validate_instance(const Instance& instance, const StreamSchema& schema);

/// Validates and interns; novel categorical symbols grow the schema.
Instance intern_instance(const RawInstance& raw, StreamSchema& schema);

struct Prediction {
    std::vector<double> probabilities;
    LabelsetKey labelset;

    static Prediction from_probabilities(std::vector<double> probabilities, double threshold = 0.5);
    static Prediction from_labelset(const LabelsetKey& labelset);
};

/// Single-consumer source of instances.
class InstanceStream {
public:
    virtual ~InstanceStream() = default;
    virtual const StreamSchema& schema() const = 0;
    /// Next instance in source order, or nullopt at end of stream.
    virtual std::optional<Instance> next() = 0;
};

class VectorStream final : public InstanceStream {
public:
    VectorStream(StreamSchema schema, std::vector<Instance> instances);

    const StreamSchema& schema() const override { return schema_; }
    std::optional<Instance> next() override;
    void rewind() noexcept { position_ = 0; }
    std::size_t size() const noexcept { return instances_.size(); }

private:
    StreamSchema schema_;
    std::vector<Instance> instances_;
    std::size_t position_ = 0;
};

/// Stream adaptor that stops after `limit` instances.
class TakeStream final : public InstanceStream {
public:
    TakeStream(InstanceStream& inner, std::size_t limit) : inner_(inner), remaining_(limit) {}
    const StreamSchema& schema() const override { return inner_.schema(); }
    std::optional<Instance> next() override;

private:
    InstanceStream& inner_;
    std::size_t remaining_;
};

std::vector<Instance> collect(InstanceStream& stream);

}  // namespace mlhat
