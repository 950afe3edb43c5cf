#include "mlhat/stream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace mlhat {

ParseError::ParseError(std::size_t record, const std::string& what)
    : std::runtime_error("record " + std::to_string(record) + ": " + what), record_(record) {}

LabelsetKey::LabelsetKey(std::size_t label_count)
    : size_(label_count), words_((label_count + 63) / 64, 0) {
    if (label_count > kMaxLabels) {
        throw SchemaError("label count " + std::to_string(label_count) + " exceeds limit " +
                          std::to_string(kMaxLabels));
    }
}

LabelsetKey LabelsetKey::from_words(std::size_t label_count, std::vector<std::uint64_t> words) {
    LabelsetKey key(label_count);
    if (words.size() != key.words_.size()) throw SchemaError("labelset word count mismatch");
    if (label_count % 64 != 0 && !words.empty()) {
        const std::uint64_t tail_mask = ~std::uint64_t{0} >> (label_count % 64);
        if (words.back() & tail_mask) throw SchemaError("labelset has bits beyond its size");
    }
    key.words_ = std::move(words);
    return key;
}

void LabelsetKey::set(std::size_t label, bool value) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (63 - (label & 63));
    if (value) {
        words_[label >> 6] |= mask;
    } else {
        words_[label >> 6] &= ~mask;
    }
}

std::size_t LabelsetKey::count() const noexcept {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

std::vector<std::uint8_t> LabelsetKey::to_vector() const {
    std::vector<std::uint8_t> out(size_);
    for (std::size_t l = 0; l < size_; ++l) out[l] = test(l) ? 1 : 0;
    return out;
}

std::string LabelsetKey::to_string() const {
    std::string out(size_, '0');
    for (std::size_t l = 0; l < size_; ++l) {
        if (test(l)) out[l] = '1';
    }
    return out;
}

std::size_t LabelsetKey::intersection_count(const LabelsetKey& other) const noexcept {
    std::size_t total = 0;
    const std::size_t n = std::min(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
        total += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
    }
    return total;
}

std::size_t LabelsetKey::hamming_distance(const LabelsetKey& other) const noexcept {
    std::size_t total = 0;
    const std::size_t n = std::max(words_.size(), other.words_.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t a = i < words_.size() ? words_[i] : 0;
        const std::uint64_t b = i < other.words_.size() ? other.words_[i] : 0;
        total += static_cast<std::size_t>(std::popcount(a ^ b));
    }
    return total;
}

std::strong_ordering operator<=>(const LabelsetKey& a, const LabelsetKey& b) {
    if (auto c = a.size_ <=> b.size_; c != 0) return c;
    return std::lexicographical_compare_three_way(a.words_.begin(), a.words_.end(), b.words_.begin(),
                                                  b.words_.end());
}

std::size_t LabelsetKeyHash::operator()(const LabelsetKey& key) const noexcept {
    // splitmix64 finalizer over the words
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ key.size();
    for (auto w : key.words()) {
        h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= h >> 30;
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 27;
        h *= 0x94d049bb133111ebULL;
        h ^= h >> 31;
    }
    return static_cast<std::size_t>(h);
}

LabelsetKey encode_labelset(std::span<const std::uint8_t> labels, std::size_t label_count) {
    if (labels.size() != label_count) {
        throw SchemaError("label vector has length " + std::to_string(labels.size()) + ", schema expects " +
                          std::to_string(label_count));
    }
    LabelsetKey key(label_count);
    for (std::size_t l = 0; l < label_count; ++l) {
        if (labels[l] > 1) throw SchemaError("label value must be 0 or 1");
        if (labels[l]) key.set(l);
    }
    return key;
}

std::vector<std::uint8_t> decode_labelset(const LabelsetKey& key) { return key.to_vector(); }

std::size_t SymbolTable::intern(const std::string& symbol) {
    auto [it, inserted] = ids_.try_emplace(symbol, symbols_.size());
    if (inserted) symbols_.push_back(symbol);
    return it->second;
}

std::optional<std::size_t> SymbolTable::find(const std::string& symbol) const {
    auto it = ids_.find(symbol);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

StreamSchema::StreamSchema(std::vector<FeatureKind> kinds, std::size_t labels)
    : feature_kinds(std::move(kinds)), label_count(labels) {
    finalize();
}

void StreamSchema::finalize() {
    if (label_count < 1) throw SchemaError("schema needs at least one label");
    if (label_count > kMaxLabels) throw SchemaError("too many labels");
    const std::size_t nf = feature_kinds.size();
    if (feature_names.empty()) {
        for (std::size_t f = 0; f < nf; ++f) feature_names.push_back("f" + std::to_string(f));
    }
    if (label_names.empty()) {
        for (std::size_t l = 0; l < label_count; ++l) label_names.push_back("l" + std::to_string(l));
    }
    symbols.resize(nf);
    if (feature_names.size() != nf) throw SchemaError("feature name count does not match feature count");
    if (label_names.size() != label_count) throw SchemaError("label name count does not match label count");
}

bool StreamSchema::same_shape(const StreamSchema& other) const {
    return feature_kinds == other.feature_kinds && label_count == other.label_count;
}

namespace {

void check_numeric(double v, std::size_t f) {
    if (!std::isfinite(v)) throw SchemaError("feature " + std::to_string(f) + " is not a finite number");
}

}  // namespace

void validate_instance(const RawInstance& raw, const StreamSchema& schema) {
    if (raw.features.size() != schema.feature_count()) {
        throw SchemaError("instance has " + std::to_string(raw.features.size()) + " features, schema expects " +
                          std::to_string(schema.feature_count()));
    }
    for (std::size_t f = 0; f < raw.features.size(); ++f) {
        const auto& value = raw.features[f];
        if (schema.is_categorical(f)) {
            if (!std::holds_alternative<std::string>(value)) {
                throw SchemaError("feature " + std::to_string(f) + " is categorical but got a number");
            }
        } else {
            if (!std::holds_alternative<double>(value)) {
                throw SchemaError("feature " + std::to_string(f) + " is numerical but got a symbol");
            }
            check_numeric(std::get<double>(value), f);
        }
    }
    if (raw.labels) {
        if (raw.labels->size() != schema.label_count) {
            throw SchemaError("instance has " + std::to_string(raw.labels->size()) + " labels, schema expects " +
                              std::to_string(schema.label_count));
        }
        for (auto l : *raw.labels) {
            if (l > 1) throw SchemaError("label value must be 0 or 1");
        }
    }
    if (!(raw.weight >= 0.0) || !std::isfinite(raw.weight)) throw SchemaError("instance weight must be >= 0");
}

void validate_instance(const Instance& instance, const StreamSchema& schema) {
    if (instance.features.size() != schema.feature_count()) {
        throw SchemaError("instance has " + std::to_string(instance.features.size()) +
                          " features, schema expects " + std::to_string(schema.feature_count()));
    }
    for (std::size_t f = 0; f < instance.features.size(); ++f) {
        const double v = instance.features[f];
        check_numeric(v, f);
        if (schema.is_categorical(f) && (v < 0.0 || v != std::floor(v))) {
            throw SchemaError("feature " + std::to_string(f) + " is categorical but holds a non-id value");
        }
    }
    if (instance.labels && instance.labels->size() != schema.label_count) {
        throw SchemaError("instance has " + std::to_string(instance.labels->size()) +
                          " labels, schema expects " + std::to_string(schema.label_count));
    }
    if (!(instance.weight >= 0.0) || !std::isfinite(instance.weight)) {
        throw SchemaError("instance weight must be >= 0");
    }
}

Instance intern_instance(const RawInstance& raw, StreamSchema& schema) {
    validate_instance(raw, schema);
    Instance out;
    out.features.resize(raw.features.size());
    for (std::size_t f = 0; f < raw.features.size(); ++f) {
        if (schema.is_categorical(f)) {
            out.features[f] = static_cast<double>(schema.symbols[f].intern(std::get<std::string>(raw.features[f])));
        } else {
            out.features[f] = std::get<double>(raw.features[f]);
        }
    }
    if (raw.labels) out.labels = encode_labelset(*raw.labels, schema.label_count);
    out.weight = raw.weight;
    return out;
}

Prediction Prediction::from_probabilities(std::vector<double> probabilities, double threshold) {
    Prediction p;
    p.labelset = LabelsetKey(probabilities.size());
    for (std::size_t l = 0; l < probabilities.size(); ++l) {
        double& v = probabilities[l];
        if (!std::isfinite(v)) v = 0.0;
        v = std::clamp(v, 0.0, 1.0);
        if (v >= threshold) p.labelset.set(l);
    }
    p.probabilities = std::move(probabilities);
    return p;
}

Prediction Prediction::from_labelset(const LabelsetKey& labelset) {
    Prediction p;
    p.labelset = labelset;
    p.probabilities.resize(labelset.size());
    for (std::size_t l = 0; l < labelset.size(); ++l) p.probabilities[l] = labelset.test(l) ? 1.0 : 0.0;
    return p;
}

VectorStream::VectorStream(StreamSchema schema, std::vector<Instance> instances)
    : schema_(std::move(schema)), instances_(std::move(instances)) {}

std::optional<Instance> VectorStream::next() {
    if (position_ >= instances_.size()) return std::nullopt;
    return instances_[position_++];
}

std::optional<Instance> TakeStream::next() {
    if (remaining_ == 0) return std::nullopt;
    --remaining_;
    return inner_.next();
}

std::vector<Instance> collect(InstanceStream& stream) {
    std::vector<Instance> out;
    while (auto inst = stream.next()) out.push_back(std::move(*inst));
    return out;
}

}  // namespace mlhat
