#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "mlhat/leaf_models.hpp"
#include "mlhat/stream.hpp"

namespace mlhat {

/// Structural snapshot of a model; baselines report a single node.
struct ModelReport {
    std::size_t nodes = 1;
    std::size_t leaves = 1;
    std::size_t depth = 0;
    std::size_t alternates = 0;
    std::uint64_t splits = 0;
    std::uint64_t split_attempts = 0;
    std::uint64_t warnings = 0;
    std::uint64_t replacements = 0;
    std::uint64_t prunes = 0;
    std::uint64_t instances = 0;
    double learn_seconds = 0.0;
    double predict_seconds = 0.0;
};

class StreamClassifier {
public:
    virtual ~StreamClassifier() = default;

    virtual std::string name() const = 0;
    /// False until the model has learned enough to answer predict_one.
    virtual bool ready() const = 0;
    virtual Prediction predict_one(std::span<const double> features) const = 0;
    virtual void learn_one(const Instance& instance) = 0;
    virtual ModelReport report() const = 0;
};

/// Always answers the heaviest labelset seen so far.
class MajorityLabelsetModel final : public StreamClassifier {
public:
    explicit MajorityLabelsetModel(const StreamSchema& schema);

    std::string name() const override { return "majority"; }
    bool ready() const override { return !hist_.empty(); }
    Prediction predict_one(std::span<const double> features) const override;
    void learn_one(const Instance& instance) override;
    ModelReport report() const override;

private:
    LabelsetHistogram hist_;
    std::uint64_t seen_ = 0;
    // Cached argmax, refreshed on learn so prediction stays O(1).
    LabelsetKey best_;
    double best_weight_ = -1.0;
};

/// Sliding-window kNN; the per-label vote shares are exactly binary relevance kNN.
class BrKnnModel final : public StreamClassifier {
public:
    BrKnnModel(const StreamSchema& schema, std::size_t k, std::size_t window);

    std::string name() const override { return "br-knn"; }
    bool ready() const override { return model_.can_vote(); }
    Prediction predict_one(std::span<const double> features) const override { return model_.predict(features); }
    void learn_one(const Instance& instance) override;
    ModelReport report() const override;

private:
    LabelPowersetKnn model_;
    std::uint64_t seen_ = 0;
};

class BrBaggingLrModel final : public StreamClassifier {
public:
    BrBaggingLrModel(const StreamSchema& schema, BaggingConfig config, std::uint64_t seed);

    std::string name() const override { return "br-bagging-lr"; }
    bool ready() const override { return seen_ > 0; }
    Prediction predict_one(std::span<const double> features) const override { return model_.predict(features); }
    void learn_one(const Instance& instance) override;
    ModelReport report() const override;

    const BinaryRelevanceBagging& model() const noexcept { return model_; }

private:
    BinaryRelevanceBagging model_;
    std::uint64_t seen_ = 0;
};

}  // namespace mlhat
