#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

class BinaryWriter;
class BinaryReader;

using LabelsetHistogram = std::unordered_map<LabelsetKey, double, LabelsetKeyHash>;

/// Heaviest labelset of the histogram, ties to the smallest key.
/// Throws std::logic_error when the histogram is empty.
Prediction majority_predict(const LabelsetHistogram& hist);

/// kNN over a bounded FIFO window, voting over whole labelsets.
///
/// Distance: Euclidean over numerical features scaled by their running range
/// with each mismatched categorical feature adding 1 under the root. Entries with zero weight are kept
/// in the window but cast no vote, so they are never selected as neighbours.
/// Distance ties go to the older entry.
class LabelPowersetKnn {
public:
    struct Entry {
        std::vector<double> features;
        LabelsetKey labels;
        double weight = 1.0;
    };

    LabelPowersetKnn() = default;
    LabelPowersetKnn(std::span<const FeatureKind> kinds, std::size_t label_count, std::size_t k,
                     std::size_t capacity);

    void learn(const Instance& instance, double weight);

    /// Per-label vote share among the k nearest voters. Throws std::logic_error
    /// when the window is empty; all-zero probabilities when no entry can vote.
    Prediction predict(std::span<const double> features) const;

    /// Labelset with the largest vote weight among the neighbours (smallest key on ties).
    std::optional<LabelsetKey> top_labelset(std::span<const double> features) const;

    /// Window indices of the neighbours, nearest first.
    std::vector<std::size_t> neighbours(std::span<const double> features) const;
    double distance(std::span<const double> a, std::span<const double> b) const;

    bool empty() const noexcept { return window_.empty(); }
    bool can_vote() const noexcept { return voters_ > 0; }
    std::size_t size() const noexcept { return window_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t k() const noexcept { return k_; }
    const std::deque<Entry>& window() const noexcept { return window_; }

    void save(BinaryWriter& out) const;
    static LabelPowersetKnn load(BinaryReader& in);

private:
    std::vector<FeatureKind> kinds_;
    std::size_t label_count_ = 0;
    std::size_t k_ = 5;
    std::size_t capacity_ = 750;
    std::deque<Entry> window_;
    std::size_t voters_ = 0;  // entries with positive weight
    std::vector<double> min_;
    std::vector<double> max_;
};

/// Logistic function with the margin clamped to [-30, 30], so the result is strictly inside (0, 1).
inline double sigmoid(double z) noexcept {
    z = z < -30.0 ? -30.0 : (z > 30.0 ? 30.0 : z);
    return 1.0 / (1.0 + std::exp(-z));
}

/// Binary logistic regression trained by weighted online gradient steps
///   w += lr * weight * (y - sigmoid(w.x + b)) * x,   b += lr * weight * (y - sigmoid(w.x + b)).
class LogisticRegressor {
public:
    explicit LogisticRegressor(std::size_t dims = 0, double learning_rate = 0.01);

    double predict_proba(std::span<const double> x) const noexcept;
    void learn(std::span<const double> x, bool y, double weight) noexcept;
    /// Grows the weight vector with zeros; never shrinks.
    void resize(std::size_t dims);

    std::span<const double> weights() const noexcept { return weights_; }
    double bias() const noexcept { return bias_; }
    double learning_rate() const noexcept { return learning_rate_; }
    void set_parameters(std::vector<double> weights, double bias);

    void save(BinaryWriter& out) const;
    static LogisticRegressor load(BinaryReader& in);

private:
    double margin(std::span<const double> x) const noexcept;

    std::vector<double> weights_;
    double bias_ = 0.0;
    double learning_rate_ = 0.01;
};

/// Dense encoding for linear models: numerical features standardized by a
/// running mean / std, categorical values one-hot with columns allocated in
/// order of first appearance.
class FeatureEncoder {
public:
    FeatureEncoder() = default;
    explicit FeatureEncoder(std::span<const FeatureKind> kinds);

    void observe(std::span<const double> features);
    void encode(std::span<const double> features, std::vector<double>& out) const;
    std::size_t dims() const noexcept { return dims_; }

    void save(BinaryWriter& out) const;
    static FeatureEncoder load(BinaryReader& in);

private:
    static constexpr std::size_t kNoColumn = std::numeric_limits<std::size_t>::max();

    std::vector<FeatureKind> kinds_;
    std::vector<std::size_t> numeric_column_;  // per feature; kNoColumn for categorical
    std::vector<std::vector<std::size_t>> category_column_;
    std::vector<double> count_;
    std::vector<double> mean_;
    std::vector<double> m2_;
    std::size_t dims_ = 0;
};

struct BaggingConfig {
    std::size_t ensemble_size = 10;
    double learning_rate = 0.01;
    double poisson_lambda = 1.0;
    /// When false every member trains on every instance with its own weight (plain BR-LR).
    bool resample = true;
};

/// Binary relevance over online bagging of logistic regressors: each label
/// owns `ensemble_size` members, each trained with weight x Poisson(lambda).
class BinaryRelevanceBagging {
public:
    BinaryRelevanceBagging() = default;
    BinaryRelevanceBagging(std::span<const FeatureKind> kinds, std::size_t label_count, BaggingConfig config,
                           std::uint64_t seed);

    void learn(const Instance& instance, double weight);
    Prediction predict(std::span<const double> features) const;

    std::size_t label_count() const noexcept { return label_count_; }
    std::size_t ensemble_size() const noexcept { return config_.ensemble_size; }
    const LogisticRegressor& member(std::size_t label, std::size_t m) const {
        return members_.at(label * config_.ensemble_size + m);
    }
    const FeatureEncoder& encoder() const noexcept { return encoder_; }
    /// Mean Poisson training multiplier drawn so far (diagnostic).
    double mean_draw() const noexcept { return draws_ > 0 ? draw_sum_ / static_cast<double>(draws_) : 0.0; }

    void save(BinaryWriter& out) const;
    static BinaryRelevanceBagging load(BinaryReader& in);

private:
    unsigned draw();

    std::size_t label_count_ = 0;
    BaggingConfig config_;
    FeatureEncoder encoder_;
    std::vector<LogisticRegressor> members_;
    std::mt19937_64 rng_;
    double draw_sum_ = 0.0;
    std::uint64_t draws_ = 0;
};

void save_rng(BinaryWriter& out, const std::mt19937_64& rng);
std::mt19937_64 load_rng(BinaryReader& in);

}  // namespace mlhat
