#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

class BinaryWriter;
class BinaryReader;

/// Entropy in bits of a Bernoulli variable; 0 log 0 is taken as 0.
/// Throws std::domain_error for p outside [0, 1].
double binary_entropy(double p);

/// Normal CDF 0.5 * (1 + erf((s - mean) / (stddev * sqrt(2)))).
double gaussian_cdf(double mean, double stddev, double s);

/// Weighted Welford accumulator, weights treated as frequencies.
class GaussianEstimator {
public:
    static constexpr double kVarianceFloor = 1e-12;

    void update(double x, double weight) noexcept;

    double weight() const noexcept { return weight_; }
    double mean() const noexcept { return mean_; }
    double m2() const noexcept { return m2_; }
    /// Sample variance m2 / (n - 1); requires weight() > 1.
    bool has_variance() const noexcept { return weight_ > 1.0; }
    double variance() const noexcept;
    double floored_variance() const noexcept;
    double stddev() const noexcept;

    void save(BinaryWriter& out) const;
    static GaussianEstimator load(BinaryReader& in);

private:
    double weight_ = 0.0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct LabelCounters {
    double total_weight = 0.0;
    std::vector<double> label_weight;
    std::unordered_map<LabelsetKey, double, LabelsetKeyHash> labelset_hist;

    std::size_t distinct_labelsets() const noexcept { return labelset_hist.size(); }
    double prior(std::size_t label) const { return label_weight[label] / total_weight; }
};

struct NumericFeatureStats {
    std::vector<GaussianEstimator> present;  // conditioned on label l = 1
    std::vector<GaussianEstimator> absent;   // conditioned on label l = 0
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
};

struct CategoricalFeatureStats {
    std::vector<double> value_weight;        // W_v
    std::vector<double> value_label_weight;  // W_{l,v} at [v * L + l]
};

using FeatureStats = std::variant<NumericFeatureStats, CategoricalFeatureStats>;

enum class SplitKind : std::uint8_t { NumericThreshold, CategoricalEquals };

/// Binary test on one feature. Instances satisfying it go to the left branch:
/// x_f <= value for numeric thresholds, x_f == value for categorical ids.
struct SplitCriterion {
    std::size_t feature = 0;
    SplitKind kind = SplitKind::NumericThreshold;
    double value = 0.0;

    bool goes_left(std::span<const double> features) const noexcept {
        const double x = features[feature];
        return kind == SplitKind::NumericThreshold ? x <= value : x == value;
    }
    friend bool operator==(const SplitCriterion&, const SplitCriterion&) = default;
};

struct SplitCandidate {
    SplitCriterion criterion;
    double gain = 0.0;
    double post_split_entropy = 0.0;
};

/// Per-label conditionals on both sides of a binary split.
///
/// For categorical splits every label shares the same branch probability. For
/// numeric splits the Bayes normalizer p(x <= s) is computed per label from its
/// two Gaussians, so `left_weight` is per label and `p_left` is their mean.
struct BranchConditionals {
    std::vector<double> left;         // p(l | criterion holds)
    std::vector<double> right;        // p(l | criterion fails)
    std::vector<double> left_weight;  // p(criterion holds) as seen by label l
    double p_left = 0.0;
};

struct SplitPolicy {
    std::size_t numeric_bins = 10;
};

struct BestSplits {
    SplitCandidate best;
    std::optional<SplitCandidate> second;  // best candidate on a different feature
};

/// Interior thresholds lo + (hi - lo) * i / (bins + 1) for i = 1..bins.
std::vector<double> binned_thresholds(double lo, double hi, std::size_t bins);

/// Sufficient statistics of one tree leaf.
class NodeStats {
public:
    NodeStats() = default;
    NodeStats(std::span<const FeatureKind> kinds, std::size_t label_count);

    void update(const Instance& instance, double weight);

    std::size_t label_count() const noexcept { return label_count_; }
    std::size_t feature_count() const noexcept { return features_.size(); }
    double total_weight() const noexcept { return counters_.total_weight; }
    const LabelCounters& counters() const noexcept { return counters_; }
    const FeatureStats& feature(std::size_t f) const { return features_.at(f); }

    /// Sum of per-label binary entropies of the priors. Throws std::domain_error when empty.
    double entropy() const;

    std::optional<BranchConditionals> categorical_conditionals(std::size_t f, std::size_t value) const;
    std::optional<BranchConditionals> numeric_conditionals(std::size_t f, double threshold) const;
    std::optional<BranchConditionals> conditionals(const SplitCriterion& criterion) const;

    /// Weighted post-split entropy; nullopt when the criterion is not evaluable.
    std::optional<double> post_split_entropy(const SplitCriterion& criterion) const;

    /// Every criterion best_two_splits would score, in enumeration order.
    std::vector<SplitCriterion> enumerate_candidates(const SplitPolicy& policy) const;

    std::optional<BestSplits> best_two_splits(const SplitPolicy& policy) const;

    /// Labelset with the largest accumulated weight; ties go to the smallest key.
    LabelsetKey majority_labelset() const;

    void save(BinaryWriter& out) const;
    static NodeStats load(BinaryReader& in);

private:
    std::size_t label_count_ = 0;
    LabelCounters counters_;
    std::vector<FeatureStats> features_;
};

}  // namespace mlhat
