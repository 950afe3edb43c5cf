#include "mlhat/node_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlhat/serialization.hpp"

namespace mlhat {

namespace {

// Branch probabilities below this are treated as an empty branch.
constexpr double kMinBranchProbability = 1e-12;

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

}  // namespace

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("binary_entropy: probability outside [0, 1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    const double q = 1.0 - p;
    return -p * std::log2(p) - q * std::log2(q);
}

double gaussian_cdf(double mean, double stddev, double s) {
    if (!(stddev > 0.0)) {
        // point mass
        return s >= mean ? 1.0 : 0.0;
    }
    return 0.5 * (1.0 + std::erf((s - mean) / (stddev * std::sqrt(2.0))));
}

void GaussianEstimator::update(double x, double weight) noexcept {
    if (!(weight > 0.0)) return;
    weight_ += weight;
    const double delta = x - mean_;
    mean_ += weight * delta / weight_;
    m2_ += weight * delta * (x - mean_);
}

double GaussianEstimator::variance() const noexcept {
    if (!has_variance()) return 0.0;
    return std::max(0.0, m2_ / (weight_ - 1.0));
}

double GaussianEstimator::floored_variance() const noexcept { return std::max(variance(), kVarianceFloor); }

double GaussianEstimator::stddev() const noexcept { return std::sqrt(floored_variance()); }

void GaussianEstimator::save(BinaryWriter& out) const {
    out.f64(weight_);
    out.f64(mean_);
    out.f64(m2_);
}

GaussianEstimator GaussianEstimator::load(BinaryReader& in) {
    GaussianEstimator g;
    g.weight_ = in.f64();
    g.mean_ = in.f64();
    g.m2_ = in.f64();
    return g;
}

std::vector<double> binned_thresholds(double lo, double hi, std::size_t bins) {
    std::vector<double> out;
    if (!(hi > lo) || bins == 0) return out;
    out.reserve(bins);
    for (std::size_t i = 1; i <= bins; ++i) {
        out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins + 1));
    }
    return out;
}

NodeStats::NodeStats(std::span<const FeatureKind> kinds, std::size_t label_count) : label_count_(label_count) {
    counters_.label_weight.assign(label_count, 0.0);
    features_.reserve(kinds.size());
    for (auto kind : kinds) {
        if (kind == FeatureKind::Numerical) {
            NumericFeatureStats s;
            s.present.resize(label_count);
            s.absent.resize(label_count);
            features_.emplace_back(std::move(s));
        } else {
            features_.emplace_back(CategoricalFeatureStats{});
        }
    }
}

void NodeStats::update(const Instance& instance, double weight) {
    if (!(weight > 0.0)) return;
    const LabelsetKey& y = instance.y();
    counters_.total_weight += weight;
    for (std::size_t l = 0; l < label_count_; ++l) {
        if (y.test(l)) counters_.label_weight[l] += weight;
    }
    counters_.labelset_hist[y] += weight;

    for (std::size_t f = 0; f < features_.size(); ++f) {
        const double x = instance.features[f];
        if (auto* num = std::get_if<NumericFeatureStats>(&features_[f])) {
            num->min = std::min(num->min, x);
            num->max = std::max(num->max, x);
            for (std::size_t l = 0; l < label_count_; ++l) {
                (y.test(l) ? num->present[l] : num->absent[l]).update(x, weight);
            }
        } else {
            auto& cat = std::get<CategoricalFeatureStats>(features_[f]);
            const auto v = static_cast<std::size_t>(x);
            if (v >= cat.value_weight.size()) {
                cat.value_weight.resize(v + 1, 0.0);
                cat.value_label_weight.resize((v + 1) * label_count_, 0.0);
            }
            cat.value_weight[v] += weight;
            double* row = cat.value_label_weight.data() + v * label_count_;
            for (std::size_t l = 0; l < label_count_; ++l) {
                if (y.test(l)) row[l] += weight;
            }
        }
    }
}

double NodeStats::entropy() const {
    if (!(counters_.total_weight > 0.0)) throw std::domain_error("node entropy undefined without observations");
    double h = 0.0;
    for (std::size_t l = 0; l < label_count_; ++l) h += binary_entropy(clamp01(counters_.prior(l)));
    return h;
}

std::optional<BranchConditionals> NodeStats::categorical_conditionals(std::size_t f, std::size_t value) const {
    const auto* cat = std::get_if<CategoricalFeatureStats>(&features_.at(f));
    if (cat == nullptr) throw std::invalid_argument("feature is not categorical");
    const double total = counters_.total_weight;
    if (value >= cat->value_weight.size() || !(cat->value_weight[value] > 0.0)) return std::nullopt;
    const double w_in = cat->value_weight[value];
    const double w_out = total - w_in;
    if (!(w_out > kMinBranchProbability * total)) return std::nullopt;

    BranchConditionals c;
    c.p_left = w_in / total;
    c.left.resize(label_count_);
    c.right.resize(label_count_);
    c.left_weight.assign(label_count_, c.p_left);
    const double* row = cat->value_label_weight.data() + value * label_count_;
    for (std::size_t l = 0; l < label_count_; ++l) {
        c.left[l] = clamp01(row[l] / w_in);
        c.right[l] = clamp01((counters_.label_weight[l] - row[l]) / w_out);
    }
    return c;
}

std::optional<BranchConditionals> NodeStats::numeric_conditionals(std::size_t f, double threshold) const {
    const auto* num = std::get_if<NumericFeatureStats>(&features_.at(f));
    if (num == nullptr) throw std::invalid_argument("feature is not numerical");
    if (!(counters_.total_weight > 0.0)) return std::nullopt;

    BranchConditionals c;
    c.left.resize(label_count_);
    c.right.resize(label_count_);
    c.left_weight.assign(label_count_, -1.0);

    double normalizer_sum = 0.0;
    std::size_t evaluable = 0;
    for (std::size_t l = 0; l < label_count_; ++l) {
        const double p = clamp01(counters_.prior(l));
        c.left[l] = p;
        c.right[l] = p;
        const auto& pos = num->present[l];
        const auto& neg = num->absent[l];
        if (p <= 0.0 || p >= 1.0 || pos.weight() < 2.0 || neg.weight() < 2.0) continue;

        const double cdf_pos = gaussian_cdf(pos.mean(), pos.stddev(), threshold);
        const double cdf_neg = gaussian_cdf(neg.mean(), neg.stddev(), threshold);
        const double p_le = cdf_pos * p + cdf_neg * (1.0 - p);
        const double p_gt = (1.0 - cdf_pos) * p + (1.0 - cdf_neg) * (1.0 - p);
        ++evaluable;
        normalizer_sum += p_le;
        c.left_weight[l] = p_le;
        if (p_le > kMinBranchProbability) c.left[l] = clamp01(cdf_pos * p / p_le);
        if (p_gt > kMinBranchProbability) c.right[l] = clamp01((1.0 - cdf_pos) * p / p_gt);
    }
    if (evaluable == 0) return std::nullopt;
    c.p_left = normalizer_sum / static_cast<double>(evaluable);
    if (c.p_left < kMinBranchProbability || c.p_left > 1.0 - kMinBranchProbability) return std::nullopt;
    // Labels without usable Gaussians keep their prior on both sides.
    for (auto& w : c.left_weight) {
        if (w < 0.0) w = c.p_left;
    }
    return c;
}

std::optional<BranchConditionals> NodeStats::conditionals(const SplitCriterion& criterion) const {
    if (criterion.kind == SplitKind::NumericThreshold) return numeric_conditionals(criterion.feature, criterion.value);
    return categorical_conditionals(criterion.feature, static_cast<std::size_t>(criterion.value));
}

std::optional<double> NodeStats::post_split_entropy(const SplitCriterion& criterion) const {
    auto c = conditionals(criterion);
    if (!c) return std::nullopt;
    double h = 0.0;
    for (std::size_t l = 0; l < label_count_; ++l) {
        const double w = std::clamp(c->left_weight[l], 0.0, 1.0);
        h += w * binary_entropy(c->left[l]) + (1.0 - w) * binary_entropy(c->right[l]);
    }
    return h;
}

std::vector<SplitCriterion> NodeStats::enumerate_candidates(const SplitPolicy& policy) const {
    std::vector<SplitCriterion> out;
    for (std::size_t f = 0; f < features_.size(); ++f) {
        if (const auto* num = std::get_if<NumericFeatureStats>(&features_[f])) {
            for (double s : binned_thresholds(num->min, num->max, policy.numeric_bins)) {
                out.push_back({f, SplitKind::NumericThreshold, s});
            }
        } else {
            const auto& cat = std::get<CategoricalFeatureStats>(features_[f]);
            for (std::size_t v = 0; v < cat.value_weight.size(); ++v) {
                if (cat.value_weight[v] > 0.0) out.push_back({f, SplitKind::CategoricalEquals, static_cast<double>(v)});
            }
        }
    }
    return out;
}

std::optional<BestSplits> NodeStats::best_two_splits(const SplitPolicy& policy) const {
    if (!(counters_.total_weight > 0.0)) return std::nullopt;
    const double h0 = entropy();

    // Best candidate per feature; candidates are enumerated by ascending
    // feature index and then ascending threshold / value id, and only a
    // strictly larger gain replaces the incumbent.
    std::vector<std::optional<SplitCandidate>> per_feature(features_.size());
    for (const auto& criterion : enumerate_candidates(policy)) {
        auto h = post_split_entropy(criterion);
        if (!h) continue;
        SplitCandidate cand{criterion, h0 - *h, *h};
        auto& slot = per_feature[criterion.feature];
        if (!slot || cand.gain > slot->gain) slot = cand;
    }

    std::optional<SplitCandidate> best;
    for (const auto& cand : per_feature) {
        if (cand && (!best || cand->gain > best->gain)) best = cand;
    }
    if (!best) return std::nullopt;

    std::optional<SplitCandidate> second;
    for (const auto& cand : per_feature) {
        if (!cand || cand->criterion.feature == best->criterion.feature) continue;
        if (!second || cand->gain > second->gain) second = cand;
    }
    return BestSplits{*best, second};
}

LabelsetKey NodeStats::majority_labelset() const {
    if (counters_.labelset_hist.empty()) throw std::logic_error("majority labelset of an empty node");
    const LabelsetKey* best = nullptr;
    double best_weight = -1.0;
    for (const auto& [key, weight] : counters_.labelset_hist) {
        if (weight > best_weight || (weight == best_weight && key < *best)) {
            best = &key;
            best_weight = weight;
        }
    }
    return *best;
}

void NodeStats::save(BinaryWriter& out) const {
    out.size(label_count_);
    out.f64(counters_.total_weight);
    out.f64s(counters_.label_weight);
    // hash-map order is unspecified; write sorted for a stable layout
    std::vector<std::pair<LabelsetKey, double>> hist(counters_.labelset_hist.begin(), counters_.labelset_hist.end());
    std::sort(hist.begin(), hist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out.size(hist.size());
    for (const auto& [key, weight] : hist) {
        write_labelset(out, key);
        out.f64(weight);
    }
    out.size(features_.size());
    for (const auto& fs : features_) {
        if (const auto* num = std::get_if<NumericFeatureStats>(&fs)) {
            out.u8(0);
            out.f64(num->min);
            out.f64(num->max);
            for (std::size_t l = 0; l < label_count_; ++l) {
                num->present[l].save(out);
                num->absent[l].save(out);
            }
        } else {
            const auto& cat = std::get<CategoricalFeatureStats>(fs);
            out.u8(1);
            out.f64s(cat.value_weight);
            out.f64s(cat.value_label_weight);
        }
    }
}

NodeStats NodeStats::load(BinaryReader& in) {
    NodeStats s;
    s.label_count_ = in.size();
    s.counters_.total_weight = in.f64();
    s.counters_.label_weight = in.f64s();
    if (s.counters_.label_weight.size() != s.label_count_) throw SnapshotError("label counter size mismatch");
    const std::size_t hist_size = in.size();
    for (std::size_t i = 0; i < hist_size; ++i) {
        auto key = read_labelset(in);
        s.counters_.labelset_hist[key] = in.f64();
    }
    const std::size_t nf = in.size();
    s.features_.reserve(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto tag = in.u8();
        if (tag == 0) {
            NumericFeatureStats num;
            num.min = in.f64();
            num.max = in.f64();
            num.present.reserve(s.label_count_);
            num.absent.reserve(s.label_count_);
            for (std::size_t l = 0; l < s.label_count_; ++l) {
                num.present.push_back(GaussianEstimator::load(in));
                num.absent.push_back(GaussianEstimator::load(in));
            }
            s.features_.emplace_back(std::move(num));
        } else if (tag == 1) {
            CategoricalFeatureStats cat;
            cat.value_weight = in.f64s();
            cat.value_label_weight = in.f64s();
            if (cat.value_label_weight.size() != cat.value_weight.size() * s.label_count_) {
                throw SnapshotError("categorical counter size mismatch");
            }
            s.features_.emplace_back(std::move(cat));
        } else {
            throw SnapshotError("unknown feature statistics tag");
        }
    }
    return s;
}

}  // namespace mlhat
