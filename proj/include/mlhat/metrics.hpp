#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

struct ExampleScores {
    double subset_accuracy = 0.0;
    double hamming_loss = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Per-instance scores. Both sets empty scores 1 for precision, recall and F1;
/// a single empty set makes the ratio with the zero denominator 0.
ExampleScores example_scores(const LabelsetKey& truth, const LabelsetKey& predicted);

/// Fading mean: s <- x + alpha s, n <- 1 + alpha n, estimate s / n.
class PrequentialAccumulator {
public:
    explicit PrequentialAccumulator(double alpha = 1.0);

    double update(double value) noexcept;
    double estimate() const noexcept { return count_ > 0.0 ? sum_ / count_ : 0.0; }
    double alpha() const noexcept { return alpha_; }
    double sum() const noexcept { return sum_; }
    double count() const noexcept { return count_; }

private:
    double alpha_;
    double sum_ = 0.0;
    double count_ = 0.0;
};

/// Per-label confusion counters, faded by alpha before every update.
class LabelConfusion {
public:
    LabelConfusion(std::size_t label_count, double alpha = 1.0);

    void update(const LabelsetKey& truth, const LabelsetKey& predicted);

    std::size_t label_count() const noexcept { return tp_.size(); }
    double tp(std::size_t l) const { return tp_[l]; }
    double tn(std::size_t l) const { return tn_[l]; }
    double fp(std::size_t l) const { return fp_[l]; }
    double fn(std::size_t l) const { return fn_[l]; }

private:
    double alpha_;
    std::vector<double> tp_, tn_, fp_, fn_;
};

struct MicroMacro {
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

/// Labels with a zero denominator count as 0 in the macro averages.
/// Macro F1 is the mean of per-label F1 scores.
MicroMacro micro_macro(const LabelConfusion& conf);

inline constexpr std::size_t kMetricCount = 11;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "subset_accuracy", "hamming_loss",  "example_precision", "example_recall",
    "example_f1",      "micro_precision", "micro_recall",    "micro_f1",
    "macro_precision", "macro_recall",  "macro_f1",
};
using MetricValues = std::array<double, kMetricCount>;

/// All eleven metrics under one forgetting factor.
class MetricSuite {
public:
    MetricSuite(std::size_t label_count, double alpha);

    void update(const LabelsetKey& truth, const LabelsetKey& predicted);
    MetricValues values() const;
    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
    std::array<PrequentialAccumulator, 5> example_;
    LabelConfusion confusion_;
};

}  // namespace mlhat
