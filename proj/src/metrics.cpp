#include "mlhat/metrics.hpp"

#include <stdexcept>

namespace mlhat {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

ExampleScores example_scores(const LabelsetKey& truth, const LabelsetKey& predicted) {
    if (truth.size() != predicted.size()) throw SchemaError("labelsets of different length");
    const auto L = static_cast<double>(truth.size());
    const auto y = static_cast<double>(truth.count());
    const auto z = static_cast<double>(predicted.count());
    const auto both = static_cast<double>(truth.intersection_count(predicted));

    ExampleScores s;
    s.subset_accuracy = truth == predicted ? 1.0 : 0.0;
    s.hamming_loss = static_cast<double>(truth.hamming_distance(predicted)) / L;
    if (y == 0.0 && z == 0.0) {
        s.precision = s.recall = s.f1 = 1.0;
    } else {
        s.precision = ratio(both, z);
        s.recall = ratio(both, y);
        s.f1 = ratio(2.0 * both, y + z);
    }
    return s;
}

PrequentialAccumulator::PrequentialAccumulator(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("forgetting factor must be in (0, 1]");
}

double PrequentialAccumulator::update(double value) noexcept {
    sum_ = value + alpha_ * sum_;
    count_ = 1.0 + alpha_ * count_;
    return sum_ / count_;
}

LabelConfusion::LabelConfusion(std::size_t label_count, double alpha)
    : alpha_(alpha), tp_(label_count, 0.0), tn_(label_count, 0.0), fp_(label_count, 0.0), fn_(label_count, 0.0) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("forgetting factor must be in (0, 1]");
}

void LabelConfusion::update(const LabelsetKey& truth, const LabelsetKey& predicted) {
    if (truth.size() != tp_.size() || predicted.size() != tp_.size()) {
        throw SchemaError("labelset length does not match confusion table");
    }
    for (std::size_t l = 0; l < tp_.size(); ++l) {
        if (alpha_ != 1.0) {
            tp_[l] *= alpha_;
            tn_[l] *= alpha_;
            fp_[l] *= alpha_;
            fn_[l] *= alpha_;
        }
        const bool y = truth.test(l);
        const bool z = predicted.test(l);
        if (y && z) tp_[l] += 1.0;
        else if (!y && !z) tn_[l] += 1.0;
        else if (z) fp_[l] += 1.0;
        else fn_[l] += 1.0;
    }
}

MicroMacro micro_macro(const LabelConfusion& conf) {
    MicroMacro m;
    const std::size_t L = conf.label_count();
    if (L == 0) return m;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        tp += conf.tp(l);
        fp += conf.fp(l);
        fn += conf.fn(l);
        const double p = ratio(conf.tp(l), conf.tp(l) + conf.fp(l));
        const double r = ratio(conf.tp(l), conf.tp(l) + conf.fn(l));
        m.macro_precision += p;
        m.macro_recall += r;
        m.macro_f1 += harmonic(p, r);
    }
    m.macro_precision /= static_cast<double>(L);
    m.macro_recall /= static_cast<double>(L);
    m.macro_f1 /= static_cast<double>(L);
    m.micro_precision = ratio(tp, tp + fp);
    m.micro_recall = ratio(tp, tp + fn);
    m.micro_f1 = harmonic(m.micro_precision, m.micro_recall);
    return m;
}

MetricSuite::MetricSuite(std::size_t label_count, double alpha)
    : alpha_(alpha),
      example_{PrequentialAccumulator(alpha), PrequentialAccumulator(alpha), PrequentialAccumulator(alpha),
               PrequentialAccumulator(alpha), PrequentialAccumulator(alpha)},
      confusion_(label_count, alpha) {}

void MetricSuite::update(const LabelsetKey& truth, const LabelsetKey& predicted) {
    const auto s = example_scores(truth, predicted);
    example_[0].update(s.subset_accuracy);
    example_[1].update(s.hamming_loss);
    example_[2].update(s.precision);
    example_[3].update(s.recall);
    example_[4].update(s.f1);
    confusion_.update(truth, predicted);
}

MetricValues MetricSuite::values() const {
    const auto mm = micro_macro(confusion_);
    return {example_[0].estimate(), example_[1].estimate(), example_[2].estimate(), example_[3].estimate(),
            example_[4].estimate(), mm.micro_precision,     mm.micro_recall,        mm.micro_f1,
            mm.macro_precision,     mm.macro_recall,        mm.macro_f1};
}

}  // namespace mlhat
