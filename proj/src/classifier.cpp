#include "mlhat/classifier.hpp"

namespace mlhat {

MajorityLabelsetModel::MajorityLabelsetModel(const StreamSchema& schema) : best_(schema.label_count) {}

Prediction MajorityLabelsetModel::predict_one(std::span<const double>) const {
    return Prediction::from_labelset(best_);
}

void MajorityLabelsetModel::learn_one(const Instance& instance) {
    ++seen_;
    if (!(instance.weight > 0.0)) return;
    const LabelsetKey& y = instance.y();
    const double w = hist_[y] += instance.weight;
    if (w > best_weight_ || (w == best_weight_ && y < best_)) {
        best_ = y;
        best_weight_ = w;
    }
}

ModelReport MajorityLabelsetModel::report() const {
    ModelReport r;
    r.instances = seen_;
    return r;
}

BrKnnModel::BrKnnModel(const StreamSchema& schema, std::size_t k, std::size_t window)
    : model_(schema.feature_kinds, schema.label_count, k, window) {}

void BrKnnModel::learn_one(const Instance& instance) {
    ++seen_;
    model_.learn(instance, instance.weight);
}

ModelReport BrKnnModel::report() const {
    ModelReport r;
    r.instances = seen_;
    return r;
}

BrBaggingLrModel::BrBaggingLrModel(const StreamSchema& schema, BaggingConfig config, std::uint64_t seed)
    : model_(schema.feature_kinds, schema.label_count, config, seed) {}

void BrBaggingLrModel::learn_one(const Instance& instance) {
    ++seen_;
    model_.learn(instance, instance.weight);
}

ModelReport BrBaggingLrModel::report() const {
    ModelReport r;
    r.instances = seen_;
    return r;
}

}  // namespace mlhat
