#include "mlhat/leaf_models.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mlhat/serialization.hpp"

namespace mlhat {

Prediction majority_predict(const LabelsetHistogram& hist) {
    if (hist.empty()) throw std::logic_error("majority prediction needs at least one observed labelset");
    const LabelsetKey* best = nullptr;
    double best_weight = -1.0;
    for (const auto& [key, weight] : hist) {
        if (weight > best_weight || (weight == best_weight && key < *best)) {
            best = &key;
            best_weight = weight;
        }
    }
    return Prediction::from_labelset(*best);
}

// ---------------------------------------------------------------------------
// LabelPowersetKnn

LabelPowersetKnn::LabelPowersetKnn(std::span<const FeatureKind> kinds, std::size_t label_count, std::size_t k,
                                   std::size_t capacity)
    : kinds_(kinds.begin(), kinds.end()),
      label_count_(label_count),
      k_(k),
      capacity_(capacity),
      min_(kinds.size(), std::numeric_limits<double>::infinity()),
      max_(kinds.size(), -std::numeric_limits<double>::infinity()) {
    if (k == 0) throw std::invalid_argument("knn needs k >= 1");
    if (capacity == 0) throw std::invalid_argument("knn window capacity must be >= 1");
}

void LabelPowersetKnn::learn(const Instance& instance, double weight) {
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        if (kinds_[f] == FeatureKind::Numerical) {
            min_[f] = std::min(min_[f], instance.features[f]);
            max_[f] = std::max(max_[f], instance.features[f]);
        }
    }
    if (window_.size() == capacity_) {
        if (window_.front().weight > 0.0) --voters_;
        window_.pop_front();
    }
    window_.push_back({instance.features, instance.y(), std::max(0.0, weight)});
    if (weight > 0.0) ++voters_;
}

double LabelPowersetKnn::distance(std::span<const double> a, std::span<const double> b) const {
    double d2 = 0.0;
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        if (kinds_[f] == FeatureKind::Categorical) {
            if (a[f] != b[f]) d2 += 1.0;
        } else {
            const double range = max_[f] - min_[f];
            const double diff = range > 0.0 ? (a[f] - b[f]) / range : 0.0;
            d2 += diff * diff;
        }
    }
    return std::sqrt(d2);
}

std::vector<std::size_t> LabelPowersetKnn::neighbours(std::span<const double> features) const {
    // Bounded insertion into a sorted list of (distance, index); strict < keeps
    // the older entry on ties since the window is scanned oldest first.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_ + 1);
    for (std::size_t i = 0; i < window_.size(); ++i) {
        if (!(window_[i].weight > 0.0)) continue;
        const double d = distance(features, window_[i].features);
        if (best.size() == k_ && !(d < best.back().first)) continue;
        auto pos = std::upper_bound(best.begin(), best.end(), d,
                                    [](double value, const auto& e) { return value < e.first; });
        best.insert(pos, {d, i});
        if (best.size() > k_) best.pop_back();
    }
    std::vector<std::size_t> out;
    out.reserve(best.size());
    for (const auto& [d, i] : best) out.push_back(i);
    return out;
}

Prediction LabelPowersetKnn::predict(std::span<const double> features) const {
    if (window_.empty()) throw std::logic_error("knn prediction on an empty window");
    std::vector<double> probs(label_count_, 0.0);
    double total = 0.0;
    for (auto i : neighbours(features)) {
        const auto& e = window_[i];
        total += e.weight;
        for (std::size_t l = 0; l < label_count_; ++l) {
            if (e.labels.test(l)) probs[l] += e.weight;
        }
    }
    if (total > 0.0) {
        for (auto& p : probs) p /= total;
    }
    return Prediction::from_probabilities(std::move(probs));
}

std::optional<LabelsetKey> LabelPowersetKnn::top_labelset(std::span<const double> features) const {
    std::map<LabelsetKey, double> votes;
    for (auto i : neighbours(features)) votes[window_[i].labels] += window_[i].weight;
    if (votes.empty()) return std::nullopt;
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

void LabelPowersetKnn::save(BinaryWriter& out) const {
    out.size(kinds_.size());
    for (auto k : kinds_) out.u8(static_cast<std::uint8_t>(k));
    out.size(label_count_);
    out.size(k_);
    out.size(capacity_);
    out.f64s(min_);
    out.f64s(max_);
    out.size(window_.size());
    for (const auto& e : window_) {
        out.f64s(e.features);
        write_labelset(out, e.labels);
        out.f64(e.weight);
    }
}

LabelPowersetKnn LabelPowersetKnn::load(BinaryReader& in) {
    LabelPowersetKnn m;
    m.kinds_.resize(in.size());
    for (auto& k : m.kinds_) k = static_cast<FeatureKind>(in.u8());
    m.label_count_ = in.size();
    m.k_ = in.size();
    m.capacity_ = in.size();
    m.min_ = in.f64s();
    m.max_ = in.f64s();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
        Entry e;
        e.features = in.f64s();
        e.labels = read_labelset(in);
        e.weight = in.f64();
        if (e.weight > 0.0) ++m.voters_;
        m.window_.push_back(std::move(e));
    }
    return m;
}

// ---------------------------------------------------------------------------
// LogisticRegressor

LogisticRegressor::LogisticRegressor(std::size_t dims, double learning_rate)
    : weights_(dims, 0.0), learning_rate_(learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

double LogisticRegressor::margin(std::span<const double> x) const noexcept {
    double z = bias_;
    const std::size_t n = std::min(x.size(), weights_.size());
    for (std::size_t i = 0; i < n; ++i) z += weights_[i] * x[i];
    return z;
}

double LogisticRegressor::predict_proba(std::span<const double> x) const noexcept { return sigmoid(margin(x)); }

void LogisticRegressor::learn(std::span<const double> x, bool y, double weight) noexcept {
    if (!(weight > 0.0)) return;
    if (x.size() > weights_.size()) weights_.resize(x.size(), 0.0);
    const double step = learning_rate_ * weight * ((y ? 1.0 : 0.0) - predict_proba(x));
    for (std::size_t i = 0; i < x.size(); ++i) weights_[i] += step * x[i];
    bias_ += step;
}

void LogisticRegressor::resize(std::size_t dims) {
    if (dims > weights_.size()) weights_.resize(dims, 0.0);
}

void LogisticRegressor::set_parameters(std::vector<double> weights, double bias) {
    weights_ = std::move(weights);
    bias_ = bias;
}

void LogisticRegressor::save(BinaryWriter& out) const {
    out.f64(learning_rate_);
    out.f64(bias_);
    out.f64s(weights_);
}

LogisticRegressor LogisticRegressor::load(BinaryReader& in) {
    const double lr = in.f64();
    LogisticRegressor m(0, lr);
    m.bias_ = in.f64();
    m.weights_ = in.f64s();
    return m;
}

// ---------------------------------------------------------------------------
// FeatureEncoder

FeatureEncoder::FeatureEncoder(std::span<const FeatureKind> kinds)
    : kinds_(kinds.begin(), kinds.end()), numeric_column_(kinds.size(), kNoColumn), category_column_(kinds.size()) {
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        if (kinds_[f] == FeatureKind::Numerical) numeric_column_[f] = dims_++;
    }
    count_.assign(kinds_.size(), 0.0);
    mean_.assign(kinds_.size(), 0.0);
    m2_.assign(kinds_.size(), 0.0);
}

void FeatureEncoder::observe(std::span<const double> features) {
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        const double x = features[f];
        if (kinds_[f] == FeatureKind::Numerical) {
            count_[f] += 1.0;
            const double d = x - mean_[f];
            mean_[f] += d / count_[f];
            m2_[f] += d * (x - mean_[f]);
        } else {
            auto& cols = category_column_[f];
            const auto v = static_cast<std::size_t>(x);
            if (v >= cols.size()) cols.resize(v + 1, kNoColumn);
            if (cols[v] == kNoColumn) cols[v] = dims_++;
        }
    }
}

void FeatureEncoder::encode(std::span<const double> features, std::vector<double>& out) const {
    out.assign(dims_, 0.0);
    for (std::size_t f = 0; f < kinds_.size(); ++f) {
        const double x = features[f];
        if (kinds_[f] == FeatureKind::Numerical) {
            const double var = count_[f] > 1.0 ? m2_[f] / (count_[f] - 1.0) : 0.0;
            const double sd = std::sqrt(var);
            out[numeric_column_[f]] = sd > 1e-12 ? (x - mean_[f]) / sd : 0.0;
        } else {
            const auto& cols = category_column_[f];
            const auto v = static_cast<std::size_t>(x);
            if (v < cols.size() && cols[v] != kNoColumn) out[cols[v]] = 1.0;
        }
    }
}

void FeatureEncoder::save(BinaryWriter& out) const {
    out.size(kinds_.size());
    for (auto k : kinds_) out.u8(static_cast<std::uint8_t>(k));
    out.size(dims_);
    for (auto c : numeric_column_) out.u64(c);
    for (const auto& cols : category_column_) {
        out.size(cols.size());
        for (auto c : cols) out.u64(c);
    }
    out.f64s(count_);
    out.f64s(mean_);
    out.f64s(m2_);
}

FeatureEncoder FeatureEncoder::load(BinaryReader& in) {
    FeatureEncoder e;
    e.kinds_.resize(in.size());
    for (auto& k : e.kinds_) k = static_cast<FeatureKind>(in.u8());
    e.dims_ = in.size();
    e.numeric_column_.resize(e.kinds_.size());
    for (auto& c : e.numeric_column_) c = static_cast<std::size_t>(in.u64());
    e.category_column_.resize(e.kinds_.size());
    for (auto& cols : e.category_column_) {
        cols.resize(in.size());
        for (auto& c : cols) c = static_cast<std::size_t>(in.u64());
    }
    e.count_ = in.f64s();
    e.mean_ = in.f64s();
    e.m2_ = in.f64s();
    return e;
}

// ---------------------------------------------------------------------------
// BinaryRelevanceBagging

BinaryRelevanceBagging::BinaryRelevanceBagging(std::span<const FeatureKind> kinds, std::size_t label_count,
                                               BaggingConfig config, std::uint64_t seed)
    : label_count_(label_count), config_(config), encoder_(kinds), rng_(seed) {
    if (config.ensemble_size == 0) throw std::invalid_argument("bagging needs at least one member");
    if (!(config.poisson_lambda >= 0.0)) throw std::invalid_argument("poisson lambda must be >= 0");
    members_.assign(label_count * config.ensemble_size, LogisticRegressor(encoder_.dims(), config.learning_rate));
}

unsigned BinaryRelevanceBagging::draw() {
    unsigned k = 1;
    if (config_.resample) {
        if (config_.poisson_lambda > 0.0) {
            std::poisson_distribution<unsigned> poisson(config_.poisson_lambda);
            k = poisson(rng_);
        } else {
            k = 0;
        }
    }
    draw_sum_ += k;
    ++draws_;
    return k;
}

void BinaryRelevanceBagging::learn(const Instance& instance, double weight) {
    encoder_.observe(instance.features);
    std::vector<double> x;
    encoder_.encode(instance.features, x);
    const LabelsetKey& y = instance.y();
    for (std::size_t l = 0; l < label_count_; ++l) {
        const bool target = y.test(l);
        for (std::size_t m = 0; m < config_.ensemble_size; ++m) {
            const unsigned k = draw();
            if (k == 0) continue;
            members_[l * config_.ensemble_size + m].learn(x, target, weight * static_cast<double>(k));
        }
    }
}

Prediction BinaryRelevanceBagging::predict(std::span<const double> features) const {
    std::vector<double> x;
    encoder_.encode(features, x);
    std::vector<double> probs(label_count_, 0.0);
    for (std::size_t l = 0; l < label_count_; ++l) {
        double sum = 0.0;
        for (std::size_t m = 0; m < config_.ensemble_size; ++m) {
            sum += members_[l * config_.ensemble_size + m].predict_proba(x);
        }
        probs[l] = sum / static_cast<double>(config_.ensemble_size);
    }
    return Prediction::from_probabilities(std::move(probs));
}

void save_rng(BinaryWriter& out, const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    out.str(os.str());
}

std::mt19937_64 load_rng(BinaryReader& in) {
    std::istringstream is(in.str());
    std::mt19937_64 rng;
    is >> rng;
    if (!is) throw SnapshotError("corrupt random generator state");
    return rng;
}

void BinaryRelevanceBagging::save(BinaryWriter& out) const {
    out.size(label_count_);
    out.size(config_.ensemble_size);
    out.f64(config_.learning_rate);
    out.f64(config_.poisson_lambda);
    out.boolean(config_.resample);
    encoder_.save(out);
    for (const auto& m : members_) m.save(out);
    save_rng(out, rng_);
    out.f64(draw_sum_);
    out.u64(draws_);
}

BinaryRelevanceBagging BinaryRelevanceBagging::load(BinaryReader& in) {
    BinaryRelevanceBagging b;
    b.label_count_ = in.size();
    b.config_.ensemble_size = in.size();
    b.config_.learning_rate = in.f64();
    b.config_.poisson_lambda = in.f64();
    b.config_.resample = in.boolean();
    b.encoder_ = FeatureEncoder::load(in);
    b.members_.reserve(b.label_count_ * b.config_.ensemble_size);
    for (std::size_t i = 0; i < b.label_count_ * b.config_.ensemble_size; ++i) {
        b.members_.push_back(LogisticRegressor::load(in));
    }
    b.rng_ = load_rng(in);
    b.draw_sum_ = in.f64();
    b.draws_ = in.u64();
    return b;
}

}  // namespace mlhat
