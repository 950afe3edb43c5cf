#include "mlhat/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mlhat {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

const SegmentParams kStandardSegments[4] = {{1.5, 0.25}, {1.5, 0.15}, {3.0, 0.15}, {1.5, 0.25}};

}  // namespace

std::string to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::RandomTree: return "randomtree";
        case GeneratorKind::RBF: return "rbf";
        case GeneratorKind::Hyperplane: return "hyperplane";
    }
    return "?";
}

std::string to_string(DriftType type) {
    switch (type) {
        case DriftType::None: return "none";
        case DriftType::Sudden: return "sudden";
        case DriftType::Gradual: return "gradual";
        case DriftType::Incremental: return "incremental";
        case DriftType::Recurrent: return "recurrent";
    }
    return "?";
}

GeneratorKind parse_generator_kind(const std::string& name) {
    const auto n = lower(name);
    if (n == "randomtree" || n == "tree") return GeneratorKind::RandomTree;
    if (n == "rbf") return GeneratorKind::RBF;
    if (n == "hyperplane" || n == "hp") return GeneratorKind::Hyperplane;
    throw std::invalid_argument("unknown generator kind '" + name + "'");
}

DriftType parse_drift_type(const std::string& name) {
    const auto n = lower(name);
    if (n == "none") return DriftType::None;
    if (n == "sudden" || n == "sud") return DriftType::Sudden;
    if (n == "gradual" || n == "grad") return DriftType::Gradual;
    if (n == "incremental" || n == "inc") return DriftType::Incremental;
    if (n == "recurrent" || n == "rec") return DriftType::Recurrent;
    throw std::invalid_argument("unknown drift type '" + name + "'");
}

DriftSchedule DriftSchedule::standard(DriftType type, std::uint64_t length, std::uint64_t width) {
    DriftSchedule s;
    s.type = type;
    s.length = length;
    if (type == DriftType::None) {
        s.segments = {kStandardSegments[0]};
        s.concepts = {0};
        s.width = 1;
        return s;
    }
    s.positions = {length / 4, 2 * length / 4, 3 * length / 4};
    if (width == 0) {
        width = type == DriftType::Gradual ? 500 : type == DriftType::Incremental ? 275 : 1;
    }
    s.width = width;
    if (type == DriftType::Recurrent) {
        s.segments = {kStandardSegments[0], kStandardSegments[2], kStandardSegments[0], kStandardSegments[2]};
        s.concepts = {0, 2, 0, 2};
    } else {
        s.segments.assign(std::begin(kStandardSegments), std::end(kStandardSegments));
        s.concepts = {0, 1, 2, 3};
    }
    return s;
}

void DriftSchedule::validate() const {
    if (segments.empty()) throw std::invalid_argument("schedule needs at least one segment");
    if (segments.size() != positions.size() + 1) throw std::invalid_argument("schedule needs one more segment than drifts");
    if (concepts.size() != segments.size()) throw std::invalid_argument("schedule needs one concept per segment");
    if (width < 1) throw std::invalid_argument("drift width must be >= 1");
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= length) throw std::invalid_argument("drift position outside the stream");
        if (i > 0 && positions[i] <= positions[i - 1]) throw std::invalid_argument("drift positions must increase");
    }
    for (const auto& seg : segments) {
        if (!(seg.dependency >= 0.0 && seg.dependency <= 1.0)) throw std::invalid_argument("dependency must be in [0, 1]");
        if (!(seg.cardinality > 0.0)) throw std::invalid_argument("cardinality must be positive");
    }
}

double transition_ramp(double offset, double width) {
    const double half = width / 2.0;
    if (offset <= -half) return 0.0;
    if (offset >= half) return 1.0;
    auto logistic = [&](double d) { return 1.0 / (1.0 + std::exp(-4.0 * d / width)); };
    const double lo = logistic(-half);
    const double hi = logistic(half);
    return std::clamp((logistic(offset) - lo) / (hi - lo), 0.0, 1.0);
}

ConceptMix active_concept(const DriftSchedule& schedule, std::uint64_t t) {
    ConceptMix mix;
    std::size_t segment = 0;
    while (segment < schedule.positions.size() && t >= schedule.positions[segment]) ++segment;
    mix.from = mix.to = segment;
    if (schedule.width <= 1) return mix;

    const double half = static_cast<double>(schedule.width) / 2.0;
    for (std::size_t d = 0; d < schedule.positions.size(); ++d) {
        const double offset = static_cast<double>(t) - static_cast<double>(schedule.positions[d]);
        if (offset >= -half && offset < half) {
            mix.from = d;
            mix.to = d + 1;
            mix.mixing = transition_ramp(offset, static_cast<double>(schedule.width));
            return mix;
        }
    }
    return mix;
}

void GeneratorSpec::validate() const {
    if (labels < 1 || labels > kMaxLabels) throw std::invalid_argument("generator label count out of range");
    if (numeric + categorical == 0) throw std::invalid_argument("generator needs at least one feature");
    if (categorical > 0 && category_values < 2) throw std::invalid_argument("categorical features need >= 2 values");
    if (kind != GeneratorKind::RandomTree && categorical > 0) {
        throw std::invalid_argument("only the random tree generator supports categorical features");
    }
    if (!(label_noise >= 0.0)) throw std::invalid_argument("label noise must be >= 0");
    schedule.validate();
    for (const auto& seg : schedule.segments) {
        if (seg.cardinality > static_cast<double>(labels)) throw std::invalid_argument("cardinality exceeds label count");
    }
}

GeneratorSpec default_spec(GeneratorKind kind, DriftType drift, std::uint64_t length, std::uint64_t seed) {
    GeneratorSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    switch (kind) {
        case GeneratorKind::RandomTree:
            spec.numeric = 20;
            spec.categorical = 10;
            spec.labels = 8;
            break;
        case GeneratorKind::RBF:
            spec.numeric = 80;
            spec.categorical = 0;
            spec.labels = 25;
            break;
        case GeneratorKind::Hyperplane:
            spec.numeric = 30;
            spec.categorical = 0;
            spec.labels = 8;
            break;
    }
    spec.schedule = DriftSchedule::standard(drift, length);
    spec.name = to_string(kind) + "-" + to_string(drift);
    return spec;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const char* suffix : {"Sud", "Grad", "Inc", "Rec"}) {
        for (const char* base : {"SynTree", "SynRBF", "SynHP"}) names.push_back(std::string(base) + suffix);
    }
    return names;
}

GeneratorSpec preset(const std::string& name, std::uint64_t length, std::uint64_t seed) {
    const auto n = lower(name);
    for (const auto& candidate : preset_names()) {
        if (lower(candidate) != n) continue;
        const auto kind = n.rfind("syntree", 0) == 0 ? GeneratorKind::RandomTree
                          : n.rfind("synrbf", 0) == 0 ? GeneratorKind::RBF
                                                      : GeneratorKind::Hyperplane;
        const std::string suffix = n.substr(kind == GeneratorKind::RandomTree ? 7 : kind == GeneratorKind::RBF ? 6 : 5);
        auto spec = default_spec(kind, parse_drift_type(suffix), length, seed);
        spec.name = candidate;
        return spec;
    }
    throw std::invalid_argument("unknown generator preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Base concepts. Each yields per-label latent scores of roughly unit scale and
// a shared score used to inject label dependency.

class Concept {
public:
    virtual ~Concept() = default;
    /// Draws features into x; returns an auxiliary id passed back to scores().
    virtual std::size_t draw(std::mt19937_64& rng, std::vector<double>& x) const = 0;
    /// Feature draw while drifting incrementally from this concept towards `next`.
    virtual std::size_t draw_towards(std::mt19937_64& rng, std::vector<double>& x, const Concept& next,
                                     double blend) const {
        (void)next;
        (void)blend;
        return draw(rng, x);
    }
    virtual void scores(const std::vector<double>& x, std::size_t aux, std::vector<double>& a, double& g) const = 0;
};

namespace {

class HyperplaneConcept final : public Concept {
public:
    HyperplaneConcept(std::size_t features, std::size_t labels, std::mt19937_64& rng)
        : features_(features), planes_(labels + 1, std::vector<double>(features)), scale_(labels + 1) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (std::size_t p = 0; p < planes_.size(); ++p) {
            double ss = 0.0;
            for (auto& w : planes_[p]) {
                w = u(rng);
                ss += w * w;
            }
            scale_[p] = 1.0 / std::sqrt(ss / 12.0);
        }
    }

    std::size_t draw(std::mt19937_64& rng, std::vector<double>& x) const override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        x.resize(features_);
        for (auto& v : x) v = u(rng);
        return 0;
    }

    void scores(const std::vector<double>& x, std::size_t, std::vector<double>& a, double& g) const override {
        const std::size_t L = planes_.size() - 1;
        a.resize(L);
        for (std::size_t p = 0; p <= L; ++p) {
            double z = 0.0;
            for (std::size_t f = 0; f < features_; ++f) z += planes_[p][f] * (x[f] - 0.5);
            z *= scale_[p];
            if (p < L) a[p] = z;
            else g = z;
        }
    }

private:
    std::size_t features_;
    std::vector<std::vector<double>> planes_;  // last plane drives the shared score
    std::vector<double> scale_;
};

class RbfConcept final : public Concept {
public:
    static constexpr std::size_t kCentroids = 50;

    RbfConcept(std::size_t features, std::size_t labels, std::mt19937_64& rng)
        : features_(features), labels_(labels) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_real_distribution<double> spread(0.1, 0.3);
        std::normal_distribution<double> n(0.0, 1.0);
        double total = 0.0;
        for (std::size_t c = 0; c < kCentroids; ++c) {
            Centroid k;
            k.center.resize(features);
            for (auto& v : k.center) v = u(rng);
            k.stddev = spread(rng);
            k.weight = u(rng);
            total += k.weight;
            k.scores.resize(labels);
            for (auto& s : k.scores) s = n(rng);
            k.shared = n(rng);
            centroids_.push_back(std::move(k));
        }
        double acc = 0.0;
        for (auto& k : centroids_) {
            acc += k.weight / total;
            cumulative_.push_back(acc);
        }
        cumulative_.back() = 1.0;
    }

    std::size_t draw(std::mt19937_64& rng, std::vector<double>& x) const override {
        const std::size_t c = pick(rng);
        place(rng, x, centroids_[c].center, centroids_[c].stddev);
        return c;
    }

    std::size_t draw_towards(std::mt19937_64& rng, std::vector<double>& x, const Concept& next,
                             double blend) const override {
        const auto* other = dynamic_cast<const RbfConcept*>(&next);
        if (!other) return draw(rng, x);
        const std::size_t c = blend < 0.5 ? pick(rng) : other->pick(rng);
        std::vector<double> center(features_);
        for (std::size_t f = 0; f < features_; ++f) {
            center[f] = (1.0 - blend) * centroids_[c].center[f] + blend * other->centroids_[c].center[f];
        }
        place(rng, x, center, (1.0 - blend) * centroids_[c].stddev + blend * other->centroids_[c].stddev);
        return c;
    }

    void scores(const std::vector<double>&, std::size_t aux, std::vector<double>& a, double& g) const override {
        a = centroids_[aux].scores;
        g = centroids_[aux].shared;
    }

private:
    struct Centroid {
        std::vector<double> center;
        double stddev = 0.1;
        double weight = 1.0;
        std::vector<double> scores;
        double shared = 0.0;
    };

    std::size_t pick(std::mt19937_64& rng) const {
        const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), r);
        return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), kCentroids - 1);
    }

    void place(std::mt19937_64& rng, std::vector<double>& x, const std::vector<double>& center, double stddev) const {
        std::normal_distribution<double> n(0.0, 1.0);
        x.resize(features_);
        double norm = 0.0;
        for (auto& v : x) {
            v = n(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        const double length = n(rng) * stddev;
        for (std::size_t f = 0; f < features_; ++f) x[f] = center[f] + (norm > 0.0 ? x[f] / norm : 0.0) * length;
    }

    std::size_t features_;
    std::size_t labels_;
    std::vector<Centroid> centroids_;
    std::vector<double> cumulative_;
};

class RandomTreeConcept final : public Concept {
public:
    static constexpr std::size_t kDepth = 5;

    RandomTreeConcept(std::size_t numeric, std::size_t categorical, std::size_t values, std::size_t labels,
                      std::mt19937_64& rng)
        : numeric_(numeric), categorical_(categorical), values_(values) {
        std::vector<std::pair<double, double>> bounds(numeric, {0.0, 1.0});
        build(0, bounds, labels, rng);
    }

    std::size_t draw(std::mt19937_64& rng, std::vector<double>& x) const override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> cat(0, values_ - 1);
        x.resize(numeric_ + categorical_);
        for (std::size_t f = 0; f < numeric_; ++f) x[f] = u(rng);
        for (std::size_t f = numeric_; f < x.size(); ++f) x[f] = static_cast<double>(cat(rng));
        return 0;
    }

    void scores(const std::vector<double>& x, std::size_t, std::vector<double>& a, double& g) const override {
        std::size_t i = 0;
        while (!nodes_[i].leaf) {
            const auto& n = nodes_[i];
            const bool left = n.feature < numeric_ ? x[n.feature] <= n.value : x[n.feature] == n.value;
            i = left ? n.left : n.right;
        }
        a = nodes_[i].scores;
        g = nodes_[i].shared;
    }

private:
    struct TreeNode {
        bool leaf = false;
        std::size_t feature = 0;
        double value = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        std::vector<double> scores;
        double shared = 0.0;
    };

    std::size_t build(std::size_t depth, std::vector<std::pair<double, double>>& bounds, std::size_t labels,
                      std::mt19937_64& rng) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        if (depth == kDepth) {
            std::normal_distribution<double> n(0.0, 1.0);
            nodes_[id].leaf = true;
            nodes_[id].scores.resize(labels);
            for (auto& s : nodes_[id].scores) s = n(rng);
            nodes_[id].shared = n(rng);
            return id;
        }
        std::uniform_int_distribution<std::size_t> pick(0, numeric_ + categorical_ - 1);
        const std::size_t f = pick(rng);
        nodes_[id].feature = f;
        if (f < numeric_) {
            // Thresholds stay inside the interval the path leaves open, so no leaf is empty.
            auto [lo, hi] = bounds[f];
            const double s = std::uniform_real_distribution<double>(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))(rng);
            nodes_[id].value = s;
            bounds[f] = {lo, s};
            const auto l = build(depth + 1, bounds, labels, rng);
            bounds[f] = {s, hi};
            const auto r = build(depth + 1, bounds, labels, rng);
            bounds[f] = {lo, hi};
            nodes_[id].left = l;
            nodes_[id].right = r;
        } else {
            nodes_[id].value = static_cast<double>(std::uniform_int_distribution<std::size_t>(0, values_ - 1)(rng));
            const auto l = build(depth + 1, bounds, labels, rng);
            const auto r = build(depth + 1, bounds, labels, rng);
            nodes_[id].left = l;
            nodes_[id].right = r;
        }
        return id;
    }

    std::size_t numeric_;
    std::size_t categorical_;
    std::size_t values_;
    std::vector<TreeNode> nodes_;
};

std::unique_ptr<Concept> make_concept(const GeneratorSpec& spec, std::size_t id) {
    std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL * (id + 1));
    switch (spec.kind) {
        case GeneratorKind::Hyperplane: return std::make_unique<HyperplaneConcept>(spec.numeric, spec.labels, rng);
        case GeneratorKind::RBF: return std::make_unique<RbfConcept>(spec.numeric, spec.labels, rng);
        case GeneratorKind::RandomTree:
            return std::make_unique<RandomTreeConcept>(spec.numeric, spec.categorical, spec.category_values,
                                                       spec.labels, rng);
    }
    throw std::logic_error("unhandled generator kind");
}

constexpr std::size_t kCalibrationSamples = 20'000;

}  // namespace

SyntheticStream::SyntheticStream(GeneratorSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
    spec_.validate();
    std::vector<FeatureKind> kinds(spec_.numeric, FeatureKind::Numerical);
    kinds.insert(kinds.end(), spec_.categorical, FeatureKind::Categorical);
    schema_ = StreamSchema(kinds, spec_.labels);
    for (std::size_t f = 0; f < kinds.size(); ++f) {
        schema_.feature_names[f] = (f < spec_.numeric ? "x" : "c") + std::to_string(f < spec_.numeric ? f : f - spec_.numeric);
        if (kinds[f] == FeatureKind::Categorical) {
            for (std::size_t v = 0; v < spec_.category_values; ++v) schema_.symbols[f].intern("v" + std::to_string(v));
        }
    }

    std::size_t concept_count = 0;
    for (auto c : spec_.schedule.concepts) concept_count = std::max(concept_count, c + 1);
    for (std::size_t c = 0; c < concept_count; ++c) concepts_.push_back(make_concept(spec_, c));

    // Global threshold per segment: the (1 - Z/L) quantile of the pooled scores
    // on a calibration sample, so the expected cardinality is Z.
    const std::size_t L = spec_.labels;
    for (std::size_t k = 0; k < spec_.schedule.segment_count(); ++k) {
        const auto& seg = spec_.schedule.segments[k];
        const Concept& base = *concepts_[spec_.schedule.concepts[k]];
        std::mt19937_64 cal(spec_.seed ^ (0xD1B54A32D192ED03ULL * (k + 1)));
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<double> pooled;
        pooled.reserve(kCalibrationSamples * L);
        std::vector<double> x, a;
        double g = 0.0;
        for (std::size_t i = 0; i < kCalibrationSamples; ++i) {
            const auto aux = base.draw(cal, x);
            base.scores(x, aux, a, g);
            for (std::size_t l = 0; l < L; ++l) {
                pooled.push_back((1.0 - seg.dependency) * a[l] + seg.dependency * g + spec_.label_noise * noise(cal));
            }
        }
        const double share = 1.0 - seg.cardinality / static_cast<double>(L);
        auto idx = static_cast<std::size_t>(std::clamp(share, 0.0, 1.0) * static_cast<double>(pooled.size()));
        idx = std::min(idx, pooled.size() - 1);
        std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(idx), pooled.end());
        thresholds_.push_back(seg.cardinality >= static_cast<double>(L) ? -1e300 : pooled[idx]);
    }
}

SyntheticStream::~SyntheticStream() = default;
SyntheticStream::SyntheticStream(SyntheticStream&&) noexcept = default;
SyntheticStream& SyntheticStream::operator=(SyntheticStream&&) noexcept = default;

std::optional<Instance> SyntheticStream::next() {
    if (t_ >= spec_.schedule.length) return std::nullopt;
    const auto& sched = spec_.schedule;
    const ConceptMix mix = active_concept(sched, t_);
    const std::size_t L = spec_.labels;

    Instance inst;
    std::vector<double> a;
    double g = 0.0;
    double u = 0.0;
    double theta = 0.0;
    if (sched.type == DriftType::Incremental && mix.from != mix.to) {
        const Concept& from = *concepts_[sched.concepts[mix.from]];
        const Concept& to = *concepts_[sched.concepts[mix.to]];
        const double b = mix.mixing;
        const auto aux = from.draw_towards(rng_, inst.features, to, b);
        std::vector<double> a2;
        double g2 = 0.0;
        from.scores(inst.features, aux, a, g);
        to.scores(inst.features, aux, a2, g2);
        for (std::size_t l = 0; l < L; ++l) a[l] = (1.0 - b) * a[l] + b * a2[l];
        g = (1.0 - b) * g + b * g2;
        u = (1.0 - b) * sched.segments[mix.from].dependency + b * sched.segments[mix.to].dependency;
        theta = (1.0 - b) * thresholds_[mix.from] + b * thresholds_[mix.to];
        last_segment_ = b < 0.5 ? mix.from : mix.to;
    } else {
        std::size_t segment = mix.from;
        if (mix.from != mix.to) {
            const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
            segment = r < mix.mixing ? mix.to : mix.from;
        }
        const Concept& base = *concepts_[sched.concepts[segment]];
        const auto aux = base.draw(rng_, inst.features);
        base.scores(inst.features, aux, a, g);
        u = sched.segments[segment].dependency;
        theta = thresholds_[segment];
        last_segment_ = segment;
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    LabelsetKey y(L);
    for (std::size_t l = 0; l < L; ++l) {
        const double s = (1.0 - u) * a[l] + u * g + spec_.label_noise * noise(rng_);
        if (s > theta) y.set(l);
    }
    inst.labels = std::move(y);
    ++t_;
    return inst;
}

std::vector<std::pair<std::string, std::string>> SyntheticStream::metadata() const {
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    const auto& s = spec_.schedule;
    std::vector<std::pair<std::string, std::string>> m;
    m.emplace_back("generator", spec_.name);
    m.emplace_back("kind", to_string(spec_.kind));
    m.emplace_back("numeric", std::to_string(spec_.numeric));
    m.emplace_back("categorical", std::to_string(spec_.categorical));
    m.emplace_back("category_values", std::to_string(spec_.category_values));
    m.emplace_back("labels", std::to_string(spec_.labels));
    m.emplace_back("seed", std::to_string(spec_.seed));
    m.emplace_back("label_noise", num(spec_.label_noise));
    m.emplace_back("drift", to_string(s.type));
    m.emplace_back("length", std::to_string(s.length));
    m.emplace_back("width", std::to_string(s.width));
    std::string positions, segments, concepts;
    for (std::size_t i = 0; i < s.positions.size(); ++i) positions += (i ? ";" : "") + std::to_string(s.positions[i]);
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        segments += (i ? ";" : "") + num(s.segments[i].cardinality) + ":" + num(s.segments[i].dependency);
        concepts += (i ? ";" : "") + std::to_string(s.concepts[i]);
    }
    m.emplace_back("positions", positions);
    m.emplace_back("segments", segments);
    m.emplace_back("concepts", concepts);
    return m;
}

}  // namespace mlhat
