#include "mlhat/tree.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "mlhat/serialization.hpp"

namespace mlhat {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

constexpr char kMagic[] = "MLHAT-SNAPSHOT";

}  // namespace

void MLHATConfig::validate() const {
    require(split_confidence > 0.0 && split_confidence < 1.0, "split_confidence must be in (0, 1)");
    require(replace_confidence > 0.0 && replace_confidence < 1.0, "replace_confidence must be in (0, 1)");
    require(adwin_delta > 0.0 && adwin_delta < 1.0, "adwin_delta must be in (0, 1)");
    require(split_grace >= 1, "split_grace must be >= 1");
    require(alternate_grace >= 1, "alternate_grace must be >= 1");
    require(cardinality_threshold >= 1, "cardinality_threshold must be >= 1");
    require(poisson_lambda >= 0.0 && std::isfinite(poisson_lambda), "poisson_lambda must be >= 0");
    require(decision_threshold > 0.0 && decision_threshold < 1.0, "decision_threshold must be in (0, 1)");
    require(tie_threshold >= 0.0, "tie_threshold must be >= 0");
    require(knn_k >= 1, "knn_k must be >= 1");
    require(lr_learning_rate > 0.0, "lr_learning_rate must be positive");
    require(ensemble_size >= 1, "ensemble_size must be >= 1");
    require(adwin_buckets >= 2, "adwin_buckets must be >= 2");
    require(numeric_bins >= 1, "numeric_bins must be >= 1");
}

double split_bound(std::size_t labelsets, double delta, double weight) {
    if (labelsets < 1) throw std::invalid_argument("split bound needs at least one labelset");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("split confidence must be in (0, 1)");
    if (!(weight > 0.0)) throw std::invalid_argument("split bound needs positive weight");
    const double range = std::log2(static_cast<double>(labelsets));
    return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * weight));
}

double alt_bound(double e, double e_alt, double w, double w_alt, double delta) {
    if (!(w > 0.0 && w_alt > 0.0)) throw std::invalid_argument("alternate bound needs positive widths");
    return std::sqrt(2.0 * e * (1.0 - e_alt) * (w + w_alt) * std::log(2.0 / delta) / (w * w_alt));
}

AlternateOutcome compare_alternate(double e, double e_alt, double w, double w_alt, double delta) {
    if (!(w > 0.0 && w_alt > 0.0)) return AlternateOutcome::Deferred;
    const double eps = alt_bound(e, e_alt, w, w_alt, delta);
    if (e - e_alt > eps) return AlternateOutcome::Replaced;
    if (e_alt - e > eps) return AlternateOutcome::Pruned;
    return AlternateOutcome::Kept;
}

std::size_t subtree_size(const Node& node) {
    std::size_t n = 1;
    if (node.alternate) n += subtree_size(*node.alternate);
    if (!node.is_leaf()) n += subtree_size(*node.left) + subtree_size(*node.right);
    return n;
}

std::size_t subtree_depth(const Node& node) {
    if (node.is_leaf()) return 0;
    return 1 + std::max(subtree_depth(*node.left), subtree_depth(*node.right));
}

namespace {

std::size_t count_leaves(const Node& node) {
    if (node.is_leaf()) return 1;
    return count_leaves(*node.left) + count_leaves(*node.right);
}

std::size_t count_alternates(const Node& node) {
    std::size_t n = node.alternate ? 1 : 0;
    if (!node.is_leaf()) n += count_alternates(*node.left) + count_alternates(*node.right);
    return n;
}

const Node& descend(const Node& node, std::span<const double> features) {
    const Node* n = &node;
    while (!n->is_leaf()) n = &n->child(features);
    return *n;
}

}  // namespace

MLHAT::MLHAT(StreamSchema schema, MLHATConfig config)
    : schema_(std::move(schema)), config_(config), rng_(config.seed) {
    config_.validate();
    schema_.finalize();
    root_ = make_leaf(LabelsetKey(schema_.label_count));
}

std::unique_ptr<Node> MLHAT::make_leaf(LabelsetKey fallback) {
    auto node = std::make_unique<Node>();
    node->detector = Adwin(config_.adwin_delta, config_.adwin_buckets);
    auto leaf = std::make_unique<LeafData>();
    leaf->stats = NodeStats(schema_.feature_kinds, schema_.label_count);
    leaf->knn = LabelPowersetKnn(schema_.feature_kinds, schema_.label_count, config_.knn_k,
                                 config_.effective_knn_window());
    BaggingConfig bag;
    bag.ensemble_size = config_.ensemble_size;
    bag.learning_rate = config_.lr_learning_rate;
    leaf->br = BinaryRelevanceBagging(schema_.feature_kinds, schema_.label_count, bag, rng_());
    leaf->fallback = std::move(fallback);
    node->leaf = std::move(leaf);
    return node;
}

double MLHAT::hamming_loss(const Prediction& z, const LabelsetKey& y) const {
    return static_cast<double>(z.labelset.hamming_distance(y)) / static_cast<double>(schema_.label_count);
}

Prediction MLHAT::leaf_prediction(const Node& node, std::span<const double> features, double* weight) const {
    const LeafData& leaf = *node.leaf;
    const double reliability = 1.0 - node.detector.estimate();
    if (!(leaf.stats.total_weight() > 0.0)) {
        *weight = reliability;
        return Prediction::from_labelset(leaf.fallback);
    }
    if (leaf.stats.entropy() == 0.0) {
        *weight = 1.0;
        return Prediction::from_labelset(leaf.stats.majority_labelset());
    }
    *weight = reliability;
    const bool low_cardinality = leaf.stats.total_weight() < static_cast<double>(config_.cardinality_threshold);
    if (low_cardinality && leaf.knn.can_vote()) return leaf.knn.predict(features);
    return leaf.br.predict(features);
}

Prediction MLHAT::subtree_prediction(const Node& node, std::span<const double> features) const {
    double unused = 0.0;
    auto p = leaf_prediction(descend(node, features), features, &unused);
    return Prediction::from_probabilities(std::move(p.probabilities), config_.decision_threshold);
}

Prediction MLHAT::predict_one(std::span<const double> features) const {
    if (!ready()) throw std::logic_error("mlhat has not learned any instance yet");
    if (features.size() != schema_.feature_count()) throw SchemaError("feature vector has wrong arity");
    const auto t0 = Clock::now();
    const std::size_t L = schema_.label_count;
    std::vector<double> acc(L, 0.0);
    double total = 0.0;
    auto add = [&](const Prediction& p, double w) {
        if (!(w > 0.0)) return;
        for (std::size_t l = 0; l < L; ++l) acc[l] += w * p.probabilities[l];
        total += w;
    };

    const Node* n = root_.get();
    Prediction main;
    while (true) {
        if (config_.combine_alternates && n->alternate && n->alternate->detector.width() > config_.alternate_grace) {
            const Node& alt_leaf = descend(*n->alternate, features);
            double unused = 0.0;
            add(leaf_prediction(alt_leaf, features, &unused), 1.0 - alt_leaf.detector.estimate());
        }
        if (n->is_leaf()) {
            double w = 0.0;
            main = leaf_prediction(*n, features, &w);
            add(main, w);
            break;
        }
        n = &n->child(features);
    }
    if (total > 0.0) {
        for (auto& p : acc) p /= total;
    } else {
        acc = std::move(main.probabilities);
    }
    auto out = Prediction::from_probabilities(std::move(acc), config_.decision_threshold);
    cache_.valid = true;
    cache_.version = instances_;
    cache_.features.assign(features.begin(), features.end());
    cache_.prediction = out;
    predict_seconds_ += seconds_since(t0);
    return out;
}

void MLHAT::learn_one(const Instance& instance) {
    validate_instance(instance, schema_);
    if (!instance.labels) throw SchemaError("training instance has no labels");
    const auto t0 = Clock::now();

    double draw = 0.0;
    if (config_.poisson_lambda > 0.0) {
        std::poisson_distribution<unsigned> poisson(config_.poisson_lambda);
        draw = static_cast<double>(poisson(rng_));
    }
    const double w = draw * instance.weight;
    last_weight_ = w;

    double loss = 0.0;
    if (ready()) {
        if (cache_.valid && cache_.version == instances_ && cache_.features == instance.features) {
            loss = hamming_loss(cache_.prediction, instance.y());
        } else {
            const double saved = predict_seconds_;
            loss = hamming_loss(predict_one(instance.features), instance.y());
            predict_seconds_ = saved;
        }
    } else {
        loss = static_cast<double>(instance.y().count()) / static_cast<double>(schema_.label_count);
    }
    ++instances_;
    learn_main(instance, w, loss);
    learn_seconds_ += seconds_since(t0);
}

void MLHAT::learn_main(const Instance& instance, double w, double loss) {
    std::unique_ptr<Node>* slot = &root_;
    bool promoted = false;
    while (true) {
        Node& node = **slot;
        if (!promoted) {
            if (node.detector.update(loss) == DetectorSignal::Warning) {
                ++warnings_;
                events_.warnings.push_back(instances_);
                if (config_.drift_adaptation && !node.alternate) {
                    node.alternate = make_leaf(LabelsetKey(schema_.label_count));
                }
            }
            if (node.alternate) {
                Node& alt = *node.alternate;
                auto outcome = AlternateOutcome::Deferred;
                if (alt.detector.width() > config_.alternate_grace) {
                    outcome = compare_alternate(node.detector.estimate(), alt.detector.estimate(),
                                                static_cast<double>(node.detector.width()),
                                                static_cast<double>(alt.detector.width()),
                                                config_.replace_confidence);
                }
                if (outcome == AlternateOutcome::Replaced) {
                    Replacement ev;
                    ev.instance = instances_;
                    ev.nodes_before = subtree_size(*root_);
                    ev.alternate_size = subtree_size(alt);
                    ev.replaced_size = subtree_size(node) - ev.alternate_size;
                    std::unique_ptr<Node> old = std::move(*slot);
                    *slot = std::move(old->alternate);
                    (*slot)->detector.reset();
                    old.reset();
                    ev.nodes_after = subtree_size(*root_);
                    events_.replacements.push_back(ev);
                    ++replacements_;
                    promoted = true;
                    continue;  // the promoted subtree learns this instance as part of the main tree
                }
                if (outcome == AlternateOutcome::Pruned) {
                    node.alternate.reset();
                    ++prunes_;
                } else {
                    learn_alternate(alt, instance, w);
                }
            }
        }
        promoted = false;
        node.weight += w;
        ++node.seen;
        if (node.is_leaf()) {
            leaf_learn(node, instance, w, false);
            return;
        }
        slot = node.criterion.goes_left(instance.features) ? &node.left : &node.right;
    }
}

void MLHAT::learn_alternate(Node& alt_root, const Instance& instance, double w) {
    const double loss = hamming_loss(subtree_prediction(alt_root, instance.features), instance.y());
    Node* n = &alt_root;
    while (true) {
        n->detector.update(loss);
        n->weight += w;
        ++n->seen;
        if (n->is_leaf()) {
            leaf_learn(*n, instance, w, true);
            return;
        }
        n = n->criterion.goes_left(instance.features) ? n->left.get() : n->right.get();
    }
}

void MLHAT::leaf_learn(Node& node, const Instance& instance, double w, bool in_alternate) {
    LeafData& leaf = *node.leaf;
    ++leaf.seen;
    const double weight_before = leaf.stats.total_weight();
    if (w > 0.0) leaf.stats.update(instance, w);

    if (leaf.seen % config_.split_grace == 0 && leaf.stats.total_weight() > 0.0 && leaf.stats.entropy() > 0.0) {
        if (attempt_split(node, in_alternate)) {
            Node& child = node.criterion.goes_left(instance.features) ? *node.left : *node.right;
            child.weight += w;
            ++child.seen;
            leaf_learn(child, instance, w, in_alternate);
            return;
        }
    }
    if (w > 0.0) {
        if (weight_before < static_cast<double>(config_.cardinality_threshold)) leaf.knn.learn(instance, w);
        leaf.br.learn(instance, instance.weight);
    }
}

bool MLHAT::attempt_split(Node& node, bool in_alternate) {
    LeafData& leaf = *node.leaf;
    const NodeStats& stats = leaf.stats;
    ++split_attempts_;

    SplitAttempt ev;
    ev.instance = instances_;
    ev.leaf_seen = leaf.seen;
    ev.leaf_weight = stats.total_weight();
    ev.in_alternate = in_alternate;
    ev.bound = split_bound(stats.counters().distinct_labelsets(), config_.split_confidence, stats.total_weight());

    const auto best = stats.best_two_splits(SplitPolicy{config_.numeric_bins});
    if (best && best->best.gain > 0.0) {
        ev.criterion = best->best.criterion;
        ev.delta_gain = best->best.gain - (best->second ? best->second->gain : 0.0);
        ev.split = ev.delta_gain > ev.bound || (config_.tie_threshold > 0.0 && ev.bound < config_.tie_threshold);
    }
    events_.split_attempts.push_back(ev);
    if (!ev.split) return false;

    // Children start from the majority labelset of the window entries routed to
    // their side, or the parent's majority when the window has none.
    const LabelsetKey parent_majority = stats.majority_labelset();
    std::map<LabelsetKey, double> side_votes[2];
    for (const auto& e : leaf.knn.window()) {
        if (e.weight > 0.0) side_votes[ev.criterion.goes_left(e.features) ? 0 : 1][e.labels] += e.weight;
    }
    LabelsetKey fallback[2] = {parent_majority, parent_majority};
    for (int side = 0; side < 2; ++side) {
        double best_weight = -1.0;
        for (const auto& [key, weight] : side_votes[side]) {
            if (weight > best_weight) {
                best_weight = weight;
                fallback[side] = key;
            }
        }
    }

    node.criterion = ev.criterion;
    node.left = make_leaf(fallback[0]);
    node.right = make_leaf(fallback[1]);
    node.leaf.reset();
    ++splits_;
    return true;
}

void MLHAT::refresh_schema(const StreamSchema& schema) {
    if (!schema.same_shape(schema_)) throw SchemaError("schema shape differs from the model's");
    schema_ = schema;
}

ModelReport MLHAT::report() const {
    ModelReport r;
    r.nodes = subtree_size(*root_);
    r.leaves = count_leaves(*root_);
    r.depth = subtree_depth(*root_);
    r.alternates = count_alternates(*root_);
    r.splits = splits_;
    r.split_attempts = split_attempts_;
    r.warnings = warnings_;
    r.replacements = replacements_;
    r.prunes = prunes_;
    r.instances = instances_;
    r.learn_seconds = learn_seconds_;
    r.predict_seconds = predict_seconds_;
    return r;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

void write_config(BinaryWriter& out, const MLHATConfig& c) {
    out.f64(c.split_confidence);
    out.size(c.split_grace);
    out.f64(c.replace_confidence);
    out.size(c.alternate_grace);
    out.size(c.cardinality_threshold);
    out.f64(c.poisson_lambda);
    out.f64(c.decision_threshold);
    out.f64(c.tie_threshold);
    out.boolean(c.combine_alternates);
    out.boolean(c.drift_adaptation);
    out.size(c.knn_k);
    out.size(c.knn_window);
    out.f64(c.lr_learning_rate);
    out.size(c.ensemble_size);
    out.f64(c.adwin_delta);
    out.size(c.adwin_buckets);
    out.size(c.numeric_bins);
    out.u64(c.seed);
}

MLHATConfig read_config(BinaryReader& in) {
    MLHATConfig c;
    c.split_confidence = in.f64();
    c.split_grace = in.size();
    c.replace_confidence = in.f64();
    c.alternate_grace = in.size();
    c.cardinality_threshold = in.size();
    c.poisson_lambda = in.f64();
    c.decision_threshold = in.f64();
    c.tie_threshold = in.f64();
    c.combine_alternates = in.boolean();
    c.drift_adaptation = in.boolean();
    c.knn_k = in.size();
    c.knn_window = in.size();
    c.lr_learning_rate = in.f64();
    c.ensemble_size = in.size();
    c.adwin_delta = in.f64();
    c.adwin_buckets = in.size();
    c.numeric_bins = in.size();
    c.seed = in.u64();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw SnapshotError(std::string("snapshot config: ") + e.what());
    }
    return c;
}

void write_node(BinaryWriter& out, const Node& node) {
    out.boolean(node.is_leaf());
    node.detector.save(out);
    out.f64(node.weight);
    out.u64(node.seen);
    out.boolean(node.alternate != nullptr);
    if (node.alternate) write_node(out, *node.alternate);
    if (node.is_leaf()) {
        const LeafData& leaf = *node.leaf;
        leaf.stats.save(out);
        leaf.knn.save(out);
        leaf.br.save(out);
        out.u64(leaf.seen);
        write_labelset(out, leaf.fallback);
    } else {
        out.size(node.criterion.feature);
        out.u8(static_cast<std::uint8_t>(node.criterion.kind));
        out.f64(node.criterion.value);
        write_node(out, *node.left);
        write_node(out, *node.right);
    }
}

std::unique_ptr<Node> read_node(BinaryReader& in, std::size_t depth) {
    if (depth > 4096) throw SnapshotError("snapshot tree is implausibly deep");
    auto node = std::make_unique<Node>();
    const bool is_leaf = in.boolean();
    node->detector = Adwin::load(in);
    node->weight = in.f64();
    node->seen = in.u64();
    if (in.boolean()) node->alternate = read_node(in, depth + 1);
    if (is_leaf) {
        auto leaf = std::make_unique<LeafData>();
        leaf->stats = NodeStats::load(in);
        leaf->knn = LabelPowersetKnn::load(in);
        leaf->br = BinaryRelevanceBagging::load(in);
        leaf->seen = in.u64();
        leaf->fallback = read_labelset(in);
        node->leaf = std::move(leaf);
    } else {
        node->criterion.feature = in.size();
        const auto kind = in.u8();
        if (kind > 1) throw SnapshotError("unknown split kind in snapshot");
        node->criterion.kind = static_cast<SplitKind>(kind);
        node->criterion.value = in.f64();
        node->left = read_node(in, depth + 1);
        node->right = read_node(in, depth + 1);
    }
    return node;
}

}  // namespace

void MLHAT::save(std::ostream& os) const {
    BinaryWriter out(os);
    out.str(kMagic);
    out.u32(kSnapshotVersion);
    write_config(out, config_);
    write_schema(out, schema_);
    save_rng(out, rng_);
    out.u64(instances_);
    out.f64(last_weight_);
    out.u64(splits_);
    out.u64(split_attempts_);
    out.u64(warnings_);
    out.u64(replacements_);
    out.u64(prunes_);
    write_node(out, *root_);
    if (!os) throw SnapshotError("failed writing snapshot");
}

MLHAT MLHAT::load(std::istream& is) {
    BinaryReader in(is);
    if (in.str() != kMagic) throw SnapshotError("not an mlhat snapshot");
    const auto version = in.u32();
    if (version != kSnapshotVersion) throw SnapshotError("unsupported snapshot version " + std::to_string(version));
    MLHAT m;
    m.config_ = read_config(in);
    m.schema_ = read_schema(in);
    m.rng_ = load_rng(in);
    m.instances_ = in.u64();
    m.last_weight_ = in.f64();
    m.splits_ = in.u64();
    m.split_attempts_ = in.u64();
    m.warnings_ = in.u64();
    m.replacements_ = in.u64();
    m.prunes_ = in.u64();
    m.root_ = read_node(in, 0);
    return m;
}

}  // namespace mlhat
