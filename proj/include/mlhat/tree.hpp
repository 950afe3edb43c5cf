#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlhat/adwin.hpp"
#include "mlhat/classifier.hpp"
#include "mlhat/leaf_models.hpp"
#include "mlhat/node_stats.hpp"
#include "mlhat/stream.hpp"

namespace mlhat {

struct MLHATConfig {
    double split_confidence = 1e-5;     // delta_spl
    std::size_t split_grace = 200;      // kappa_spl
    double replace_confidence = 0.05;   // delta_alt
    std::size_t alternate_grace = 200;  // kappa_alt
    std::size_t cardinality_threshold = 750;  // eta
    double poisson_lambda = 1.0;
    double decision_threshold = 0.5;
    /// Split whenever the split bound falls below this value; 0 disables.
    double tie_threshold = 0.0;
    bool combine_alternates = true;
    /// When false no alternate is ever spawned, so the tree cannot adapt to drift.
    bool drift_adaptation = true;

    std::size_t knn_k = 5;
    /// 0 means "same as cardinality_threshold".
    std::size_t knn_window = 0;
    double lr_learning_rate = 0.01;
    std::size_t ensemble_size = 10;
    double adwin_delta = 0.05;
    std::size_t adwin_buckets = 5;
    std::size_t numeric_bins = 10;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the first bad field.
    void validate() const;
    std::size_t effective_knn_window() const noexcept {
        return knn_window == 0 ? cardinality_threshold : knn_window;
    }
};

/// eps_spl = sqrt(log2(|L|)^2 ln(1/delta) / (2W)).
double split_bound(std::size_t labelsets, double delta, double weight);

/// eps_alt = sqrt(2 e (1 - e') (W + W') ln(2/delta) / (W W')).
double alt_bound(double e, double e_alt, double w, double w_alt, double delta);

enum class AlternateOutcome : std::uint8_t { Kept, Replaced, Pruned, Deferred };

/// Compares the main error e against the alternate error e_alt with the bound above.
AlternateOutcome compare_alternate(double e, double e_alt, double w, double w_alt, double delta);

struct LeafData {
    NodeStats stats;
    LabelPowersetKnn knn;
    BinaryRelevanceBagging br;
    std::uint64_t seen = 0;  // instances routed here, zero weights included
    LabelsetKey fallback;    // predicted while stats are still empty
};

struct Node {
    std::unique_ptr<LeafData> leaf;  // null for branches
    SplitCriterion criterion;
    std::unique_ptr<Node> left;
    std::unique_ptr<Node> right;

    Adwin detector;
    double weight = 0.0;
    std::uint64_t seen = 0;
    std::unique_ptr<Node> alternate;

    bool is_leaf() const noexcept { return leaf != nullptr; }
    const Node& child(std::span<const double> features) const {
        return criterion.goes_left(features) ? *left : *right;
    }
};

struct SplitAttempt {
    std::uint64_t instance = 0;   // model-level instance index (1-based)
    std::uint64_t leaf_seen = 0;  // leaf raw count when the attempt ran
    double leaf_weight = 0.0;
    double bound = 0.0;
    double delta_gain = 0.0;
    bool split = false;
    bool in_alternate = false;
    SplitCriterion criterion;
};

struct Replacement {
    std::uint64_t instance = 0;
    std::size_t nodes_before = 0;
    std::size_t nodes_after = 0;
    std::size_t replaced_size = 0;
    std::size_t alternate_size = 0;
};

struct TreeEvents {
    std::vector<SplitAttempt> split_attempts;
    std::vector<Replacement> replacements;
    std::vector<std::uint64_t> warnings;  // instance indices
};

class MLHAT final : public StreamClassifier {
public:
    static constexpr std::uint32_t kSnapshotVersion = 1;

    MLHAT(StreamSchema schema, MLHATConfig config);

    std::string name() const override { return "mlhat"; }
    bool ready() const override { return instances_ > 0; }
    /// Throws std::logic_error before the first learn_one.
    Prediction predict_one(std::span<const double> features) const override;
    void learn_one(const Instance& instance) override;
    ModelReport report() const override;

    const MLHATConfig& config() const noexcept { return config_; }
    const StreamSchema& schema() const noexcept { return schema_; }
    const Node& root() const noexcept { return *root_; }
    const TreeEvents& events() const noexcept { return events_; }
    /// Poisson weight used by the most recent learn_one.
    double last_weight() const noexcept { return last_weight_; }
    std::uint64_t instances() const noexcept { return instances_; }

    /// Prediction of the subtree rooted at `node` alone, with no alternate combination.
    Prediction subtree_prediction(const Node& node, std::span<const double> features) const;

    /// Takes over categorical symbols discovered by the stream so snapshots
    /// carry them. Throws SchemaError when the shapes differ.
    void refresh_schema(const StreamSchema& schema);

    void save(std::ostream& out) const;
    static MLHAT load(std::istream& in);

private:
    MLHAT() = default;

    std::unique_ptr<Node> make_leaf(LabelsetKey fallback);
    Prediction leaf_prediction(const Node& leaf, std::span<const double> features, double* weight) const;
    void learn_main(const Instance& instance, double w, double loss);
    void learn_alternate(Node& alt_root, const Instance& instance, double w);
    void leaf_learn(Node& node, const Instance& instance, double w, bool in_alternate);
    bool attempt_split(Node& node, bool in_alternate);
    double hamming_loss(const Prediction& z, const LabelsetKey& y) const;

    StreamSchema schema_;
    MLHATConfig config_;
    std::unique_ptr<Node> root_;
    std::mt19937_64 rng_;
    std::uint64_t instances_ = 0;
    double last_weight_ = 0.0;

    std::uint64_t splits_ = 0;
    std::uint64_t split_attempts_ = 0;
    std::uint64_t warnings_ = 0;
    std::uint64_t replacements_ = 0;
    std::uint64_t prunes_ = 0;
    double learn_seconds_ = 0.0;
    mutable double predict_seconds_ = 0.0;
    TreeEvents events_;

    // Last prediction, reused by learn_one when the harness has just asked for
    // the same features on the same model state.
    struct PredictionCache {
        bool valid = false;
        std::uint64_t version = 0;
        std::vector<double> features;
        Prediction prediction;
    };
    mutable PredictionCache cache_;
};

std::size_t subtree_size(const Node& node);
std::size_t subtree_depth(const Node& node);

}  // namespace mlhat
