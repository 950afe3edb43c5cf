#include "mlhat/models.hpp"

#include <charconv>
#include <stdexcept>

namespace mlhat {

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names = {"mlhat", "majority", "br-knn", "br-bagging-lr"};
    return names;
}

std::unique_ptr<StreamClassifier> make_model(const std::string& name, const StreamSchema& schema,
                                             const MLHATConfig& config) {
    if (name == "mlhat") return std::make_unique<MLHAT>(schema, config);
    if (name == "majority") return std::make_unique<MajorityLabelsetModel>(schema);
    if (name == "br-knn") {
        return std::make_unique<BrKnnModel>(schema, config.knn_k, config.effective_knn_window());
    }
    if (name == "br-bagging-lr") {
        BaggingConfig bag;
        bag.ensemble_size = config.ensemble_size;
        bag.learning_rate = config.lr_learning_rate;
        return std::make_unique<BrBaggingLrModel>(schema, bag, config.seed);
    }
    throw std::invalid_argument("unknown model '" + name + "'");
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

ConfigEntries describe(const MLHATConfig& c) {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"split_confidence", format_number(c.split_confidence)},
        {"split_grace", std::to_string(c.split_grace)},
        {"replace_confidence", format_number(c.replace_confidence)},
        {"alternate_grace", std::to_string(c.alternate_grace)},
        {"cardinality_threshold", std::to_string(c.cardinality_threshold)},
        {"poisson_lambda", format_number(c.poisson_lambda)},
        {"decision_threshold", format_number(c.decision_threshold)},
        {"tie_threshold", format_number(c.tie_threshold)},
        {"combine_alternates", b(c.combine_alternates)},
        {"drift_adaptation", b(c.drift_adaptation)},
        {"knn_k", std::to_string(c.knn_k)},
        {"knn_window", std::to_string(c.knn_window)},
        {"lr_learning_rate", format_number(c.lr_learning_rate)},
        {"ensemble_size", std::to_string(c.ensemble_size)},
        {"adwin_delta", format_number(c.adwin_delta)},
        {"adwin_buckets", std::to_string(c.adwin_buckets)},
        {"numeric_bins", std::to_string(c.numeric_bins)},
        {"seed", std::to_string(c.seed)},
    };
}

}  // namespace mlhat
