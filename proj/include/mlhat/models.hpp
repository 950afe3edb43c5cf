#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mlhat/classifier.hpp"
#include "mlhat/evaluation.hpp"
#include "mlhat/tree.hpp"

namespace mlhat {

/// "mlhat", "majority", "br-knn", "br-bagging-lr".
const std::vector<std::string>& model_names();

/// Baselines take their shared knobs (knn_k, knn_window, ensemble_size,
/// lr_learning_rate, seed) from `config`. Throws std::invalid_argument for an unknown name.
std::unique_ptr<StreamClassifier> make_model(const std::string& name, const StreamSchema& schema,
                                             const MLHATConfig& config);

/// Every config field as name/value text; numbers in shortest round-trip form.
ConfigEntries describe(const MLHATConfig& config);

/// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace mlhat
