#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mlhat/stream.hpp"
#include "mlhat/synth.hpp"
#include "mlhat/tree.hpp"
#include "oracles.hpp"

namespace fixtures {

/// Two numeric features in [0, 1], two labels thresholding the same feature.
/// The informative feature alternates with the seed.
inline mlhat::VectorStream separable_stream(std::uint64_t seed, std::size_t n) {
    using namespace mlhat;
    StreamSchema schema({FeatureKind::Numerical, FeatureKind::Numerical}, 2);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    const std::size_t f = seed % 2;
    const double a = 0.3 + 0.4 * u(rng);
    const double b = 0.3 + 0.4 * u(rng);
    std::vector<Instance> xs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        std::vector<std::uint8_t> y{std::uint8_t(x[f] > a), std::uint8_t(x[f] > b)};
        xs.push_back({std::move(x), encode_labelset(y, 2), 1.0});
    }
    return VectorStream(std::move(schema), std::move(xs));
}

struct SplitCheck {
    bool split = false;         // the root split at all
    bool matches = false;       // criterion equals the oracle argmax
    bool on_grace = false;      // fired at a multiple of the grace period
    std::uint64_t instance = 0;
    mlhat::SplitCriterion chosen;
    oracle::Candidate reference;
};

/// Trains MLHAT on a separable stream and recomputes its first root split
/// with the batch oracle over the Poisson-weighted instances seen so far.
inline SplitCheck first_split_check(std::uint64_t seed, std::size_t n = 1000) {
    using namespace mlhat;
    auto stream = separable_stream(seed, n);
    MLHATConfig cfg;
    cfg.seed = seed;
    MLHAT tree(stream.schema(), cfg);
    std::vector<oracle::Row> rows;
    SplitCheck out;
    std::size_t t = 0;
    while (auto inst = stream.next()) {
        ++t;
        tree.learn_one(*inst);
        if (tree.last_weight() > 0.0) {
            rows.push_back({inst->features, {int(inst->y().test(0)), int(inst->y().test(1))}, tree.last_weight()});
        }
        if (!tree.root().is_leaf()) break;
    }
    if (tree.root().is_leaf()) return out;
    if (!tree.events().replacements.empty()) return out;  // the root is no longer the original leaf
    const SplitAttempt* first = nullptr;
    for (const auto& a : tree.events().split_attempts) {
        if (a.split && !a.in_alternate) {
            first = &a;
            break;
        }
    }
    if (first == nullptr) return out;
    out.split = true;
    out.instance = first->instance;
    out.chosen = tree.root().criterion;
    out.on_grace = first->leaf_seen % cfg.split_grace == 0;
    auto ref = oracle::best_numeric_split(rows, 2, 2, cfg.numeric_bins);
    if (!ref) return out;
    out.reference = *ref;
    out.matches = out.chosen.kind == SplitKind::NumericThreshold && out.chosen.feature == ref->feature &&
                  out.chosen.value == ref->value;
    return out;
}


/// Largest |mean |Y| - Z| over the segments of a generated stream, counting
/// only instances outside the transition bands.
inline double worst_cardinality_gap(const mlhat::GeneratorSpec& spec) {
    using namespace mlhat;
    SyntheticStream s(spec);
    const auto& sched = spec.schedule;
    std::vector<double> sum(sched.segment_count()), count(sched.segment_count());
    const double half = static_cast<double>(sched.width) / 2.0;
    std::uint64_t t = 0;
    while (auto x = s.next()) {
        bool in_band = false;
        for (auto p : sched.positions) {
            const double off = static_cast<double>(t) - static_cast<double>(p);
            if (sched.width > 1 && off >= -half && off < half) in_band = true;
        }
        ++t;
        if (in_band) continue;
        const auto seg = s.last_segment();
        sum[seg] += static_cast<double>(x->y().count());
        count[seg] += 1;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        worst = std::max(worst, std::abs(sum[k] / count[k] - sched.segments[k].cardinality));
    }
    return worst;
}

/// Mean absolute pairwise Pearson correlation between labels.
inline double mean_label_correlation(mlhat::InstanceStream& s, std::size_t n) {
    const std::size_t L = s.schema().label_count;
    std::vector<double> m(L), mm(L * L);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = s.next();
        for (std::size_t a = 0; a < L; ++a) {
            const double ya = x->y().test(a);
            m[a] += ya;
            for (std::size_t b = 0; b < L; ++b) mm[a * L + b] += ya * x->y().test(b);
        }
    }
    const double dn = static_cast<double>(n);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < L; ++a) {
        for (std::size_t b = a + 1; b < L; ++b) {
            const double pa = m[a] / dn, pb = m[b] / dn;
            const double cov = mm[a * L + b] / dn - pa * pb;
            const double den = std::sqrt(pa * (1 - pa) * pb * (1 - pb));
            if (den > 0) total += std::abs(cov / den);
            ++pairs;
        }
    }
    return pairs ? total / static_cast<double>(pairs) : 0.0;
}

/// CSV text with the named column removed from every line.
inline std::string drop_column(const std::string& csv, const std::string& column) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        return cells;
    };
    std::stringstream in(csv);
    std::string line, out;
    std::size_t drop = std::string::npos;
    while (std::getline(in, line)) {
        auto cells = split(line);
        if (drop == std::string::npos) {
            drop = static_cast<std::size_t>(std::find(cells.begin(), cells.end(), column) - cells.begin());
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == drop) continue;
            out += cells[i];
            out += ',';
        }
        out += '\n';
    }
    return out;
}

}  // namespace fixtures
