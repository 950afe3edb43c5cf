#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

enum class GeneratorKind : std::uint8_t { RandomTree, RBF, Hyperplane };
enum class DriftType : std::uint8_t { None, Sudden, Gradual, Incremental, Recurrent };

std::string to_string(GeneratorKind kind);
std::string to_string(DriftType type);
GeneratorKind parse_generator_kind(const std::string& name);
DriftType parse_drift_type(const std::string& name);

struct SegmentParams {
    double cardinality = 1.5;  // Z, mean labels per instance
    double dependency = 0.25;  // u
};

/// Drift shape for a stream of `length` instances. Segment k runs from
/// positions[k-1] to positions[k]; each drift is a transition band of `width`
/// instances centred on its position (width 1 switches exactly at the position).
struct DriftSchedule {
    DriftType type = DriftType::None;
    std::uint64_t length = 50'000;
    std::vector<std::uint64_t> positions;
    std::uint64_t width = 1;
    std::vector<SegmentParams> segments;  // one per segment, in time order
    std::vector<std::size_t> concepts;    // base concept id per segment

    /// Positions at N/4, 2N/4, 3N/4 and the standard segment sequence for `type`.
    /// `width` 0 selects the default width of the type (1 / 500 / 275 / 1).
    static DriftSchedule standard(DriftType type, std::uint64_t length, std::uint64_t width = 0);

    std::size_t segment_count() const noexcept { return segments.size(); }
    /// Throws std::invalid_argument when inconsistent.
    void validate() const;
};

struct ConceptMix {
    std::size_t from = 0;  // segment before the nearest drift (or the current segment)
    std::size_t to = 0;    // segment after it
    double mixing = 0.0;   // share of `to`: selection probability (gradual) or blend (incremental)
};

/// Segment in effect at instance t, with the transition ramp inside drift bands.
ConceptMix active_concept(const DriftSchedule& schedule, std::uint64_t t);

/// Ramp for a band of `width` centred at 0: logistic with slope 4/width,
/// rescaled so that it is exactly 0 and 1 at the band edges.
double transition_ramp(double offset, double width);

struct GeneratorSpec {
    std::string name = "custom";
    GeneratorKind kind = GeneratorKind::Hyperplane;
    std::size_t numeric = 30;
    std::size_t categorical = 0;
    std::size_t category_values = 5;
    std::size_t labels = 8;
    std::uint64_t seed = 1;
    double label_noise = 0.3;  // std of Gaussian noise added to latent scores
    DriftSchedule schedule = DriftSchedule::standard(DriftType::Sudden, 50'000);

    void validate() const;
};

/// The twelve generator layouts: SynTree/SynRBF/SynHP crossed with Sud/Grad/Inc/Rec.
std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown preset name (case-insensitive).
GeneratorSpec preset(const std::string& name, std::uint64_t length = 50'000, std::uint64_t seed = 1);
/// Generic spec for a generator family with its preset layout.
GeneratorSpec default_spec(GeneratorKind kind, DriftType drift, std::uint64_t length, std::uint64_t seed);

class Concept;

/// Seeded generator; yields exactly schedule.length instances.
class SyntheticStream final : public InstanceStream {
public:
    explicit SyntheticStream(GeneratorSpec spec);
    ~SyntheticStream() override;
    SyntheticStream(SyntheticStream&&) noexcept;
    SyntheticStream& operator=(SyntheticStream&&) noexcept;

    const StreamSchema& schema() const override { return schema_; }
    std::optional<Instance> next() override;

    const GeneratorSpec& spec() const noexcept { return spec_; }
    std::uint64_t position() const noexcept { return t_; }
    /// Score threshold calibrated for segment k.
    double threshold(std::size_t segment) const { return thresholds_.at(segment); }
    /// Segment each emitted instance was labelled by (`to` when selected, else `from`);
    /// blended instances report the segment with the larger share.
    std::size_t last_segment() const noexcept { return last_segment_; }

    /// Key/value lines describing the spec and schedule.
    std::vector<std::pair<std::string, std::string>> metadata() const;

private:
    GeneratorSpec spec_;
    StreamSchema schema_;
    std::vector<std::unique_ptr<Concept>> concepts_;
    std::vector<double> thresholds_;
    std::mt19937_64 rng_;
    std::uint64_t t_ = 0;
    std::size_t last_segment_ = 0;
};

}  // namespace mlhat
