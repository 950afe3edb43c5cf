#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

namespace mlhat {

class BinaryWriter;
class BinaryReader;

enum class DetectorSignal : std::uint8_t { Stable, Warning };

/// Adaptive windowing change detector over values in [0, 1].
///
/// The window is kept as an exponential histogram: row i holds up to
/// `max_buckets` buckets of 2^i observations each, oldest at the front. After
/// every insertion each boundary between adjacent buckets is tested and the
/// oldest bucket is dropped while some split of the window has sub-window
/// means further apart than
///
///   eps = sqrt(2 var ln(2/d') / m) + 2/(3m) ln(2/d'),   d' = delta / ln(n),
///
/// with m = 1 / (1/n0 + 1/n1) and var the variance of the whole window.
class Adwin {
public:
    static constexpr std::size_t kMinSubWindow = 5;

    explicit Adwin(double delta = 0.05, std::size_t max_buckets = 5);

    /// Appends x (clamped to [0, 1]); Warning when the update shrank the window.
    DetectorSignal update(double x);

    /// Window mean; 0 when empty (check empty()).
    double estimate() const noexcept { return width_ > 0 ? total_ / static_cast<double>(width_) : 0.0; }
    bool empty() const noexcept { return width_ == 0; }
    std::size_t width() const noexcept { return width_; }
    double total() const noexcept { return total_; }
    /// Population variance of the window.
    double variance() const noexcept { return width_ > 0 ? m2_ / static_cast<double>(width_) : 0.0; }

    double delta() const noexcept { return delta_; }
    std::size_t max_buckets() const noexcept { return max_buckets_; }
    std::size_t bucket_count() const noexcept;
    std::uint64_t clamped_inputs() const noexcept { return clamped_; }
    std::uint64_t detections() const noexcept { return detections_; }

    void reset();

    void save(BinaryWriter& out) const;
    static Adwin load(BinaryReader& in);

private:
    struct Bucket {
        double total = 0.0;
        double m2 = 0.0;  // sum of squared deviations from the bucket mean
    };

    void insert(double x);
    void compress();
    bool cut_once();
    void drop_oldest();

    double delta_;
    std::size_t max_buckets_;
    std::vector<std::deque<Bucket>> rows_;
    std::size_t width_ = 0;
    double total_ = 0.0;
    double m2_ = 0.0;
    std::uint64_t clamped_ = 0;
    std::uint64_t detections_ = 0;
};

}  // namespace mlhat
