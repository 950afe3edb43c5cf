#include "mlhat/adwin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlhat/serialization.hpp"

namespace mlhat {

Adwin::Adwin(double delta, std::size_t max_buckets) : delta_(delta), max_buckets_(max_buckets) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("adwin delta must be in (0, 1)");
    if (max_buckets < 2) throw std::invalid_argument("adwin needs at least 2 buckets per row");
}

std::size_t Adwin::bucket_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
}

void Adwin::reset() {
    rows_.clear();
    width_ = 0;
    total_ = 0.0;
    m2_ = 0.0;
}

DetectorSignal Adwin::update(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        ++clamped_;
        x = std::isnan(x) ? 0.0 : std::clamp(x, 0.0, 1.0);
    }
    insert(x);
    compress();
    bool shrank = false;
    while (cut_once()) shrank = true;
    if (shrank) ++detections_;
    return shrank ? DetectorSignal::Warning : DetectorSignal::Stable;
}

void Adwin::insert(double x) {
    if (width_ > 0) {
        const double n = static_cast<double>(width_);
        const double d = x - total_ / n;
        m2_ += n * d * d / (n + 1.0);
    }
    ++width_;
    total_ += x;
    if (rows_.empty()) rows_.emplace_back();
    rows_[0].push_back({x, 0.0});
}

void Adwin::compress() {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].size() <= max_buckets_) break;
        const double n = std::ldexp(1.0, static_cast<int>(i));
        Bucket a = rows_[i].front();
        rows_[i].pop_front();
        Bucket b = rows_[i].front();
        rows_[i].pop_front();
        const double d = a.total / n - b.total / n;
        Bucket merged{a.total + b.total, a.m2 + b.m2 + n * n / (2.0 * n) * d * d};
        if (i + 1 == rows_.size()) rows_.emplace_back();
        rows_[i + 1].push_back(merged);
    }
}

bool Adwin::cut_once() {
    if (width_ < 2 * kMinSubWindow || rows_.empty()) return false;
    const double n = static_cast<double>(width_);
    const double var = m2_ / n;
    const double log_term = std::log(2.0 * std::log(n) / delta_);

    double n0 = 0.0;
    double sum0 = 0.0;
    for (std::size_t r = rows_.size(); r-- > 0;) {
        const double size = std::ldexp(1.0, static_cast<int>(r));
        for (const auto& bucket : rows_[r]) {
            n0 += size;
            sum0 += bucket.total;
            const double n1 = n - n0;
            if (n1 < static_cast<double>(kMinSubWindow)) return false;
            if (n0 < static_cast<double>(kMinSubWindow)) continue;
            const double m = 1.0 / (1.0 / n0 + 1.0 / n1);
            const double eps = std::sqrt(2.0 * var * log_term / m) + 2.0 / (3.0 * m) * log_term;
            const double diff = std::fabs(sum0 / n0 - (total_ - sum0) / n1);
            if (diff > eps) {
                drop_oldest();
                return true;
            }
        }
    }
    return false;
}

void Adwin::drop_oldest() {
    while (!rows_.empty() && rows_.back().empty()) rows_.pop_back();
    if (rows_.empty()) return;
    const std::size_t r = rows_.size() - 1;
    const double n1 = std::ldexp(1.0, static_cast<int>(r));
    const Bucket oldest = rows_[r].front();
    rows_[r].pop_front();

    const double n = static_cast<double>(width_);
    const double n0 = n - n1;
    if (n0 <= 0.0) {
        reset();
        return;
    }
    const double mean1 = oldest.total / n1;
    const double mean0 = (total_ - oldest.total) / n0;
    const double d = mean0 - mean1;
    m2_ = std::max(0.0, m2_ - oldest.m2 - n0 * n1 / n * d * d);
    total_ -= oldest.total;
    width_ -= static_cast<std::size_t>(n1);
    while (!rows_.empty() && rows_.back().empty()) rows_.pop_back();
}

void Adwin::save(BinaryWriter& out) const {
    out.f64(delta_);
    out.size(max_buckets_);
    out.size(width_);
    out.f64(total_);
    out.f64(m2_);
    out.u64(clamped_);
    out.u64(detections_);
    out.size(rows_.size());
    for (const auto& row : rows_) {
        out.size(row.size());
        for (const auto& b : row) {
            out.f64(b.total);
            out.f64(b.m2);
        }
    }
}

Adwin Adwin::load(BinaryReader& in) {
    const double delta = in.f64();
    const std::size_t max_buckets = in.size();
    Adwin a(delta, max_buckets);
    a.width_ = in.size();
    a.total_ = in.f64();
    a.m2_ = in.f64();
    a.clamped_ = in.u64();
    a.detections_ = in.u64();
    a.rows_.resize(in.size());
    std::size_t counted = 0;
    for (std::size_t r = 0; r < a.rows_.size(); ++r) {
        const std::size_t nb = in.size();
        if (nb > max_buckets + 1) throw SnapshotError("adwin row overflow");
        for (std::size_t i = 0; i < nb; ++i) {
            Bucket b;
            b.total = in.f64();
            b.m2 = in.f64();
            a.rows_[r].push_back(b);
        }
        counted += nb << r;
    }
    if (counted != a.width_) throw SnapshotError("adwin width does not match its buckets");
    return a;
}

}  // namespace mlhat
