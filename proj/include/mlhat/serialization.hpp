#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian binary encoder used by model snapshots. Doubles are written
/// as their IEEE-754 bit patterns so round trips are exact.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    void boolean(bool v) { u8(v ? 1 : 0); }
    void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        size(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void f64s(const std::vector<double>& v) {
        size(v.size());
        for (double x : v) f64(x);
    }
    void u64s(const std::vector<std::uint64_t>& v) {
        size(v.size());
        for (auto x : v) u64(x);
    }

private:
    template <class T>
    void put_le(T v) {
        char buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
        out_.write(buf, sizeof(T));
    }
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le<std::uint8_t>()); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
    bool boolean() {
        const auto v = u8();
        if (v > 1) throw SnapshotError("corrupt boolean in snapshot");
        return v == 1;
    }
    std::size_t size() {
        const auto v = u64();
        if (v > (std::uint64_t{1} << 40)) throw SnapshotError("implausible length in snapshot");
        return static_cast<std::size_t>(v);
    }
    std::string str() {
        std::string s(size(), '\0');
        in_.read(s.data(), static_cast<std::streamsize>(s.size()));
        if (!in_) throw SnapshotError("truncated snapshot");
        return s;
    }
    std::vector<double> f64s() {
        std::vector<double> v(size());
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<std::uint64_t> u64s() {
        std::vector<std::uint64_t> v(size());
        for (auto& x : v) x = u64();
        return v;
    }

private:
    template <class T>
    T get_le() {
        unsigned char buf[sizeof(T)];
        in_.read(reinterpret_cast<char*>(buf), sizeof(T));
        if (!in_) throw SnapshotError("truncated snapshot");
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
        return v;
    }
    std::istream& in_;
};

inline void write_labelset(BinaryWriter& out, const LabelsetKey& key) {
    out.size(key.size());
    for (auto w : key.words()) out.u64(w);
}

inline LabelsetKey read_labelset(BinaryReader& in) {
    const std::size_t n = in.size();
    if (n > kMaxLabels) throw SnapshotError("labelset too large");
    std::vector<std::uint64_t> words((n + 63) / 64);
    for (auto& w : words) w = in.u64();
    try {
        return LabelsetKey::from_words(n, std::move(words));
    } catch (const SchemaError& e) {
        throw SnapshotError(e.what());
    }
}

inline void write_schema(BinaryWriter& out, const StreamSchema& schema) {
    out.size(schema.feature_count());
    for (std::size_t f = 0; f < schema.feature_count(); ++f) {
        out.u8(static_cast<std::uint8_t>(schema.feature_kinds[f]));
        out.str(schema.feature_names[f]);
        const auto& symbols = schema.symbols[f].symbols();
        out.size(symbols.size());
        for (const auto& s : symbols) out.str(s);
    }
    out.size(schema.label_count);
    for (const auto& name : schema.label_names) out.str(name);
}

inline StreamSchema read_schema(BinaryReader& in) {
    StreamSchema schema;
    const std::size_t features = in.size();
    schema.feature_kinds.resize(features);
    schema.feature_names.resize(features);
    schema.symbols.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
        const auto kind = in.u8();
        if (kind > 1) throw SnapshotError("unknown feature kind in snapshot");
        schema.feature_kinds[f] = static_cast<FeatureKind>(kind);
        schema.feature_names[f] = in.str();
        const std::size_t n = in.size();
        for (std::size_t i = 0; i < n; ++i) schema.symbols[f].intern(in.str());
    }
    schema.label_count = in.size();
    if (schema.label_count == 0 || schema.label_count > kMaxLabels) throw SnapshotError("bad label count in snapshot");
    schema.label_names.resize(schema.label_count);
    for (auto& name : schema.label_names) name = in.str();
    try {
        schema.finalize();
    } catch (const SchemaError& e) {
        throw SnapshotError(e.what());
    }
    return schema;
}

}  // namespace mlhat
