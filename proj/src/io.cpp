#include "mlhat/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <deque>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mlhat/synth.hpp"

namespace mlhat {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool parse_double(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* begin = t.data();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Field {
    std::string text;
    bool quoted = false;
};

/// Splits on `sep` honouring single or double quotes; doubled quotes escape.
std::vector<Field> split_fields(const std::string& line, char sep, std::size_t line_no) {
    std::vector<Field> out;
    Field cur;
    std::size_t i = 0;
    bool any = false;
    while (i <= line.size()) {
        // skip leading blanks of a field
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        cur = Field{};
        if (i < line.size() && (line[i] == '"' || line[i] == '\'')) {
            const char q = line[i++];
            cur.quoted = true;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == q) {
                    if (i + 1 < line.size() && line[i + 1] == q) {
                        cur.text += q;
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                if (line[i] == '\\' && i + 1 < line.size()) ++i;
                cur.text += line[i++];
            }
            if (!closed) throw ParseError(line_no, "line " + std::to_string(line_no) + ": unterminated quote");
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            if (i < line.size() && line[i] != sep) {
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": text after closing quote");
            }
        } else {
            const std::size_t start = i;
            while (i < line.size() && line[i] != sep) ++i;
            cur.text = trim(line.substr(start, i - start));
        }
        out.push_back(std::move(cur));
        any = true;
        if (i >= line.size()) break;
        ++i;  // separator
        if (i == line.size()) {
            out.push_back(Field{});
            break;
        }
    }
    if (!any) out.push_back(Field{});
    return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw ParseError(line, "line " + std::to_string(line) + ": " + what);
}

/// 0 or 1, or -1 when the text is not a binary label.
int label_value(const Field& f) {
    const std::string t = trim(f.text);
    double v = 0.0;
    if (t == "0" || (parse_double(t, v) && v == 0.0)) return 0;
    if (t == "1" || (parse_double(t, v) && v == 1.0)) return 1;
    return -1;
}

bool plain_token(const std::string& s) {
    if (s.empty()) return false;
    return std::none_of(s.begin(), s.end(), [](char c) {
        return c == ',' || c == '\n' || c == '\r' || std::isspace(static_cast<unsigned char>(c));
    });
}

/// Resolves label positions among `count` columns named `names`.
std::vector<bool> resolve_labels(const LabelSpec& spec, const std::vector<std::string>& names,
                                 std::optional<long> meka_c) {
    const std::size_t n = names.size();
    std::vector<bool> is_label(n, false);
    LabelSpec s = spec;
    if (s.kind == LabelSpec::Kind::Unspecified) {
        if (!meka_c || *meka_c == 0) {
            throw SchemaError("label columns not specified (use --labels first:C, last:C or names:...)");
        }
        s.kind = *meka_c > 0 ? LabelSpec::Kind::First : LabelSpec::Kind::Last;
        s.count = static_cast<std::size_t>(*meka_c > 0 ? *meka_c : -*meka_c);
    }
    switch (s.kind) {
        case LabelSpec::Kind::First:
        case LabelSpec::Kind::Last:
            if (s.count == 0 || s.count >= n) {
                throw SchemaError("label count " + std::to_string(s.count) + " leaves no feature among " +
                                  std::to_string(n) + " columns");
            }
            for (std::size_t i = 0; i < s.count; ++i) {
                is_label[s.kind == LabelSpec::Kind::First ? i : n - 1 - i] = true;
            }
            break;
        case LabelSpec::Kind::Names:
            for (const auto& name : s.names) {
                auto it = std::find(names.begin(), names.end(), name);
                if (it == names.end()) throw SchemaError("label column '" + name + "' not found");
                is_label[static_cast<std::size_t>(it - names.begin())] = true;
            }
            if (std::count(is_label.begin(), is_label.end(), false) == 0) throw SchemaError("no feature columns left");
            break;
        case LabelSpec::Kind::Unspecified: break;
    }
    return is_label;
}

}  // namespace

LabelSpec LabelSpec::parse(const std::string& text) {
    LabelSpec s;
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("label spec must look like first:C, last:C or names:a,b");
    const std::string kind = lower(text.substr(0, colon));
    const std::string rest = text.substr(colon + 1);
    if (kind == "first" || kind == "last") {
        s.kind = kind == "first" ? Kind::First : Kind::Last;
        std::size_t c = 0;
        const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), c);
        if (ec != std::errc() || ptr != rest.data() + rest.size() || c == 0) {
            throw std::invalid_argument("label count must be a positive integer: '" + rest + "'");
        }
        s.count = c;
    } else if (kind == "names") {
        s.kind = Kind::Names;
        std::size_t start = 0;
        while (start <= rest.size()) {
            const auto comma = rest.find(',', start);
            const auto name = trim(rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (!name.empty()) s.names.push_back(name);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (s.names.empty()) throw std::invalid_argument("names: label spec lists no names");
    } else {
        throw std::invalid_argument("unknown label spec kind '" + kind + "'");
    }
    return s;
}

DatasetFormat guess_format(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : lower(path.substr(dot + 1));
    if (ext == "arff") return DatasetFormat::Arff;
    if (ext == "csv") return DatasetFormat::Csv;
    return DatasetFormat::Native;
}

// ---------------------------------------------------------------------------
// Native format

NativeStreamWriter::NativeStreamWriter(const std::string& path, const StreamSchema& schema, const Metadata& meta)
    : out_(path, std::ios::binary | std::ios::trunc), schema_(schema), path_(path) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    out_ << "#% mlhat-stream 1\n";
    for (const auto& [key, value] : meta) {
        if (!plain_token(key)) throw SchemaError("metadata key '" + key + "' is not a plain token");
        if (value.find('\n') != std::string::npos) throw SchemaError("metadata value spans lines");
        out_ << "#% meta " << key << ' ' << value << '\n';
    }
    for (std::size_t f = 0; f < schema.feature_count(); ++f) {
        if (!plain_token(schema.feature_names[f])) {
            throw SchemaError("feature name '" + schema.feature_names[f] + "' is not a plain token");
        }
        out_ << "#% feature " << schema.feature_names[f];
        if (schema.is_categorical(f)) {
            out_ << " categorical";
            for (const auto& s : schema.symbols[f].symbols()) {
                if (!plain_token(s)) throw SchemaError("symbol '" + s + "' is not a plain token");
                out_ << ' ' << s;
            }
        } else {
            out_ << " numeric";
        }
        out_ << '\n';
    }
    for (const auto& name : schema.label_names) {
        if (!plain_token(name)) throw SchemaError("label name '" + name + "' is not a plain token");
        out_ << "#% label " << name << '\n';
    }
}

void NativeStreamWriter::write(const Instance& instance) {
    validate_instance(instance, schema_);
    if (!instance.labels) throw SchemaError("native records need labels");
    std::string line;
    for (std::size_t f = 0; f < instance.features.size(); ++f) {
        if (f) line += ',';
        if (schema_.is_categorical(f)) {
            const auto& sym = schema_.symbols[f].symbol(static_cast<std::size_t>(instance.features[f]));
            if (!plain_token(sym)) throw SchemaError("symbol '" + sym + "' is not a plain token");
            line += sym;
        } else {
            line += format_double(instance.features[f]);
        }
    }
    for (std::size_t l = 0; l < schema_.label_count; ++l) {
        line += ',';
        line += instance.y().test(l) ? '1' : '0';
    }
    line += '\n';
    out_ << line;
}

void NativeStreamWriter::close() {
    out_.flush();
    if (!out_) throw std::runtime_error("failed writing '" + path_ + "'");
    out_.close();
}

std::uint64_t write_native(const std::string& path, InstanceStream& stream, const Metadata& meta) {
    // Symbols may be discovered while streaming, so buffer when the schema can still grow.
    std::vector<Instance> records;
    while (auto inst = stream.next()) records.push_back(std::move(*inst));
    NativeStreamWriter w(path, stream.schema(), meta);
    for (const auto& r : records) w.write(r);
    w.close();
    return records.size();
}

std::uint64_t write_stream(SyntheticStream& generator, const std::string& path) {
    NativeStreamWriter w(path, generator.schema(), generator.metadata());
    std::uint64_t n = 0;
    while (auto inst = generator.next()) {
        w.write(*inst);
        ++n;
    }
    w.close();
    return n;
}

void FileStream::adopt_symbols(const StreamSchema& known) {
    if (!known.same_shape(schema_)) throw SchemaError("dataset schema does not match the model's schema");
    for (std::size_t f = 0; f < schema_.feature_count(); ++f) {
        if (!schema_.is_categorical(f)) continue;
        SymbolTable merged = known.symbols[f];
        for (const auto& s : schema_.symbols[f].symbols()) merged.intern(s);
        schema_.symbols[f] = std::move(merged);
    }
}

namespace {

class NativeStream final : public FileStream {
public:
    explicit NativeStream(const std::string& path) : in_(path) {
        if (!in_) throw std::runtime_error("cannot open '" + path + "'");
        std::vector<FeatureKind> kinds;
        std::vector<std::string> names, label_names;
        std::vector<std::vector<std::string>> symbols;
        bool saw_magic = false;
        std::string line;
        while (true) {
            const std::streampos pos = in_.tellg();
            if (!std::getline(in_, line)) break;
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.rfind("#%", 0) != 0) {
                if (line.empty() || line[0] == '#') continue;
                in_.seekg(pos);  // first record: leave it for next()
                --line_;
                break;
            }
            std::vector<std::string> tok;
            std::size_t i = 2;
            while (i < line.size()) {
                while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
                const std::size_t start = i;
                while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
                if (i > start) tok.push_back(line.substr(start, i - start));
            }
            if (tok.empty()) continue;
            if (tok[0] == "mlhat-stream") {
                if (tok.size() < 2 || tok[1] != "1") fail(line_, "unsupported stream format version");
                saw_magic = true;
            } else if (tok[0] == "meta") {
                if (tok.size() < 2) fail(line_, "meta line needs a key");
                const auto key_pos = line.find(tok[1], line.find("meta") + 4);
                std::string value = key_pos + tok[1].size() < line.size() ? line.substr(key_pos + tok[1].size() + 1) : "";
                meta_.emplace_back(tok[1], value);
            } else if (tok[0] == "feature") {
                if (tok.size() < 3) fail(line_, "feature line needs a name and a kind");
                names.push_back(tok[1]);
                if (tok[2] == "numeric") {
                    kinds.push_back(FeatureKind::Numerical);
                    symbols.emplace_back();
                } else if (tok[2] == "categorical") {
                    kinds.push_back(FeatureKind::Categorical);
                    symbols.emplace_back(tok.begin() + 3, tok.end());
                } else {
                    fail(line_, "unknown feature kind '" + tok[2] + "'");
                }
            } else if (tok[0] == "label") {
                if (tok.size() < 2) fail(line_, "label line needs a name");
                label_names.push_back(tok[1]);
            } else {
                fail(line_, "unknown header entry '" + tok[0] + "'");
            }
        }
        if (!saw_magic) throw ParseError(1, "line 1: not a native mlhat stream (missing '#% mlhat-stream 1')");
        if (label_names.empty()) fail(line_, "stream header declares no labels");
        schema_ = StreamSchema(kinds, label_names.size());
        schema_.feature_names = names;
        schema_.label_names = label_names;
        for (std::size_t f = 0; f < kinds.size(); ++f) {
            for (const auto& s : symbols[f]) schema_.symbols[f].intern(s);
        }
    }

    std::optional<Instance> next() override {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            ++record_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') {
                --record_;
                continue;
            }
            const auto fields = split_fields(line, ',', line_);
            const std::size_t F = schema_.feature_count();
            const std::size_t L = schema_.label_count;
            if (fields.size() != F + L) {
                throw ParseError(record_, "line " + std::to_string(line_) + ": expected " + std::to_string(F + L) +
                                              " fields, found " + std::to_string(fields.size()));
            }
            RawInstance raw;
            raw.features.reserve(F);
            for (std::size_t f = 0; f < F; ++f) {
                if (fields[f].text == "?") throw ParseError(record_, "line " + std::to_string(line_) + ": missing value");
                if (schema_.is_categorical(f)) {
                    raw.features.emplace_back(fields[f].text);
                } else {
                    double v = 0.0;
                    if (!parse_double(fields[f].text, v)) {
                        throw ParseError(record_, "line " + std::to_string(line_) + ": '" + fields[f].text +
                                                      "' is not a number");
                    }
                    raw.features.emplace_back(v);
                }
            }
            std::vector<std::uint8_t> labels(L);
            for (std::size_t l = 0; l < L; ++l) {
                const int v = label_value(fields[F + l]);
                if (v < 0) {
                    throw ParseError(record_, "line " + std::to_string(line_) + ": label value '" +
                                                  fields[F + l].text + "' is not binary (0/1)");
                }
                labels[l] = static_cast<std::uint8_t>(v);
            }
            raw.labels = std::move(labels);
            try {
                return intern_instance(raw, schema_);
            } catch (const SchemaError& e) {
                throw ParseError(record_, "line " + std::to_string(line_) + ": " + e.what());
            }
        }
        if (in_.bad()) throw ParseError(record_ + 1, "read error");
        return std::nullopt;
    }

private:
    std::ifstream in_;
    std::size_t line_ = 0;
    std::size_t record_ = 0;
};

// ---------------------------------------------------------------------------
// ARFF

struct ArffAttribute {
    std::string name;
    bool nominal = false;
    std::vector<std::string> values;
};

/// Reads one token (possibly quoted) starting at `i`; advances `i`.
std::string arff_token(const std::string& s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) return {};
    if (s[i] == '\'' || s[i] == '"') {
        const char q = s[i++];
        std::string out;
        while (i < s.size() && s[i] != q) {
            if (s[i] == '\\' && i + 1 < s.size()) ++i;
            out += s[i++];
        }
        if (i < s.size()) ++i;
        return out;
    }
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '{') ++i;
    return s.substr(start, i - start);
}

class ArffStream final : public FileStream {
public:
    ArffStream(const std::string& path, const LabelSpec& spec) : in_(path) {
        if (!in_) throw std::runtime_error("cannot open '" + path + "'");
        std::optional<long> meka_c;
        std::string line;
        bool in_data = false;
        while (!in_data && std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string t = trim(line);
            if (t.empty() || t[0] == '%') continue;
            const std::string head = lower(t.substr(0, t.find_first_of(" \t")));
            std::size_t i = head.size();
            if (head == "@relation") {
                const std::string rel = arff_token(t, i);
                const auto c = rel.find("-C ");
                if (c != std::string::npos) {
                    long v = 0;
                    std::size_t j = c + 3;
                    while (j < rel.size() && rel[j] == ' ') ++j;
                    const auto [ptr, ec] = std::from_chars(rel.data() + j, rel.data() + rel.size(), v);
                    if (ec == std::errc()) meka_c = v;
                    (void)ptr;
                }
            } else if (head == "@attribute") {
                ArffAttribute a;
                a.name = arff_token(t, i);
                if (a.name.empty()) fail(line_, "attribute without a name");
                while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
                if (i < t.size() && t[i] == '{') {
                    const auto close = t.find('}', i);
                    if (close == std::string::npos) fail(line_, "unterminated nominal value list");
                    for (auto& f : split_fields(t.substr(i + 1, close - i - 1), ',', line_)) {
                        if (!f.text.empty()) a.values.push_back(f.text);
                    }
                    a.nominal = true;
                } else {
                    const std::string type = lower(arff_token(t, i));
                    if (type == "numeric" || type == "real" || type == "integer") {
                        a.nominal = false;
                    } else if (type == "string") {
                        a.nominal = true;
                    } else {
                        fail(line_, "unsupported attribute type '" + type + "'");
                    }
                }
                attrs_.push_back(std::move(a));
            } else if (head == "@data") {
                in_data = true;
            } else {
                fail(line_, "unexpected header line '" + t + "'");
            }
        }
        if (!in_data) fail(line_, "missing @data section");
        if (attrs_.empty()) fail(line_, "no attributes declared");

        std::vector<std::string> names;
        for (const auto& a : attrs_) names.push_back(a.name);
        is_label_ = resolve_labels(spec, names, meka_c);
        std::vector<FeatureKind> kinds;
        std::vector<std::string> fnames, lnames;
        for (std::size_t c = 0; c < attrs_.size(); ++c) {
            if (is_label_[c]) {
                const auto& a = attrs_[c];
                if (a.nominal) {
                    for (const auto& v : a.values) {
                        if (v != "0" && v != "1") {
                            fail(line_, "label attribute '" + a.name + "' declares non-binary value '" + v + "'");
                        }
                    }
                }
                lnames.push_back(a.name);
            } else {
                column_of_feature_.push_back(c);
                kinds.push_back(attrs_[c].nominal ? FeatureKind::Categorical : FeatureKind::Numerical);
                fnames.push_back(attrs_[c].name);
            }
        }
        schema_ = StreamSchema(kinds, lnames.size());
        schema_.feature_names = fnames;
        schema_.label_names = lnames;
        for (std::size_t f = 0; f < kinds.size(); ++f) {
            for (const auto& v : attrs_[column_of_feature_[f]].values) schema_.symbols[f].intern(v);
        }
    }

    std::optional<Instance> next() override {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const std::string t = trim(line);
            if (t.empty() || t[0] == '%') continue;
            ++record_;
            std::vector<Field> values(attrs_.size());
            if (t[0] == '{') {
                if (t.back() != '}') err("unterminated sparse instance");
                for (std::size_t c = 0; c < attrs_.size(); ++c) {
                    values[c].text = attrs_[c].nominal && !attrs_[c].values.empty() ? attrs_[c].values[0] : "0";
                }
                const std::string body = t.substr(1, t.size() - 2);
                if (!trim(body).empty()) {
                    for (const auto& pair : split_fields(body, ',', line_)) {
                        std::size_t i = 0;
                        const std::string idx = arff_token(pair.text, i);
                        std::size_t col = 0;
                        const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), col);
                        if (ec != std::errc() || ptr != idx.data() + idx.size() || col >= attrs_.size()) {
                            err("bad sparse index '" + idx + "'");
                        }
                        std::string v = trim(pair.text.substr(i));
                        if (v.size() >= 2 && (v.front() == '\'' || v.front() == '"') && v.back() == v.front()) {
                            v = v.substr(1, v.size() - 2);
                        }
                        values[col].text = v;
                    }
                }
            } else {
                values = split_fields(t, ',', line_);
                if (values.size() != attrs_.size()) {
                    err("expected " + std::to_string(attrs_.size()) + " values, found " + std::to_string(values.size()));
                }
            }
            return build(values);
        }
        if (in_.bad()) throw ParseError(record_ + 1, "read error");
        return std::nullopt;
    }

private:
    [[noreturn]] void err(const std::string& what) const {
        throw ParseError(record_, "line " + std::to_string(line_) + ": " + what);
    }

    Instance build(const std::vector<Field>& values) {
        RawInstance raw;
        std::vector<std::uint8_t> labels;
        for (std::size_t c = 0; c < attrs_.size(); ++c) {
            const auto& v = values[c];
            if (!v.quoted && trim(v.text) == "?") err("missing value for attribute '" + attrs_[c].name + "'");
            if (is_label_[c]) {
                const int b = label_value(v);
                if (b < 0) err("label '" + attrs_[c].name + "' has non-binary value '" + trim(v.text) + "'");
                labels.push_back(static_cast<std::uint8_t>(b));
            } else if (attrs_[c].nominal) {
                raw.features.emplace_back(v.text);
            } else {
                double d = 0.0;
                if (!parse_double(v.text, d)) err("'" + v.text + "' is not a number");
                raw.features.emplace_back(d);
            }
        }
        raw.labels = std::move(labels);
        try {
            return intern_instance(raw, schema_);
        } catch (const SchemaError& e) {
            err(e.what());
        }
    }

    std::ifstream in_;
    std::size_t line_ = 0;
    std::size_t record_ = 0;
    std::vector<ArffAttribute> attrs_;
    std::vector<bool> is_label_;
    std::vector<std::size_t> column_of_feature_;
};

// ---------------------------------------------------------------------------
// CSV

class CsvStream final : public FileStream {
public:
    static constexpr std::size_t kInferenceRows = 100;

    explicit CsvStream(const DatasetSource& src) : in_(src.path) {
        if (!in_) throw std::runtime_error("cannot open '" + src.path + "'");
        std::vector<std::string> names;
        if (src.csv_header) {
            std::string line;
            while (std::getline(in_, line)) {
                ++line_;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (trim(line).empty()) continue;
                for (auto& f : split_fields(line, ',', line_)) names.push_back(f.text);
                break;
            }
            if (names.empty()) throw ParseError(1, "line 1: empty CSV file (no header)");
        }
        // Buffer the first rows to infer which columns are numeric.
        while (buffer_.size() < kInferenceRows) {
            auto row = read_row();
            if (!row) break;
            if (names.empty()) {
                for (std::size_t c = 0; c < row->fields.size(); ++c) names.push_back("c" + std::to_string(c));
            }
            if (row->fields.size() != names.size()) ragged(*row, names.size());
            buffer_.push_back(std::move(*row));
        }
        columns_ = names.size();
        if (columns_ == 0) throw ParseError(1, "line 1: CSV file has no columns");
        if (src.labels.kind == LabelSpec::Kind::Names && !src.csv_header) {
            throw SchemaError("names: label spec needs a CSV header");
        }
        is_label_ = resolve_labels(src.labels, names, std::nullopt);

        std::vector<FeatureKind> kinds;
        std::vector<std::string> fnames, lnames;
        auto listed = [](const std::vector<std::string>& list, const std::string& name) {
            return std::find(list.begin(), list.end(), name) != list.end();
        };
        for (std::size_t c = 0; c < columns_; ++c) {
            if (is_label_[c]) {
                lnames.push_back(names[c]);
                continue;
            }
            bool numeric = true;
            for (const auto& row : buffer_) {
                double d = 0.0;
                const auto& f = row.fields[c];
                if (f.quoted || !parse_double(f.text, d)) {
                    numeric = false;
                    break;
                }
            }
            if (listed(src.force_categorical, names[c])) numeric = false;
            if (listed(src.force_numeric, names[c])) numeric = true;
            kinds.push_back(numeric ? FeatureKind::Numerical : FeatureKind::Categorical);
            fnames.push_back(names[c]);
        }
        for (const auto& n : src.force_categorical) {
            if (!listed(names, n)) throw SchemaError("--categorical names unknown column '" + n + "'");
        }
        for (const auto& n : src.force_numeric) {
            if (!listed(names, n)) throw SchemaError("--numeric names unknown column '" + n + "'");
        }
        schema_ = StreamSchema(kinds, lnames.size());
        schema_.feature_names = fnames;
        schema_.label_names = lnames;
    }

    std::optional<Instance> next() override {
        Row row;
        if (!buffer_.empty()) {
            row = std::move(buffer_.front());
            buffer_.pop_front();
        } else {
            auto r = read_row();
            if (!r) return std::nullopt;
            row = std::move(*r);
            if (row.fields.size() != columns_) ragged(row, columns_);
        }
        ++record_;
        RawInstance raw;
        std::vector<std::uint8_t> labels;
        std::size_t f = 0;
        for (std::size_t c = 0; c < columns_; ++c) {
            const auto& field = row.fields[c];
            if (!field.quoted && field.text == "?") err(row, "missing value in column " + std::to_string(c));
            if (is_label_[c]) {
                const int b = label_value(field);
                if (b < 0) err(row, "label value '" + field.text + "' is not binary (0/1)");
                labels.push_back(static_cast<std::uint8_t>(b));
                continue;
            }
            if (schema_.is_categorical(f)) {
                raw.features.emplace_back(field.text);
            } else {
                double d = 0.0;
                if (field.quoted || !parse_double(field.text, d)) err(row, "'" + field.text + "' is not a number");
                raw.features.emplace_back(d);
            }
            ++f;
        }
        raw.labels = std::move(labels);
        try {
            return intern_instance(raw, schema_);
        } catch (const SchemaError& e) {
            err(row, e.what());
        }
    }

private:
    struct Row {
        std::vector<Field> fields;
        std::size_t line = 0;
        std::size_t index = 0;  // data row index, 1-based
    };

    std::optional<Row> read_row() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            Row r;
            r.fields = split_fields(line, ',', line_);
            r.line = line_;
            r.index = ++rows_read_;
            return r;
        }
        if (in_.bad()) throw ParseError(rows_read_ + 1, "read error");
        return std::nullopt;
    }

    [[noreturn]] void ragged(const Row& row, std::size_t expected) const {
        throw ParseError(row.index, "row " + std::to_string(row.index) + " (line " + std::to_string(row.line) +
                                        "): expected " + std::to_string(expected) + " fields, found " +
                                        std::to_string(row.fields.size()));
    }

    [[noreturn]] void err(const Row& row, const std::string& what) const {
        throw ParseError(row.index,
                         "row " + std::to_string(row.index) + " (line " + std::to_string(row.line) + "): " + what);
    }

    std::ifstream in_;
    std::size_t line_ = 0;
    std::size_t rows_read_ = 0;
    std::size_t record_ = 0;
    std::size_t columns_ = 0;
    std::deque<Row> buffer_;
    std::vector<bool> is_label_;
};

}  // namespace

std::unique_ptr<FileStream> open_native(const std::string& path) { return std::make_unique<NativeStream>(path); }

std::unique_ptr<FileStream> open_arff(const std::string& path, const LabelSpec& labels) {
    return std::make_unique<ArffStream>(path, labels);
}

std::unique_ptr<FileStream> open_csv(const DatasetSource& source) { return std::make_unique<CsvStream>(source); }

std::unique_ptr<InstanceStream> open_dataset(const DatasetSource& source, const StreamSchema* known) {
    const auto format = source.format.value_or(guess_format(source.path));
    std::unique_ptr<FileStream> file;
    switch (format) {
        case DatasetFormat::Native: file = open_native(source.path); break;
        case DatasetFormat::Arff: file = open_arff(source.path, source.labels); break;
        case DatasetFormat::Csv: file = open_csv(source); break;
    }
    if (known) file->adopt_symbols(*known);
    if (!source.shuffle_seed) return file;

    auto records = collect(*file);
    std::mt19937_64 rng(*source.shuffle_seed);
    std::shuffle(records.begin(), records.end(), rng);
    return std::make_unique<VectorStream>(file->schema(), std::move(records));
}

}  // namespace mlhat
