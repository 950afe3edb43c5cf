#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlhat/stream.hpp"

namespace mlhat {

class SyntheticStream;

enum class DatasetFormat : std::uint8_t { Native, Arff, Csv };

/// Which columns hold labels: the first or last `count`, or an explicit name list.
struct LabelSpec {
    enum class Kind : std::uint8_t { Unspecified, First, Last, Names } kind = Kind::Unspecified;
    std::size_t count = 0;
    std::vector<std::string> names;

    /// Parses "first:C", "last:C" or "names:a,b,c".
    static LabelSpec parse(const std::string& text);
};

struct DatasetSource {
    std::string path;
    std::optional<DatasetFormat> format;  // guessed from the extension when unset
    LabelSpec labels;
    bool csv_header = true;
    std::vector<std::string> force_categorical;  // CSV kind overrides
    std::vector<std::string> force_numeric;
    std::optional<std::uint64_t> shuffle_seed;
};

/// ".arff" -> Arff, ".csv" -> Csv, anything else -> Native.
DatasetFormat guess_format(const std::string& path);

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Line-oriented native format:
///
///   #% mlhat-stream 1
///   #% feature <name> numeric
///   #% feature <name> categorical <sym> <sym> ...
///   #% label <name>
///   #% meta <key> <value>
///   <f_1>,...,<f_n>,<y_1>,...,<y_L>
///
/// Numbers are written with 17 significant digits so loading is lossless.
class NativeStreamWriter {
public:
    NativeStreamWriter(const std::string& path, const StreamSchema& schema, const Metadata& meta = {});
    void write(const Instance& instance);
    void close();

private:
    std::ofstream out_;
    const StreamSchema& schema_;
    std::string path_;
};

/// Writes `stream` to `path` in the native format; returns the record count.
std::uint64_t write_native(const std::string& path, InstanceStream& stream, const Metadata& meta = {});

/// Materializes a generator into the native format with its metadata block.
std::uint64_t write_stream(SyntheticStream& generator, const std::string& path);

class FileStream : public InstanceStream {
public:
    const StreamSchema& schema() const override { return schema_; }
    const Metadata& metadata() const noexcept { return meta_; }

    /// Re-uses the symbol ids of `known` (same shape required) so that
    /// categorical ids line up with a model trained earlier.
    void adopt_symbols(const StreamSchema& known);

protected:
    StreamSchema schema_;
    Metadata meta_;
};

std::unique_ptr<FileStream> open_native(const std::string& path);
std::unique_ptr<FileStream> open_arff(const std::string& path, const LabelSpec& labels);
std::unique_ptr<FileStream> open_csv(const DatasetSource& source);

/// Opens any source; with a shuffle seed the records are loaded and permuted.
std::unique_ptr<InstanceStream> open_dataset(const DatasetSource& source, const StreamSchema* known = nullptr);

}  // namespace mlhat
