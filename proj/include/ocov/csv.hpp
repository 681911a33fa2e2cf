#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ocov/io.hpp"

namespace ocov::csv {

using Row = std::vector<std::string>;

/// Streaming RFC 4180 reader: quoted fields may hold delimiters, doubled
/// quotes and line breaks. Works on plain and gzip input alike; memory use
/// is one buffer plus the current record.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path, char delimiter = ',');

  /// Next record into `row`; false at end of input. Blank lines are skipped.
  bool next(Row& row);

  /// 1-based physical line where the last returned record started.
  std::size_t line() const { return record_line_; }
  const std::filesystem::path& path() const { return file_.path(); }

 private:
  bool fill();

  io::InputFile file_;
  char delim_;
  std::unique_ptr<char[]> buf_;
  std::size_t len_ = 0;
  std::size_t pos_ = 0;
  bool eof_ = false;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

/// Column lookup by header name.
class Header {
 public:
  Header() = default;
  explicit Header(Row names);

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws InputError naming `source` when the column is absent.
  std::size_t require(std::string_view name, std::string_view source) const;
  const Row& names() const { return names_; }

 private:
  Row names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads the header row; throws InputError on an empty file.
Header read_header(Reader& reader);

/// Cell `i` of `row`, or empty when the row is short.
inline std::string_view cell(const Row& row, std::size_t i) {
  return i < row.size() ? std::string_view(row[i]) : std::string_view{};
}

void append_field(std::string& out, std::string_view field, char delimiter = ',');

class Writer {
 public:
  explicit Writer(std::ostream& out, char delimiter = ',') : out_(out), delim_(delimiter) {}

  template <typename Range>
  void row(const Range& fields) {
    line_.clear();
    bool first = true;
    for (const auto& f : fields) {
      if (!first) line_ += delim_;
      first = false;
      append_field(line_, std::string_view(f), delim_);
    }
    line_ += '\n';
    out_ << line_;
  }

  void row(std::initializer_list<std::string_view> fields) { row<std::initializer_list<std::string_view>>(fields); }

 private:
  std::ostream& out_;
  char delim_;
  std::string line_;
};

/// Whole-file convenience for small tables: header plus rows.
struct Table {
  Header header;
  std::vector<Row> rows;
};
Table read_table(const std::filesystem::path& path);

}  // namespace ocov::csv
