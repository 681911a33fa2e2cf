#include "ocov/csv.hpp"

#include "ocov/errors.hpp"

namespace ocov::csv {

namespace {
constexpr std::size_t kBufferSize = 1 << 20;
}

Reader::Reader(const std::filesystem::path& path, char delimiter)
    : file_(path), delim_(delimiter), buf_(new char[kBufferSize]) {}

bool Reader::fill() {
  if (eof_) return false;
  len_ = file_.read(buf_.get(), kBufferSize);
  pos_ = 0;
  if (len_ == 0) eof_ = true;
  return len_ != 0;
}

bool Reader::next(Row& row) {
  enum class State { FieldStart, Unquoted, Quoted, QuoteInQuoted };

  std::size_t nfields = 0;
  auto field = [&]() -> std::string& {
    if (nfields == row.size()) row.emplace_back();
    return row[nfields];
  };
  auto begin_field = [&]() { field().clear(); };
  auto end_field = [&]() { ++nfields; };

  for (;;) {
    State state = State::FieldStart;
    bool any = false;
    nfields = 0;
    record_line_ = line_;
    begin_field();

    for (;;) {
      if (pos_ == len_ && !fill()) {
        if (!any) {
          row.clear();
          return false;
        }
        end_field();
        row.resize(nfields);
        return true;
      }
      const char c = buf_[pos_++];
      if (state == State::Quoted) {
        if (c == '"') {
          state = State::QuoteInQuoted;
        } else {
          if (c == '\n') ++line_;
          field() += c;
        }
        continue;
      }
      if (c == '\r') continue;
      if (c == '\n') {
        ++line_;
        if (!any && state == State::FieldStart && nfields == 0) break;  // blank line
        end_field();
        row.resize(nfields);
        return true;
      }
      any = true;
      if (c == delim_) {
        end_field();
        begin_field();
        state = State::FieldStart;
        continue;
      }
      switch (state) {
        case State::FieldStart:
          if (c == '"') {
            state = State::Quoted;
          } else {
            field() += c;
            state = State::Unquoted;
          }
          break;
        case State::QuoteInQuoted:
          if (c == '"') {
            field() += '"';
            state = State::Quoted;
          } else {
            // Stray characters after a closing quote are kept verbatim.
            field() += c;
            state = State::Unquoted;
          }
          break;
        default:
          field() += c;
          break;
      }
    }
  }
}

Header::Header(Row names) : names_(std::move(names)) {
  if (!names_.empty() && names_[0].size() >= 3 && names_[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    names_[0].erase(0, 3);
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
}

std::optional<std::size_t> Header::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Header::require(std::string_view name, std::string_view source) const {
  auto i = find(name);
  if (!i) throw InputError(std::string(source) + ": missing column '" + std::string(name) + "'");
  return *i;
}

Header read_header(Reader& reader) {
  Row row;
  if (!reader.next(row)) throw InputError(reader.path().string() + ": empty file, expected a header row");
  return Header(std::move(row));
}

void append_field(std::string& out, std::string_view field, char delimiter) {
  bool quote = false;
  for (char c : field) {
    if (c == delimiter || c == '"' || c == '\n' || c == '\r') {
      quote = true;
      break;
    }
  }
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

Table read_table(const std::filesystem::path& path) {
  Reader reader(path);
  Table t;
  t.header = read_header(reader);
  Row row;
  while (reader.next(row)) t.rows.push_back(row);
  return t;
}

}  // namespace ocov::csv
