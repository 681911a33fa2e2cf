#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocov/pid.hpp"

namespace ocov::iris {

/// One CRIS bibliographic entry joined from the dump files.
struct Record {
  std::string item_id;
  std::optional<std::string> title;
  std::optional<std::string> pub_date;  // raw cell
  std::optional<int> pub_year;          // plausible year parsed from pub_date
  std::string iris_type;                // "1.01 Journal article"; empty when unknown
  std::vector<pid::RawIdentifier> identifiers;
  std::map<std::string, std::string> aux;  // language, publisher, venue, author_count, authors, editors
};

enum class FileRole { Master, Identifier, Description, Language, Publisher, Relation, Person };

std::string_view role_name(FileRole r);

struct FileMapping {
  FileRole role;
  std::string file;
  bool required = false;
  /// canonical field -> source column header
  std::vector<std::pair<std::string, std::string>> columns;

  const std::string* column(std::string_view canonical) const;
};

/// Declarative mapping from one institution's export to the canonical schema.
///
/// Canonical fields: item_id, title, pub_date, iris_type, the identifier
/// columns doi / pmid / isbn (wide layout) or id_scheme + id_value (long
/// layout), and the auxiliary fields language, publisher, venue,
/// author_count, authors, editors.
struct DumpAdapter {
  std::vector<FileMapping> files;
  char delimiter = ',';

  const FileMapping* find(FileRole role) const;

  /// Throws ConfigError on unknown roles or fields, and on a canonical field
  /// mapped twice within one file.
  static DumpAdapter from_json(const std::string& json_text);
  static DumpAdapter load(const std::filesystem::path& path);
};

struct IngestOptions {
  int min_year = 1000;
  int max_year = 9999;  // callers set this to the current year + 1
};

struct IngestStats {
  std::uint64_t total_records = 0;
  std::uint64_t skipped_missing_id = 0;
  std::uint64_t duplicate_master_rows = 0;
  std::uint64_t orphan_rows = 0;  // secondary-file rows whose item is not in the master file
  std::uint64_t ignored_identifiers = 0;  // other schemes in long-layout identifier files
  std::map<std::string, std::uint64_t> rows_per_file;
  std::vector<std::string> warnings;
};

struct IngestResult {
  std::vector<Record> records;  // master-file order
  IngestStats stats;
};

IngestResult load_iris_dump(const std::filesystem::path& directory, const DumpAdapter& adapter,
                            const IngestOptions& opts = {});

struct Partition {
  std::vector<Record> with_pid;
  std::vector<Record> no_pid;
};

Partition partition_by_pid(const std::vector<Record>& records);

inline const std::vector<std::string>& default_completeness_fields() {
  static const std::vector<std::string> fields = {"title",     "pub_year", "iris_type", "venue",
                                                  "publisher", "language", "author_count"};
  return fields;
}

bool has_field(const Record& r, std::string_view field);
int completeness_score(const Record& r, const std::vector<std::string>& fields = default_completeness_fields());

struct YearHistogram {
  std::map<int, std::uint64_t> by_year;
  std::uint64_t unknown = 0;
  std::uint64_t before_range = 0;  // plausible years earlier than from_year
};

YearHistogram year_histogram(const std::vector<std::optional<int>>& years, int from_year);
YearHistogram year_histogram(const std::vector<Record>& records, int from_year);

// Persisted datasets.

inline constexpr std::string_view kCandidatesHeader[] = {"item_id", "scheme",  "raw_value",   "title",
                                                         "pub_year", "iris_type", "completeness"};
inline constexpr std::string_view kNoIdHeader[] = {"item_id", "title", "pub_year", "iris_type", "completeness",
                                                   "authors"};

void write_candidates(std::ostream& out, const std::vector<Record>& with_pid, const std::vector<std::string>& fields);
void write_no_id(std::ostream& out, const std::vector<Record>& no_pid, const std::vector<std::string>& fields);

/// Records reconstructed from a persisted dataset; aux fields other than
/// authors are not carried by the datasets.
struct Dataset {
  std::vector<Record> records;
  std::unordered_map<std::string, int> completeness;
};

Dataset read_candidates(const std::filesystem::path& path);
Dataset read_no_id(const std::filesystem::path& path);

}  // namespace ocov::iris
