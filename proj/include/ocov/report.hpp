#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ocov/dedup.hpp"
#include "ocov/iris_ingest.hpp"
#include "ocov/oc_match.hpp"

namespace ocov::report {

inline constexpr std::string_view kNoTypeSpecified = "no type specified";

/// CRIS type -> OC Meta type, keyed by type code.
class TypeMapping {
 public:
  /// CSV with columns iris_type, oc_meta_type. A code mapped to two
  /// different Meta types is a ConfigError.
  static TypeMapping load(const std::filesystem::path& path);
  void add(std::string_view iris_type, std::string_view oc_meta_type);
  /// Lowercased Meta type, or "no type specified" when the code is unmapped.
  std::string expected(std::string_view iris_type) const;
  const std::map<std::string, std::string>& entries() const { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

/// Original-language CRIS type names and their English renderings.
class TypeLabels {
 public:
  /// CSV with columns iris_type_it, iris_type_en.
  static TypeLabels load(const std::filesystem::path& path);
  void add(std::string_view original, std::string_view english);
  /// English label for the type's code, or the input when unknown.
  std::string english(std::string_view iris_type) const;

 private:
  std::map<std::string, std::string> en_;
};

struct CoverageRow {
  std::string iris_type;
  std::uint64_t iris_count = 0;
  std::uint64_t meta_count = 0;
  std::string percent;
};

/// Groups by type code; sorted by coverage descending, then iris_count
/// descending, then type.
std::vector<CoverageRow> coverage_by_type(const std::vector<dedup::UniqueRow>& unique,
                                          const std::vector<match::MatchRow>& in_meta, const TypeLabels* labels = nullptr);

struct MismatchCell {
  std::string iris_type;
  std::string expected;
  std::string observed;
  std::uint64_t count = 0;
};

struct Alignment {
  std::uint64_t coherent = 0;
  std::uint64_t mismatched = 0;
  std::vector<MismatchCell> matrix;  // count descending, then iris_type, observed
};

/// Only rows that carry a Meta type take part.
Alignment type_mismatch_matrix(const std::vector<match::MatchRow>& in_meta, const TypeMapping& mapping,
                               const TypeLabels* labels = nullptr);

struct ExternalCounts {
  std::string source;
  std::map<std::string, std::uint64_t> counts;  // item_id -> citations
};

/// CSV with columns item_id, count. Negative or non-numeric counts are an InputError.
ExternalCounts load_external_counts(std::string source, const std::filesystem::path& path);

struct ComparisonRow {
  std::string source;
  std::uint64_t brs_in_source = 0;
  std::uint64_t citations = 0;
  std::string ratio;
};

/// The OpenCitations row uses every in-Meta BR and the incoming counts of
/// the scan; external rows count every known item with a count present,
/// zero included. Unknown item ids are skipped and reported in `warnings`.
std::vector<ComparisonRow> citation_comparison(std::uint64_t oc_brs,
                                               const std::map<std::string, std::uint64_t>& incoming_counts,
                                               const std::vector<ExternalCounts>& externals,
                                               const std::set<std::string>& known_item_ids,
                                               std::vector<std::string>* warnings = nullptr);

/// n most frequent types, ties broken by type code.
std::vector<std::pair<std::string, std::uint64_t>> top_types(const std::vector<std::string>& iris_types, std::size_t n,
                                                             const TypeLabels* labels = nullptr);

/// year,count from the first year to the last year present, gaps as zero.
void write_year_histogram(std::ostream& out, const iris::YearHistogram& h);

struct ExternalSource {
  std::string source;
  std::filesystem::path path;
};

struct ReportConfig {
  std::filesystem::path type_mapping;
  std::filesystem::path type_labels;
  std::vector<ExternalSource> externals;
  int from_year = 1953;
  std::size_t top_n = 5;
};

struct RenderResult {
  std::map<std::string, bool> sections;  // section -> rendered (false = not run)
  std::vector<std::string> warnings;
};

/// Reads the persisted stage outputs under `run_dir` and writes
/// `out_dir/*.csv` and `out_dir/summary.md`.
RenderResult render_reports(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir,
                            const ReportConfig& config);

/// "145,143 (70.8% of deduplicated, 36.1% of dump)"
std::string headline(std::uint64_t in_meta, std::uint64_t unique, std::uint64_t dump_total);

}  // namespace ocov::report
