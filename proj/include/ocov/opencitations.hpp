#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocov/csv.hpp"

namespace ocov::oc {

/// OpenCitations Meta identifier, `<entity type>/<numeral>`, e.g. br/061602192186.
/// The numeral (supplier prefix + sequence) is kept as a digit string and
/// never assumed to fit a fixed-width integer.
struct Omid {
  std::string entity_type;
  std::string numeral;

  std::string str() const { return entity_type + "/" + numeral; }
  /// Supplier prefix (`0[1-9]+0`) when the numeral follows that convention.
  std::optional<std::string> supplier_prefix() const;

  bool operator==(const Omid&) const = default;
  auto operator<=>(const Omid&) const = default;
};

/// Accepts "br/0601" or "omid:br/0601".
std::optional<Omid> parse_omid(std::string_view s);

/// Open Citation Identifier, `oci:<citing numeral>-<cited numeral>`.
struct Oci {
  std::string citing;
  std::string cited;
};

std::optional<Oci> parse_oci(std::string_view s);

/// xsd:duration restricted to the PnYnMnD shape (optionally negative).
struct Timespan {
  bool negative = false;
  int years = 0;
  int months = 0;
  int days = 0;

  bool operator==(const Timespan&) const = default;
};

std::optional<Timespan> parse_timespan(std::string_view s);

inline constexpr std::array<std::string_view, 11> kMetaColumns = {
    "id", "title", "author", "issue", "volume", "venue", "page", "pub_date", "type", "publisher", "editor"};

struct MetaRecord {
  Omid omid;
  std::vector<std::string> external_ids;  // doi:/pmid:/isbn: tokens only
  std::optional<std::string> title, author, issue, volume, venue, page, pub_date, type, publisher, editor;
  std::optional<int> pub_year;
  int non_empty_columns = 0;  // across all 11 columns
};

/// Resolves the 11 Meta columns by header name.
class MetaLayout {
 public:
  explicit MetaLayout(const csv::Header& header, std::string_view source);
  std::array<std::size_t, 11> index;
};

/// nullopt when the id column has no omid token (a malformed row).
std::optional<MetaRecord> parse_meta_row(const csv::Row& row, const MetaLayout& layout);

inline constexpr std::array<std::string_view, 7> kIndexColumns = {"id", "citing", "cited", "creation",
                                                                  "timespan", "journal_sc", "author_sc"};

struct CitationEdge {
  std::string oci;
  Omid citing;
  Omid cited;
  std::optional<std::string> creation;
  std::optional<Timespan> timespan;
  std::string timespan_raw;
  bool journal_sc = false;
  bool author_sc = false;
  bool oci_mismatch = false;  // OCI numerals disagree with the citing/cited columns
};

class IndexLayout {
 public:
  explicit IndexLayout(const csv::Header& header, std::string_view source);
  std::array<std::size_t, 7> index;
};

/// nullopt when citing or cited is not a parseable OMID.
std::optional<CitationEdge> parse_citation_row(const csv::Row& row, const IndexLayout& layout);

}  // namespace ocov::oc
