#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace ocov::pid {

/// Declaration order is selection priority: doi before pmid before isbn.
enum class Scheme { Doi = 0, Pmid = 1, Isbn = 2 };

inline constexpr Scheme kSchemes[] = {Scheme::Doi, Scheme::Pmid, Scheme::Isbn};

std::string_view prefix(Scheme s);
std::optional<Scheme> scheme_from_prefix(std::string_view prefix);
inline int rank(Scheme s) { return static_cast<int>(s); }

struct RawIdentifier {
  Scheme scheme;
  std::string text;  // byte-exact as found in the dump

  bool operator==(const RawIdentifier&) const = default;
};

/// A sanitized identifier in OpenCitations `prefix:value` form.
struct NormalizedPid {
  Scheme scheme;
  std::string value;

  std::string str() const;
  bool operator==(const NormalizedPid&) const = default;
  auto operator<=>(const NormalizedPid& o) const { return str() <=> o.str(); }
};

enum class Reason {
  // doi
  BadPrefix,
  Whitespace,
  WrongSchemeShape,
  // pmid
  NonDigit,
  PmcId,
  // isbn
  BadLength,
  BadChars,
  BadChecksum,
  // any
  Empty,
};

std::string_view reason_name(Reason r);

struct Rejection {
  Scheme scheme;
  Reason reason;
  std::string raw;

  bool operator==(const Rejection&) const = default;
};

using Result = std::variant<NormalizedPid, Rejection>;

inline bool accepted(const Result& r) { return std::holds_alternative<NormalizedPid>(r); }
inline const NormalizedPid& value(const Result& r) { return std::get<NormalizedPid>(r); }
inline const Rejection& rejection(const Result& r) { return std::get<Rejection>(r); }

struct Options {
  /// Verify the ISBN-10 / ISBN-13 check digit in addition to the pattern.
  bool isbn_checksum = false;
};

/// Strips a leading "doi:" or doi.org resolver label. Returns the remainder
/// and whether a label was present.
std::pair<std::string_view, bool> strip_doi_label(std::string_view raw);

Result parse_doi(std::string_view raw);
Result parse_pmid(std::string_view raw);
Result parse_isbn(std::string_view raw, const Options& opts = {});
Result normalize(Scheme scheme, std::string_view raw, const Options& opts = {});

/// Parses the serialized `prefix:value` form back into a pid. The value is
/// re-validated through its scheme parser.
std::optional<NormalizedPid> parse_serialized(std::string_view s, const Options& opts = {});

bool isbn_checksum_ok(std::string_view digits);

/// The other ISBN form of a normalized ISBN value (10 <-> 978-prefixed 13),
/// if one exists.
std::optional<std::string> isbn_alternate(std::string_view value);

}  // namespace ocov::pid
