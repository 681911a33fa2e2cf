#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocov/dedup.hpp"
#include "ocov/iris_ingest.hpp"
#include "ocov/opencitations.hpp"
#include "ocov/shards.hpp"

namespace ocov::match {

enum class Status { InMeta, NotInMeta, ExcludedTemporal };

std::string_view status_name(Status s);

/// One Meta row that carries a wanted pid.
struct Candidate {
  std::string omid;  // "br/0601"
  int non_empty = 0;
  std::string oc_type;
  std::optional<int> meta_year;  // plausible years only
  std::uint64_t row_digest = 0;  // final tiebreak between rows with equal omid

  bool operator==(const Candidate&) const = default;
};

/// Strict "more complete wins" order: more non-empty columns, then the
/// lexicographically smaller OMID, then the row digest.
bool better(const Candidate& a, const Candidate& b);

struct MatchRow {
  pid::NormalizedPid pid;
  std::string item_id;
  std::string iris_type;
  std::optional<std::string> omid;
  std::optional<std::string> oc_type;
  std::optional<int> meta_year;
  Status status = Status::NotInMeta;
};

struct Collision {
  std::string pid;
  std::vector<Candidate> candidates;  // best first
};

struct MatchOptions {
  int cutoff_year = 2025;
  int min_year = 1000;
  /// Meta years above this are treated as invalid (absent); defaults to
  /// cutoff_year + 1 when unset.
  std::optional<int> max_plausible_year;
  shards::RunOptions run;
};

struct MatchStats {
  std::uint64_t shards = 0;
  std::uint64_t resumed_shards = 0;
  std::uint64_t meta_rows = 0;
  std::uint64_t malformed_rows = 0;
  std::uint64_t matched_rows = 0;
  std::uint64_t collisions = 0;
  std::uint64_t excluded_temporal = 0;
  std::uint64_t isbn_near_misses = 0;  // not matched, but the other ISBN form is in Meta
  iris::YearHistogram meta_years;      // all Meta rows, keyed by publication year
};

struct MatchResult {
  std::vector<MatchRow> in_meta;      // sorted by pid
  std::vector<MatchRow> not_in_meta;  // sorted by pid; includes temporal exclusions
  std::vector<Collision> collisions;  // sorted by pid
  MatchStats stats;
};

/// Streams the Meta shards once against the deduplicated pid set. Memory is
/// bounded by the pid set plus the matching rows.
MatchResult match_against_meta(const std::vector<dedup::UniqueRow>& unique, const std::vector<std::filesystem::path>& shards,
                               const std::unordered_map<std::string, int>& iris_year_fallback, const MatchOptions& opts,
                               int histogram_from_year = 1953);

/// Which of `wanted` (serialized pids) occur anywhere in the Meta shards.
std::vector<std::string> pids_present_in_meta(const std::vector<std::string>& wanted,
                                              const std::vector<std::filesystem::path>& shards,
                                              const shards::RunOptions& run);

struct Breakdown {
  std::vector<std::pair<std::string, std::uint64_t>> by_scheme;  // descending
  std::vector<std::pair<std::string, std::uint64_t>> by_type;    // descending, ties by type
};

Breakdown not_in_meta_breakdowns(const std::vector<MatchRow>& not_in_meta);

inline constexpr std::string_view kInMetaHeader[] = {"pid", "item_id", "omid", "oc_type", "iris_type", "meta_year"};
inline constexpr std::string_view kNotInMetaHeader[] = {"pid", "item_id", "iris_type", "status"};

void write_in_meta(std::ostream& out, const std::vector<MatchRow>& rows);
void write_not_in_meta(std::ostream& out, const std::vector<MatchRow>& rows);
void write_collisions(std::ostream& out, const std::vector<Collision>& collisions);

std::vector<MatchRow> read_in_meta(const std::filesystem::path& path);
std::vector<MatchRow> read_not_in_meta(const std::filesystem::path& path);

}  // namespace ocov::match
