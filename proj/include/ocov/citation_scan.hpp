#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocov/opencitations.hpp"
#include "ocov/shards.hpp"

namespace ocov::scan {

enum class Role { Citing, Cited, Both };

std::string_view role_name(Role r);

/// Role counts over retained edges. `citing` and `cited` both include the
/// edges with a matched OMID at each end; `unique_total` counts every edge once.
struct RoleTally {
  std::uint64_t citing = 0;
  std::uint64_t cited = 0;
  std::uint64_t both = 0;
  std::uint64_t unique_total = 0;

  void add(Role r);
  bool consistent() const { return unique_total == citing + cited - both && both <= std::min(citing, cited); }
  bool operator==(const RoleTally&) const = default;
};

/// Matched OMIDs ("br/0601") with their Meta publication year, used when an
/// edge lacks a creation date.
using OmidSet = std::unordered_map<std::string, std::optional<int>>;

struct ScanOptions {
  int cutoff_year = 2025;
  shards::RunOptions run;
};

struct ScanStats {
  std::uint64_t shards = 0;
  std::uint64_t resumed_shards = 0;
  std::uint64_t rows = 0;
  std::uint64_t malformed_rows = 0;
  std::uint64_t oci_mismatches = 0;     // among retained edges
  std::uint64_t bad_timespans = 0;      // among retained edges
  std::uint64_t excluded_temporal = 0;  // touching the set, citing side after the cutoff
  std::uint64_t year_from_meta = 0;     // creation missing, citing year taken from Meta
  std::uint64_t year_unknown = 0;       // creation missing and no fallback; retained
};

struct ScanResult {
  RoleTally tally;
  ScanStats stats;
};

/// Keeps an edge iff its citing or cited OMID is in `omids` and the citing
/// side was published no later than the cutoff. Retained edges are written
/// to `edges_out` (header included) in shard order, whatever the worker
/// count or processing order.
ScanResult scan_index(const OmidSet& omids, const std::vector<std::filesystem::path>& shards, std::ostream& edges_out,
                      const ScanOptions& opts);

inline constexpr std::string_view kEdgeHeader[] = {"id",       "citing",     "cited",     "creation",
                                                   "timespan", "journal_sc", "author_sc", "role"};

/// Per-OMID count of retained edges citing it; every OMID of the set is
/// present, zero when never cited.
std::map<std::string, std::uint64_t> incoming_citation_counts(const std::filesystem::path& iris_in_index,
                                                              const OmidSet& omids);

/// Recomputes the tally from a persisted iris_in_index dataset.
RoleTally tally_dataset(const std::filesystem::path& iris_in_index);

void write_tally(std::ostream& out, const RoleTally& t);
std::optional<RoleTally> read_tally(const std::filesystem::path& path);
void write_incoming(std::ostream& out, const std::map<std::string, std::uint64_t>& counts);

}  // namespace ocov::scan
