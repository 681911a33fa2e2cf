#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "ocov/iris_ingest.hpp"
#include "ocov/pid.hpp"

namespace ocov::selector {

struct SelectedPid {
  std::string item_id;
  pid::NormalizedPid pid;
  int scheme_rank = 0;     // 0 doi, 1 pmid, 2 isbn
  int fallback_depth = 0;  // candidates rejected before the winner

  bool operator==(const SelectedPid&) const = default;
};

/// Every candidate of the record was rejected.
struct InvalidOnly {
  std::string item_id;
  std::vector<pid::Rejection> rejections;

  bool operator==(const InvalidOnly&) const = default;
};

using Selection = std::variant<SelectedPid, InvalidOnly>;

/// Schemes are tried doi, pmid, isbn; within a scheme candidates are tried in
/// stored order. The first candidate that normalizes wins.
Selection select_pid(const iris::Record& record, const pid::Options& opts = {});

struct SchemeCounts {
  std::uint64_t raw = 0;
  std::uint64_t invalid = 0;
  std::uint64_t valid = 0;
};

struct ValidationStats {
  std::array<SchemeCounts, 3> per_scheme{};  // indexed by pid::rank
  std::uint64_t doi_labels_stripped = 0;

  SchemeCounts& at(pid::Scheme s) { return per_scheme[static_cast<std::size_t>(pid::rank(s))]; }
  const SchemeCounts& at(pid::Scheme s) const { return per_scheme[static_cast<std::size_t>(pid::rank(s))]; }
  SchemeCounts total() const;
  void merge(const ValidationStats& o);
};

/// Runs every raw candidate (not just selected ones) through its parser.
ValidationStats validation_stats(const std::vector<iris::Record>& records, const pid::Options& opts = {});

struct SelectionRun {
  std::vector<SelectedPid> selected;
  std::vector<InvalidOnly> invalid_only;
};

SelectionRun select_all(const std::vector<iris::Record>& records, const pid::Options& opts = {});

inline constexpr std::string_view kSelectedHeader[] = {"item_id", "pid", "scheme", "fallback_depth"};
inline constexpr std::string_view kInvalidOnlyHeader[] = {"item_id", "rejections"};
inline constexpr std::string_view kStatsHeader[] = {"scheme", "raw_count", "invalid_count", "valid_count"};

void write_selected(std::ostream& out, const std::vector<SelectedPid>& selected);
void write_invalid_only(std::ostream& out, const std::vector<InvalidOnly>& invalid);
void write_stats(std::ostream& out, const ValidationStats& stats);

std::vector<SelectedPid> read_selected(const std::filesystem::path& path);

}  // namespace ocov::selector
