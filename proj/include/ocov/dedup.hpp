#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ocov/iris_ingest.hpp"
#include "ocov/pid.hpp"
#include "ocov/selector.hpp"

namespace ocov::dedup {

/// Comparison key for CRIS types: the leading numeric code ("1.01") when
/// present, otherwise the lowercased label. Labels vary in case and language
/// between exports while codes do not.
std::string type_key(std::string_view iris_type);

struct PriorityEntry {
  std::string oc_meta_type;
  std::string iris_type;
  int priority = 0;
};

/// Per-scheme type ranking; a lower number wins. Types not listed rank after
/// every listed type.
class PriorityTable {
 public:
  PriorityTable() = default;
  PriorityTable(pid::Scheme scheme, std::vector<PriorityEntry> entries);

  std::optional<int> priority_of(std::string_view iris_type) const;
  const std::vector<PriorityEntry>& entries() const { return entries_; }
  pid::Scheme scheme() const { return scheme_; }

 private:
  pid::Scheme scheme_ = pid::Scheme::Doi;
  std::vector<PriorityEntry> entries_;
  std::unordered_map<std::string, int> by_key_;
};

struct PriorityTables {
  std::array<PriorityTable, 3> tables;

  const PriorityTable& at(pid::Scheme s) const { return tables[static_cast<std::size_t>(pid::rank(s))]; }

  /// CSV with columns scheme, oc_meta_type, iris_type, priority.
  static PriorityTables load(const std::filesystem::path& path);
};

struct ItemInfo {
  std::string iris_type;
  int completeness = 0;
};
using ItemIndex = std::unordered_map<std::string, ItemInfo>;

ItemIndex index_items(const std::vector<iris::Record>& records, const std::vector<std::string>& fields);
ItemIndex index_items(const iris::Dataset& ds);

struct Member {
  std::string item_id;
  std::string iris_type;
  int completeness = 0;

  bool operator==(const Member&) const = default;
};

struct Group {
  pid::NormalizedPid pid;
  std::vector<Member> members;  // sorted by item_id
  Member chosen;
};

struct SchemeDuplicates {
  std::uint64_t unique = 0;             // groups
  std::uint64_t duplicate_members = 0;  // member rows in groups of size > 1
  std::uint64_t duplicate_groups = 0;   // groups of size > 1
  std::uint64_t removed = 0;            // sum of (size - 1)
};

struct DuplicatesReport {
  std::array<SchemeDuplicates, 3> per_scheme{};

  const SchemeDuplicates& at(pid::Scheme s) const { return per_scheme[static_cast<std::size_t>(pid::rank(s))]; }
  SchemeDuplicates total() const;
};

struct DedupResult {
  std::vector<Group> groups;  // sorted by serialized pid
  DuplicatesReport report;
};

/// Groups by exact pid; keeps the most complete member per type, then the
/// member whose type ranks best in the scheme's table, then the most
/// complete, then the lowest item_id.
DedupResult deduplicate(const std::vector<selector::SelectedPid>& selected, const ItemIndex& items,
                        const PriorityTables& tables);

/// Per-scheme counts in the shape of the duplicates table.
DuplicatesReport duplicates_breakdown(const std::vector<Group>& groups);

/// A pid that selects one group while also being a valid, unselected
/// candidate of an item that landed in a different group.
struct CrossSchemeCollision {
  std::string pid;
  std::string item_id;
  std::string selected_pid;

  bool operator==(const CrossSchemeCollision&) const = default;
};

std::vector<CrossSchemeCollision> cross_scheme_collisions(const std::vector<Group>& groups,
                                                          const std::vector<iris::Record>& candidates,
                                                          const std::vector<selector::SelectedPid>& selected,
                                                          const pid::Options& opts = {});

inline constexpr std::string_view kUniqueHeader[] = {"pid", "item_id", "iris_type", "completeness"};

void write_unique(std::ostream& out, const std::vector<Group>& groups);
void write_unique_by_scheme(std::ostream& out, const DuplicatesReport& report);
void write_duplicates(std::ostream& out, const DuplicatesReport& report);
void write_groups(std::ostream& out, const std::vector<Group>& groups);
void write_cross_scheme(std::ostream& out, const std::vector<CrossSchemeCollision>& collisions);

struct UniqueRow {
  pid::NormalizedPid pid;
  std::string item_id;
  std::string iris_type;
  int completeness = 0;
};

std::vector<UniqueRow> read_unique(const std::filesystem::path& path);

}  // namespace ocov::dedup
