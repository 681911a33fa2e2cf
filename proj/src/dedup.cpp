#include "ocov/dedup.hpp"

#include <algorithm>
#include <climits>
#include <map>
#include <set>
#include <tuple>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/text.hpp"

namespace ocov::dedup {

std::string type_key(std::string_view iris_type) {
  auto t = text::trim(iris_type);
  std::size_t i = 0;
  while (i < t.size() && text::is_digit(t[i])) ++i;
  if (i > 0 && i < t.size() && t[i] == '.') {
    std::size_t j = i + 1;
    while (j < t.size() && text::is_digit(t[j])) ++j;
    if (j > i + 1 && (j == t.size() || !text::is_digit(t[j]))) return std::string(t.substr(0, j));
  }
  return text::lower(t);
}

PriorityTable::PriorityTable(pid::Scheme scheme, std::vector<PriorityEntry> entries)
    : scheme_(scheme), entries_(std::move(entries)) {
  std::set<int> seen;
  for (auto& e : entries_) {
    if (e.priority < 0)
      throw ConfigError("priority table " + std::string(pid::prefix(scheme)) + ": negative priority for " + e.iris_type);
    if (!seen.insert(e.priority).second)
      throw ConfigError("priority table " + std::string(pid::prefix(scheme)) + ": priority " +
                        std::to_string(e.priority) + " used twice");
    if (!by_key_.emplace(type_key(e.iris_type), e.priority).second)
      throw ConfigError("priority table " + std::string(pid::prefix(scheme)) + ": type listed twice: " + e.iris_type);
  }
}

std::optional<int> PriorityTable::priority_of(std::string_view iris_type) const {
  auto it = by_key_.find(type_key(iris_type));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

PriorityTables PriorityTables::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("priority table file not found: " + path.string());
  auto t = csv::read_table(path);
  const auto src = path.filename().string();
  const auto c_scheme = t.header.require("scheme", src), c_oc = t.header.require("oc_meta_type", src),
             c_iris = t.header.require("iris_type", src), c_prio = t.header.require("priority", src);
  std::array<std::vector<PriorityEntry>, 3> entries;
  for (auto& row : t.rows) {
    auto scheme = pid::scheme_from_prefix(text::lower(text::trim(csv::cell(row, c_scheme))));
    if (!scheme) throw ConfigError(src + ": unknown scheme '" + std::string(csv::cell(row, c_scheme)) + "'");
    auto prio = text::trim(csv::cell(row, c_prio));
    int p = -1;
    if (text::all_digits(prio))
      p = std::stoi(std::string(prio));
    else if (!(prio.size() > 1 && prio[0] == '-' && text::all_digits(prio.substr(1))))
      throw ConfigError(src + ": priority is not an integer: '" + std::string(prio) + "'");
    entries[static_cast<std::size_t>(pid::rank(*scheme))].push_back(
        {std::string(csv::cell(row, c_oc)), std::string(csv::cell(row, c_iris)), p});
  }
  PriorityTables out;
  for (auto s : pid::kSchemes)
    out.tables[static_cast<std::size_t>(pid::rank(s))] =
        PriorityTable(s, std::move(entries[static_cast<std::size_t>(pid::rank(s))]));
  return out;
}

ItemIndex index_items(const std::vector<iris::Record>& records, const std::vector<std::string>& fields) {
  ItemIndex idx;
  for (auto& r : records) idx[r.item_id] = {r.iris_type, iris::completeness_score(r, fields)};
  return idx;
}

ItemIndex index_items(const iris::Dataset& ds) {
  ItemIndex idx;
  for (auto& r : ds.records) {
    auto it = ds.completeness.find(r.item_id);
    idx[r.item_id] = {r.iris_type, it == ds.completeness.end() ? 0 : it->second};
  }
  return idx;
}

SchemeDuplicates DuplicatesReport::total() const {
  SchemeDuplicates t;
  for (auto& s : per_scheme) {
    t.unique += s.unique;
    t.duplicate_members += s.duplicate_members;
    t.duplicate_groups += s.duplicate_groups;
    t.removed += s.removed;
  }
  return t;
}

namespace {

Member resolve(const std::vector<Member>& members, const PriorityTable& table) {
  // Most complete member per type; ties to the lowest item_id (members are
  // already sorted by item_id, so the first best wins).
  std::map<std::string, const Member*> best_per_type;
  for (auto& m : members) {
    auto [it, inserted] = best_per_type.try_emplace(type_key(m.iris_type), &m);
    if (!inserted && m.completeness > it->second->completeness) it->second = &m;
  }
  auto rank = [&](const Member& m) {
    return std::make_tuple(table.priority_of(m.iris_type).value_or(INT_MAX), -m.completeness, std::cref(m.item_id));
  };
  const Member* winner = nullptr;
  for (auto& [key, m] : best_per_type)
    if (winner == nullptr || rank(*m) < rank(*winner)) winner = m;
  return *winner;
}

}  // namespace

DuplicatesReport duplicates_breakdown(const std::vector<Group>& groups) {
  DuplicatesReport rep;
  for (auto& g : groups) {
    auto& s = rep.per_scheme[static_cast<std::size_t>(pid::rank(g.pid.scheme))];
    ++s.unique;
    if (g.members.size() > 1) {
      s.duplicate_members += g.members.size();
      ++s.duplicate_groups;
      s.removed += g.members.size() - 1;
    }
  }
  return rep;
}

DedupResult deduplicate(const std::vector<selector::SelectedPid>& selected, const ItemIndex& items,
                        const PriorityTables& tables) {
  std::map<std::string, Group> by_pid;
  for (auto& s : selected) {
    auto info = items.find(s.item_id);
    if (info == items.end()) throw InputError("selected pid refers to unknown item " + s.item_id);
    auto [it, inserted] = by_pid.try_emplace(s.pid.str());
    if (inserted) it->second.pid = s.pid;
    it->second.members.push_back({s.item_id, info->second.iris_type, info->second.completeness});
  }
  DedupResult out;
  out.groups.reserve(by_pid.size());
  for (auto& [key, g] : by_pid) {
    std::sort(g.members.begin(), g.members.end(), [](auto& a, auto& b) { return a.item_id < b.item_id; });
    g.chosen = resolve(g.members, tables.at(g.pid.scheme));
    out.groups.push_back(std::move(g));
  }
  out.report = duplicates_breakdown(out.groups);
  return out;
}

std::vector<CrossSchemeCollision> cross_scheme_collisions(const std::vector<Group>& groups,
                                                          const std::vector<iris::Record>& candidates,
                                                          const std::vector<selector::SelectedPid>& selected,
                                                          const pid::Options& opts) {
  std::unordered_map<std::string, const Group*> group_of;
  for (auto& g : groups) group_of.emplace(g.pid.str(), &g);
  std::unordered_map<std::string, std::string> selected_of;
  for (auto& s : selected) selected_of.emplace(s.item_id, s.pid.str());

  std::set<std::tuple<std::string, std::string, std::string>> found;
  for (auto& r : candidates) {
    auto sel = selected_of.find(r.item_id);
    if (sel == selected_of.end()) continue;
    for (auto& id : r.identifiers) {
      auto res = pid::normalize(id.scheme, id.text, opts);
      if (!pid::accepted(res)) continue;
      const auto key = pid::value(res).str();
      if (key == sel->second) continue;
      if (group_of.count(key)) found.emplace(key, r.item_id, sel->second);
    }
  }
  std::vector<CrossSchemeCollision> out;
  for (auto& [p, item, s] : found) out.push_back({p, item, s});
  return out;
}

void write_unique(std::ostream& out, const std::vector<Group>& groups) {
  csv::Writer w(out);
  w.row(kUniqueHeader);
  for (auto& g : groups)
    w.row({std::string_view(g.pid.str()), std::string_view(g.chosen.item_id), std::string_view(g.chosen.iris_type),
           std::string_view(std::to_string(g.chosen.completeness))});
}

void write_unique_by_scheme(std::ostream& out, const DuplicatesReport& report) {
  csv::Writer w(out);
  w.row({"scheme", "unique_count"});
  for (auto s : pid::kSchemes) w.row({pid::prefix(s), std::string_view(std::to_string(report.at(s).unique))});
  w.row({"total", std::string_view(std::to_string(report.total().unique))});
}

void write_duplicates(std::ostream& out, const DuplicatesReport& report) {
  csv::Writer w(out);
  w.row({"scheme", "br_count", "pid_count", "removed"});
  auto emit = [&](std::string_view name, const SchemeDuplicates& d) {
    w.row({name, std::string_view(std::to_string(d.duplicate_members)),
           std::string_view(std::to_string(d.duplicate_groups)), std::string_view(std::to_string(d.removed))});
  };
  for (auto s : pid::kSchemes) emit(pid::prefix(s), report.at(s));
  emit("total", report.total());
}

void write_groups(std::ostream& out, const std::vector<Group>& groups) {
  csv::Writer w(out);
  w.row({"pid", "item_id", "iris_type", "completeness", "chosen"});
  for (auto& g : groups) {
    if (g.members.size() < 2) continue;
    const auto p = g.pid.str();
    for (auto& m : g.members)
      w.row({std::string_view(p), std::string_view(m.item_id), std::string_view(m.iris_type),
             std::string_view(std::to_string(m.completeness)),
             std::string_view(m.item_id == g.chosen.item_id ? "yes" : "no")});
  }
}

void write_cross_scheme(std::ostream& out, const std::vector<CrossSchemeCollision>& collisions) {
  csv::Writer w(out);
  w.row({"pid", "item_id", "selected_pid"});
  for (auto& c : collisions) w.row({std::string_view(c.pid), std::string_view(c.item_id), std::string_view(c.selected_pid)});
}

std::vector<UniqueRow> read_unique(const std::filesystem::path& path) {
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_pid = h.require("pid", src), c_id = h.require("item_id", src), c_type = h.require("iris_type", src),
             c_score = h.require("completeness", src);
  std::vector<UniqueRow> out;
  csv::Row row;
  while (reader.next(row)) {
    auto p = pid::parse_serialized(csv::cell(row, c_pid));
    if (!p) throw InputError(src + ": malformed pid '" + std::string(csv::cell(row, c_pid)) + "'");
    auto score = csv::cell(row, c_score);
    out.push_back({*p, std::string(csv::cell(row, c_id)), std::string(csv::cell(row, c_type)),
                   text::all_digits(score) ? std::stoi(std::string(score)) : 0});
  }
  return out;
}

}  // namespace ocov::dedup
