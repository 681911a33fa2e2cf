#include "ocov/oc_match.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/text.hpp"

namespace ocov::match {

std::string_view status_name(Status s) {
  switch (s) {
    case Status::InMeta: return "in_meta";
    case Status::NotInMeta: return "not_in_meta";
    case Status::ExcludedTemporal: return "excluded_temporal";
  }
  return "";
}

bool better(const Candidate& a, const Candidate& b) {
  if (a.non_empty != b.non_empty) return a.non_empty > b.non_empty;
  if (a.omid != b.omid) return a.omid < b.omid;
  return a.row_digest < b.row_digest;
}

namespace {

// Part file rows: m = candidate, n = ISBN near miss, s = counter,
// y = year histogram bucket, u = unknown year count.

std::uint64_t row_digest(const csv::Row& row) {
  std::uint64_t h = io::fnv1a("");
  for (auto& c : row) {
    h = io::fnv1a(c, h);
    h = io::fnv1a("\x1f", h);
  }
  return h;
}

std::uint64_t to_u64(std::string_view s) { return text::all_digits(s) ? std::stoull(std::string(s)) : 0; }

void scan_meta_shard(const std::filesystem::path& shard, std::ostream& part,
                     const std::unordered_set<std::string>& wanted,
                     const std::unordered_map<std::string, std::string>& shadow, int min_year, int max_year) {
  csv::Reader reader(shard);
  csv::Row row;
  if (!reader.next(row)) return;  // empty shard
  csv::Header header(row);
  oc::MetaLayout layout(header, shard.filename().string());
  csv::Writer w(part);
  std::uint64_t rows = 0, malformed = 0, unknown = 0;
  std::map<int, std::uint64_t> years;
  while (reader.next(row)) {
    ++rows;
    auto rec = oc::parse_meta_row(row, layout);
    if (!rec) {
      ++malformed;
      continue;
    }
    std::optional<int> year = rec->pub_year;
    if (year && (*year < min_year || *year > max_year)) year.reset();
    if (year)
      ++years[*year];
    else
      ++unknown;
    for (auto& tok : rec->external_ids) {
      if (wanted.count(tok)) {
        w.row({std::string_view("m"), std::string_view(tok), std::string_view(rec->omid.str()),
               std::string_view(std::to_string(rec->non_empty_columns)),
               std::string_view(rec->type ? *rec->type : std::string()), std::string_view(text::year_or_empty(year)),
               std::string_view(std::to_string(row_digest(row)))});
      } else if (auto s = shadow.find(tok); s != shadow.end()) {
        w.row({std::string_view("n"), std::string_view(s->second)});
      }
    }
  }
  w.row({std::string_view("s"), std::string_view("rows"), std::string_view(std::to_string(rows))});
  w.row({std::string_view("s"), std::string_view("malformed"), std::string_view(std::to_string(malformed))});
  w.row({std::string_view("u"), std::string_view(std::to_string(unknown))});
  for (auto& [y, n] : years) w.row({std::string_view("y"), std::string_view(std::to_string(y)), std::string_view(std::to_string(n))});
}

}  // namespace

MatchResult match_against_meta(const std::vector<dedup::UniqueRow>& unique, const std::vector<std::filesystem::path>& shards,
                               const std::unordered_map<std::string, int>& iris_year_fallback, const MatchOptions& opts,
                               int histogram_from_year) {
  const int max_year = opts.max_plausible_year.value_or(opts.cutoff_year + 1);

  std::unordered_set<std::string> wanted;
  for (auto& u : unique) wanted.insert(u.pid.str());
  std::unordered_map<std::string, std::string> shadow;
  for (auto& u : unique) {
    if (u.pid.scheme != pid::Scheme::Isbn) continue;
    if (auto alt = pid::isbn_alternate(u.pid.value)) {
      std::string key = "isbn:" + *alt;
      if (!wanted.count(key)) shadow.emplace(std::move(key), u.pid.str());
    }
  }

  shards::Runner runner(shards, opts.run);
  auto report = runner.run([&](const std::filesystem::path& shard, std::ostream& part) {
    scan_meta_shard(shard, part, wanted, shadow, opts.min_year, max_year);
  });

  MatchResult result;
  auto& st = result.stats;
  st.shards = shards.size();
  st.resumed_shards = report.resumed;
  std::unordered_map<std::string, std::vector<Candidate>> found;
  std::unordered_set<std::string> near;
  std::map<int, std::uint64_t> years;
  std::uint64_t unknown_years = 0;
  for (auto& part : report.parts) {
    csv::Reader reader(part);
    csv::Row row;
    while (reader.next(row)) {
      const auto kind = csv::cell(row, 0);
      if (kind == "m") {
        Candidate c;
        c.omid = std::string(csv::cell(row, 2));
        c.non_empty = static_cast<int>(to_u64(csv::cell(row, 3)));
        c.oc_type = std::string(csv::cell(row, 4));
        if (auto y = csv::cell(row, 5); !y.empty()) c.meta_year = static_cast<int>(to_u64(y));
        c.row_digest = to_u64(csv::cell(row, 6));
        found[std::string(csv::cell(row, 1))].push_back(std::move(c));
        ++st.matched_rows;
      } else if (kind == "n") {
        near.insert(std::string(csv::cell(row, 1)));
      } else if (kind == "s") {
        if (csv::cell(row, 1) == "rows") st.meta_rows += to_u64(csv::cell(row, 2));
        if (csv::cell(row, 1) == "malformed") st.malformed_rows += to_u64(csv::cell(row, 2));
      } else if (kind == "u") {
        unknown_years += to_u64(csv::cell(row, 1));
      } else if (kind == "y") {
        years[static_cast<int>(to_u64(csv::cell(row, 1)))] += to_u64(csv::cell(row, 2));
      }
    }
  }
  st.meta_years.unknown = unknown_years;
  for (auto& [y, n] : years) {
    if (y < histogram_from_year)
      st.meta_years.before_range += n;
    else
      st.meta_years.by_year[y] += n;
  }

  std::vector<const dedup::UniqueRow*> ordered;
  for (auto& u : unique) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->pid.str() < b->pid.str(); });

  for (auto* u : ordered) {
    const auto key = u->pid.str();
    MatchRow row{u->pid, u->item_id, u->iris_type, std::nullopt, std::nullopt, std::nullopt, Status::NotInMeta};
    auto it = found.find(key);
    if (it == found.end()) {
      if (near.count(key)) ++st.isbn_near_misses;
      result.not_in_meta.push_back(std::move(row));
      continue;
    }
    auto& cands = it->second;
    std::sort(cands.begin(), cands.end(), better);
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    std::set<std::string> omids;
    for (auto& c : cands) omids.insert(c.omid);
    if (omids.size() > 1) result.collisions.push_back({key, cands});

    const Candidate& best = cands.front();
    std::optional<int> year = best.meta_year;
    if (!year) {
      auto fb = iris_year_fallback.find(key);
      if (fb != iris_year_fallback.end() && fb->second >= opts.min_year && fb->second <= max_year) year = fb->second;
    }
    if (!year || *year > opts.cutoff_year) {
      row.status = Status::ExcludedTemporal;
      ++st.excluded_temporal;
      result.not_in_meta.push_back(std::move(row));
      continue;
    }
    row.omid = best.omid;
    row.oc_type = best.oc_type;
    row.meta_year = best.meta_year;
    row.status = Status::InMeta;
    result.in_meta.push_back(std::move(row));
  }
  st.collisions = result.collisions.size();
  return result;
}

std::vector<std::string> pids_present_in_meta(const std::vector<std::string>& wanted_list,
                                              const std::vector<std::filesystem::path>& shards,
                                              const shards::RunOptions& run) {
  std::unordered_set<std::string> wanted(wanted_list.begin(), wanted_list.end());
  shards::Runner runner(shards, run);
  auto report = runner.run([&](const std::filesystem::path& shard, std::ostream& part) {
    csv::Reader reader(shard);
    csv::Row row;
    if (!reader.next(row)) return;
    csv::Header header(row);
    const auto c_id = header.require("id", shard.filename().string());
    csv::Writer w(part);
    while (reader.next(row)) {
      for (auto tok : text::split(csv::cell(row, c_id), ' ')) {
        if (!tok.empty() && wanted.count(std::string(tok))) w.row({std::string_view("p"), tok});
      }
    }
  });
  std::set<std::string> present;
  for (auto& part : report.parts) {
    csv::Reader reader(part);
    csv::Row row;
    while (reader.next(row)) present.insert(std::string(csv::cell(row, 1)));
  }
  return {present.begin(), present.end()};
}

namespace {

std::vector<std::pair<std::string, std::uint64_t>> sorted_counts(const std::map<std::string, std::uint64_t>& m) {
  std::vector<std::pair<std::string, std::uint64_t>> v(m.begin(), m.end());
  std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.second > b.second; });
  return v;
}

}  // namespace

Breakdown not_in_meta_breakdowns(const std::vector<MatchRow>& not_in_meta) {
  std::map<std::string, std::uint64_t> schemes, types;
  for (auto& r : not_in_meta) {
    ++schemes[std::string(pid::prefix(r.pid.scheme))];
    ++types[r.iris_type];
  }
  return {sorted_counts(schemes), sorted_counts(types)};
}

void write_in_meta(std::ostream& out, const std::vector<MatchRow>& rows) {
  csv::Writer w(out);
  w.row(kInMetaHeader);
  static const std::string kEmpty;
  for (auto& r : rows)
    w.row({std::string_view(r.pid.str()), std::string_view(r.item_id), std::string_view(r.omid ? *r.omid : kEmpty),
           std::string_view(r.oc_type ? *r.oc_type : kEmpty), std::string_view(r.iris_type),
           std::string_view(text::year_or_empty(r.meta_year))});
}

void write_not_in_meta(std::ostream& out, const std::vector<MatchRow>& rows) {
  csv::Writer w(out);
  w.row(kNotInMetaHeader);
  for (auto& r : rows)
    w.row({std::string_view(r.pid.str()), std::string_view(r.item_id), std::string_view(r.iris_type),
           status_name(r.status)});
}

void write_collisions(std::ostream& out, const std::vector<Collision>& collisions) {
  csv::Writer w(out);
  w.row({"pid", "omid", "non_empty_columns", "chosen"});
  for (auto& c : collisions) {
    for (std::size_t i = 0; i < c.candidates.size(); ++i)
      w.row({std::string_view(c.pid), std::string_view(c.candidates[i].omid),
             std::string_view(std::to_string(c.candidates[i].non_empty)), std::string_view(i == 0 ? "yes" : "no")});
  }
}

namespace {

std::vector<MatchRow> read_rows(const std::filesystem::path& path, bool in_meta) {
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_pid = h.require("pid", src), c_id = h.require("item_id", src), c_type = h.require("iris_type", src);
  std::optional<std::size_t> c_omid, c_oc, c_year, c_status;
  if (in_meta) {
    c_omid = h.require("omid", src);
    c_oc = h.require("oc_type", src);
    c_year = h.require("meta_year", src);
  } else {
    c_status = h.require("status", src);
  }
  std::vector<MatchRow> out;
  csv::Row row;
  while (reader.next(row)) {
    auto p = pid::parse_serialized(csv::cell(row, c_pid));
    if (!p) throw InputError(src + ": malformed pid '" + std::string(csv::cell(row, c_pid)) + "'");
    MatchRow r{*p, std::string(csv::cell(row, c_id)), std::string(csv::cell(row, c_type)), {}, {}, {}, Status::NotInMeta};
    if (in_meta) {
      r.status = Status::InMeta;
      r.omid = std::string(csv::cell(row, *c_omid));
      if (auto t = csv::cell(row, *c_oc); !t.empty()) r.oc_type = std::string(t);
      if (auto y = csv::cell(row, *c_year); text::all_digits(y)) r.meta_year = std::stoi(std::string(y));
    } else if (csv::cell(row, *c_status) == "excluded_temporal") {
      r.status = Status::ExcludedTemporal;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<MatchRow> read_in_meta(const std::filesystem::path& path) { return read_rows(path, true); }
std::vector<MatchRow> read_not_in_meta(const std::filesystem::path& path) { return read_rows(path, false); }

}  // namespace ocov::match
