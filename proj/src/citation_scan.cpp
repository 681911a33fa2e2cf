#include "ocov/citation_scan.hpp"

#include <algorithm>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/text.hpp"

namespace ocov::scan {

std::string_view role_name(Role r) {
  switch (r) {
    case Role::Citing: return "citing";
    case Role::Cited: return "cited";
    case Role::Both: return "both";
  }
  return "";
}

void RoleTally::add(Role r) {
  ++unique_total;
  if (r != Role::Cited) ++citing;
  if (r != Role::Citing) ++cited;
  if (r == Role::Both) ++both;
}

namespace {

std::uint64_t to_u64(std::string_view s) { return text::all_digits(s) ? std::stoull(std::string(s)) : 0; }

// Part files: "e" rows carry the 8 output columns, "s" rows carry counters.
void scan_shard(const std::filesystem::path& shard, std::ostream& part, const OmidSet& omids, int cutoff) {
  csv::Reader reader(shard);
  csv::Row row;
  if (!reader.next(row)) return;
  csv::Header header(row);
  oc::IndexLayout layout(header, shard.filename().string());
  csv::Writer w(part);
  std::uint64_t rows = 0, malformed = 0, mismatch = 0, bad_span = 0, excluded = 0, from_meta = 0, unknown = 0;
  std::vector<std::string> out(8);
  while (reader.next(row)) {
    ++rows;
    // Cheap membership test on the raw cells before full parsing.
    auto citing_cell = text::trim(csv::cell(row, layout.index[1]));
    auto cited_cell = text::trim(csv::cell(row, layout.index[2]));
    if (citing_cell.starts_with("omid:")) citing_cell.remove_prefix(5);
    if (cited_cell.starts_with("omid:")) cited_cell.remove_prefix(5);
    auto ci = omids.find(std::string(citing_cell));
    auto ce = omids.find(std::string(cited_cell));
    if (ci == omids.end() && ce == omids.end()) {
      if (!oc::parse_omid(citing_cell) || !oc::parse_omid(cited_cell)) ++malformed;
      continue;
    }
    auto edge = oc::parse_citation_row(row, layout);
    if (!edge) {
      ++malformed;
      continue;
    }
    std::optional<int> year;
    if (edge->creation) year = text::leading_year(*edge->creation);
    if (!year) {
      if (ci != omids.end() && ci->second) {
        year = ci->second;
        ++from_meta;
      } else {
        ++unknown;
      }
    }
    if (year && *year > cutoff) {
      ++excluded;
      continue;
    }
    if (edge->oci_mismatch) ++mismatch;
    if (!edge->timespan_raw.empty() && !edge->timespan) ++bad_span;
    const Role role = (ci != omids.end() && ce != omids.end()) ? Role::Both
                      : ci != omids.end()                      ? Role::Citing
                                                               : Role::Cited;
    out[0] = edge->oci;
    out[1] = "omid:" + edge->citing.str();
    out[2] = "omid:" + edge->cited.str();
    out[3] = edge->creation.value_or("");
    out[4] = edge->timespan_raw;
    out[5] = edge->journal_sc ? "yes" : "no";
    out[6] = edge->author_sc ? "yes" : "no";
    out[7] = std::string(role_name(role));
    part << "e,";
    w.row(out);
  }
  auto counter = [&](std::string_view name, std::uint64_t v) {
    w.row({std::string_view("s"), name, std::string_view(std::to_string(v))});
  };
  counter("rows", rows);
  counter("malformed", malformed);
  counter("oci_mismatch", mismatch);
  counter("bad_timespan", bad_span);
  counter("excluded_temporal", excluded);
  counter("year_from_meta", from_meta);
  counter("year_unknown", unknown);
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "citing") return Role::Citing;
  if (s == "cited") return Role::Cited;
  if (s == "both") return Role::Both;
  return std::nullopt;
}

}  // namespace

ScanResult scan_index(const OmidSet& omids, const std::vector<std::filesystem::path>& shards, std::ostream& edges_out,
                      const ScanOptions& opts) {
  ScanResult result;
  auto& st = result.stats;
  st.shards = shards.size();
  csv::Writer w(edges_out);
  w.row(kEdgeHeader);
  if (omids.empty()) {
    // Nothing can match; the dump still has to be readable.
    for (auto& s : shards)
      if (!std::filesystem::exists(s)) throw InputError("no such shard: " + s.string());
    return result;
  }

  shards::Runner runner(shards, opts.run);
  auto report = runner.run([&](const std::filesystem::path& shard, std::ostream& part) {
    scan_shard(shard, part, omids, opts.cutoff_year);
  });
  st.resumed_shards = report.resumed;

  csv::Row row;
  std::vector<std::string> edge(8);
  for (auto& part : report.parts) {
    csv::Reader reader(part);
    while (reader.next(row)) {
      const auto kind = csv::cell(row, 0);
      if (kind == "e") {
        for (std::size_t i = 0; i < 8; ++i) edge[i] = std::string(csv::cell(row, i + 1));
        auto role = parse_role(edge[7]);
        if (!role) throw RuntimeFailure("corrupt part file " + part.string());
        result.tally.add(*role);
        w.row(edge);
      } else if (kind == "s") {
        const auto name = csv::cell(row, 1);
        const auto v = to_u64(csv::cell(row, 2));
        if (name == "rows") st.rows += v;
        else if (name == "malformed") st.malformed_rows += v;
        else if (name == "oci_mismatch") st.oci_mismatches += v;
        else if (name == "bad_timespan") st.bad_timespans += v;
        else if (name == "excluded_temporal") st.excluded_temporal += v;
        else if (name == "year_from_meta") st.year_from_meta += v;
        else if (name == "year_unknown") st.year_unknown += v;
      }
    }
  }
  return result;
}

std::map<std::string, std::uint64_t> incoming_citation_counts(const std::filesystem::path& iris_in_index,
                                                              const OmidSet& omids) {
  std::map<std::string, std::uint64_t> counts;
  for (auto& [omid, year] : omids) counts.emplace(omid, 0);
  csv::Reader reader(iris_in_index);
  auto h = csv::read_header(reader);
  const auto c_cited = h.require("cited", iris_in_index.filename().string());
  csv::Row row;
  while (reader.next(row)) {
    auto cited = oc::parse_omid(csv::cell(row, c_cited));
    if (!cited) continue;
    auto it = counts.find(cited->str());
    if (it != counts.end()) ++it->second;
  }
  return counts;
}

RoleTally tally_dataset(const std::filesystem::path& iris_in_index) {
  csv::Reader reader(iris_in_index);
  auto h = csv::read_header(reader);
  const auto c_role = h.require("role", iris_in_index.filename().string());
  RoleTally t;
  csv::Row row;
  while (reader.next(row)) {
    auto role = parse_role(csv::cell(row, c_role));
    if (!role) throw InputError(iris_in_index.string() + ": bad role '" + std::string(csv::cell(row, c_role)) + "'");
    t.add(*role);
  }
  return t;
}

void write_tally(std::ostream& out, const RoleTally& t) {
  csv::Writer w(out);
  w.row({"role", "citation_count"});
  w.row({std::string_view("citing"), std::string_view(std::to_string(t.citing))});
  w.row({std::string_view("cited"), std::string_view(std::to_string(t.cited))});
  w.row({std::string_view("both"), std::string_view(std::to_string(t.both))});
  w.row({std::string_view("unique_total"), std::string_view(std::to_string(t.unique_total))});
}

std::optional<RoleTally> read_tally(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto table = csv::read_table(path);
  RoleTally t;
  for (auto& row : table.rows) {
    const auto v = to_u64(csv::cell(row, 1));
    const auto k = csv::cell(row, 0);
    if (k == "citing") t.citing = v;
    else if (k == "cited") t.cited = v;
    else if (k == "both") t.both = v;
    else if (k == "unique_total") t.unique_total = v;
  }
  return t;
}

void write_incoming(std::ostream& out, const std::map<std::string, std::uint64_t>& counts) {
  csv::Writer w(out);
  w.row({"omid", "count"});
  for (auto& [omid, n] : counts) w.row({std::string_view(omid), std::string_view(std::to_string(n))});
}

}  // namespace ocov::scan
