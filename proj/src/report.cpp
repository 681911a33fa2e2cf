#include "ocov/report.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ocov/citation_scan.hpp"
#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/text.hpp"

namespace ocov::report {

namespace fs = std::filesystem;
using json = nlohmann::json;

TypeMapping TypeMapping::load(const fs::path& path) {
  auto table = csv::read_table(path);
  const auto src = path.filename().string();
  const auto c_iris = table.header.require("iris_type", src);
  const auto c_oc = table.header.require("oc_meta_type", src);
  TypeMapping m;
  for (auto& row : table.rows) {
    if (text::trim(csv::cell(row, c_iris)).empty()) continue;
    m.add(csv::cell(row, c_iris), csv::cell(row, c_oc));
  }
  return m;
}

void TypeMapping::add(std::string_view iris_type, std::string_view oc_meta_type) {
  const auto key = dedup::type_key(iris_type);
  const auto value = text::lower(text::trim(oc_meta_type));
  auto [it, inserted] = map_.emplace(key, value);
  if (!inserted && it->second != value)
    throw ConfigError("type mapping: '" + std::string(iris_type) + "' mapped to both '" + it->second + "' and '" +
                      value + "'");
}

std::string TypeMapping::expected(std::string_view iris_type) const {
  auto it = map_.find(dedup::type_key(iris_type));
  if (it == map_.end() || it->second.empty()) return std::string(kNoTypeSpecified);
  return it->second;
}

TypeLabels TypeLabels::load(const fs::path& path) {
  auto table = csv::read_table(path);
  const auto src = path.filename().string();
  const auto c_it = table.header.require("iris_type_it", src);
  const auto c_en = table.header.require("iris_type_en", src);
  TypeLabels l;
  for (auto& row : table.rows) l.add(csv::cell(row, c_it), csv::cell(row, c_en));
  return l;
}

void TypeLabels::add(std::string_view original, std::string_view english) {
  en_[dedup::type_key(original)] = std::string(text::trim(english));
}

std::string TypeLabels::english(std::string_view iris_type) const {
  auto it = en_.find(dedup::type_key(iris_type));
  return it == en_.end() ? std::string(text::trim(iris_type)) : it->second;
}

namespace {

std::string display(std::string_view iris_type, const TypeLabels* labels) {
  if (text::trim(iris_type).empty()) return "(none)";
  return labels ? labels->english(iris_type) : std::string(text::trim(iris_type));
}

// Stable display name per type code: the smallest raw label seen.
struct TypeGroups {
  std::map<std::string, std::string> label;
  void see(std::string_view iris_type, const TypeLabels* labels) {
    const auto key = dedup::type_key(iris_type);
    auto d = display(iris_type, labels);
    auto [it, inserted] = label.emplace(key, d);
    if (!inserted && d < it->second) it->second = d;
  }
};

}  // namespace

std::vector<CoverageRow> coverage_by_type(const std::vector<dedup::UniqueRow>& unique,
                                          const std::vector<match::MatchRow>& in_meta, const TypeLabels* labels) {
  TypeGroups groups;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;
  for (auto& u : unique) {
    groups.see(u.iris_type, labels);
    ++counts[dedup::type_key(u.iris_type)].first;
  }
  for (auto& m : in_meta) {
    groups.see(m.iris_type, labels);
    ++counts[dedup::type_key(m.iris_type)].second;
  }
  std::vector<std::pair<std::string, CoverageRow>> rows;
  for (auto& [key, c] : counts) {
    CoverageRow r{groups.label[key], c.first, c.second, text::percent2(c.second, c.first)};
    rows.emplace_back(key, std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    const auto& x = a.second;
    const auto& y = b.second;
    // x.meta/x.iris vs y.meta/y.iris without division; iris_count 0 sorts last.
    const unsigned __int128 lhs = static_cast<unsigned __int128>(x.meta_count) * std::max<std::uint64_t>(y.iris_count, 1);
    const unsigned __int128 rhs = static_cast<unsigned __int128>(y.meta_count) * std::max<std::uint64_t>(x.iris_count, 1);
    const bool xz = x.iris_count == 0, yz = y.iris_count == 0;
    if (xz != yz) return yz;
    if (lhs != rhs) return lhs > rhs;
    if (x.iris_count != y.iris_count) return x.iris_count > y.iris_count;
    return a.first < b.first;
  });
  std::vector<CoverageRow> out;
  for (auto& [k, r] : rows) out.push_back(std::move(r));
  return out;
}

Alignment type_mismatch_matrix(const std::vector<match::MatchRow>& in_meta, const TypeMapping& mapping,
                               const TypeLabels* labels) {
  Alignment a;
  std::map<std::tuple<std::string, std::string, std::string>, std::uint64_t> cells;
  for (auto& m : in_meta) {
    if (!m.oc_type || text::trim(*m.oc_type).empty()) continue;
    const auto observed = text::lower(text::trim(*m.oc_type));
    const auto expected = mapping.expected(m.iris_type);
    if (observed == expected) {
      ++a.coherent;
    } else {
      ++a.mismatched;
      ++cells[{display(m.iris_type, labels), expected, observed}];
    }
  }
  for (auto& [k, n] : cells) a.matrix.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), n});
  std::stable_sort(a.matrix.begin(), a.matrix.end(),
                   [](const MismatchCell& x, const MismatchCell& y) { return x.count > y.count; });
  return a;
}

ExternalCounts load_external_counts(std::string source, const fs::path& path) {
  ExternalCounts ec;
  ec.source = std::move(source);
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_id = h.require("item_id", src);
  const auto c_n = h.require("count", src);
  csv::Row row;
  while (reader.next(row)) {
    const auto id = text::trim(csv::cell(row, c_id));
    const auto n = text::trim(csv::cell(row, c_n));
    if (id.empty()) continue;
    if (!text::all_digits(n) || n.size() > 18)
      throw InputError(path.string() + ":" + std::to_string(reader.line()) + ": bad citation count '" +
                       std::string(n) + "'");
    // First row wins for repeated ids.
    ec.counts.emplace(std::string(id), std::stoull(std::string(n)));
  }
  return ec;
}

std::vector<ComparisonRow> citation_comparison(std::uint64_t oc_brs,
                                               const std::map<std::string, std::uint64_t>& incoming_counts,
                                               const std::vector<ExternalCounts>& externals,
                                               const std::set<std::string>& known_item_ids,
                                               std::vector<std::string>* warnings) {
  std::vector<ComparisonRow> rows;
  for (auto& ext : externals) {
    ComparisonRow r;
    r.source = ext.source;
    std::uint64_t unknown = 0;
    for (auto& [id, n] : ext.counts) {
      if (!known_item_ids.count(id)) {
        ++unknown;
        continue;
      }
      ++r.brs_in_source;
      r.citations += n;
    }
    if (unknown && warnings)
      warnings->push_back(ext.source + ": " + std::to_string(unknown) + " rows with unknown item ids ignored");
    r.ratio = text::ratio(r.citations, r.brs_in_source);
    rows.push_back(std::move(r));
  }
  ComparisonRow oc;
  oc.source = "OpenCitations";
  oc.brs_in_source = oc_brs;
  for (auto& [omid, n] : incoming_counts) oc.citations += n;
  oc.ratio = text::ratio(oc.citations, oc.brs_in_source);
  rows.push_back(std::move(oc));
  return rows;
}

std::vector<std::pair<std::string, std::uint64_t>> top_types(const std::vector<std::string>& iris_types, std::size_t n,
                                                             const TypeLabels* labels) {
  TypeGroups groups;
  std::map<std::string, std::uint64_t> counts;
  for (auto& t : iris_types) {
    groups.see(t, labels);
    ++counts[dedup::type_key(t)];
  }
  std::vector<std::pair<std::string, std::uint64_t>> keyed(counts.begin(), counts.end());
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (keyed.size() > n) keyed.resize(n);
  for (auto& [k, c] : keyed) k = groups.label[k];
  return keyed;
}

void write_year_histogram(std::ostream& out, const iris::YearHistogram& h) {
  csv::Writer w(out);
  w.row({"year", "count"});
  if (h.by_year.empty()) return;
  const int first = h.by_year.begin()->first, last = h.by_year.rbegin()->first;
  for (int y = first; y <= last; ++y) {
    auto it = h.by_year.find(y);
    w.row({std::string_view(std::to_string(y)), std::string_view(std::to_string(it == h.by_year.end() ? 0 : it->second))});
  }
}

std::string headline(std::uint64_t in_meta, std::uint64_t unique, std::uint64_t dump_total) {
  return text::with_thousands(in_meta) + " (" + text::ratio(in_meta * 100, unique, 1) + "% of deduplicated, " +
         text::ratio(in_meta * 100, dump_total, 1) + "% of dump)";
}

// ---------------------------------------------------------------------------

namespace {

std::string md_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out;
}

std::string md_table(const csv::Table& t) {
  std::ostringstream o;
  o << '|';
  for (auto& n : t.header.names()) o << ' ' << md_escape(n) << " |";
  o << "\n|";
  for (std::size_t i = 0; i < t.header.names().size(); ++i) o << " --- |";
  o << '\n';
  for (auto& row : t.rows) {
    o << '|';
    for (std::size_t i = 0; i < t.header.names().size(); ++i) o << ' ' << md_escape(csv::cell(row, i)) << " |";
    o << '\n';
  }
  return o.str();
}

std::string md_table_file(const fs::path& p) { return md_table(csv::read_table(p)); }

template <typename Fn>
void write_csv(const fs::path& path, Fn&& fn) {
  io::AtomicFile f(path);
  fn(f.stream());
  f.commit();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(io::read_text(p));
  } catch (const json::exception& e) {
    throw InputError(p.string() + ": " + e.what());
  }
}

std::map<std::string, std::uint64_t> read_incoming(const fs::path& p) {
  std::map<std::string, std::uint64_t> m;
  auto t = csv::read_table(p);
  const auto c_omid = t.header.require("omid", p.filename().string());
  const auto c_n = t.header.require("count", p.filename().string());
  for (auto& row : t.rows) {
    const auto n = csv::cell(row, c_n);
    m[std::string(csv::cell(row, c_omid))] = text::all_digits(n) ? std::stoull(std::string(n)) : 0;
  }
  return m;
}

}  // namespace

RenderResult render_reports(const fs::path& run_dir, const fs::path& out_dir, const ReportConfig& config) {
  RenderResult result;
  fs::create_directories(out_dir);
  const auto trim = run_dir / "trim", validate = run_dir / "validate", dedup_dir = run_dir / "dedup",
             match_dir = run_dir / "match", scan_dir = run_dir / "scan", enrich_dir = run_dir / "enrich";
  auto have = [](const fs::path& p) { return fs::exists(p); };

  std::optional<TypeLabels> labels;
  if (!config.type_labels.empty() && have(config.type_labels)) labels = TypeLabels::load(config.type_labels);
  const TypeLabels* lp = labels ? &*labels : nullptr;

  std::ostringstream md;
  md << "# Coverage report\n\n";
  auto not_run = [&](std::string_view section) {
    md << "_not run_\n\n";
    result.sections[std::string(section)] = false;
  };
  auto done = [&](std::string_view section) { result.sections[std::string(section)] = true; };

  // Load what exists up front; sections below only format.
  std::optional<json> ingest;
  if (have(trim / "ingest_stats.json")) ingest = read_json(trim / "ingest_stats.json");
  std::optional<std::vector<dedup::UniqueRow>> unique;
  if (have(dedup_dir / "unique_pids.csv")) unique = dedup::read_unique(dedup_dir / "unique_pids.csv");
  std::optional<std::vector<match::MatchRow>> in_meta, not_in_meta;
  if (have(match_dir / "iris_in_meta.csv") && have(match_dir / "iris_not_in_meta.csv")) {
    in_meta = match::read_in_meta(match_dir / "iris_in_meta.csv");
    not_in_meta = match::read_not_in_meta(match_dir / "iris_not_in_meta.csv");
  }

  md << "## Headline\n\n";
  if (ingest && unique && in_meta) {
    const std::uint64_t dump_total = ingest->value("total_records", 0ull);
    md << "IRIS BRs found in OpenCitations Meta: " << headline(in_meta->size(), unique->size(), dump_total) << "\n\n";
    done("headline");
  } else {
    not_run("headline");
  }

  md << "## Dump split\n\n";
  if (ingest) {
    const std::uint64_t with_pid = ingest->value("with_pid", 0ull), no_pid = ingest->value("no_pid", 0ull);
    write_csv(out_dir / "dump_split.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"dataset", "records"});
      w.row({std::string_view("with_pid"), std::string_view(std::to_string(with_pid))});
      w.row({std::string_view("no_pid"), std::string_view(std::to_string(no_pid))});
      w.row({std::string_view("total"), std::string_view(std::to_string(with_pid + no_pid))});
    });
    md << md_table_file(out_dir / "dump_split.csv") << '\n';
    done("dump_split");
  } else {
    not_run("dump_split");
  }

  md << "## Identifier validation\n\n";
  if (have(validate / "validation_stats.csv")) {
    fs::copy_file(validate / "validation_stats.csv", out_dir / "validation_stats.csv",
                  fs::copy_options::overwrite_existing);
    md << md_table_file(out_dir / "validation_stats.csv") << '\n';
    done("validation");
  } else {
    not_run("validation");
  }

  md << "## Deduplication\n\n";
  if (have(dedup_dir / "unique_by_scheme.csv") && have(dedup_dir / "duplicates.csv")) {
    fs::copy_file(dedup_dir / "unique_by_scheme.csv", out_dir / "unique_by_scheme.csv",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(dedup_dir / "duplicates.csv", out_dir / "duplicates.csv", fs::copy_options::overwrite_existing);
    md << "Unique identifiers by scheme:\n\n" << md_table_file(out_dir / "unique_by_scheme.csv") << '\n';
    md << "Duplicated identifiers:\n\n" << md_table_file(out_dir / "duplicates.csv") << '\n';
    done("dedup");
  } else {
    not_run("dedup");
  }

  md << "## Records without identifiers: top types\n\n";
  if (have(trim / "iris_no_id.csv")) {
    auto ds = iris::read_no_id(trim / "iris_no_id.csv");
    std::vector<std::string> types;
    for (auto& r : ds.records) types.push_back(r.iris_type);
    auto top = top_types(types, config.top_n, lp);
    write_csv(out_dir / "no_id_top_types.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"iris_type", "count"});
      for (auto& [t, n] : top) w.row({std::string_view(t), std::string_view(std::to_string(n))});
    });
    md << md_table_file(out_dir / "no_id_top_types.csv") << '\n';
    done("no_id_types");
  } else {
    not_run("no_id_types");
  }

  md << "## Coverage by type\n\n";
  if (unique && in_meta) {
    auto rows = coverage_by_type(*unique, *in_meta, lp);
    write_csv(out_dir / "coverage_by_type.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"iris_type", "iris_count", "meta_count", "percent"});
      for (auto& r : rows)
        w.row({std::string_view(r.iris_type), std::string_view(std::to_string(r.iris_count)),
               std::string_view(std::to_string(r.meta_count)), std::string_view(r.percent)});
    });
    md << md_table_file(out_dir / "coverage_by_type.csv") << '\n';
    done("coverage");
  } else {
    not_run("coverage");
  }

  md << "## Type alignment\n\n";
  if (in_meta && !config.type_mapping.empty() && have(config.type_mapping)) {
    auto mapping = TypeMapping::load(config.type_mapping);
    auto a = type_mismatch_matrix(*in_meta, mapping, lp);
    write_csv(out_dir / "type_alignment.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"class", "count"});
      w.row({std::string_view("coherent"), std::string_view(std::to_string(a.coherent))});
      w.row({std::string_view("mismatched"), std::string_view(std::to_string(a.mismatched))});
    });
    write_csv(out_dir / "type_mismatch_matrix.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"iris_type", "expected_oc_type", "observed_oc_type", "count"});
      for (auto& c : a.matrix)
        w.row({std::string_view(c.iris_type), std::string_view(c.expected), std::string_view(c.observed),
               std::string_view(std::to_string(c.count))});
    });
    md << md_table_file(out_dir / "type_alignment.csv") << '\n'
       << "Mismatches:\n\n"
       << md_table_file(out_dir / "type_mismatch_matrix.csv") << '\n';
    done("type_alignment");
  } else {
    not_run("type_alignment");
  }

  md << "## Identifiers not found in Meta\n\n";
  if (not_in_meta) {
    auto b = match::not_in_meta_breakdowns(*not_in_meta);
    std::uint64_t temporal = 0;
    for (auto& r : *not_in_meta)
      if (r.status == match::Status::ExcludedTemporal) ++temporal;
    auto write_pairs = [&](const fs::path& p, std::string_view key, const auto& pairs, bool relabel) {
      write_csv(p, [&](std::ostream& o) {
        csv::Writer w(o);
        w.row({key, std::string_view("count")});
        for (auto& [k, n] : pairs) {
          const auto label = relabel ? display(k, lp) : k;
          w.row({std::string_view(label), std::string_view(std::to_string(n))});
        }
      });
    };
    write_pairs(out_dir / "not_in_meta_by_scheme.csv", "scheme", b.by_scheme, false);
    write_pairs(out_dir / "not_in_meta_by_type.csv", "iris_type", b.by_type, true);
    md << "Total: " << text::with_thousands(not_in_meta->size()) << " (of which "
       << text::with_thousands(temporal) << " excluded by the publication-year cutoff)\n\n"
       << md_table_file(out_dir / "not_in_meta_by_scheme.csv") << '\n'
       << md_table_file(out_dir / "not_in_meta_by_type.csv") << '\n';
    done("not_in_meta");
  } else {
    not_run("not_in_meta");
  }

  md << "## Citation roles\n\n";
  if (have(scan_dir / "tally.csv")) {
    fs::copy_file(scan_dir / "tally.csv", out_dir / "citation_roles.csv", fs::copy_options::overwrite_existing);
    md << md_table_file(out_dir / "citation_roles.csv") << '\n';
    if (have(scan_dir / "scan_stats.json")) {
      auto st = read_json(scan_dir / "scan_stats.json");
      md << "Edges without a creation date: " << st.value("year_from_meta", 0ull)
         << " dated from the citing record's Meta year, " << st.value("year_unknown", 0ull)
         << " kept undated.\n\n";
    }
    done("citation_roles");
  } else {
    not_run("citation_roles");
  }

  md << "## Citation counts by source\n\n";
  if (have(scan_dir / "incoming_counts.csv") && in_meta && unique) {
    std::set<std::string> known;
    for (auto& u : *unique) known.insert(u.item_id);
    std::vector<ExternalCounts> ext;
    for (auto& e : config.externals) ext.push_back(load_external_counts(e.source, e.path));
    auto rows = citation_comparison(in_meta->size(), read_incoming(scan_dir / "incoming_counts.csv"), ext, known,
                                    &result.warnings);
    write_csv(out_dir / "citation_comparison.csv", [&](std::ostream& o) {
      csv::Writer w(o);
      w.row({"source", "brs_in_source", "citations", "ratio"});
      for (auto& r : rows)
        w.row({std::string_view(r.source), std::string_view(std::to_string(r.brs_in_source)),
               std::string_view(std::to_string(r.citations)), std::string_view(r.ratio)});
    });
    md << md_table_file(out_dir / "citation_comparison.csv") << '\n';
    done("citation_comparison");
  } else {
    not_run("citation_comparison");
  }

  md << "## Publication years\n\n";
  if (have(trim / "iris_candidates.csv") && have(trim / "iris_no_id.csv")) {
    auto with = iris::read_candidates(trim / "iris_candidates.csv");
    auto without = iris::read_no_id(trim / "iris_no_id.csv");
    std::vector<std::optional<int>> years;
    for (auto& r : with.records) years.push_back(r.pub_year);
    for (auto& r : without.records) years.push_back(r.pub_year);
    auto h = iris::year_histogram(years, config.from_year);
    write_csv(out_dir / "iris_year_histogram.csv", [&](std::ostream& o) { write_year_histogram(o, h); });
    md << "IRIS: `iris_year_histogram.csv` (" << h.unknown << " without a year, " << h.before_range << " before "
       << config.from_year << ")\n\n";
    done("iris_years");
  } else {
    not_run("iris_years");
  }
  if (have(match_dir / "meta_year_histogram.csv")) {
    fs::copy_file(match_dir / "meta_year_histogram.csv", out_dir / "meta_year_histogram.csv",
                  fs::copy_options::overwrite_existing);
    md << "OpenCitations Meta: `meta_year_histogram.csv`\n\n";
    done("meta_years");
  } else {
    md << "OpenCitations Meta: ";
    not_run("meta_years");
  }

  md << "## Crossref reconciliation of records without identifiers\n\n";
  if (have(enrich_dir / "enrich_summary.json")) {
    auto s = read_json(enrich_dir / "enrich_summary.json");
    md << "Queried " << s.value("records", 0ull) << ", reconciled " << s.value("reconciled", 0ull) << ", in Meta "
       << s.value("in_meta", 0ull) << ", shared DOIs " << s.value("shared_dois", 0ull) << " (covering "
       << s.value("shared_items", 0ull) << " records).\n\n";
    done("enrich");
  } else {
    not_run("enrich");
  }

  if (!result.warnings.empty()) {
    md << "## Warnings\n\n";
    for (auto& w : result.warnings) md << "- " << w << '\n';
    md << '\n';
  }
  io::write_text_atomic(out_dir / "summary.md", md.str());
  return result;
}

}  // namespace ocov::report
