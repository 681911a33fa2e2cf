#include "ocov/iris_ingest.hpp"

#include <future>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/text.hpp"

namespace ocov::iris {

namespace {

using nlohmann::json;

const std::set<std::string, std::less<>> kCanonicalFields = {
    "item_id", "title",  "pub_date", "iris_type",    "doi",     "pmid",    "isbn", "id_scheme",
    "id_value", "language", "publisher", "venue", "author_count", "authors", "editors",
};

const std::set<std::string, std::less<>> kAuxFields = {"language", "publisher", "venue",
                                                       "author_count", "authors", "editors"};

std::optional<FileRole> role_from_name(std::string_view s) {
  static const std::pair<std::string_view, FileRole> kRoles[] = {
      {"master", FileRole::Master},       {"identifier", FileRole::Identifier}, {"description", FileRole::Description},
      {"language", FileRole::Language},   {"publisher", FileRole::Publisher},   {"relation", FileRole::Relation},
      {"person", FileRole::Person},
  };
  for (auto& [name, role] : kRoles)
    if (name == s) return role;
  return std::nullopt;
}

std::optional<std::string> non_blank(std::string_view cell) {
  auto t = text::trim(cell);
  if (t.empty()) return std::nullopt;
  return std::string(t);
}

}  // namespace

std::string_view role_name(FileRole r) {
  switch (r) {
    case FileRole::Master: return "master";
    case FileRole::Identifier: return "identifier";
    case FileRole::Description: return "description";
    case FileRole::Language: return "language";
    case FileRole::Publisher: return "publisher";
    case FileRole::Relation: return "relation";
    case FileRole::Person: return "person";
  }
  return "";
}

const std::string* FileMapping::column(std::string_view canonical) const {
  for (auto& [k, v] : columns)
    if (k == canonical) return &v;
  return nullptr;
}

const FileMapping* DumpAdapter::find(FileRole role) const {
  for (auto& f : files)
    if (f.role == role) return &f;
  return nullptr;
}

DumpAdapter DumpAdapter::from_json(const std::string& json_text) {
  // nlohmann keeps only the last of repeated keys, so duplicates are caught
  // while parsing.
  std::vector<std::set<std::string>> seen_keys;
  std::string duplicate;
  json::parser_callback_t cb = [&](int, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::object_start) {
      seen_keys.emplace_back();
    } else if (event == json::parse_event_t::object_end) {
      seen_keys.pop_back();
    } else if (event == json::parse_event_t::key && !seen_keys.empty()) {
      const auto key = parsed.get<std::string>();
      if (!seen_keys.back().insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(json_text, cb);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("adapter: ") + e.what());
  }
  if (!duplicate.empty()) throw ConfigError("adapter: key '" + duplicate + "' mapped more than once");

  DumpAdapter adapter;
  if (doc.contains("delimiter")) {
    const auto d = doc["delimiter"].get<std::string>();
    if (d.size() != 1) throw ConfigError("adapter: delimiter must be a single character");
    adapter.delimiter = d[0];
  }
  if (!doc.contains("files") || !doc["files"].is_object()) throw ConfigError("adapter: missing 'files' object");
  for (auto& [role_key, spec] : doc["files"].items()) {
    auto role = role_from_name(role_key);
    if (!role) throw ConfigError("adapter: unknown file role '" + role_key + "'");
    FileMapping m;
    m.role = *role;
    m.file = spec.at("file").get<std::string>();
    m.required = spec.value("required", false);
    if (spec.contains("columns")) {
      for (auto& [canonical, column] : spec["columns"].items()) {
        if (!kCanonicalFields.count(canonical))
          throw ConfigError("adapter: unknown canonical field '" + canonical + "' in " + role_key);
        m.columns.emplace_back(canonical, column.get<std::string>());
      }
    }
    if (!m.column("item_id")) throw ConfigError("adapter: file role '" + role_key + "' has no item_id column");
    adapter.files.push_back(std::move(m));
  }
  if (!adapter.find(FileRole::Master)) throw ConfigError("adapter: a 'master' file is required");
  return adapter;
}

DumpAdapter DumpAdapter::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("adapter file not found: " + path.string());
  return from_json(io::read_text(path));
}

namespace {

struct ParsedFile {
  const FileMapping* mapping = nullptr;
  std::vector<std::pair<std::string, std::size_t>> fields;  // canonical -> index into values
  std::vector<csv::Row> rows;                               // values in `fields` order, item_id first
  std::uint64_t row_count = 0;
};

ParsedFile parse_file(const std::filesystem::path& path, const FileMapping& m, char delim) {
  ParsedFile pf;
  pf.mapping = &m;
  csv::Reader reader(path, delim);
  auto header = csv::read_header(reader);
  std::vector<std::size_t> src;
  // item_id first so values[0] is always the key.
  auto add = [&](const std::string& canonical, const std::string& column) {
    src.push_back(header.require(column, path.filename().string()));
    pf.fields.emplace_back(canonical, pf.fields.size());
  };
  add("item_id", *m.column("item_id"));
  for (auto& [canonical, column] : m.columns)
    if (canonical != "item_id") add(canonical, column);

  csv::Row row;
  while (reader.next(row)) {
    ++pf.row_count;
    csv::Row values;
    values.reserve(src.size());
    for (auto i : src) values.emplace_back(csv::cell(row, i));
    pf.rows.push_back(std::move(values));
  }
  return pf;
}

void apply_field(Record& r, std::string_view canonical, std::string_view cell, const IngestOptions& opts,
                 IngestStats& stats, std::string_view id_scheme) {
  auto v = non_blank(cell);
  if (!v) return;
  if (canonical == "title") {
    if (!r.title) r.title = *v;
  } else if (canonical == "pub_date") {
    if (!r.pub_date) {
      r.pub_date = *v;
      r.pub_year = text::plausible_year(*v, opts.min_year, opts.max_year);
    }
  } else if (canonical == "iris_type") {
    if (r.iris_type.empty()) r.iris_type = *v;
  } else if (canonical == "doi" || canonical == "pmid" || canonical == "isbn") {
    r.identifiers.push_back({*pid::scheme_from_prefix(canonical), std::string(cell)});
  } else if (canonical == "id_value") {
    auto scheme = pid::scheme_from_prefix(text::lower(text::trim(id_scheme)));
    if (scheme)
      r.identifiers.push_back({*scheme, std::string(cell)});
    else
      ++stats.ignored_identifiers;
  } else if (kAuxFields.count(canonical)) {
    r.aux.try_emplace(std::string(canonical), *v);
  }
}

void apply_row(Record& r, const ParsedFile& pf, const csv::Row& values, const IngestOptions& opts, IngestStats& stats) {
  std::string_view id_scheme;
  for (auto& [canonical, idx] : pf.fields)
    if (canonical == "id_scheme") id_scheme = values[idx];
  for (auto& [canonical, idx] : pf.fields) {
    if (canonical == "item_id" || canonical == "id_scheme") continue;
    apply_field(r, canonical, values[idx], opts, stats, id_scheme);
  }
}

}  // namespace

IngestResult load_iris_dump(const std::filesystem::path& directory, const DumpAdapter& adapter,
                            const IngestOptions& opts) {
  if (!std::filesystem::is_directory(directory))
    throw InputError("CRIS dump directory not found: " + directory.string());

  IngestResult result;
  auto& stats = result.stats;

  std::vector<const FileMapping*> present;
  for (auto& m : adapter.files) {
    const auto path = directory / m.file;
    if (!std::filesystem::exists(path)) {
      if (m.required) throw InputError("required dump file missing: " + path.string());
      stats.warnings.push_back("optional file missing: " + m.file);
      continue;
    }
    present.push_back(&m);
  }

  // Files are parsed concurrently; the join below is the only point where
  // records are mutated.
  std::vector<std::future<ParsedFile>> jobs;
  for (auto* m : present) {
    jobs.push_back(std::async(std::launch::async, [&directory, m, delim = adapter.delimiter] {
      return parse_file(directory / m->file, *m, delim);
    }));
  }
  std::vector<ParsedFile> parsed;
  for (auto& j : jobs) parsed.push_back(j.get());

  std::unordered_map<std::string, std::size_t> index;
  for (auto& pf : parsed) {
    stats.rows_per_file[pf.mapping->file] = pf.row_count;
    if (pf.mapping->role != FileRole::Master) continue;
    for (auto& values : pf.rows) {
      auto id = non_blank(values[0]);
      if (!id) {
        ++stats.skipped_missing_id;
        continue;
      }
      auto [it, inserted] = index.try_emplace(*id, result.records.size());
      if (!inserted) {
        ++stats.duplicate_master_rows;
        continue;
      }
      Record r;
      r.item_id = *id;
      apply_row(r, pf, values, opts, stats);
      result.records.push_back(std::move(r));
    }
  }
  for (auto& pf : parsed) {
    if (pf.mapping->role == FileRole::Master) continue;
    for (auto& values : pf.rows) {
      auto id = non_blank(values[0]);
      if (!id) {
        ++stats.skipped_missing_id;
        continue;
      }
      auto it = index.find(*id);
      if (it == index.end()) {
        ++stats.orphan_rows;
        continue;
      }
      apply_row(result.records[it->second], pf, values, opts, stats);
    }
  }
  stats.total_records = result.records.size();
  return result;
}

Partition partition_by_pid(const std::vector<Record>& records) {
  Partition p;
  for (auto& r : records) (r.identifiers.empty() ? p.no_pid : p.with_pid).push_back(r);
  return p;
}

bool has_field(const Record& r, std::string_view field) {
  if (field == "title") return r.title.has_value();
  if (field == "pub_year") return r.pub_year.has_value();
  if (field == "pub_date") return r.pub_date.has_value();
  if (field == "iris_type") return !r.iris_type.empty();
  if (field == "identifiers") return !r.identifiers.empty();
  auto it = r.aux.find(std::string(field));
  return it != r.aux.end() && !it->second.empty();
}

int completeness_score(const Record& r, const std::vector<std::string>& fields) {
  int score = 0;
  for (auto& f : fields)
    if (has_field(r, f)) ++score;
  return score;
}

YearHistogram year_histogram(const std::vector<std::optional<int>>& years, int from_year) {
  YearHistogram h;
  for (auto& y : years) {
    if (!y)
      ++h.unknown;
    else if (*y < from_year)
      ++h.before_range;
    else
      ++h.by_year[*y];
  }
  return h;
}

YearHistogram year_histogram(const std::vector<Record>& records, int from_year) {
  std::vector<std::optional<int>> years;
  years.reserve(records.size());
  for (auto& r : records) years.push_back(r.pub_year);
  return year_histogram(years, from_year);
}

void write_candidates(std::ostream& out, const std::vector<Record>& with_pid, const std::vector<std::string>& fields) {
  csv::Writer w(out);
  w.row(kCandidatesHeader);
  for (auto& r : with_pid) {
    const auto score = std::to_string(completeness_score(r, fields));
    const auto year = text::year_or_empty(r.pub_year);
    for (auto& id : r.identifiers) {
      w.row({std::string_view(r.item_id), pid::prefix(id.scheme), std::string_view(id.text),
             std::string_view(r.title ? *r.title : std::string()), std::string_view(year),
             std::string_view(r.iris_type), std::string_view(score)});
    }
  }
}

void write_no_id(std::ostream& out, const std::vector<Record>& no_pid, const std::vector<std::string>& fields) {
  csv::Writer w(out);
  w.row(kNoIdHeader);
  static const std::string kEmpty;
  for (auto& r : no_pid) {
    auto authors = r.aux.find("authors");
    w.row({std::string_view(r.item_id), std::string_view(r.title ? *r.title : kEmpty),
           std::string_view(text::year_or_empty(r.pub_year)), std::string_view(r.iris_type),
           std::string_view(std::to_string(completeness_score(r, fields))),
           std::string_view(authors == r.aux.end() ? kEmpty : authors->second)});
  }
}

namespace {

std::optional<int> parse_int(std::string_view s) {
  if (!text::all_digits(s)) return std::nullopt;
  return std::stoi(std::string(s));
}

}  // namespace

Dataset read_candidates(const std::filesystem::path& path) {
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_id = h.require("item_id", src), c_scheme = h.require("scheme", src), c_raw = h.require("raw_value", src),
             c_title = h.require("title", src), c_year = h.require("pub_year", src),
             c_type = h.require("iris_type", src), c_score = h.require("completeness", src);
  Dataset ds;
  std::unordered_map<std::string, std::size_t> index;
  csv::Row row;
  while (reader.next(row)) {
    std::string id(csv::cell(row, c_id));
    auto [it, inserted] = index.try_emplace(id, ds.records.size());
    if (inserted) {
      Record r;
      r.item_id = id;
      if (auto t = non_blank(csv::cell(row, c_title))) r.title = *t;
      r.pub_year = parse_int(csv::cell(row, c_year));
      r.iris_type = std::string(csv::cell(row, c_type));
      ds.records.push_back(std::move(r));
      ds.completeness[id] = parse_int(csv::cell(row, c_score)).value_or(0);
    }
    auto scheme = pid::scheme_from_prefix(csv::cell(row, c_scheme));
    if (!scheme) throw InputError(src + ": unknown scheme '" + std::string(csv::cell(row, c_scheme)) + "'");
    ds.records[it->second].identifiers.push_back({*scheme, std::string(csv::cell(row, c_raw))});
  }
  return ds;
}

Dataset read_no_id(const std::filesystem::path& path) {
  csv::Reader reader(path);
  auto h = csv::read_header(reader);
  const auto src = path.filename().string();
  const auto c_id = h.require("item_id", src), c_title = h.require("title", src), c_year = h.require("pub_year", src),
             c_type = h.require("iris_type", src), c_score = h.require("completeness", src);
  const auto c_authors = h.find("authors");
  Dataset ds;
  csv::Row row;
  while (reader.next(row)) {
    Record r;
    r.item_id = std::string(csv::cell(row, c_id));
    if (auto t = non_blank(csv::cell(row, c_title))) r.title = *t;
    r.pub_year = parse_int(csv::cell(row, c_year));
    r.iris_type = std::string(csv::cell(row, c_type));
    if (c_authors) {
      if (auto a = non_blank(csv::cell(row, *c_authors))) r.aux["authors"] = *a;
    }
    ds.completeness[r.item_id] = parse_int(csv::cell(row, c_score)).value_or(0);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace ocov::iris
