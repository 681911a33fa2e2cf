#include "ocov/pipeline.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ocov/citation_scan.hpp"
#include "ocov/dedup.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/iris_ingest.hpp"
#include "ocov/oc_match.hpp"
#include "ocov/selector.hpp"
#include "ocov/text.hpp"

namespace ocov::pipeline {

using json = nlohmann::json;

fs::path default_data_dir() {
  if (const char* env = std::getenv("OCOV_DATA_DIR"); env && *env) return env;
  return OCOV_DEFAULT_DATA_DIR;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + k + "' in " + where);
}

}  // namespace

Config Config::from_json(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j,
             {"iris_dump", "adapter", "priority_tables", "type_mapping", "type_labels", "meta_dump", "index_dump",
              "run_dir", "cutoff_year", "from_year", "workers", "max_plausible_year", "completeness_fields",
              "isbn_checksum", "external_counts", "crossref"},
             "top level");
  Config c;
  const auto data = default_data_dir();
  c.adapter = data / "iris_adapter.json";
  c.priority_tables = data / "priority_tables.csv";
  c.type_mapping = data / "type_mapping.csv";
  c.type_labels = data / "type_labels.csv";
  c.run_dir = base_dir / "run";
  c.completeness_fields = iris::default_completeness_fields();

  auto path_key = [&](const char* key, fs::path& out) {
    if (j.contains(key)) out = resolve(base_dir, get_as<std::string>(j, key));
  };
  path_key("iris_dump", c.iris_dump);
  path_key("adapter", c.adapter);
  path_key("priority_tables", c.priority_tables);
  path_key("type_mapping", c.type_mapping);
  path_key("type_labels", c.type_labels);
  path_key("meta_dump", c.meta_dump);
  path_key("index_dump", c.index_dump);
  path_key("run_dir", c.run_dir);
  if (j.contains("cutoff_year")) c.cutoff_year = get_as<int>(j, "cutoff_year");
  if (j.contains("from_year")) c.from_year = get_as<int>(j, "from_year");
  if (j.contains("workers")) c.workers = get_as<int>(j, "workers");
  if (j.contains("max_plausible_year") && !j["max_plausible_year"].is_null())
    c.max_plausible_year = get_as<int>(j, "max_plausible_year");
  if (j.contains("completeness_fields"))
    c.completeness_fields = get_as<std::vector<std::string>>(j, "completeness_fields");
  if (j.contains("isbn_checksum")) c.isbn_checksum = get_as<bool>(j, "isbn_checksum");
  if (j.contains("external_counts")) {
    if (!j["external_counts"].is_array()) throw ConfigError("config: 'external_counts' must be a list");
    for (auto& e : j["external_counts"]) {
      check_keys(e, {"source", "path"}, "external_counts");
      if (!e.contains("source") || !e.contains("path"))
        throw ConfigError("config: external_counts entries need 'source' and 'path'");
      c.externals.push_back({get_as<std::string>(e, "source"), resolve(base_dir, get_as<std::string>(e, "path"))});
    }
  }
  if (j.contains("crossref")) {
    const auto& x = j["crossref"];
    check_keys(x,
               {"base_url", "mailto", "rate_limit", "rate_period_ms", "score_threshold", "similarity_floor",
                "cache_dir", "max_retries", "backoff_ms", "workers", "fixtures"},
               "crossref");
    auto& cc = c.crossref.client;
    if (x.contains("base_url")) cc.base_url = get_as<std::string>(x, "base_url");
    if (x.contains("mailto")) cc.mailto = get_as<std::string>(x, "mailto");
    if (x.contains("rate_limit")) cc.rate_limit = get_as<int>(x, "rate_limit");
    if (x.contains("rate_period_ms")) cc.rate_period = std::chrono::milliseconds(get_as<long long>(x, "rate_period_ms"));
    if (x.contains("score_threshold")) cc.score_threshold = get_as<double>(x, "score_threshold");
    if (x.contains("similarity_floor")) cc.similarity_floor = get_as<double>(x, "similarity_floor");
    if (x.contains("cache_dir")) cc.cache_dir = resolve(base_dir, get_as<std::string>(x, "cache_dir"));
    if (x.contains("max_retries")) cc.max_retries = get_as<int>(x, "max_retries");
    if (x.contains("backoff_ms")) cc.backoff_initial = std::chrono::milliseconds(get_as<long long>(x, "backoff_ms"));
    if (x.contains("workers")) cc.workers = get_as<int>(x, "workers");
    if (x.contains("fixtures")) c.crossref.fixtures = resolve(base_dir, get_as<std::string>(x, "fixtures"));
  }
  if (c.workers < 1) throw ConfigError("config: workers must be at least 1");
  if (c.cutoff_year < 1000 || c.cutoff_year > 9999) throw ConfigError("config: cutoff_year out of range");
  return c;
}

Config Config::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  auto base = fs::absolute(path).parent_path();
  Config c = from_json(io::read_text(path), base);
  c.source = path;
  return c;
}

void apply(Config& c, const Overrides& o) {
  if (o.cutoff_year) {
    if (*o.cutoff_year < 1000 || *o.cutoff_year > 9999) throw ConfigError("--cutoff-year out of range");
    c.cutoff_year = *o.cutoff_year;
  }
  if (o.workers) {
    if (*o.workers < 1) throw ConfigError("--workers must be at least 1");
    c.workers = *o.workers;
  }
  if (o.run_dir) c.run_dir = *o.run_dir;
  if (o.mailto) c.crossref.client.mailto = *o.mailto;
  if (o.rate_limit) c.crossref.client.rate_limit = *o.rate_limit;
  if (o.score_threshold) c.crossref.client.score_threshold = *o.score_threshold;
  if (o.cache_dir) c.crossref.client.cache_dir = *o.cache_dir;
}

// ---------------------------------------------------------------------------
// Stages and manifest

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Trim: return "trim";
    case Stage::Validate: return "validate";
    case Stage::Dedup: return "dedup";
    case Stage::Match: return "match";
    case Stage::Scan: return "scan";
    case Stage::Enrich: return "enrich";
    case Stage::Report: return "report";
  }
  return "";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : kAllStages)
    if (stage_name(s) == name) return s;
  return std::nullopt;
}

std::vector<Stage> upstream(Stage s) {
  switch (s) {
    case Stage::Trim: return {};
    case Stage::Validate: return {Stage::Trim};
    case Stage::Dedup: return {Stage::Trim, Stage::Validate};
    case Stage::Match: return {Stage::Trim, Stage::Dedup};
    case Stage::Scan: return {Stage::Match};
    case Stage::Enrich: return {Stage::Trim};
    case Stage::Report: return {};  // renders whatever exists
  }
  return {};
}

namespace {

std::vector<Stage> downstream(Stage s) {
  std::vector<Stage> out;
  std::set<Stage> reached{s};
  bool grew = true;
  while (grew) {
    grew = false;
    for (auto t : kAllStages) {
      if (reached.count(t)) continue;
      for (auto u : upstream(t))
        if (reached.count(u)) {
          reached.insert(t);
          out.push_back(t);
          grew = true;
          break;
        }
    }
  }
  // The report reflects every stage.
  if (s != Stage::Report && !reached.count(Stage::Report)) out.push_back(Stage::Report);
  return out;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Pending: return "pending";
    case Status::Complete: return "complete";
    case Status::Failed: return "failed";
  }
  return "";
}

Manifest Manifest::load_or_create(const fs::path& run_dir) {
  Manifest m;
  const auto path = run_dir / "manifest.json";
  for (auto s : kAllStages) m.stages[s] = {};
  if (!fs::exists(path)) {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    m.run_id = std::string(buf) + "-" + std::to_string(::getpid());
    return m;
  }
  json j;
  try {
    j = json::parse(io::read_text(path));
    m.run_id = j.at("run_id").get<std::string>();
    if (j.contains("parameters")) m.parameters = j["parameters"].get<std::map<std::string, std::string>>();
    for (auto& [name, rec] : j.at("stages").items()) {
      auto s = parse_stage(name);
      if (!s) continue;
      StageRecord r;
      const auto st = rec.value("status", "pending");
      r.status = st == "complete" ? Status::Complete : st == "failed" ? Status::Failed : Status::Pending;
      r.input_digest = rec.value("input_digest", "");
      if (rec.contains("outputs")) r.outputs = rec["outputs"].get<std::map<std::string, std::string>>();
      r.started = rec.value("started", "");
      r.finished = rec.value("finished", "");
      r.error = rec.value("error", "");
      m.stages[*s] = r;
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": unreadable manifest (" + e.what() + ")");
  }
  return m;
}

void Manifest::save(const fs::path& run_dir) const {
  json j;
  j["run_id"] = run_id;
  j["parameters"] = parameters;
  json stages_j = json::object();
  for (auto s : kAllStages) {
    const auto& r = at(s);
    json rec;
    rec["status"] = status_name(r.status);
    if (!r.input_digest.empty()) rec["input_digest"] = r.input_digest;
    if (!r.outputs.empty()) rec["outputs"] = r.outputs;
    if (!r.started.empty()) rec["started"] = r.started;
    if (!r.finished.empty()) rec["finished"] = r.finished;
    if (!r.error.empty()) rec["error"] = r.error;
    stages_j[std::string(stage_name(s))] = rec;
  }
  j["stages"] = stages_j;
  fs::create_directories(run_dir);
  io::write_text_atomic(run_dir / "manifest.json", j.dump(2) + "\n");
}

const StageRecord& Manifest::at(Stage s) const {
  static const StageRecord empty;
  auto it = stages.find(s);
  return it == stages.end() ? empty : it->second;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  return kExitRuntime;
}

// ---------------------------------------------------------------------------
// Stage bodies

namespace {

/// Accumulates everything a stage's output depends on.
class Digest {
 public:
  void add(std::string_view label, std::string_view value) {
    h_ = io::fnv1a(label, h_);
    h_ = io::fnv1a("=", h_);
    h_ = io::fnv1a(value, h_);
    h_ = io::fnv1a("\n", h_);
  }
  void add_file(std::string_view label, const fs::path& p) {
    if (!fs::exists(p)) throw InputError("missing input: " + p.string());
    add(label, io::hex64(io::file_digest(p)));
  }
  // Large dumps: identity by path, size and modification time.
  void add_tree(std::string_view label, const fs::path& root) {
    for (auto& p : io::list_shards(root)) {
      std::error_code ec;
      add(label, fs::absolute(p).string() + ":" + std::to_string(fs::file_size(p, ec)) + ":" +
                     std::to_string(fs::last_write_time(p, ec).time_since_epoch().count()));
    }
  }
  std::string hex() const { return io::hex64(h_); }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

struct Context {
  const Config& config;
  Manifest& manifest;
  std::ostream& log;

  fs::path dir(Stage s) const { return config.run_dir / stage_name(s); }
  fs::path work_dir(Stage s, const std::string& digest) const {
    return config.run_dir / ".work" / (std::string(stage_name(s)) + "-" + digest);
  }
  pid::Options pid_options() const { return {config.isbn_checksum}; }
};

void require_path(const fs::path& p, std::string_view key, Stage s) {
  if (p.empty())
    throw ConfigError("stage " + std::string(stage_name(s)) + " needs '" + std::string(key) + "' in the config");
  if (!fs::exists(p)) throw InputError(std::string(key) + " not found: " + p.string());
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

json histogram_json(const iris::YearHistogram& h) {
  json by_year = json::object();
  for (auto& [y, n] : h.by_year) by_year[std::to_string(y)] = n;
  return {{"by_year", by_year}, {"unknown", h.unknown}, {"before_range", h.before_range}};
}

std::string input_digest(const Context& ctx, Stage s) {
  const auto& c = ctx.config;
  Digest d;
  d.add("stage", stage_name(s));
  for (auto u : upstream(s))
    for (auto& [file, digest] : ctx.manifest.at(u).outputs) d.add(std::string(stage_name(u)) + "/" + file, digest);
  switch (s) {
    case Stage::Trim: {
      require_path(c.iris_dump, "iris_dump", s);
      require_path(c.adapter, "adapter", s);
      d.add_file("adapter", c.adapter);
      auto adapter = iris::DumpAdapter::load(c.adapter);
      for (auto& f : adapter.files)
        if (fs::exists(c.iris_dump / f.file)) d.add_file(f.file, c.iris_dump / f.file);
      d.add("max_year", std::to_string(c.max_year()));
      for (auto& f : c.completeness_fields) d.add("field", f);
      break;
    }
    case Stage::Validate:
      d.add("isbn_checksum", c.isbn_checksum ? "1" : "0");
      break;
    case Stage::Dedup:
      require_path(c.priority_tables, "priority_tables", s);
      d.add_file("priority_tables", c.priority_tables);
      d.add("isbn_checksum", c.isbn_checksum ? "1" : "0");
      break;
    case Stage::Match:
      require_path(c.meta_dump, "meta_dump", s);
      d.add_tree("meta", c.meta_dump);
      d.add("cutoff_year", std::to_string(c.cutoff_year));
      d.add("max_year", std::to_string(c.max_year()));
      d.add("from_year", std::to_string(c.from_year));
      break;
    case Stage::Scan:
      require_path(c.index_dump, "index_dump", s);
      d.add_tree("index", c.index_dump);
      d.add("cutoff_year", std::to_string(c.cutoff_year));
      break;
    case Stage::Enrich: {
      require_path(c.meta_dump, "meta_dump", s);
      d.add_tree("meta", c.meta_dump);
      const auto& x = c.crossref.client;
      d.add("base_url", x.base_url);
      d.add("score_threshold", std::to_string(x.score_threshold));
      d.add("similarity_floor", std::to_string(x.similarity_floor));
      d.add("max_authors", std::to_string(x.max_authors));
      if (!c.crossref.fixtures.empty()) d.add_file("fixtures", c.crossref.fixtures / "index.json");
      break;
    }
    case Stage::Report:
      for (auto u : {Stage::Trim, Stage::Validate, Stage::Dedup, Stage::Match, Stage::Scan, Stage::Enrich}) {
        const auto& r = ctx.manifest.at(u);
        if (r.status != Status::Complete) continue;
        for (auto& [file, digest] : r.outputs) d.add(std::string(stage_name(u)) + "/" + file, digest);
      }
      if (fs::exists(c.type_mapping)) d.add_file("type_mapping", c.type_mapping);
      if (fs::exists(c.type_labels)) d.add_file("type_labels", c.type_labels);
      for (auto& e : c.externals) {
        d.add("external", e.source);
        d.add_file(e.source, e.path);
      }
      d.add("from_year", std::to_string(c.from_year));
      break;
  }
  return d.hex();
}

void run_trim(const Context& ctx, const fs::path& out) {
  const auto& c = ctx.config;
  auto adapter = iris::DumpAdapter::load(c.adapter);
  iris::IngestOptions opts;
  opts.max_year = c.max_year();
  auto ingest = iris::load_iris_dump(c.iris_dump, adapter, opts);
  for (auto& w : ingest.stats.warnings) ctx.log << "  warning: " << w << '\n';
  auto part = iris::partition_by_pid(ingest.records);
  write_file(out / "iris_candidates.csv",
             [&](std::ostream& o) { iris::write_candidates(o, part.with_pid, c.completeness_fields); });
  write_file(out / "iris_no_id.csv", [&](std::ostream& o) { iris::write_no_id(o, part.no_pid, c.completeness_fields); });
  const auto& st = ingest.stats;
  write_json(out / "ingest_stats.json", {{"total_records", st.total_records},
                                         {"with_pid", part.with_pid.size()},
                                         {"no_pid", part.no_pid.size()},
                                         {"skipped_missing_id", st.skipped_missing_id},
                                         {"duplicate_master_rows", st.duplicate_master_rows},
                                         {"orphan_rows", st.orphan_rows},
                                         {"ignored_identifiers", st.ignored_identifiers},
                                         {"rows_per_file", st.rows_per_file},
                                         {"warnings", st.warnings}});
  ctx.log << "  " << st.total_records << " records: " << part.with_pid.size() << " with identifiers, "
          << part.no_pid.size() << " without\n";
}

void run_validate(const Context& ctx, const fs::path& out) {
  auto ds = iris::read_candidates(ctx.dir(Stage::Trim) / "iris_candidates.csv");
  const auto opts = ctx.pid_options();
  auto sel = selector::select_all(ds.records, opts);
  auto stats = selector::validation_stats(ds.records, opts);
  write_file(out / "selected_pids.csv", [&](std::ostream& o) { selector::write_selected(o, sel.selected); });
  write_file(out / "invalid_only.csv", [&](std::ostream& o) { selector::write_invalid_only(o, sel.invalid_only); });
  write_file(out / "validation_stats.csv", [&](std::ostream& o) { selector::write_stats(o, stats); });
  std::map<std::string, std::uint64_t> depth;
  for (auto& s : sel.selected) ++depth[std::to_string(s.fallback_depth)];
  write_json(out / "selection_summary.json", {{"candidates", ds.records.size()},
                                              {"selected", sel.selected.size()},
                                              {"invalid_only", sel.invalid_only.size()},
                                              {"doi_labels_stripped", stats.doi_labels_stripped},
                                              {"fallback_depth", depth}});
  ctx.log << "  " << sel.selected.size() << " selected, " << sel.invalid_only.size() << " with only invalid identifiers\n";
}

void run_dedup(const Context& ctx, const fs::path& out) {
  const auto& c = ctx.config;
  auto ds = iris::read_candidates(ctx.dir(Stage::Trim) / "iris_candidates.csv");
  auto selected = selector::read_selected(ctx.dir(Stage::Validate) / "selected_pids.csv");
  auto tables = dedup::PriorityTables::load(c.priority_tables);
  auto result = dedup::deduplicate(selected, dedup::index_items(ds), tables);
  auto cross = dedup::cross_scheme_collisions(result.groups, ds.records, selected, ctx.pid_options());
  write_file(out / "unique_pids.csv", [&](std::ostream& o) { dedup::write_unique(o, result.groups); });
  write_file(out / "unique_by_scheme.csv", [&](std::ostream& o) { dedup::write_unique_by_scheme(o, result.report); });
  write_file(out / "duplicates.csv", [&](std::ostream& o) { dedup::write_duplicates(o, result.report); });
  write_file(out / "dedup_groups.csv", [&](std::ostream& o) { dedup::write_groups(o, result.groups); });
  write_file(out / "cross_scheme.csv", [&](std::ostream& o) { dedup::write_cross_scheme(o, cross); });
  const auto t = result.report.total();
  ctx.log << "  " << t.unique << " unique identifiers, " << t.removed << " duplicates removed\n";
}

void run_match(const Context& ctx, const fs::path& out, const std::string& digest) {
  const auto& c = ctx.config;
  auto unique = dedup::read_unique(ctx.dir(Stage::Dedup) / "unique_pids.csv");
  auto ds = iris::read_candidates(ctx.dir(Stage::Trim) / "iris_candidates.csv");
  std::unordered_map<std::string, int> year_by_item;
  for (auto& r : ds.records)
    if (r.pub_year) year_by_item[r.item_id] = *r.pub_year;
  std::unordered_map<std::string, int> fallback;
  for (auto& u : unique)
    if (auto it = year_by_item.find(u.item_id); it != year_by_item.end()) fallback[u.pid.str()] = it->second;

  match::MatchOptions opts;
  opts.cutoff_year = c.cutoff_year;
  opts.max_plausible_year = c.max_year();
  opts.run.workers = c.workers;
  opts.run.work_dir = ctx.work_dir(Stage::Match, digest);
  auto shards = io::list_shards(c.meta_dump);
  auto r = match::match_against_meta(unique, shards, fallback, opts, c.from_year);
  write_file(out / "iris_in_meta.csv", [&](std::ostream& o) { match::write_in_meta(o, r.in_meta); });
  write_file(out / "iris_not_in_meta.csv", [&](std::ostream& o) { match::write_not_in_meta(o, r.not_in_meta); });
  write_file(out / "collisions.csv", [&](std::ostream& o) { match::write_collisions(o, r.collisions); });
  write_file(out / "meta_year_histogram.csv",
             [&](std::ostream& o) { report::write_year_histogram(o, r.stats.meta_years); });
  const auto& st = r.stats;
  write_json(out / "match_stats.json", {{"shards", st.shards},
                                        {"meta_rows", st.meta_rows},
                                        {"malformed_rows", st.malformed_rows},
                                        {"matched_rows", st.matched_rows},
                                        {"in_meta", r.in_meta.size()},
                                        {"not_in_meta", r.not_in_meta.size()},
                                        {"collisions", st.collisions},
                                        {"excluded_temporal", st.excluded_temporal},
                                        {"isbn_near_misses", st.isbn_near_misses},
                                        {"meta_years", histogram_json(st.meta_years)}});
  ctx.log << "  " << r.in_meta.size() << " in Meta, " << r.not_in_meta.size() << " not (" << st.shards << " shards, "
          << st.resumed_shards << " resumed)\n";
}

void run_scan(const Context& ctx, const fs::path& out, const std::string& digest) {
  const auto& c = ctx.config;
  auto in_meta = match::read_in_meta(ctx.dir(Stage::Match) / "iris_in_meta.csv");
  scan::OmidSet omids;
  for (auto& m : in_meta)
    if (m.omid) omids.emplace(*m.omid, m.meta_year);
  in_meta.clear();
  in_meta.shrink_to_fit();
  scan::ScanOptions opts;
  opts.cutoff_year = c.cutoff_year;
  opts.run.workers = c.workers;
  opts.run.work_dir = ctx.work_dir(Stage::Scan, digest);
  auto shards = io::list_shards(c.index_dump);
  scan::ScanResult r;
  write_file(out / "iris_in_index.csv", [&](std::ostream& o) { r = scan::scan_index(omids, shards, o, opts); });
  auto counts = scan::incoming_citation_counts(out / "iris_in_index.csv", omids);
  write_file(out / "incoming_counts.csv", [&](std::ostream& o) { scan::write_incoming(o, counts); });
  write_file(out / "tally.csv", [&](std::ostream& o) { scan::write_tally(o, r.tally); });
  const auto& st = r.stats;
  write_json(out / "scan_stats.json", {{"shards", st.shards},
                                       {"rows", st.rows},
                                       {"malformed_rows", st.malformed_rows},
                                       {"oci_mismatches", st.oci_mismatches},
                                       {"bad_timespans", st.bad_timespans},
                                       {"excluded_temporal", st.excluded_temporal},
                                       {"year_from_meta", st.year_from_meta},
                                       {"year_unknown", st.year_unknown},
                                       {"omid_set_size", omids.size()}});
  ctx.log << "  " << r.tally.unique_total << " citations (" << r.tally.citing << " citing, " << r.tally.cited
          << " cited, " << r.tally.both << " both)\n";
}

void run_enrich(const Context& ctx, const fs::path& out, const std::string& digest) {
  const auto& c = ctx.config;
  auto ds = iris::read_no_id(ctx.dir(Stage::Trim) / "iris_no_id.csv");
  auto cfg = c.crossref.client;
  cfg.workers = std::max(1, std::min(cfg.workers, c.workers));
  cfg.cache_dir = cfg.cache_dir.empty() ? enrich::default_cache_dir(c.run_dir / "crossref_cache") : cfg.cache_dir;
  enrich::SystemClock clock;
  std::unique_ptr<enrich::HttpTransport> transport;
  if (!c.crossref.fixtures.empty())
    transport = std::make_unique<enrich::FixtureTransport>(c.crossref.fixtures, &clock);
  else
    transport = enrich::make_https_transport();
  auto results = enrich::enrich_all(ds.records, cfg, *transport, clock);

  std::vector<std::string> wanted;
  for (auto& r : results)
    if (r.candidate_doi) wanted.push_back(r.candidate_doi->str());
  shards::RunOptions run;
  run.workers = c.workers;
  run.work_dir = ctx.work_dir(Stage::Enrich, digest);
  auto present = match::pids_present_in_meta(wanted, io::list_shards(c.meta_dump), run);
  auto summary = enrich::crosscheck_enriched(results, std::set<std::string>(present.begin(), present.end()));
  write_file(out / "enriched.csv", [&](std::ostream& o) { enrich::write_enriched(o, results); });
  write_json(out / "enrich_summary.json", {{"records", summary.records},
                                           {"reconciled", summary.reconciled},
                                           {"in_meta", summary.in_meta},
                                           {"shared_dois", summary.shared_dois},
                                           {"shared_items", summary.shared_items},
                                           {"outcomes", summary.outcomes}});
  ctx.log << "  " << summary.reconciled << " of " << summary.records << " reconciled, " << summary.in_meta
          << " in Meta\n";
}

void run_report(const Context& ctx, const fs::path& out) {
  const auto& c = ctx.config;
  report::ReportConfig rc;
  rc.type_mapping = c.type_mapping;
  rc.type_labels = c.type_labels;
  rc.externals = c.externals;
  rc.from_year = c.from_year;
  auto r = report::render_reports(c.run_dir, out, rc);
  for (auto& w : r.warnings) ctx.log << "  warning: " << w << '\n';
  std::size_t rendered = 0;
  for (auto& [name, ok] : r.sections) rendered += ok;
  ctx.log << "  " << rendered << "/" << r.sections.size() << " sections rendered\n";
}

bool outputs_intact(const fs::path& dir, const StageRecord& r) {
  if (r.outputs.empty()) return false;
  for (auto& [file, digest] : r.outputs) {
    const auto p = dir / file;
    if (!fs::exists(p) || io::hex64(io::file_digest(p)) != digest) return false;
  }
  return true;
}

void clear_work_dirs(const fs::path& run_dir, Stage s, const std::string& keep) {
  const auto root = run_dir / ".work";
  if (!fs::exists(root)) return;
  const std::string prefix = std::string(stage_name(s)) + "-";
  for (auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && name != keep) fs::remove_all(e.path());
  }
}

StageRun execute(Context& ctx, Stage s) {
  const auto& c = ctx.config;
  for (auto u : upstream(s))
    if (ctx.manifest.at(u).status != Status::Complete)
      throw ConfigError("stage " + std::string(stage_name(s)) + " needs " + std::string(stage_name(u)) +
                        " to be complete (it is " + std::string(status_name(ctx.manifest.at(u).status)) + ")");

  const auto digest = input_digest(ctx, s);
  const auto final_dir = ctx.dir(s);
  auto& rec = ctx.manifest.stages[s];
  if (rec.status == Status::Complete && rec.input_digest == digest && outputs_intact(final_dir, rec)) {
    ctx.log << "[" << stage_name(s) << "] up to date\n";
    return {s, true};
  }

  ctx.log << "[" << stage_name(s) << "] running\n";
  const std::string work_name = std::string(stage_name(s)) + "-" + digest;
  clear_work_dirs(c.run_dir, s, work_name);
  const auto previous_outputs = rec.outputs;
  rec = StageRecord{};
  rec.status = Status::Pending;
  rec.started = utc_now();
  ctx.manifest.save(c.run_dir);

  try {
    io::StagingDir staging(final_dir);
    switch (s) {
      case Stage::Trim: run_trim(ctx, staging.path()); break;
      case Stage::Validate: run_validate(ctx, staging.path()); break;
      case Stage::Dedup: run_dedup(ctx, staging.path()); break;
      case Stage::Match: run_match(ctx, staging.path(), digest); break;
      case Stage::Scan: run_scan(ctx, staging.path(), digest); break;
      case Stage::Enrich: run_enrich(ctx, staging.path(), digest); break;
      case Stage::Report: run_report(ctx, staging.path()); break;
    }
    std::map<std::string, std::string> outputs;
    for (auto& e : fs::directory_iterator(staging.path()))
      if (e.is_regular_file()) outputs[e.path().filename().string()] = io::hex64(io::file_digest(e.path()));
    staging.commit();
    rec.outputs = std::move(outputs);
  } catch (const std::exception& e) {
    rec.status = Status::Failed;
    rec.error = e.what();
    rec.finished = utc_now();
    ctx.manifest.save(c.run_dir);
    throw;
  }
  // Anything downstream was computed from the old outputs.
  if (rec.outputs != previous_outputs)
    for (auto d : downstream(s))
      if (ctx.manifest.stages[d].status == Status::Complete) ctx.manifest.stages[d].status = Status::Pending;
  rec.status = Status::Complete;
  rec.input_digest = digest;
  rec.finished = utc_now();
  ctx.manifest.save(c.run_dir);
  std::error_code ec;
  fs::remove_all(c.run_dir / ".work" / work_name, ec);
  return {s, false};
}

}  // namespace

std::vector<StageRun> run(std::string_view name, const Config& config, std::ostream& log) {
  std::vector<Stage> stages;
  if (name == "all") {
    stages = {Stage::Trim, Stage::Validate, Stage::Dedup, Stage::Match, Stage::Scan, Stage::Report};
  } else if (auto s = parse_stage(name)) {
    stages = {*s};
  } else {
    throw ConfigError("unknown stage '" + std::string(name) + "'");
  }
  fs::create_directories(config.run_dir);
  auto manifest = Manifest::load_or_create(config.run_dir);
  manifest.parameters["cutoff_year"] = std::to_string(config.cutoff_year);
  manifest.parameters["from_year"] = std::to_string(config.from_year);
  manifest.parameters["priority_tables"] = config.priority_tables.string();
  manifest.parameters["adapter"] = config.adapter.string();
  manifest.parameters["type_mapping"] = config.type_mapping.string();
  Context ctx{config, manifest, log};
  std::vector<StageRun> runs;
  for (auto s : stages) runs.push_back(execute(ctx, s));
  return runs;
}

}  // namespace ocov::pipeline
