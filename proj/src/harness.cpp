#include "ocov/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/opencitations.hpp"
#include "ocov/text.hpp"

namespace ocov::harness {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Spec

namespace {

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("synth spec: ") + name + " must be in [0, 1]");
}

}  // namespace

SynthSpec SynthSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("synth spec must be an object");
  SynthSpec s;
  static const std::set<std::string> known = {
      "seed",           "records",         "no_pid_rate",     "invalid_only_rate", "scheme_weights",
      "extra_id_rate",  "invalid_rate",    "duplicate_rate",  "duplicate_groups",  "meta_coverage",
      "collision_rate", "post_cutoff_rate", "meta_missing_year_rate", "type_mismatch_rate", "meta_noise_rows",
      "edges",          "both_ends_rate",  "undated_edge_rate", "meta_shards",     "index_shards",
      "cutoff_year",    "external_sources", "external_coverage"};
  for (auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("synth spec: unknown key '" + k + "'");
  try {
    s.seed = j.value("seed", s.seed);
    s.records = j.value("records", s.records);
    s.no_pid_rate = j.value("no_pid_rate", s.no_pid_rate);
    s.invalid_only_rate = j.value("invalid_only_rate", s.invalid_only_rate);
    if (j.contains("scheme_weights")) {
      auto w = j["scheme_weights"];
      if (w.is_object()) {
        s.scheme_weights = {w.value("doi", 0.0), w.value("pmid", 0.0), w.value("isbn", 0.0)};
      } else {
        auto v = w.get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("synth spec: scheme_weights needs three values");
        s.scheme_weights = {v[0], v[1], v[2]};
      }
    }
    s.extra_id_rate = j.value("extra_id_rate", s.extra_id_rate);
    s.invalid_rate = j.value("invalid_rate", s.invalid_rate);
    s.duplicate_rate = j.value("duplicate_rate", s.duplicate_rate);
    if (j.contains("duplicate_groups")) {
      for (auto& g : j["duplicate_groups"]) {
        auto scheme = pid::scheme_from_prefix(g.at("scheme").get<std::string>());
        if (!scheme) throw ConfigError("synth spec: unknown scheme in duplicate_groups");
        const int size = g.at("size").get<int>();
        if (size < 1) throw ConfigError("synth spec: duplicate group size must be positive");
        s.duplicate_groups.push_back({*scheme, size});
      }
    }
    s.meta_coverage = j.value("meta_coverage", s.meta_coverage);
    s.collision_rate = j.value("collision_rate", s.collision_rate);
    s.post_cutoff_rate = j.value("post_cutoff_rate", s.post_cutoff_rate);
    s.meta_missing_year_rate = j.value("meta_missing_year_rate", s.meta_missing_year_rate);
    s.type_mismatch_rate = j.value("type_mismatch_rate", s.type_mismatch_rate);
    s.meta_noise_rows = j.value("meta_noise_rows", s.meta_noise_rows);
    s.edges = j.value("edges", s.edges);
    s.both_ends_rate = j.value("both_ends_rate", s.both_ends_rate);
    s.undated_edge_rate = j.value("undated_edge_rate", s.undated_edge_rate);
    s.meta_shards = j.value("meta_shards", s.meta_shards);
    s.index_shards = j.value("index_shards", s.index_shards);
    s.cutoff_year = j.value("cutoff_year", s.cutoff_year);
    s.external_sources = j.value("external_sources", s.external_sources);
    s.external_coverage = j.value("external_coverage", s.external_coverage);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth spec: ") + e.what());
  }
  check_rate(s.no_pid_rate, "no_pid_rate");
  check_rate(s.invalid_only_rate, "invalid_only_rate");
  check_rate(s.no_pid_rate + s.invalid_only_rate, "no_pid_rate + invalid_only_rate");
  check_rate(s.extra_id_rate, "extra_id_rate");
  check_rate(s.invalid_rate, "invalid_rate");
  check_rate(s.duplicate_rate, "duplicate_rate");
  check_rate(s.meta_coverage, "meta_coverage");
  check_rate(s.collision_rate, "collision_rate");
  check_rate(s.post_cutoff_rate + s.meta_missing_year_rate, "post_cutoff_rate + meta_missing_year_rate");
  check_rate(s.type_mismatch_rate, "type_mismatch_rate");
  check_rate(s.both_ends_rate, "both_ends_rate");
  check_rate(s.undated_edge_rate + s.post_cutoff_rate, "undated_edge_rate + post_cutoff_rate");
  check_rate(s.external_coverage, "external_coverage");
  if (s.scheme_weights[0] + s.scheme_weights[1] + s.scheme_weights[2] <= 0)
    throw ConfigError("synth spec: scheme_weights must not all be zero");
  if (s.meta_shards < 1 || s.index_shards < 1) throw ConfigError("synth spec: shard counts must be positive");
  if (s.cutoff_year < 1995 || s.cutoff_year > 9998) throw ConfigError("synth spec: cutoff_year out of range");
  return s;
}

SynthSpec SynthSpec::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("synth spec not found: " + path.string());
  return from_json(io::read_text(path));
}

std::string SynthSpec::to_json() const {
  json groups = json::array();
  for (auto& g : duplicate_groups) groups.push_back({{"scheme", pid::prefix(g.scheme)}, {"size", g.size}});
  json j = {{"seed", seed},
            {"records", records},
            {"no_pid_rate", no_pid_rate},
            {"invalid_only_rate", invalid_only_rate},
            {"scheme_weights", {scheme_weights[0], scheme_weights[1], scheme_weights[2]}},
            {"extra_id_rate", extra_id_rate},
            {"invalid_rate", invalid_rate},
            {"duplicate_rate", duplicate_rate},
            {"duplicate_groups", groups},
            {"meta_coverage", meta_coverage},
            {"collision_rate", collision_rate},
            {"post_cutoff_rate", post_cutoff_rate},
            {"meta_missing_year_rate", meta_missing_year_rate},
            {"type_mismatch_rate", type_mismatch_rate},
            {"meta_noise_rows", meta_noise_rows},
            {"edges", edges},
            {"both_ends_rate", both_ends_rate},
            {"undated_edge_rate", undated_edge_rate},
            {"meta_shards", meta_shards},
            {"index_shards", index_shards},
            {"cutoff_year", cutoff_year},
            {"external_sources", external_sources},
            {"external_coverage", external_coverage}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Snapshots

void normalize(Snapshot& s) {
  for (auto& [stage, tables] : s)
    for (auto& [name, lines] : tables) std::sort(lines.begin(), lines.end());
}

std::string to_json(const Snapshot& s) { return json(s).dump(1) + "\n"; }

Snapshot snapshot_from_json(const std::string& text) {
  try {
    auto s = json::parse(text).get<Snapshot>();
    normalize(s);
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("ledger: ") + e.what());
  }
}

std::optional<Divergence> first_divergence(const Snapshot& expected, const Snapshot& actual) {
  for (auto stage : kSnapshotStages) {
    auto e = expected.find(std::string(stage));
    if (e == expected.end()) continue;
    auto a = actual.find(std::string(stage));
    for (auto& [table, want] : e->second) {
      static const std::vector<std::string> none;
      const std::vector<std::string>* got = &none;
      if (a != actual.end())
        if (auto t = a->second.find(table); t != a->second.end()) got = &t->second;
      Divergence d{std::string(stage), table, {}, {}};
      std::set_difference(want.begin(), want.end(), got->begin(), got->end(), std::back_inserter(d.missing));
      std::set_difference(got->begin(), got->end(), want.begin(), want.end(), std::back_inserter(d.unexpected));
      if (a == actual.end() || (a->second.find(table) == a->second.end()))
        d.missing.insert(d.missing.begin(), "(table not produced)");
      if (!d.missing.empty() || !d.unexpected.empty()) return d;
    }
  }
  return std::nullopt;
}

void print_divergence(std::ostream& out, const std::string& against, const Divergence& d) {
  out << "first divergence vs " << against << ": stage " << d.stage << ", table " << d.table << " ("
      << d.missing.size() << " missing, " << d.unexpected.size() << " unexpected)\n";
  std::size_t shown = 0;
  for (auto& l : d.missing) {
    if (shown++ == 5) break;
    out << "  - " << l << '\n';
  }
  shown = 0;
  for (auto& l : d.unexpected) {
    if (shown++ == 5) break;
    out << "  + " << l << '\n';
  }
}

namespace {

std::string tab(std::initializer_list<std::string_view> parts) {
  std::string out;
  for (auto p : parts) {
    if (!out.empty()) out += '\t';
    out += p;
  }
  return out;
}

// Lines from chosen columns of a CSV file; rows whose first column equals
// `skip_first` are dropped.
std::vector<std::string> csv_lines(const fs::path& p, std::vector<std::string_view> columns,
                                   std::string_view skip_first = {}) {
  std::vector<std::string> out;
  csv::Reader reader(p);
  auto h = csv::read_header(reader);
  std::vector<std::size_t> idx;
  for (auto c : columns) idx.push_back(h.require(c, p.filename().string()));
  csv::Row row;
  while (reader.next(row)) {
    if (!skip_first.empty() && csv::cell(row, idx[0]) == skip_first) continue;
    std::string line;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i) line += '\t';
      line += csv::cell(row, idx[i]);
    }
    out.push_back(std::move(line));
  }
  return out;
}

std::vector<std::string> distinct(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

Snapshot snapshot_run(const fs::path& run_dir) {
  Snapshot s;
  auto have = [&](const fs::path& rel) { return fs::exists(run_dir / rel); };
  if (have("trim/iris_candidates.csv")) {
    s["trim"]["with_pid"] = distinct(csv_lines(run_dir / "trim/iris_candidates.csv", {"item_id"}));
    s["trim"]["no_pid"] = csv_lines(run_dir / "trim/iris_no_id.csv", {"item_id"});
  }
  if (have("validate/selected_pids.csv")) {
    s["validate"]["selected"] = csv_lines(run_dir / "validate/selected_pids.csv", {"item_id", "pid"});
    s["validate"]["invalid_only"] = csv_lines(run_dir / "validate/invalid_only.csv", {"item_id"});
    s["validate"]["stats"] = csv_lines(run_dir / "validate/validation_stats.csv",
                                       {"scheme", "raw_count", "invalid_count", "valid_count"}, "total");
  }
  if (have("dedup/unique_pids.csv")) {
    s["dedup"]["unique"] = csv_lines(run_dir / "dedup/unique_pids.csv", {"pid", "item_id"});
    s["dedup"]["duplicates"] =
        csv_lines(run_dir / "dedup/duplicates.csv", {"scheme", "br_count", "pid_count", "removed"}, "total");
  }
  if (have("match/iris_in_meta.csv")) {
    s["match"]["in_meta"] = csv_lines(run_dir / "match/iris_in_meta.csv", {"pid", "omid"});
    s["match"]["not_in_meta"] = csv_lines(run_dir / "match/iris_not_in_meta.csv", {"pid", "status"});
    s["match"]["collisions"] = distinct(csv_lines(run_dir / "match/collisions.csv", {"pid"}));
  }
  if (have("scan/iris_in_index.csv")) {
    s["scan"]["edges"] = csv_lines(run_dir / "scan/iris_in_index.csv", {"id", "role"});
    s["scan"]["tally"] = csv_lines(run_dir / "scan/tally.csv", {"role", "citation_count"});
    s["scan"]["incoming"] = csv_lines(run_dir / "scan/incoming_counts.csv", {"omid", "count"});
  }
  if (have("report/coverage_by_type.csv"))
    s["report"]["coverage"] =
        csv_lines(run_dir / "report/coverage_by_type.csv", {"iris_type", "iris_count", "meta_count", "percent"});
  if (have("report/type_alignment.csv"))
    s["report"]["alignment"] = csv_lines(run_dir / "report/type_alignment.csv", {"class", "count"});
  if (have("report/citation_comparison.csv"))
    s["report"]["comparison"] = csv_lines(run_dir / "report/citation_comparison.csv",
                                          {"source", "brs_in_source", "citations", "ratio"});
  normalize(s);
  return s;
}

// ---------------------------------------------------------------------------
// Generator

namespace {

// Deterministic across standard libraries, unlike the std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  double u01() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }
  bool chance(double p) { return u01() < p; }
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : eng_() % n; }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

struct TypeInfo {
  const char* label;
  const char* meta_type;  // "" when unmapped
  double weight;
};

const std::vector<TypeInfo>& types() {
  static const std::vector<TypeInfo> t = {
      {"1.01 Journal article", "journal article", 0.40},
      {"4.01 Contribution in conference proceedings", "proceedings article", 0.14},
      {"2.01 Chapter / Essay in book", "book chapter", 0.14},
      {"3.01 Monograph / Scientific treatise in book form", "book", 0.08},
      {"3.02 Edited volume", "book", 0.05},
      {"1.06 Abstract in journal", "journal article", 0.04},
      {"4.02 Summary (Abstract)", "other", 0.04},
      {"7.05 Databases", "dataset", 0.03},
      {"1.03 Review in journal", "journal article", 0.04},
      {"8.03 Direction of archaeological excavations", "", 0.04},
  };
  return t;
}

const char* kMetaTypes[] = {"journal article", "book", "book chapter", "proceedings article", "report", "dataset",
                            "other"};

std::size_t type_index(const char* label) {
  for (std::size_t i = 0; i < types().size(); ++i)
    if (std::string_view(types()[i].label) == label) return i;
  return 0;
}

// Best-ranked type per scheme in the shipped priority tables.
const char* best_type(pid::Scheme s) {
  return s == pid::Scheme::Isbn ? "3.02 Edited volume" : "1.01 Journal article";
}

// Half-up decimal ratio, written independently of the production helper.
std::string ledger_ratio(std::uint64_t num, std::uint64_t den, int decimals) {
  if (den == 0) return decimals == 1 ? "0.0" : "0.00";
  std::uint64_t scale = decimals == 1 ? 10 : 100;
  const auto scaled = (2 * num * scale + den) / (2 * den);
  std::string frac = std::to_string(scaled % scale);
  while (frac.size() < static_cast<std::size_t>(decimals)) frac.insert(frac.begin(), '0');
  return std::to_string(scaled / scale) + "." + frac;
}

enum class Category { NoPid, InvalidOnly, Pid };

struct Item {
  std::string id;
  std::string title;
  std::optional<int> year;
  std::size_t type = 0;
  bool venue = false, publisher = false, language = false, author_count = false;
  std::string authors;
  Category category = Category::NoPid;
  pid::Scheme scheme = pid::Scheme::Doi;
  std::string pid;                                     // serialized, for Category::Pid
  std::vector<std::pair<pid::Scheme, std::string>> raws;  // in file order
  bool blank_identifier_row = false;
};

struct PidFactory {
  std::uint64_t doi = 0, pmid = 0, isbn = 0;

  std::string fresh(pid::Scheme s, Rng& rng) {
    switch (s) {
      case pid::Scheme::Doi: {
        ++doi;
        return "doi:10." + std::to_string(1000 + rng.below(9000)) + "/syn." + std::to_string(doi) + "." +
               std::string(1, static_cast<char>('a' + rng.below(26)));
      }
      case pid::Scheme::Pmid: return "pmid:" + std::to_string(1000000 + (++pmid) * 7 + rng.below(7));
      case pid::Scheme::Isbn: {
        ++isbn;
        std::string body = "8" + std::to_string(800000000 + isbn * 13 + rng.below(13)).substr(1);  // 9 digits
        if (rng.chance(0.5)) {
          std::string v = "978" + body;
          int sum = 0;
          for (std::size_t i = 0; i < 12; ++i) sum += (v[i] - '0') * (i % 2 == 0 ? 1 : 3);
          v += static_cast<char>('0' + (10 - sum % 10) % 10);
          return "isbn:" + v;
        }
        int sum = 0;
        for (std::size_t i = 0; i < 9; ++i) sum += static_cast<int>(10 - i) * (body[i] - '0');
        const int check = (11 - sum % 11) % 11;
        return "isbn:" + body + (check == 10 ? std::string("x") : std::to_string(check));
      }
    }
    return "";
  }
};

std::string upper(std::string s) {
  for (auto& c : s)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return s;
}

std::string hyphenate_isbn(const std::string& v) {
  if (v.size() == 13) return v.substr(0, 3) + "-" + v.substr(3, 2) + "-" + v.substr(5, 4) + "-" + v.substr(9, 3) + "-" + v.substr(12);
  return v.substr(0, 2) + "-" + v.substr(2, 4) + "-" + v.substr(6, 3) + "-" + v.substr(9);
}

// A raw spelling that normalizes back to `serialized`.
std::string raw_variant(const std::string& serialized, Rng& rng, PidFactory& f) {
  const auto colon = serialized.find(':');
  const std::string scheme = serialized.substr(0, colon), v = serialized.substr(colon + 1);
  const auto k = rng.below(4);
  if (scheme == "doi") {
    if (k == 0) return v;
    if (k == 1) return upper(v);
    if (k == 2) return "https://doi.org/" + v;
    return " doi:" + upper(v) + " ";
  }
  if (scheme == "pmid") {
    if (k == 0) return v;
    if (k == 1) return "PMID: " + v;
    if (k == 2) return "PMID:" + v;
    return "00" + v;
  }
  std::string shown = upper(v);
  if (k == 0) return shown;
  if (k == 1) return hyphenate_isbn(shown);
  if (k == 2) return "ISBN: " + hyphenate_isbn(shown);
  // Second candidate after ';' is ignored.
  return hyphenate_isbn(shown) + "; " + f.fresh(pid::Scheme::Isbn, rng).substr(5);
}

std::string invalid_raw(pid::Scheme s, Rng& rng) {
  const auto n = std::to_string(1000 + rng.below(9000));
  switch (s) {
    case pid::Scheme::Doi: return rng.chance(0.5) ? "10. " + n + "/broken." + n : "97888" + n + "7340";
    case pid::Scheme::Pmid: return rng.chance(0.5) ? "PMC " + n + "964" : n + "A" + n;
    case pid::Scheme::Isbn: return rng.chance(0.5) ? "88." + n + ".002.1" : "(OBRA COMPLETA)";
  }
  return "";
}

std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) {
    const char l = text::to_lower(c);
    out += ((l >= 'a' && l <= 'z') || (l >= '0' && l <= '9')) ? l : '_';
  }
  return out;
}

void write_plain(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  io::AtomicFile f(p);
  f.stream() << content;
  f.commit();
}

void write_gz(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  io::GzipWriter gz(p);
  gz.write(content);
  gz.close();
}

struct Edge {
  std::string citing, cited, creation;
};

}  // namespace

Snapshot generate(const SynthSpec& spec, const fs::path& out_dir) {
  if (fs::exists(out_dir) && !fs::is_empty(out_dir))
    throw ConfigError("output directory is not empty: " + out_dir.string());
  fs::create_directories(out_dir);
  Rng rng(spec.seed);
  PidFactory factory;
  Snapshot L;
  const int cutoff = spec.cutoff_year;

  // Records.
  std::vector<Item> items(spec.records);
  double total_weight = 0;
  for (auto& t : types()) total_weight += t.weight;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& it = items[i];
    char buf[16];
    std::snprintf(buf, sizeof buf, "IT%06zu", i + 1);
    it.id = buf;
    it.title = "Synthetic study " + std::to_string(i + 1);
    if (i % 7 == 3) it.title += ", with commas";
    if (i % 11 == 5) it.title += " on \"quoted\" matters";
    if (i % 13 == 8) it.title += " presso l'Università";
    if (rng.chance(0.95)) it.year = rng.between(1990, cutoff);
    double w = rng.u01() * total_weight;
    for (std::size_t k = 0; k < types().size(); ++k) {
      w -= types()[k].weight;
      if (w < 0 || k + 1 == types().size()) {
        it.type = k;
        break;
      }
    }
    it.venue = rng.chance(0.8);
    it.publisher = rng.chance(0.8);
    it.language = rng.chance(0.8);
    it.author_count = rng.chance(0.8);
    it.authors = "Rossi, Mario; Bianchi, Anna" + std::string(i % 3 == 0 ? "; Verdi, Carla" : "");
    const double u = rng.u01();
    if (u < spec.no_pid_rate) {
      it.category = Category::NoPid;
    } else if (u < spec.no_pid_rate + spec.invalid_only_rate) {
      it.category = Category::InvalidOnly;
    } else {
      it.category = Category::Pid;
      const double sw = spec.scheme_weights[0] + spec.scheme_weights[1] + spec.scheme_weights[2];
      const double r = rng.u01() * sw;
      it.scheme = r < spec.scheme_weights[0]                            ? pid::Scheme::Doi
                  : r < spec.scheme_weights[0] + spec.scheme_weights[1] ? pid::Scheme::Pmid
                                                                         : pid::Scheme::Isbn;
    }
  }

  // Selected pids: explicit groups take the leading records, then random reuse.
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> group_order;
  std::array<std::vector<std::string>, 3> pool;
  std::size_t cursor = 0;
  auto assign = [&](std::size_t i, const std::string& p) {
    items[i].pid = p;
    auto [g, inserted] = groups.try_emplace(p);
    if (inserted) group_order.push_back(p);
    g->second.push_back(i);
  };
  for (auto& gs : spec.duplicate_groups) {
    const auto p = factory.fresh(gs.scheme, rng);
    for (int k = 0; k < gs.size && cursor < items.size(); ++k, ++cursor) {
      items[cursor].category = Category::Pid;
      items[cursor].scheme = gs.scheme;
      assign(cursor, p);
    }
    pool[pid::rank(gs.scheme)].push_back(p);
  }
  for (std::size_t i = cursor; i < items.size(); ++i) {
    auto& it = items[i];
    if (it.category != Category::Pid) continue;
    auto& pl = pool[pid::rank(it.scheme)];
    if (!pl.empty() && rng.chance(spec.duplicate_rate)) {
      assign(i, rng.pick(pl));
    } else {
      auto p = factory.fresh(it.scheme, rng);
      pl.push_back(p);
      assign(i, p);
    }
  }

  // Make each group's winner unambiguous: best-ranked type and every field
  // present; same-type rivals lose on completeness, other types on rank.
  std::map<std::string, std::size_t> winner;
  for (auto& p : group_order) {
    auto& members = groups[p];
    if (members.size() == 1) {
      winner[p] = members[0];
      continue;
    }
    const auto w = members[rng.below(members.size())];
    const auto scheme = items[w].scheme;
    auto& wi = items[w];
    wi.type = type_index(best_type(scheme));
    if (!wi.year) wi.year = rng.between(1990, cutoff);
    wi.venue = wi.publisher = wi.language = wi.author_count = true;
    for (auto m : members) {
      if (m == w) continue;
      auto& it = items[m];
      if (rng.chance(0.4)) {
        it.type = wi.type;
        it.venue = false;  // completeness strictly below the winner's
      } else {
        do it.type = rng.below(types().size());
        while (it.type == wi.type);
      }
    }
    winner[p] = w;
  }

  // Raw identifier cells and validation counts.
  std::array<std::uint64_t, 3> raw{}, invalid{};
  auto add_invalid = [&](Item& it, pid::Scheme s) {
    it.raws.emplace_back(s, invalid_raw(s, rng));
    ++raw[pid::rank(s)];
    ++invalid[pid::rank(s)];
  };
  auto add_valid = [&](Item& it, const std::string& serialized) {
    const auto s = *pid::scheme_from_prefix(serialized.substr(0, serialized.find(':')));
    it.raws.emplace_back(s, raw_variant(serialized, rng, factory));
    ++raw[pid::rank(s)];
  };
  for (auto& it : items) {
    if (it.category == Category::NoPid) {
      it.blank_identifier_row = rng.chance(0.5);
    } else if (it.category == Category::InvalidOnly) {
      const int n = rng.between(1, 2);
      for (int k = 0; k < n; ++k) add_invalid(it, pid::kSchemes[rng.below(3)]);
    } else {
      const int sel = pid::rank(it.scheme);
      for (int e = 0; e < sel; ++e)
        if (rng.chance(spec.invalid_rate)) add_invalid(it, pid::kSchemes[e]);
      if (rng.chance(spec.invalid_rate)) add_invalid(it, it.scheme);
      add_valid(it, it.pid);
      if (sel < 2 && rng.chance(spec.extra_id_rate))
        add_valid(it, factory.fresh(pid::kSchemes[rng.between(sel + 1, 2)], rng));
    }
  }

  // CRIS dump.
  const auto iris_dir = out_dir / "iris";
  {
    std::ostringstream master, ident, desc, lang, publ, rel, person;
    csv::Writer wm(master), wi(ident), wd(desc), wl(lang), wp(publ), wr(rel), wpe(person);
    wm.row({"ITEM_ID", "TITLE", "DATE_ISSUED_YEAR", "OWNING_COLLECTION_DES"});
    wi.row({"ITEM_ID", "IDE_DOI", "IDE_PMID", "IDE_ISBN"});
    wd.row({"ITEM_ID", "DES_ALLPEOPLE", "DES_NUMBER_OF_AUTHORS"});
    wl.row({"ITEM_ID", "LAN_ISO"});
    wp.row({"ITEM_ID", "PUB_NAME"});
    wr.row({"ITEM_ID", "REL_ISPARTOF", "REL_EDITORS"});
    wpe.row({"ITEM_ID", "PER_NAME", "PER_ROLE"});
    for (auto& it : items) {
      const std::string year = it.year ? std::to_string(*it.year) : "";
      wm.row({std::string_view(it.id), std::string_view(it.title), std::string_view(year),
              std::string_view(types()[it.type].label)});
      std::array<std::vector<std::string>, 3> per;
      for (auto& [s, r] : it.raws) per[pid::rank(s)].push_back(r);
      const std::size_t rows = std::max({per[0].size(), per[1].size(), per[2].size()});
      for (std::size_t k = 0; k < rows; ++k) {
        auto cell = [&](int s) { return k < per[s].size() ? std::string_view(per[s][k]) : std::string_view(); };
        wi.row({std::string_view(it.id), cell(0), cell(1), cell(2)});
      }
      if (rows == 0 && it.blank_identifier_row) wi.row({std::string_view(it.id), "", "", ""});
      const std::string count = it.author_count ? std::to_string(2 + (it.authors.size() > 30)) : "";
      wd.row({std::string_view(it.id), std::string_view(it.authors), std::string_view(count)});
      if (it.language) wl.row({std::string_view(it.id), "ita"});
      if (it.publisher) wp.row({std::string_view(it.id), "Editrice Sintetica"});
      if (it.venue) wr.row({std::string_view(it.id), "Rivista di Prova", ""});
      wpe.row({std::string_view(it.id), "Rossi, Mario", "author"});
    }
    write_plain(iris_dir / "ODS_L1_IR_ITEM_MASTER_ALL.csv", master.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_IDENTIFIER.csv", ident.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_DESCRIPTION.csv", desc.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_LANGUAGE.csv", lang.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_PUBLISHER.csv", publ.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_RELATION.csv", rel.str());
    write_plain(iris_dir / "ODS_L1_IR_ITEM_CON_PERSON.csv", person.str());
  }

  // Ledger: trim, validate, dedup.
  auto& trim = L["trim"];
  auto& val = L["validate"];
  trim["with_pid"];
  trim["no_pid"];
  val["selected"];
  val["invalid_only"];
  for (auto& it : items) {
    (it.raws.empty() ? trim["no_pid"] : trim["with_pid"]).push_back(it.id);
    if (it.category == Category::Pid) val["selected"].push_back(tab({it.id, it.pid}));
    if (it.category == Category::InvalidOnly) val["invalid_only"].push_back(it.id);
  }
  for (auto s : pid::kSchemes) {
    const int r = pid::rank(s);
    val["stats"].push_back(tab({pid::prefix(s), std::to_string(raw[r]), std::to_string(invalid[r]),
                                std::to_string(raw[r] - invalid[r])}));
  }
  auto& dd = L["dedup"];
  dd["unique"];
  std::array<std::uint64_t, 3> members{}, dup_groups{}, removed{};
  for (auto& p : group_order) {
    dd["unique"].push_back(tab({p, items[winner[p]].id}));
    const auto n = groups[p].size();
    if (n > 1) {
      const int r = pid::rank(items[winner[p]].scheme);
      members[r] += n;
      ++dup_groups[r];
      removed[r] += n - 1;
    }
  }
  for (auto s : pid::kSchemes) {
    const int r = pid::rank(s);
    dd["duplicates"].push_back(tab({pid::prefix(s), std::to_string(members[r]), std::to_string(dup_groups[r]),
                                    std::to_string(removed[r])}));
  }

  // Meta.
  std::vector<std::vector<std::string>> meta_rows;
  std::uint64_t omid_seq = 0;
  auto next_omid = [&] { return "br/060" + std::to_string(++omid_seq); };
  std::vector<std::string> in_set, outside;
  std::map<std::string, std::optional<int>> set_year;  // Meta year of matched OMIDs
  auto& mt = L["match"];
  mt["in_meta"];
  mt["not_in_meta"];
  mt["collisions"];
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> coverage;  // label -> iris, meta
  std::uint64_t coherent = 0, mismatched = 0;
  for (auto& p : group_order) {
    const auto& w = items[winner[p]];
    const auto& ti = types()[w.type];
    ++coverage[ti.label].first;
    if (!rng.chance(spec.meta_coverage)) {
      mt["not_in_meta"].push_back(tab({p, "not_in_meta"}));
      continue;
    }
    const auto omid = next_omid();
    std::optional<int> meta_year;
    bool blank_year = false;
    const double u = rng.u01();
    if (u < spec.post_cutoff_rate)
      meta_year = cutoff + 1;
    else if (u < spec.post_cutoff_rate + spec.meta_missing_year_rate)
      blank_year = true;
    else
      meta_year = w.year ? *w.year : rng.between(1990, cutoff);
    std::string date;
    if (meta_year) {
      date = std::to_string(*meta_year);
      if (rng.chance(0.7)) date += "-0" + std::to_string(rng.between(1, 9)) + "-1" + std::to_string(rng.between(0, 9));
    }
    const std::string expected_type = *ti.meta_type ? ti.meta_type : "no type specified";
    std::string oc_type = expected_type;
    if (!*ti.meta_type || rng.chance(spec.type_mismatch_rate)) {
      do oc_type = kMetaTypes[rng.below(7)];
      while (oc_type == expected_type);
    }
    std::string ids = "omid:" + omid + " " + p;
    if (rng.chance(0.3)) ids += " openalex:W" + std::to_string(rng.below(1000000));
    meta_rows.push_back({ids, "Meta title of " + w.id, "Rossi, Mario [orcid:0000-0001-2345-6789]", "", "",
                         "Rivista di Prova [issn:1234-5678]", "", date, oc_type, "Editrice Sintetica [crossref:1]", ""});
    if (rng.chance(spec.collision_rate)) {
      const auto loser = next_omid();
      meta_rows.push_back({"omid:" + loser + " " + p, "Duplicate entity", "", "", "", "", "", date, oc_type, "", ""});
      outside.push_back(loser);
      mt["collisions"].push_back(p);
    }
    const bool excluded = (meta_year && *meta_year > cutoff) || (blank_year && !w.year);
    if (excluded) {
      mt["not_in_meta"].push_back(tab({p, "excluded_temporal"}));
      outside.push_back(omid);
      continue;
    }
    mt["in_meta"].push_back(tab({p, omid}));
    in_set.push_back(omid);
    set_year[omid] = blank_year ? std::nullopt : meta_year;
    ++coverage[ti.label].second;
    (oc_type == expected_type ? coherent : mismatched)++;
  }
  for (std::size_t k = 0; k < spec.meta_noise_rows; ++k) {
    const auto omid = next_omid();
    meta_rows.push_back({"omid:" + omid + " doi:10.9999/noise." + std::to_string(k + 1), "Unrelated work", "", "", "",
                         "", "", std::to_string(rng.between(1950, cutoff)), "journal article", "", ""});
    outside.push_back(omid);
  }
  rng.shuffle(meta_rows);
  {
    std::vector<std::ostringstream> shards(spec.meta_shards);
    std::vector<csv::Writer> writers;
    for (auto& s : shards) writers.emplace_back(s);
    for (auto& w : writers) w.row(oc::kMetaColumns);
    for (auto& r : meta_rows) writers[rng.below(spec.meta_shards)].row(r);
    for (std::size_t k = 0; k < shards.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "meta_%03zu.csv.gz", k + 1);
      write_gz(out_dir / "meta" / name, shards[k].str());
    }
  }

  // Index.
  if (outside.empty()) outside.push_back("br/0699");
  std::set<std::string> members_of_set(in_set.begin(), in_set.end());
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<Edge> edges;
  auto& sc = L["scan"];
  sc["edges"];
  std::map<std::string, std::uint64_t> incoming;
  for (auto& o : in_set) incoming[o] = 0;
  std::uint64_t t_citing = 0, t_cited = 0, t_both = 0, t_total = 0;
  for (std::size_t k = 0; k < spec.edges; ++k) {
    Edge e;
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      bool citing_in = false, cited_in = false;
      if (!in_set.empty()) {
        const double u = rng.u01();
        const double rest = (1.0 - spec.both_ends_rate) / 5.0;
        if (u < spec.both_ends_rate)
          citing_in = cited_in = true;
        else if (u < spec.both_ends_rate + 2 * rest)
          citing_in = true;
        else if (u < spec.both_ends_rate + 4 * rest)
          cited_in = true;
      }
      e.citing = citing_in ? rng.pick(in_set) : rng.pick(outside);
      e.cited = cited_in ? rng.pick(in_set) : rng.pick(outside);
      ok = e.citing != e.cited && seen.emplace(e.citing, e.cited).second;
    }
    if (!ok) continue;
    const double u = rng.u01();
    std::optional<int> year;
    if (u >= spec.undated_edge_rate) {
      year = u < spec.undated_edge_rate + spec.post_cutoff_rate ? cutoff + 1 : rng.between(1990, cutoff);
      e.creation = std::to_string(*year) + "-0" + std::to_string(rng.between(1, 9)) + "-15";
    }
    edges.push_back(e);
    const bool ci = members_of_set.count(e.citing), ce = members_of_set.count(e.cited);
    if (!ci && !ce) continue;
    if (year && *year > cutoff) continue;
    const std::string oci = "oci:" + e.citing.substr(3) + "-" + e.cited.substr(3);
    const char* role = ci && ce ? "both" : ci ? "citing" : "cited";
    sc["edges"].push_back(tab({oci, role}));
    ++t_total;
    if (ci) ++t_citing;
    if (ce) ++t_cited;
    if (ci && ce) ++t_both;
    if (ce) ++incoming[e.cited];
  }
  sc["tally"] = {tab({"citing", std::to_string(t_citing)}), tab({"cited", std::to_string(t_cited)}),
                 tab({"both", std::to_string(t_both)}), tab({"unique_total", std::to_string(t_total)})};
  sc["incoming"];
  for (auto& [o, n] : incoming) sc["incoming"].push_back(tab({o, std::to_string(n)}));
  {
    std::vector<std::ostringstream> shards(spec.index_shards);
    std::vector<csv::Writer> writers;
    for (auto& s : shards) writers.emplace_back(s);
    for (auto& w : writers) w.row(oc::kIndexColumns);
    for (auto& e : edges) {
      const std::string oci = "oci:" + e.citing.substr(3) + "-" + e.cited.substr(3);
      const std::string span = "P" + std::to_string(rng.below(20)) + "Y" + std::to_string(rng.below(12)) + "M";
      writers[rng.below(spec.index_shards)].row(
          {std::string_view(oci), std::string_view("omid:" + e.citing), std::string_view("omid:" + e.cited),
           std::string_view(e.creation), std::string_view(e.creation.empty() ? "" : span),
           std::string_view(rng.chance(0.1) ? "yes" : "no"), std::string_view(rng.chance(0.05) ? "yes" : "no")});
    }
    for (std::size_t k = 0; k < shards.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "index_%03zu.csv.gz", k + 1);
      write_gz(out_dir / "index" / name, shards[k].str());
    }
  }

  // External counts and report.
  auto& rp = L["report"];
  for (auto& [label, c] : coverage)
    rp["coverage"].push_back(
        tab({label, std::to_string(c.first), std::to_string(c.second), ledger_ratio(c.second * 100, c.first, 2)}));
  rp["alignment"] = {tab({"coherent", std::to_string(coherent)}), tab({"mismatched", std::to_string(mismatched)})};
  json externals = json::array();
  for (auto& source : spec.external_sources) {
    std::ostringstream o;
    csv::Writer w(o);
    w.row({"item_id", "count"});
    std::uint64_t brs = 0, cites = 0;
    for (auto& p : group_order) {
      if (!rng.chance(spec.external_coverage)) continue;
      const auto n = rng.below(61);
      w.row({std::string_view(items[winner[p]].id), std::string_view(std::to_string(n))});
      ++brs;
      cites += n;
    }
    w.row({"UNKNOWN-1", "5"});
    w.row({"UNKNOWN-2", "0"});
    const auto file = "counts/" + slug(source) + ".csv";
    write_plain(out_dir / file, o.str());
    externals.push_back({{"source", source}, {"path", file}});
    rp["comparison"].push_back(tab({source, std::to_string(brs), std::to_string(cites), ledger_ratio(cites, brs, 2)}));
  }
  std::uint64_t oc_cites = 0;
  for (auto& [o, n] : incoming) oc_cites += n;
  rp["comparison"].push_back(tab({"OpenCitations", std::to_string(in_set.size()), std::to_string(oc_cites),
                                  ledger_ratio(oc_cites, in_set.size(), 2)}));

  json config = {{"iris_dump", "iris"},     {"meta_dump", "meta"}, {"index_dump", "index"},
                 {"run_dir", "run"},        {"cutoff_year", cutoff}, {"external_counts", externals}};
  write_plain(out_dir / "config.json", config.dump(2) + "\n");
  write_plain(out_dir / "spec.json", spec.to_json());
  normalize(L);
  write_plain(out_dir / "ledger.json", to_json(L));
  return L;
}

// ---------------------------------------------------------------------------
// Verify

std::size_t largest_input_rows(const pipeline::Config& config) {
  auto rows_in = [](const fs::path& p) {
    csv::Reader r(p);
    csv::Row row;
    std::size_t n = 0;
    while (r.next(row)) ++n;
    return n > 0 ? n - 1 : 0;
  };
  std::size_t largest = 0;
  if (!config.iris_dump.empty() && fs::is_directory(config.iris_dump))
    for (auto& e : fs::directory_iterator(config.iris_dump))
      if (e.is_regular_file() && e.path().extension() == ".csv") largest = std::max(largest, rows_in(e.path()));
  for (auto* root : {&config.meta_dump, &config.index_dump}) {
    if (root->empty() || !fs::exists(*root)) continue;
    std::size_t total = 0;
    for (auto& p : io::list_shards(*root)) total += rows_in(p);
    largest = std::max(largest, total);
  }
  return largest;
}

VerifyResult verify(const pipeline::Config& config, std::ostream& log) {
  const auto rows = largest_input_rows(config);
  if (rows > kOracleRowLimit)
    throw ConfigError("corpus too large for the brute-force oracle (" + std::to_string(rows) + " rows in one input, limit " +
                      std::to_string(kOracleRowLimit) +
                      "); verify a sample, or generate a smaller corpus with `ocov synth`");
  VerifyResult result;
  static std::atomic<unsigned> seq{0};
  result.run_dir = fs::temp_directory_path() /
                   ("ocov-verify-" + std::to_string(::getpid()) + "-" + std::to_string(seq.fetch_add(1)));
  fs::remove_all(result.run_dir);
  auto cfg = config;
  cfg.run_dir = result.run_dir;
  pipeline::run("all", cfg, log);
  const auto actual = snapshot_run(result.run_dir);
  const auto expected = oracle(config);
  result.vs_oracle = first_divergence(expected, actual);
  if (!config.source.empty()) {
    const auto ledger = fs::absolute(config.source).parent_path() / "ledger.json";
    if (fs::exists(ledger)) {
      result.ledger_checked = true;
      result.vs_ledger = first_divergence(snapshot_from_json(io::read_text(ledger)), actual);
    }
  }
  result.ok = !result.vs_oracle && !result.vs_ledger;
  if (result.ok) fs::remove_all(result.run_dir);
  return result;
}

}  // namespace ocov::harness
