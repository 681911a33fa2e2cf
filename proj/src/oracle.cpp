// Brute-force recomputation of every stage for verification. Shares only the
// CSV/gzip reader with the pipeline; identifier rules, joins, grouping and
// aggregation are written again from scratch, in memory, with no sharding.

#include <algorithm>
#include <climits>
#include <json.hpp>
#include <map>
#include <regex>
#include <sstream>
#include <set>
#include <tuple>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/harness.hpp"
#include "ocov/io.hpp"

namespace ocov::harness {

namespace {

using json = nlohmann::json;
namespace rc = std::regex_constants;

const std::regex kEdgeSpace(R"(^[ \t\n\r\f\v]+|[ \t\n\r\f\v]+$)");
const std::regex kAnySpace("[ \\t\\n\\r\\f\\v]|\\xC2\\xA0");

std::string trim(const std::string& s) { return std::regex_replace(s, kEdgeSpace, ""); }

std::string lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  return s;
}

std::optional<int> first_year(const std::string& s) {
  static const std::regex re("[0-9]{4,}");
  std::smatch m;
  if (!std::regex_search(s, m, re)) return std::nullopt;
  return std::stoi(m.str().substr(0, 4));
}

std::optional<std::string> doi(const std::string& raw) {
  static const std::regex label(R"(^(https?://(dx\.)?doi\.org/|doi\.org/|doi:))", rc::icase);
  static const std::regex shape(R"(^10\.[0-9]{4,9}/[\s\S]+$)");
  std::string s = trim(std::regex_replace(trim(raw), label, "", rc::format_first_only));
  if (s.empty() || std::regex_search(s, kAnySpace) || !std::regex_match(s, shape)) return std::nullopt;
  return "doi:" + lower(s);
}

std::optional<std::string> pmid(const std::string& raw) {
  static const std::regex re(R"(^(?:pmid\s*(?::\s*)?)?0*([0-9]+)$)", rc::icase);
  std::smatch m;
  const auto s = trim(raw);
  if (!std::regex_match(s, m, re)) return std::nullopt;
  auto digits = m.str(1);
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
  if (digits.empty()) return std::nullopt;
  return "pmid:" + digits;
}

bool isbn_check(const std::string& v) {
  int sum = 0;
  if (v.size() == 10) {
    for (int i = 0; i < 10; ++i) sum += (10 - i) * (v[i] == 'x' ? 10 : v[i] - '0');
    return sum % 11 == 0;
  }
  for (int i = 0; i < 13; ++i) sum += (v[i] - '0') * (i % 2 ? 3 : 1);
  return sum % 10 == 0;
}

std::optional<std::string> isbn(const std::string& raw, bool checksum) {
  static const std::regex label(R"(^isbn(?:-1[03])?\s*(?::\s*)?)", rc::icase);
  static const std::regex shape("^([0-9]{9}[0-9x]|[0-9]{13})$");
  std::string s = trim(raw.substr(0, raw.find(';')));
  s = std::regex_replace(s, label, "", rc::format_first_only);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '-' || c == ' '; }), s.end());
  s = lower(s);
  if (!std::regex_match(s, shape)) return std::nullopt;
  if (checksum && !isbn_check(s)) return std::nullopt;
  return "isbn:" + s;
}

const char* kSchemeNames[] = {"doi", "pmid", "isbn"};

std::optional<std::string> normalize_id(int scheme, const std::string& raw, bool checksum) {
  if (scheme == 0) return doi(raw);
  if (scheme == 1) return pmid(raw);
  return isbn(raw, checksum);
}

std::string type_code(const std::string& t) {
  static const std::regex code(R"(^([0-9]+\.[0-9]+))");
  std::smatch m;
  const auto s = trim(t);
  if (std::regex_search(s, m, code)) return m.str(1);
  return lower(s);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  static std::string at(const std::vector<std::string>& r, int i) {
    return i >= 0 && static_cast<std::size_t>(i) < r.size() ? r[static_cast<std::size_t>(i)] : std::string();
  }
};

Table load(const fs::path& p, char delim = ',') {
  Table t;
  csv::Reader r(p, delim);
  csv::Row row;
  if (r.next(row)) t.header = row;
  while (r.next(row)) t.rows.push_back(row);
  return t;
}

std::string ratio2(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return "0.00";
  const unsigned __int128 q = (static_cast<unsigned __int128>(num) * 200 + den) / (2 * static_cast<unsigned __int128>(den));
  const auto whole = static_cast<std::uint64_t>(q / 100), frac = static_cast<std::uint64_t>(q % 100);
  return std::to_string(whole) + (frac < 10 ? ".0" : ".") + std::to_string(frac);
}

struct Rec {
  std::string id, title, type;
  std::optional<int> year;
  bool has_date = false;
  std::vector<std::pair<int, std::string>> ids;  // scheme index, raw
  std::map<std::string, std::string> aux;
  int order = 0;
};

struct Cand {
  std::string omid;
  int filled = 0;
  std::string type;
  std::optional<int> year;
  std::string text;
};

struct Hit {
  std::string omid, type, oc_type;
  std::optional<int> meta_year;
};

std::string line(std::initializer_list<std::string> parts) {
  std::string out;
  for (auto& p : parts) out += (out.empty() ? "" : "\t") + p;
  return out;
}

}  // namespace

Snapshot oracle(const pipeline::Config& config) {
  Snapshot S;
  const int max_year = config.max_year();

  // Adapter and join.
  const auto adapter = json::parse(io::read_text(config.adapter));
  const char delim = adapter.value("delimiter", std::string(",")).at(0);
  std::map<std::string, Rec> recs;
  int order = 0;
  auto is_id_field = [](const std::string& f) { return f == "doi" || f == "pmid" || f == "isbn"; };
  auto role_of = [](const std::string& f) { return f == "doi" ? 0 : f == "pmid" ? 1 : 2; };
  std::vector<std::pair<std::string, json>> files;
  for (auto& [role, spec] : adapter.at("files").items()) files.emplace_back(role, spec);
  std::stable_partition(files.begin(), files.end(), [](auto& f) { return f.first == "master"; });
  for (auto& [role, spec] : files) {
    const auto path = config.iris_dump / spec.at("file").get<std::string>();
    if (!fs::exists(path)) {
      if (spec.value("required", false)) throw InputError("oracle: missing " + path.string());
      continue;
    }
    const auto t = load(path, delim);
    std::map<std::string, int> col;
    for (auto& [canonical, header] : spec.at("columns").items()) col[canonical] = t.col(header.get<std::string>());
    for (auto& row : t.rows) {
      const auto id = trim(Table::at(row, col["item_id"]));
      if (id.empty()) continue;
      Rec* r = nullptr;
      if (role == "master") {
        if (recs.count(id)) continue;
        r = &recs[id];
        r->id = id;
        r->order = order++;
      } else {
        auto it = recs.find(id);
        if (it == recs.end()) continue;
        r = &it->second;
      }
      const std::string id_scheme = col.count("id_scheme") ? lower(trim(Table::at(row, col["id_scheme"]))) : "";
      for (auto& [field, c] : col) {
        if (field == "item_id" || field == "id_scheme") continue;
        const auto raw = Table::at(row, c);
        const auto v = trim(raw);
        if (v.empty()) continue;
        if (is_id_field(field)) {
          r->ids.emplace_back(role_of(field), raw);
        } else if (field == "id_value") {
          if (is_id_field(id_scheme)) r->ids.emplace_back(role_of(id_scheme), raw);
        } else if (field == "title") {
          if (r->title.empty()) r->title = v;
        } else if (field == "pub_date") {
          if (!r->has_date) {
            r->has_date = true;
            auto y = first_year(v);
            if (y && *y >= 1000 && *y <= max_year) r->year = y;
          }
        } else if (field == "iris_type") {
          if (r->type.empty()) r->type = v;
        } else {
          r->aux.emplace(field, v);
        }
      }
    }
  }
  auto fields = config.completeness_fields;
  if (fields.empty()) fields = {"title", "pub_year", "iris_type", "venue", "publisher", "language", "author_count"};
  auto completeness = [&](const Rec& r) {
    int n = 0;
    for (auto& f : fields) {
      if (f == "title") n += !r.title.empty();
      else if (f == "pub_year") n += r.year.has_value();
      else if (f == "pub_date") n += r.has_date;
      else if (f == "iris_type") n += !r.type.empty();
      else if (f == "identifiers") n += !r.ids.empty();
      else n += r.aux.count(f) > 0;
    }
    return n;
  };

  auto& trim_t = S["trim"];
  trim_t["with_pid"];
  trim_t["no_pid"];
  for (auto& [id, r] : recs) trim_t[r.ids.empty() ? "no_pid" : "with_pid"].push_back(id);

  // Validation and selection.
  auto& val = S["validate"];
  val["selected"];
  val["invalid_only"];
  std::array<std::uint64_t, 3> raw{}, bad{};
  std::map<std::string, std::string> selected;  // item -> pid
  for (auto& [id, r] : recs) {
    if (r.ids.empty()) continue;
    std::optional<std::string> chosen;
    for (int s = 0; s < 3; ++s)
      for (auto& [scheme, text] : r.ids) {
        if (scheme != s) continue;
        auto n = normalize_id(s, text, config.isbn_checksum);
        ++raw[s];
        if (!n) ++bad[s];
        if (n && !chosen) chosen = n;
      }
    if (chosen) {
      selected[id] = *chosen;
      val["selected"].push_back(line({id, *chosen}));
    } else {
      val["invalid_only"].push_back(id);
    }
  }
  for (int s = 0; s < 3; ++s)
    val["stats"].push_back(line({kSchemeNames[s], std::to_string(raw[s]), std::to_string(bad[s]),
                                 std::to_string(raw[s] - bad[s])}));

  // Dedup.
  std::array<std::map<std::string, int>, 3> prio;
  {
    auto t = load(config.priority_tables);
    const int cs = t.col("scheme"), ct = t.col("iris_type"), cp = t.col("priority");
    for (auto& row : t.rows) {
      const auto s = lower(trim(Table::at(row, cs)));
      const int k = s == "doi" ? 0 : s == "pmid" ? 1 : 2;
      prio[k][type_code(Table::at(row, ct))] = std::stoi(trim(Table::at(row, cp)));
    }
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (auto& [item, p] : selected) groups[p].push_back(item);
  auto& dd = S["dedup"];
  dd["unique"];
  std::array<std::uint64_t, 3> dm{}, dg{}, dr{};
  std::map<std::string, std::string> winner_of;  // pid -> item
  for (auto& [p, items] : groups) {
    const int k = p[0] == 'd' ? 0 : p[0] == 'p' ? 1 : 2;
    auto key = [&](const std::string& item) {
      const auto& r = recs.at(item);
      auto it = prio[k].find(type_code(r.type));
      return std::make_tuple(it == prio[k].end() ? INT_MAX : it->second, -completeness(r), item);
    };
    auto best = *std::min_element(items.begin(), items.end(),
                                  [&](const std::string& a, const std::string& b) { return key(a) < key(b); });
    winner_of[p] = best;
    dd["unique"].push_back(line({p, best}));
    if (items.size() > 1) {
      dm[k] += items.size();
      ++dg[k];
      dr[k] += items.size() - 1;
    }
  }
  for (int s = 0; s < 3; ++s)
    dd["duplicates"].push_back(
        line({kSchemeNames[s], std::to_string(dm[s]), std::to_string(dg[s]), std::to_string(dr[s])}));

  // Match: every Meta row, every shard, no index.
  std::map<std::string, std::vector<Cand>> cands;
  static const std::array<std::string, 11> meta_cols = {"id",    "title",    "author",   "issue",
                                                        "volume", "venue",   "page",     "pub_date",
                                                        "type",  "publisher", "editor"};
  for (auto& shard : io::list_shards(config.meta_dump)) {
    auto t = load(shard);
    std::array<int, 11> c{};
    for (int i = 0; i < 11; ++i) c[i] = t.col(meta_cols[i]);
    static const std::regex omid_re("^omid:([a-z]+/[0-9]+)$");
    for (auto& row : t.rows) {
      std::istringstream ids(Table::at(row, c[0]));
      std::string tok, omid;
      std::vector<std::string> pids;
      while (std::getline(ids, tok, ' ')) {
        std::smatch m;
        if (omid.empty() && std::regex_match(tok, m, omid_re)) omid = m.str(1);
        if (groups.count(lower(tok))) pids.push_back(lower(tok));
      }
      if (omid.empty()) continue;
      Cand cd;
      cd.omid = omid;
      for (int i = 0; i < 11; ++i) cd.filled += !trim(Table::at(row, c[i])).empty();
      cd.type = Table::at(row, c[8]);
      cd.year = first_year(trim(Table::at(row, c[7])));
      if (cd.year && (*cd.year < 1000 || *cd.year > max_year)) cd.year.reset();
      for (auto& f : row) cd.text += f + '\x1f';
      for (auto& p : pids) cands[p].push_back(cd);
    }
  }
  auto& mt = S["match"];
  mt["in_meta"];
  mt["not_in_meta"];
  mt["collisions"];
  std::vector<Hit> hits;
  for (auto& [p, items] : groups) {
    auto it = cands.find(p);
    if (it == cands.end()) {
      mt["not_in_meta"].push_back(line({p, "not_in_meta"}));
      continue;
    }
    auto& cs = it->second;
    std::set<std::string> distinct;
    for (auto& c : cs) distinct.insert(c.omid);
    if (distinct.size() > 1) mt["collisions"].push_back(p);
    const auto& best = *std::min_element(cs.begin(), cs.end(), [](const Cand& a, const Cand& b) {
      return std::tie(b.filled, a.omid, a.text) < std::tie(a.filled, b.omid, b.text);
    });
    const auto& w = recs.at(winner_of[p]);
    auto year = best.year ? best.year : w.year;
    if (!year || *year > config.cutoff_year) {
      mt["not_in_meta"].push_back(line({p, "excluded_temporal"}));
      continue;
    }
    mt["in_meta"].push_back(line({p, best.omid}));
    hits.push_back({best.omid, w.type, best.type, best.year});
  }

  // Scan.
  std::map<std::string, std::optional<int>> in_set;
  for (auto& h : hits) in_set[h.omid] = h.meta_year;
  auto& sc = S["scan"];
  sc["edges"];
  sc["incoming"];
  std::map<std::string, std::uint64_t> incoming;
  for (auto& [o, y] : in_set) incoming[o] = 0;
  std::uint64_t n_citing = 0, n_cited = 0, n_both = 0, n_total = 0;
  if (!in_set.empty()) {
    static const std::regex omid_cell("^(?:omid:)?([a-z]+/[0-9]+)$");
    for (auto& shard : io::list_shards(config.index_dump)) {
      auto t = load(shard);
      const int ci = t.col("id"), cc = t.col("citing"), cd = t.col("cited"), cr = t.col("creation");
      for (auto& row : t.rows) {
        std::smatch a, b;
        const auto citing = trim(Table::at(row, cc)), cited = trim(Table::at(row, cd));
        if (!std::regex_match(citing, a, omid_cell) || !std::regex_match(cited, b, omid_cell)) continue;
        const bool x = in_set.count(a.str(1)), y = in_set.count(b.str(1));
        if (!x && !y) continue;
        auto year = first_year(trim(Table::at(row, cr)));
        if (!year && x) year = in_set[a.str(1)];
        if (year && *year > config.cutoff_year) continue;
        sc["edges"].push_back(line({trim(Table::at(row, ci)), x && y ? "both" : x ? "citing" : "cited"}));
        ++n_total;
        n_citing += x;
        n_cited += y;
        n_both += x && y;
        if (y) ++incoming[b.str(1)];
      }
    }
  }
  sc["tally"] = {line({"citing", std::to_string(n_citing)}), line({"cited", std::to_string(n_cited)}),
                 line({"both", std::to_string(n_both)}), line({"unique_total", std::to_string(n_total)})};
  for (auto& [o, n] : incoming) sc["incoming"].push_back(line({o, std::to_string(n)}));

  // Report.
  std::map<std::string, std::string> english;
  if (!config.type_labels.empty() && fs::exists(config.type_labels)) {
    auto t = load(config.type_labels);
    const int it_col = t.col("iris_type_it"), en = t.col("iris_type_en");
    for (auto& row : t.rows) {
      const auto label = trim(Table::at(row, en));
      english.emplace(type_code(Table::at(row, it_col)), label);
      english.emplace(type_code(label), label);
    }
  }
  std::map<std::string, std::string> label_of;
  auto see = [&](const std::string& type) {
    const auto code = type_code(type);
    std::string shown = trim(type).empty() ? "(none)" : (english.count(code) ? english[code] : trim(type));
    auto [it, inserted] = label_of.emplace(code, shown);
    if (!inserted && shown < it->second) it->second = shown;
    return code;
  };
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> cov;
  for (auto& [p, item] : winner_of) ++cov[see(recs.at(item).type)].first;
  for (auto& h : hits) ++cov[see(h.type)].second;
  auto& rp = S["report"];
  for (auto& [code, c] : cov)
    rp["coverage"].push_back(line({label_of[code], std::to_string(c.first), std::to_string(c.second),
                                   ratio2(c.second * 100, c.first)}));

  std::map<std::string, std::string> mapping;
  if (!config.type_mapping.empty() && fs::exists(config.type_mapping)) {
    auto t = load(config.type_mapping);
    const int a = t.col("iris_type"), b = t.col("oc_meta_type");
    for (auto& row : t.rows) mapping[type_code(Table::at(row, a))] = lower(trim(Table::at(row, b)));
  }
  std::uint64_t coherent = 0, mismatched = 0;
  for (auto& h : hits) {
    const auto observed = lower(trim(h.oc_type));
    if (observed.empty()) continue;
    auto m = mapping.find(type_code(h.type));
    const std::string expected = m == mapping.end() ? "no type specified" : m->second;
    (observed == expected ? coherent : mismatched)++;
  }
  rp["alignment"] = {line({"coherent", std::to_string(coherent)}), line({"mismatched", std::to_string(mismatched)})};

  std::set<std::string> known;
  for (auto& [p, item] : winner_of) known.insert(item);
  for (auto& ext : config.externals) {
    auto t = load(ext.path);
    const int ci = t.col("item_id"), cn = t.col("count");
    std::map<std::string, std::uint64_t> first;
    for (auto& row : t.rows) {
      const auto id = trim(Table::at(row, ci));
      if (!id.empty()) first.emplace(id, std::stoull(trim(Table::at(row, cn))));
    }
    std::uint64_t brs = 0, cites = 0;
    for (auto& [id, n] : first)
      if (known.count(id)) ++brs, cites += n;
    rp["comparison"].push_back(line({ext.source, std::to_string(brs), std::to_string(cites), ratio2(cites, brs)}));
  }
  std::uint64_t oc_cites = 0;
  for (auto& [o, n] : incoming) oc_cites += n;
  rp["comparison"].push_back(
      line({"OpenCitations", std::to_string(hits.size()), std::to_string(oc_cites), ratio2(oc_cites, hits.size())}));

  normalize(S);
  return S;
}

}  // namespace ocov::harness
