#include "ocov/opencitations.hpp"

#include "ocov/text.hpp"

namespace ocov::oc {

std::optional<std::string> Omid::supplier_prefix() const {
  if (numeral.size() < 3 || numeral[0] != '0') return std::nullopt;
  std::size_t i = 1;
  while (i < numeral.size() && numeral[i] >= '1' && numeral[i] <= '9') ++i;
  if (i == 1 || i >= numeral.size() || numeral[i] != '0') return std::nullopt;
  return numeral.substr(0, i + 1);
}

std::optional<Omid> parse_omid(std::string_view s) {
  s = text::trim(s);
  if (s.starts_with("omid:")) s.remove_prefix(5);
  const auto slash = s.find('/');
  if (slash == std::string_view::npos || slash == 0) return std::nullopt;
  auto type = s.substr(0, slash);
  auto num = s.substr(slash + 1);
  for (char c : type)
    if (c < 'a' || c > 'z') return std::nullopt;
  if (!text::all_digits(num)) return std::nullopt;
  return Omid{std::string(type), std::string(num)};
}

std::optional<Oci> parse_oci(std::string_view s) {
  s = text::trim(s);
  if (s.starts_with("oci:")) s.remove_prefix(4);
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto a = s.substr(0, dash);
  auto b = s.substr(dash + 1);
  if (!text::all_digits(a) || !text::all_digits(b)) return std::nullopt;
  return Oci{std::string(a), std::string(b)};
}

std::optional<Timespan> parse_timespan(std::string_view s) {
  s = text::trim(s);
  Timespan t;
  if (!s.empty() && s[0] == '-') {
    t.negative = true;
    s.remove_prefix(1);
  }
  if (s.empty() || s[0] != 'P') return std::nullopt;
  s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  int stage = 0;  // Y, M, D must appear in order
  while (!s.empty()) {
    std::size_t i = 0;
    while (i < s.size() && text::is_digit(s[i])) ++i;
    if (i == 0 || i == s.size() || i > 9) return std::nullopt;
    const int n = std::stoi(std::string(s.substr(0, i)));
    const char unit = s[i];
    const int order = unit == 'Y' ? 1 : unit == 'M' ? 2 : unit == 'D' ? 3 : 0;
    if (order == 0 || order <= stage) return std::nullopt;
    stage = order;
    (order == 1 ? t.years : order == 2 ? t.months : t.days) = n;
    s.remove_prefix(i + 1);
  }
  return t;
}

MetaLayout::MetaLayout(const csv::Header& header, std::string_view source) {
  for (std::size_t i = 0; i < kMetaColumns.size(); ++i) index[i] = header.require(kMetaColumns[i], source);
}

namespace {

std::optional<std::string> opt_cell(const csv::Row& row, std::size_t i) {
  auto c = csv::cell(row, i);
  if (text::trim(c).empty()) return std::nullopt;
  return std::string(c);
}

}  // namespace

std::optional<MetaRecord> parse_meta_row(const csv::Row& row, const MetaLayout& layout) {
  MetaRecord m;
  bool have_omid = false;
  for (auto tok : text::split(csv::cell(row, layout.index[0]), ' ')) {
    if (tok.empty()) continue;
    if (tok.starts_with("omid:")) {
      if (auto o = parse_omid(tok)) {
        if (!have_omid) m.omid = *o;
        have_omid = true;
      }
    } else if (tok.starts_with("doi:") || tok.starts_with("pmid:") || tok.starts_with("isbn:")) {
      m.external_ids.push_back(text::lower(tok));  // DOIs compare case-insensitively
    }
  }
  if (!have_omid) return std::nullopt;
  m.title = opt_cell(row, layout.index[1]);
  m.author = opt_cell(row, layout.index[2]);
  m.issue = opt_cell(row, layout.index[3]);
  m.volume = opt_cell(row, layout.index[4]);
  m.venue = opt_cell(row, layout.index[5]);
  m.page = opt_cell(row, layout.index[6]);
  m.pub_date = opt_cell(row, layout.index[7]);
  m.type = opt_cell(row, layout.index[8]);
  m.publisher = opt_cell(row, layout.index[9]);
  m.editor = opt_cell(row, layout.index[10]);
  if (m.pub_date) m.pub_year = text::leading_year(*m.pub_date);
  for (auto i : layout.index)
    if (!text::trim(csv::cell(row, i)).empty()) ++m.non_empty_columns;
  return m;
}

IndexLayout::IndexLayout(const csv::Header& header, std::string_view source) {
  for (std::size_t i = 0; i < kIndexColumns.size(); ++i) index[i] = header.require(kIndexColumns[i], source);
}

namespace {

bool yes(std::string_view s) {
  s = text::trim(s);
  return text::iequals(s, "yes") || text::iequals(s, "true") || s == "1";
}

}  // namespace

std::optional<CitationEdge> parse_citation_row(const csv::Row& row, const IndexLayout& layout) {
  auto citing = parse_omid(csv::cell(row, layout.index[1]));
  auto cited = parse_omid(csv::cell(row, layout.index[2]));
  if (!citing || !cited) return std::nullopt;
  CitationEdge e;
  e.oci = std::string(text::trim(csv::cell(row, layout.index[0])));
  e.citing = std::move(*citing);
  e.cited = std::move(*cited);
  e.creation = opt_cell(row, layout.index[3]);
  e.timespan_raw = std::string(text::trim(csv::cell(row, layout.index[4])));
  if (!e.timespan_raw.empty()) e.timespan = parse_timespan(e.timespan_raw);
  e.journal_sc = yes(csv::cell(row, layout.index[5]));
  e.author_sc = yes(csv::cell(row, layout.index[6]));
  auto oci = parse_oci(e.oci);
  e.oci_mismatch = !oci || oci->citing != e.citing.numeral || oci->cited != e.cited.numeral;
  return e;
}

}  // namespace ocov::oc
