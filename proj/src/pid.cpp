#include "ocov/pid.hpp"

#include "ocov/text.hpp"

namespace ocov::pid {

using text::is_digit;

std::string_view prefix(Scheme s) {
  switch (s) {
    case Scheme::Doi: return "doi";
    case Scheme::Pmid: return "pmid";
    case Scheme::Isbn: return "isbn";
  }
  return "";
}

std::optional<Scheme> scheme_from_prefix(std::string_view p) {
  if (p == "doi") return Scheme::Doi;
  if (p == "pmid") return Scheme::Pmid;
  if (p == "isbn") return Scheme::Isbn;
  return std::nullopt;
}

std::string NormalizedPid::str() const {
  std::string out(prefix(scheme));
  out += ':';
  out += value;
  return out;
}

std::string_view reason_name(Reason r) {
  switch (r) {
    case Reason::BadPrefix: return "bad_prefix";
    case Reason::Whitespace: return "whitespace";
    case Reason::WrongSchemeShape: return "wrong_scheme_shape";
    case Reason::NonDigit: return "non_digit";
    case Reason::PmcId: return "pmc_id";
    case Reason::BadLength: return "bad_length";
    case Reason::BadChars: return "bad_chars";
    case Reason::BadChecksum: return "bad_checksum";
    case Reason::Empty: return "empty";
  }
  return "";
}

namespace {

// ASCII whitespace or U+00A0 (UTF-8 C2 A0), both common in CRIS exports.
bool has_whitespace(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (text::is_space(s[i])) return true;
    if (s[i] == '\xC2' && i + 1 < s.size() && s[i + 1] == '\xA0') return true;
  }
  return false;
}

// 10.<4-9 digits>/<one or more chars>, whitespace already excluded.
bool doi_shape(std::string_view s) {
  if (s.size() < 3 || s.substr(0, 3) != "10.") return false;
  std::size_t i = 3;
  while (i < s.size() && is_digit(s[i])) ++i;
  const std::size_t registrant = i - 3;
  if (registrant < 4 || registrant > 9) return false;
  return i < s.size() && s[i] == '/' && i + 1 < s.size();
}

Rejection reject(Scheme s, Reason r, std::string_view raw) { return Rejection{s, r, std::string(raw)}; }

}  // namespace

std::pair<std::string_view, bool> strip_doi_label(std::string_view raw) {
  static constexpr std::string_view kLabels[] = {
      "https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/", "doi.org/", "doi:",
  };
  std::string_view s = text::trim(raw);
  for (auto label : kLabels) {
    if (text::istarts_with(s, label)) return {text::trim(s.substr(label.size())), true};
  }
  return {s, false};
}

Result parse_doi(std::string_view raw) {
  auto [s, labelled] = strip_doi_label(raw);
  (void)labelled;
  if (s.empty()) return reject(Scheme::Doi, Reason::Empty, raw);
  if (has_whitespace(s)) return reject(Scheme::Doi, Reason::Whitespace, raw);
  if (doi_shape(s)) return NormalizedPid{Scheme::Doi, text::lower(s)};
  // A valid DOI buried behind some other label is a prefix problem, anything
  // else does not look like a DOI at all.
  for (auto p = s.find("10.", 1); p != std::string_view::npos; p = s.find("10.", p + 1)) {
    if (doi_shape(s.substr(p))) return reject(Scheme::Doi, Reason::BadPrefix, raw);
  }
  return reject(Scheme::Doi, Reason::WrongSchemeShape, raw);
}

Result parse_pmid(std::string_view raw) {
  std::string_view s = text::trim(raw);
  if (text::istarts_with(s, "pmc")) return reject(Scheme::Pmid, Reason::PmcId, raw);
  if (text::istarts_with(s, "pmid")) {
    s.remove_prefix(4);
    s = text::trim(s);
    if (!s.empty() && s.front() == ':') s.remove_prefix(1);
    s = text::trim(s);
    if (text::istarts_with(s, "pmc")) return reject(Scheme::Pmid, Reason::PmcId, raw);
  }
  if (s.empty()) return reject(Scheme::Pmid, Reason::Empty, raw);
  if (!text::all_digits(s)) return reject(Scheme::Pmid, Reason::NonDigit, raw);
  const auto first = s.find_first_not_of('0');
  if (first == std::string_view::npos) return reject(Scheme::Pmid, Reason::Empty, raw);
  return NormalizedPid{Scheme::Pmid, std::string(s.substr(first))};
}

Result parse_isbn(std::string_view raw, const Options& opts) {
  std::string_view s = raw;
  if (auto semi = s.find(';'); semi != std::string_view::npos) s = s.substr(0, semi);
  s = text::trim(s);
  if (text::istarts_with(s, "isbn")) {
    s.remove_prefix(4);
    if (s.starts_with("-10") || s.starts_with("-13")) s.remove_prefix(3);
    s = text::trim(s);
    if (!s.empty() && s.front() == ':') s.remove_prefix(1);
    s = text::trim(s);
  }
  if (s.empty()) return reject(Scheme::Isbn, Reason::Empty, raw);

  std::string v;
  v.reserve(s.size());
  for (char c : s) {
    if (c == '-' || c == ' ') continue;
    if (!is_digit(c) && c != 'x' && c != 'X') return reject(Scheme::Isbn, Reason::BadChars, raw);
    v += text::to_lower(c);
  }
  if (v.empty()) return reject(Scheme::Isbn, Reason::Empty, raw);
  if (v.size() != 10 && v.size() != 13) return reject(Scheme::Isbn, Reason::BadLength, raw);
  const auto x = v.find('x');
  if (x != std::string::npos && !(v.size() == 10 && x == 9)) return reject(Scheme::Isbn, Reason::BadChars, raw);
  if (opts.isbn_checksum && !isbn_checksum_ok(v)) return reject(Scheme::Isbn, Reason::BadChecksum, raw);
  return NormalizedPid{Scheme::Isbn, std::move(v)};
}

Result normalize(Scheme scheme, std::string_view raw, const Options& opts) {
  switch (scheme) {
    case Scheme::Doi: return parse_doi(raw);
    case Scheme::Pmid: return parse_pmid(raw);
    case Scheme::Isbn: return parse_isbn(raw, opts);
  }
  return reject(scheme, Reason::Empty, raw);
}

std::optional<NormalizedPid> parse_serialized(std::string_view s, const Options& opts) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto scheme = scheme_from_prefix(s.substr(0, colon));
  if (!scheme) return std::nullopt;
  auto r = normalize(*scheme, s.substr(colon + 1), opts);
  if (!accepted(r)) return std::nullopt;
  return value(r);
}

bool isbn_checksum_ok(std::string_view v) {
  if (v.size() == 10) {
    int sum = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      int d = 0;
      if (v[i] == 'x' || v[i] == 'X') {
        if (i != 9) return false;
        d = 10;
      } else if (is_digit(v[i])) {
        d = v[i] - '0';
      } else {
        return false;
      }
      sum += static_cast<int>(10 - i) * d;
    }
    return sum % 11 == 0;
  }
  if (v.size() == 13) {
    int sum = 0;
    for (std::size_t i = 0; i < 13; ++i) {
      if (!is_digit(v[i])) return false;
      sum += (v[i] - '0') * (i % 2 == 0 ? 1 : 3);
    }
    return sum % 10 == 0;
  }
  return false;
}

std::optional<std::string> isbn_alternate(std::string_view v) {
  if (v.size() == 10) {
    std::string out = "978";
    out += v.substr(0, 9);
    int sum = 0;
    for (std::size_t i = 0; i < 12; ++i) sum += (out[i] - '0') * (i % 2 == 0 ? 1 : 3);
    out += static_cast<char>('0' + (10 - sum % 10) % 10);
    return out;
  }
  if (v.size() == 13 && v.substr(0, 3) == "978") {
    std::string out(v.substr(3, 9));
    int sum = 0;
    for (std::size_t i = 0; i < 9; ++i) sum += static_cast<int>(10 - i) * (out[i] - '0');
    const int check = (11 - sum % 11) % 11;
    out += check == 10 ? 'x' : static_cast<char>('0' + check);
    return out;
  }
  return std::nullopt;
}

}  // namespace ocov::pid
