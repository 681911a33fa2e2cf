#include "ocov/enrich.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "ocov/csv.hpp"
#include "ocov/errors.hpp"
#include "ocov/io.hpp"
#include "ocov/text.hpp"

namespace ocov::enrich {

namespace fs = std::filesystem;
using json = nlohmann::json;

Nanos SystemClock::now() {
  return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(Nanos d) {
  if (d > Nanos::zero()) std::this_thread::sleep_for(d);
}

Nanos ManualClock::now() {
  std::lock_guard<std::mutex> lock(mu_);
  return t_;
}

void ManualClock::sleep_for(Nanos d) {
  std::lock_guard<std::mutex> lock(mu_);
  if (d > Nanos::zero()) t_ += d;
}

RateLimiter::RateLimiter(int max_requests, Nanos per, Clock& clock) : max_(max_requests), per_(per), clock_(clock) {
  if (max_ < 1 || per_ <= Nanos::zero()) throw ConfigError("rate limit must be a positive count per positive period");
}

void RateLimiter::acquire() {
  // The lock is held while sleeping: waiters queue up behind the one at the head.
  std::lock_guard<std::mutex> lock(mu_);
  for (;;) {
    const Nanos now = clock_.now();
    if (now < not_before_) {
      clock_.sleep_for(not_before_ - now);
      continue;
    }
    while (!grants_.empty() && grants_.front() + per_ <= now) grants_.pop_front();
    if (static_cast<int>(grants_.size()) < max_) {
      grants_.push_back(now);
      return;
    }
    clock_.sleep_for(grants_.front() + per_ - now);
  }
}

void RateLimiter::defer_until(Nanos t) {
  std::lock_guard<std::mutex> lock(mu_);
  not_before_ = std::max(not_before_, t);
}

// ---------------------------------------------------------------------------

FixtureTransport::FixtureTransport(const fs::path& dir, Clock* clock) : dir_(dir), clock_(clock) {
  const auto index_path = dir / "index.json";
  json index;
  try {
    index = json::parse(io::read_text(index_path));
  } catch (const json::exception& e) {
    throw ConfigError(index_path.string() + ": " + e.what());
  }
  auto load_one = [&](const json& spec) {
    HttpResponse r;
    r.status = spec.value("status", 200);
    if (spec.contains("file")) r.body = io::read_text(dir / spec.at("file").get<std::string>());
    if (spec.contains("body")) r.body = spec.at("body").get<std::string>();
    if (spec.contains("headers"))
      for (auto& [k, v] : spec.at("headers").items()) r.headers[text::lower(k)] = v.get<std::string>();
    return r;
  };
  for (auto& [url, spec] : index.items()) {
    Entry e;
    if (spec.is_array())
      for (auto& s : spec) e.responses.push_back(load_one(s));
    else
      e.responses.push_back(load_one(spec));
    entries_.emplace(url, std::move(e));
  }
}

HttpResponse FixtureTransport::get(const std::string& url, const std::map<std::string, std::string>&) {
  std::lock_guard<std::mutex> lock(mu_);
  log_.emplace_back(url, clock_ ? clock_->now() : Nanos::zero());
  auto it = entries_.find(url);
  if (it == entries_.end()) throw TransportError("no recorded response for " + url);
  auto& e = it->second;
  const std::size_t k = std::min(e.served, e.responses.size() - 1);
  ++e.served;
  const auto& r = e.responses[k];
  if (r.status == 0) throw TransportError("recorded connection failure for " + url);
  return r;
}

std::vector<std::pair<std::string, Nanos>> FixtureTransport::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) throw ConfigError("response cache directory is not set");
  fs::create_directories(dir_);
}

fs::path ResponseCache::entry_path(const std::string& url) const {
  const auto h = io::fnv1a(url);
  return dir_ / (io::hex64(h) + io::hex64(io::fnv1a(url, h ^ 0x9e3779b97f4a7c15ull)) + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& url) const {
  const auto p = entry_path(url);
  if (!fs::exists(p)) return std::nullopt;
  try {
    auto j = json::parse(io::read_text(p));
    if (j.value("url", "") != url) return std::nullopt;
    return j.at("body").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // treated as a miss; the next put overwrites it
  }
}

void ResponseCache::put(const std::string& url, const std::string& body) const {
  static std::atomic<unsigned> seq{0};
  const auto p = entry_path(url);
  const auto tmp = p.string() + ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(seq.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << json{{"url", url}, {"body", body}}.dump();
    if (!out) throw RuntimeFailure("cannot write cache entry " + tmp);
  }
  fs::rename(tmp, p);
}

fs::path default_cache_dir(const fs::path& fallback) {
  if (const char* env = std::getenv("OCOV_CACHE_DIR"); env && *env) return env;
  return fallback;
}

// ---------------------------------------------------------------------------

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Resolved: return "resolved";
    case Outcome::NoTitle: return "no_title";
    case Outcome::NoHit: return "no_hit";
    case Outcome::BelowThreshold: return "below_threshold";
    case Outcome::BadDoi: return "bad_doi";
    case Outcome::Failed: return "failed";
  }
  return "";
}

namespace {

// Decodes UTF-8 leniently: invalid bytes become single code points.
std::vector<char32_t> code_points(std::string_view s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 6 ? 2 : (c >> 4) == 14 ? 3 : (c >> 3) == 30 ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
      out.push_back(c);
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1f) : len == 3 ? (c & 0x0f) : (c & 0x07);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!ok) {
      out.push_back(c);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

bool is_alnum_byte(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

}  // namespace

std::string normalize_title(std::string_view title) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : title) {
    // Non-ASCII bytes are kept: accented letters matter for similarity.
    if (is_alnum_byte(c) || c >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(text::to_lower(static_cast<char>(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

double title_similarity(std::string_view a, std::string_view b) {
  const auto x = code_points(normalize_title(a));
  const auto y = code_points(normalize_title(b));
  if (x.empty() && y.empty()) return 0.0;
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  const double d = static_cast<double>(prev[y.size()]);
  return 1.0 - d / static_cast<double>(std::max(x.size(), y.size()));
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (is_alnum_byte(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

std::string build_query_url(const iris::Record& record, const CrossrefConfig& config) {
  std::string url = config.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/works?query.bibliographic=" + url_encode(text::trim(record.title.value_or("")));
  if (auto it = record.aux.find("authors"); it != record.aux.end()) {
    std::string authors;
    std::size_t n = 0;
    for (auto part : text::split(it->second, ';')) {
      part = text::trim(part);
      if (part.empty()) continue;
      if (n++ == config.max_authors) break;
      if (!authors.empty()) authors += ' ';
      authors += part;
    }
    if (!authors.empty()) url += "&query.author=" + url_encode(authors);
  }
  url += "&rows=1";
  if (!config.mailto.empty()) url += "&mailto=" + url_encode(config.mailto);
  return url;
}

namespace {

// Seconds to wait before retrying a 429, from Retry-After or the interval header.
std::optional<Nanos> retry_after(const HttpResponse& r) {
  auto seconds = [](std::string_view v) -> std::optional<Nanos> {
    v = text::trim(v);
    if (!v.empty() && v.back() == 's') v.remove_suffix(1);
    if (v.empty() || !text::all_digits(v)) return std::nullopt;
    return std::chrono::seconds(std::stoll(std::string(v)));
  };
  if (auto it = r.headers.find("retry-after"); it != r.headers.end())
    if (auto s = seconds(it->second)) return s;
  if (auto it = r.headers.find("x-rate-limit-interval"); it != r.headers.end()) return seconds(it->second);
  return std::nullopt;
}

EnrichmentResult evaluate(const iris::Record& record, const std::string& body, const CrossrefConfig& config) {
  EnrichmentResult res;
  res.item_id = record.item_id;
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    res.outcome = Outcome::Failed;
    return res;
  }
  const json* items = nullptr;
  if (j.contains("message") && j["message"].contains("items") && j["message"]["items"].is_array())
    items = &j["message"]["items"];
  if (!items || items->empty()) {
    res.outcome = Outcome::NoHit;
    return res;
  }
  const json& top = (*items)[0];
  std::string hit_title;
  if (top.contains("title")) {
    const auto& t = top["title"];
    if (t.is_array() && !t.empty() && t[0].is_string()) hit_title = t[0].get<std::string>();
    else if (t.is_string()) hit_title = t.get<std::string>();
  }
  const double score = top.contains("score") && top["score"].is_number() ? top["score"].get<double>() : 0.0;
  res.match_score = title_similarity(record.title.value_or(""), hit_title);
  if (score < config.score_threshold || res.match_score < config.similarity_floor) {
    res.outcome = Outcome::BelowThreshold;
    return res;
  }
  const std::string doi = top.contains("DOI") && top["DOI"].is_string() ? top["DOI"].get<std::string>() : "";
  auto parsed = pid::parse_doi(doi);
  if (!pid::accepted(parsed)) {
    res.outcome = Outcome::BadDoi;
    return res;
  }
  res.candidate_doi = std::get<pid::NormalizedPid>(parsed);
  res.outcome = Outcome::Resolved;
  return res;
}

}  // namespace

EnrichmentResult query_crossref(const iris::Record& record, Client& client) {
  EnrichmentResult unresolved;
  unresolved.item_id = record.item_id;
  if (text::trim(record.title.value_or("")).empty()) {
    unresolved.outcome = Outcome::NoTitle;
    return unresolved;
  }
  const auto& cfg = client.config;
  const std::string url = build_query_url(record, cfg);
  if (auto cached = client.cache.get(url)) return evaluate(record, *cached, cfg);

  std::map<std::string, std::string> headers;
  headers["User-Agent"] = cfg.mailto.empty() ? "ocov/1.0" : "ocov/1.0 (mailto:" + cfg.mailto + ")";
  Nanos backoff = cfg.backoff_initial;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    client.limiter.acquire();
    std::optional<HttpResponse> resp;
    try {
      resp = client.transport.get(url, headers);
    } catch (const TransportError& e) {
      std::cerr << "warning: crossref request failed (" << e.what() << ")\n";
    }
    if (resp && resp->status == 200) {
      client.cache.put(url, resp->body);
      return evaluate(record, resp->body, cfg);
    }
    if (resp && resp->status == 404) {
      unresolved.outcome = Outcome::NoHit;
      return unresolved;
    }
    if (attempt == cfg.max_retries) break;
    Nanos wait = backoff;
    if (resp && resp->status == 429)
      if (auto ra = retry_after(*resp)) wait = std::max(wait, *ra);
    client.limiter.defer_until(client.clock.now() + wait);
    backoff *= 2;
  }
  unresolved.outcome = Outcome::Failed;
  return unresolved;
}

void mark_shared(std::vector<EnrichmentResult>& results) {
  std::map<std::string, std::size_t> freq;
  for (auto& r : results)
    if (r.candidate_doi) ++freq[r.candidate_doi->value];
  for (auto& r : results) r.shared = r.candidate_doi && freq[r.candidate_doi->value] > 1;
}

std::vector<EnrichmentResult> enrich_all(const std::vector<iris::Record>& records, const CrossrefConfig& config,
                                         HttpTransport& transport, Clock& clock) {
  RateLimiter limiter(config.rate_limit, config.rate_period, clock);
  ResponseCache cache(config.cache_dir);
  Client client{config, transport, limiter, cache, clock};
  std::vector<EnrichmentResult> results(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < records.size();) results[i] = query_crossref(records[i], client);
  };
  const int n = std::max(1, std::min<int>(config.workers, static_cast<int>(records.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  mark_shared(results);
  return results;
}

Summary crosscheck_enriched(std::vector<EnrichmentResult>& results, const std::set<std::string>& dois_in_meta) {
  Summary s;
  std::map<std::string, std::uint64_t> freq;
  for (auto& r : results) {
    ++s.records;
    ++s.outcomes[std::string(outcome_name(r.outcome))];
    if (!r.candidate_doi) {
      r.in_meta.reset();
      continue;
    }
    ++s.reconciled;
    ++freq[r.candidate_doi->value];
    r.in_meta = dois_in_meta.count(r.candidate_doi->str()) > 0;
    if (*r.in_meta) ++s.in_meta;
  }
  for (auto& [doi, n] : freq)
    if (n > 1) {
      ++s.shared_dois;
      s.shared_items += n;
    }
  return s;
}

void write_enriched(std::ostream& out, const std::vector<EnrichmentResult>& results) {
  csv::Writer w(out);
  w.row(kEnrichedHeader);
  char score[32];
  for (auto& r : results) {
    std::snprintf(score, sizeof score, "%.4f", r.match_score);
    const std::string doi = r.candidate_doi ? r.candidate_doi->value : "";
    w.row({std::string_view(r.item_id), std::string_view(doi), std::string_view(score),
           std::string_view(r.shared ? "yes" : "no"),
           std::string_view(!r.in_meta ? "" : *r.in_meta ? "yes" : "no")});
  }
}

}  // namespace ocov::enrich
