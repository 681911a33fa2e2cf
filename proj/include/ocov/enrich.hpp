#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ocov/iris_ingest.hpp"
#include "ocov/pid.hpp"

namespace ocov::enrich {

using Nanos = std::chrono::nanoseconds;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Nanos now() = 0;
  virtual void sleep_for(Nanos d) = 0;
};

class SystemClock : public Clock {
 public:
  Nanos now() override;
  void sleep_for(Nanos d) override;
};

/// Time only moves when someone sleeps.
class ManualClock : public Clock {
 public:
  Nanos now() override;
  void sleep_for(Nanos d) override;
  void advance(Nanos d) { sleep_for(d); }

 private:
  std::mutex mu_;
  Nanos t_{0};
};

/// Sliding window: at most `max_requests` grants in any interval of length `per`.
class RateLimiter {
 public:
  RateLimiter(int max_requests, Nanos per, Clock& clock);
  void acquire();
  /// No grant before `t` (server asked us to back off).
  void defer_until(Nanos t);

 private:
  int max_;
  Nanos per_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Nanos> grants_;
  Nanos not_before_{0};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names
};

/// Thrown by transports for connection-level failures (no HTTP status).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) = 0;
};

/// Live HTTPS client.
std::unique_ptr<HttpTransport> make_https_transport(std::chrono::seconds timeout = std::chrono::seconds(30));

/// Replays recorded responses: `dir/index.json` maps a URL to
/// {"status": 200, "file": "hit.json", "headers": {...}}. Unknown URLs throw
/// TransportError. Every request is logged with the clock time it was made.
class FixtureTransport : public HttpTransport {
 public:
  FixtureTransport(const std::filesystem::path& dir, Clock* clock = nullptr);
  HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) override;
  std::vector<std::pair<std::string, Nanos>> requests() const;

 private:
  struct Entry {
    std::vector<HttpResponse> responses;  // served in order, last one repeats
    std::size_t served = 0;
  };
  std::filesystem::path dir_;
  Clock* clock_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::vector<std::pair<std::string, Nanos>> log_;
};

/// Successful responses on disk, one file per URL. Writes are temp+rename
/// so concurrent readers never see a partial entry.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& url) const;
  void put(const std::string& url, const std::string& body) const;
  std::filesystem::path entry_path(const std::string& url) const;

 private:
  std::filesystem::path dir_;
};

/// Cache directory from OCOV_CACHE_DIR, else `fallback`.
std::filesystem::path default_cache_dir(const std::filesystem::path& fallback);

struct CrossrefConfig {
  std::string base_url = "https://api.crossref.org";
  std::string mailto;
  int rate_limit = 5;  // requests per rate_period
  Nanos rate_period = std::chrono::seconds(1);
  double score_threshold = 0.0;  // Crossref relevance score of the top hit
  double similarity_floor = 0.9;
  std::filesystem::path cache_dir;
  int max_retries = 3;
  Nanos backoff_initial = std::chrono::seconds(1);
  int workers = 1;
  std::size_t max_authors = 3;  // names passed to query.author
};

enum class Outcome { Resolved, NoTitle, NoHit, BelowThreshold, BadDoi, Failed };
std::string_view outcome_name(Outcome o);

struct EnrichmentResult {
  std::string item_id;
  std::optional<pid::NormalizedPid> candidate_doi;
  double match_score = 0.0;  // title similarity of the top hit
  bool shared = false;
  std::optional<bool> in_meta;
  Outcome outcome = Outcome::NoHit;
};

/// Lowercased, punctuation folded to single spaces, trimmed.
std::string normalize_title(std::string_view title);
/// 1 - levenshtein/max_length over code points of the normalized titles.
double title_similarity(std::string_view a, std::string_view b);

std::string url_encode(std::string_view s);
std::string build_query_url(const iris::Record& record, const CrossrefConfig& config);

struct Client {
  const CrossrefConfig& config;
  HttpTransport& transport;
  RateLimiter& limiter;
  ResponseCache& cache;
  Clock& clock;
};

EnrichmentResult query_crossref(const iris::Record& record, Client& client);

/// Queries every record (bounded pool sharing one limiter), results in input
/// order, `shared` set on DOIs returned for more than one item.
std::vector<EnrichmentResult> enrich_all(const std::vector<iris::Record>& records, const CrossrefConfig& config,
                                         HttpTransport& transport, Clock& clock);

void mark_shared(std::vector<EnrichmentResult>& results);

struct Summary {
  std::uint64_t records = 0;
  std::uint64_t reconciled = 0;
  std::uint64_t in_meta = 0;
  std::uint64_t shared_dois = 0;   // distinct DOIs returned for 2+ items
  std::uint64_t shared_items = 0;  // items carrying such a DOI
  std::map<std::string, std::uint64_t> outcomes;

  bool operator==(const Summary&) const = default;
};

/// Sets in_meta on every reconciled result from the set of DOIs found in Meta.
Summary crosscheck_enriched(std::vector<EnrichmentResult>& results, const std::set<std::string>& dois_in_meta);

inline constexpr std::string_view kEnrichedHeader[] = {"item_id", "doi", "score", "shared", "in_meta"};
void write_enriched(std::ostream& out, const std::vector<EnrichmentResult>& results);

}  // namespace ocov::enrich
