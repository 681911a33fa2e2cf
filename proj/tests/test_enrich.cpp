#include <doctest.h>

#include <json.hpp>

#include "ocov/enrich.hpp"
#include "ocov/errors.hpp"
#include "support.hpp"

using namespace ocov;
using namespace std::chrono_literals;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Independent reference: Levenshtein over UTF-8 code points, two rows.
std::u32string code_points(const std::string& s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    const int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    char32_t cp = len == 1 ? c : c & (0xFF >> (len + 1));
    for (int k = 1; k < len && i + static_cast<std::size_t>(k) < s.size(); ++k)
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

double reference_similarity(const std::string& a, const std::string& b) {
  auto x = code_points(a), y = code_points(b);
  if (x.empty() && y.empty()) return 1.0;
  std::vector<std::size_t> d(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) d[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diag = d[0];
    d[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      const std::size_t up = d[j];
      d[j] = std::min({d[j] + 1, d[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return 1.0 - static_cast<double>(d[y.size()]) / static_cast<double>(std::max(x.size(), y.size()));
}

iris::Record rec(const std::string& id, const std::string& title, const std::string& authors = "") {
  iris::Record r;
  r.item_id = id;
  r.title = title;
  if (!authors.empty()) r.aux["authors"] = authors;
  return r;
}

std::string hit_body(const std::string& doi, const std::string& title, double score = 40.0) {
  json item = {{"DOI", doi}, {"title", json::array({title})}, {"score", score}};
  return json({{"status", "ok"}, {"message", {{"items", json::array({item})}}}}).dump();
}

std::string empty_body() { return json({{"message", {{"items", json::array()}}}}).dump(); }

// Writes index.json; each value is one response spec or a list served in order.
void write_fixtures(const fs::path& dir, const json& index) {
  testing::write(dir / "index.json", index.dump(2));
}

struct Rig {
  testing::TempDir dir;
  enrich::ManualClock clock;
  enrich::CrossrefConfig cfg;
  Rig() {
    cfg.cache_dir = dir / "cache";
    cfg.backoff_initial = 1s;
  }
  std::string url(const iris::Record& r) const { return enrich::build_query_url(r, cfg); }
};

}  // namespace

TEST_SUITE("enrich") {
  TEST_CASE("title normalization and similarity") {
    CHECK(enrich::normalize_title("  The Quick,  Brown -- Fox!  ") == "the quick brown fox");
    CHECK(enrich::title_similarity("Same Title", "same title.") == doctest::Approx(1.0));
    const double micro = enrich::title_similarity("An article without any identifiers", "An article without any identifier");
    CHECK(micro == doctest::Approx(0.9706).epsilon(0.0001));
    CHECK(micro >= 0.97);

    testing::Gen g(8);
    const std::vector<std::string> alphabet = {"a", "b", "c", " ", "\xC3\xA0", "\xC3\xA8", "z", "\xE2\x82\xAC"};
    for (int i = 0; i < 500; ++i) {
      std::string a, b;
      for (std::size_t k = 0, n = 1 + g.below(15); k < n; ++k) a += g.pick(alphabet);
      for (std::size_t k = 0, n = 1 + g.below(15); k < n; ++k) b += g.pick(alphabet);
      const auto na = enrich::normalize_title(a), nb = enrich::normalize_title(b);
      CHECK(enrich::title_similarity(a, b) == doctest::Approx(reference_similarity(na, nb)));
      CHECK(enrich::title_similarity(a, b) == doctest::Approx(enrich::title_similarity(b, a)));
    }
  }

  TEST_CASE("query url") {
    enrich::CrossrefConfig cfg;
    auto url = enrich::build_query_url(rec("M5", "An article without any identifiers", "Neri, Luca"), cfg);
    auto index = json::parse(testing::read(testing::fixtures() / "micro/crossref/index.json"));
    CHECK(index.contains(url));
    cfg.max_authors = 2;
    cfg.mailto = "a@b.org";
    CHECK(enrich::build_query_url(rec("X", "T", "A; B; C"), cfg) ==
          "https://api.crossref.org/works?query.bibliographic=T&query.author=A%20B&rows=1&mailto=a%40b.org");
    CHECK(enrich::url_encode("a b/ü") == "a%20b%2F%C3%BC");
  }

  TEST_CASE("limiter never exceeds the window") {
    enrich::ManualClock clock;
    enrich::RateLimiter limiter(5, 1s, clock);
    std::vector<enrich::Nanos> grants;
    for (int i = 0; i < 23; ++i) {
      limiter.acquire();
      grants.push_back(clock.now());
    }
    for (std::size_t i = 5; i < grants.size(); ++i) CHECK(grants[i] - grants[i - 5] >= 1s);
    CHECK(grants.back() == 4s);  // 23 grants at 5 per second: the last batch starts at t=4s
    limiter.defer_until(clock.now() + 10s);
    limiter.acquire();
    CHECK(clock.now() == 14s);
  }

  TEST_CASE("resolved hit, then served from cache") {
    Rig rig;
    auto r = rec("A", "Linked open data in archives", "Rossi, Mario");
    write_fixtures(rig.dir / "fx", {{rig.url(r), {{"status", 200}, {"body", hit_body("10.1000/XYZ", "Linked Open Data in Archives")}}}});
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    auto res = enrich::enrich_all({r}, rig.cfg, transport, rig.clock);
    REQUIRE(res.size() == 1);
    CHECK(res[0].outcome == enrich::Outcome::Resolved);
    CHECK(res[0].candidate_doi->str() == "doi:10.1000/xyz");
    CHECK(res[0].match_score == doctest::Approx(1.0));
    CHECK(transport.requests().size() == 1);

    auto again = enrich::enrich_all({r}, rig.cfg, transport, rig.clock);
    CHECK(transport.requests().size() == 1);
    CHECK(again[0].candidate_doi == res[0].candidate_doi);
  }

  TEST_CASE("429 honours Retry-After and is not cached") {
    Rig rig;
    auto r = rec("A", "Some title");
    write_fixtures(rig.dir / "fx",
                   {{rig.url(r), json::array({{{"status", 429}, {"body", ""}, {"headers", {{"Retry-After", "7"}}}},
                                              {{"status", 200}, {"body", hit_body("10.1000/q", "Some title")}}})}});
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    auto res = enrich::enrich_all({r}, rig.cfg, transport, rig.clock);
    CHECK(res[0].outcome == enrich::Outcome::Resolved);
    auto log = transport.requests();
    REQUIRE(log.size() == 2);
    CHECK(log[1].second - log[0].second >= 7s);
    CHECK(fs::exists(rig.cfg.cache_dir));
    CHECK(std::distance(fs::directory_iterator(rig.cfg.cache_dir), fs::directory_iterator{}) == 1);
  }

  TEST_CASE("404 is a miss without retries; persistent errors fail after retries") {
    Rig rig;
    auto miss = rec("M", "Missing");
    auto broken = rec("B", "Broken");
    write_fixtures(rig.dir / "fx", {{rig.url(miss), {{"status", 404}, {"body", ""}}},
                                    {rig.url(broken), {{"status", 503}, {"body", ""}}}});
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    auto res = enrich::enrich_all({miss, broken}, rig.cfg, transport, rig.clock);
    CHECK(res[0].outcome == enrich::Outcome::NoHit);
    CHECK(res[1].outcome == enrich::Outcome::Failed);
    CHECK(transport.requests().size() == 1 + 1 + static_cast<std::size_t>(rig.cfg.max_retries));
    // exponential backoff 1s, 2s, 4s between the failing attempts
    auto log = transport.requests();
    CHECK(log.back().second - log[1].second >= 7s);
    const bool cached = fs::exists(rig.cfg.cache_dir) && !fs::is_empty(rig.cfg.cache_dir);
    CHECK_FALSE(cached);
  }

  TEST_CASE("unknown url in fixtures counts as a failed request") {
    Rig rig;
    write_fixtures(rig.dir / "fx", json::object());
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    rig.cfg.max_retries = 0;
    auto res = enrich::enrich_all({rec("U", "Unlisted")}, rig.cfg, transport, rig.clock);
    CHECK(res[0].outcome == enrich::Outcome::Failed);
  }

  TEST_CASE("outcomes: no title, empty result, below floor, bad doi, shared") {
    Rig rig;
    auto low = rec("L", "Completely different words");
    auto bad = rec("D", "Title with broken doi");
    auto s1 = rec("S1", "Shared work");
    auto s2 = rec("S2", "Shared work.");
    auto none = rec("N", "Nothing found");
    write_fixtures(rig.dir / "fx", {
                                       {rig.url(low), {{"body", hit_body("10.1000/low", "Unrelated heading here")}}},
                                       {rig.url(bad), {{"body", hit_body("not-a-doi", "Title with broken doi")}}},
                                       {rig.url(s1), {{"body", hit_body("10.1000/s", "Shared work")}}},
                                       {rig.url(s2), {{"body", hit_body("10.1000/S", "Shared work")}}},
                                       {rig.url(none), {{"body", empty_body()}}},
                                   });
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    iris::Record untitled;
    untitled.item_id = "T";
    auto res = enrich::enrich_all({untitled, low, bad, s1, s2, none}, rig.cfg, transport, rig.clock);
    CHECK(res[0].outcome == enrich::Outcome::NoTitle);
    CHECK(res[1].outcome == enrich::Outcome::BelowThreshold);
    CHECK(res[1].match_score < 0.9);
    CHECK(res[2].outcome == enrich::Outcome::BadDoi);
    CHECK(res[3].shared);
    CHECK(res[4].shared);
    CHECK(res[5].outcome == enrich::Outcome::NoHit);

    auto summary = enrich::crosscheck_enriched(res, {"doi:10.1000/s"});
    CHECK(summary.records == 6);
    CHECK(summary.reconciled == 2);
    CHECK(summary.in_meta == 2);
    CHECK(summary.shared_dois == 1);
    CHECK(summary.shared_items == 2);

    std::ostringstream out;
    enrich::write_enriched(out, res);
    CHECK(out.str().find("S1,10.1000/s,1.0000,yes,yes") != std::string::npos);
  }

  TEST_CASE("score threshold rejects weak hits") {
    Rig rig;
    rig.cfg.score_threshold = 50.0;
    auto r = rec("A", "A title");
    write_fixtures(rig.dir / "fx", {{rig.url(r), {{"body", hit_body("10.1000/a", "A title", 12.0)}}}});
    enrich::FixtureTransport transport(rig.dir / "fx", &rig.clock);
    CHECK(enrich::enrich_all({r}, rig.cfg, transport, rig.clock)[0].outcome == enrich::Outcome::BelowThreshold);
  }

  TEST_CASE("results do not depend on worker count") {
    Rig rig;
    std::vector<iris::Record> rs;
    json index = json::object();
    for (int i = 0; i < 30; ++i) {
      auto r = rec("I" + std::to_string(i), "Work number " + std::to_string(i));
      rs.push_back(r);
      index[rig.url(r)] = {{"body", hit_body("10.1000/w" + std::to_string(i % 20), "Work number " + std::to_string(i))}};
    }
    write_fixtures(rig.dir / "fx", index);
    enrich::FixtureTransport t1(rig.dir / "fx", &rig.clock);
    auto serial = enrich::enrich_all(rs, rig.cfg, t1, rig.clock);
    fs::remove_all(rig.cfg.cache_dir);
    rig.cfg.workers = 4;
    enrich::ManualClock clock2;
    enrich::FixtureTransport t2(rig.dir / "fx", &clock2);
    auto parallel = enrich::enrich_all(rs, rig.cfg, t2, clock2);
    std::ostringstream a, b;
    enrich::write_enriched(a, serial);
    enrich::write_enriched(b, parallel);
    CHECK(a.str() == b.str());
    // 30 requests at 5 per second: the last batch is granted at t=5s
    CHECK(t2.requests().size() == 30);
    CHECK(clock2.now() >= 5s);
    auto log = t2.requests();
    std::vector<enrich::Nanos> times;
    for (auto& [u, t] : log) times.push_back(t);
    std::sort(times.begin(), times.end());
    for (std::size_t i = 5; i < times.size(); ++i) CHECK(times[i] - times[i - 5] >= 1s);
  }

  TEST_CASE("cache path is stable per url") {
    testing::TempDir dir;
    enrich::ResponseCache cache(dir / "c");
    CHECK_FALSE(cache.get("u1"));
    cache.put("u1", "body");
    CHECK(cache.get("u1") == "body");
    CHECK(cache.entry_path("u1") != cache.entry_path("u2"));
  }
}
