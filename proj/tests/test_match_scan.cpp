#include <doctest.h>

#include <map>
#include <set>

#include "ocov/citation_scan.hpp"
#include "ocov/oc_match.hpp"
#include "ocov/opencitations.hpp"
#include "support.hpp"

using namespace ocov;
namespace fs = std::filesystem;

namespace {

const char* kMetaHeader = "id,title,author,issue,volume,venue,page,pub_date,type,publisher,editor\n";
const char* kIndexHeader = "id,citing,cited,creation,timespan,journal_sc,author_sc\n";

dedup::UniqueRow unique(const std::string& p, const std::string& item, const std::string& type = "1.01 Journal article") {
  auto parsed = pid::parse_serialized(p);
  REQUIRE_MESSAGE(parsed, p);
  return {*parsed, item, type, 1};
}

std::string tally_key(const scan::RoleTally& t) {
  return std::to_string(t.citing) + "/" + std::to_string(t.cited) + "/" + std::to_string(t.both) + "/" +
         std::to_string(t.unique_total);
}

// Every deduplicated pid lands in exactly one of the two outputs.
bool in_meta_plus_rest(const match::MatchResult& res, const std::vector<dedup::UniqueRow>& u) {
  std::multiset<std::string> seen, want;
  for (auto& r : res.in_meta) seen.insert(r.pid.str());
  for (auto& r : res.not_in_meta) seen.insert(r.pid.str());
  for (auto& r : u) want.insert(r.pid.str());
  return seen == want;
}

}  // namespace

TEST_SUITE("opencitations") {
  TEST_CASE("identifier parsers") {
    auto o = oc::parse_omid("omid:br/061602192186");
    REQUIRE(o);
    CHECK(o->entity_type == "br");
    CHECK(o->numeral == "061602192186");
    CHECK(o->supplier_prefix() == "06160");
    CHECK(oc::parse_omid("br/0601")->supplier_prefix() == "060");
    CHECK_FALSE(oc::parse_omid("br/1234")->supplier_prefix());
    CHECK(oc::parse_omid("br/0601")->str() == "br/0601");
    CHECK_FALSE(oc::parse_omid("br/"));
    CHECK_FALSE(oc::parse_omid("doi:10.1000/x"));
    // numerals longer than any machine integer stay exact
    CHECK(oc::parse_omid("br/06012345678901234567890123")->numeral == "06012345678901234567890123");

    auto oci = oc::parse_oci("oci:06404659278-06201483429");
    REQUIRE(oci);
    CHECK(oci->citing == "06404659278");
    CHECK(oci->cited == "06201483429");
    CHECK_FALSE(oc::parse_oci("oci:0640"));

    CHECK(oc::parse_timespan("P2Y3M12D") == oc::Timespan{false, 2, 3, 12});
    CHECK(oc::parse_timespan("-P1M") == oc::Timespan{true, 0, 1, 0});
    CHECK(oc::parse_timespan("P0Y") == oc::Timespan{false, 0, 0, 0});
    CHECK_FALSE(oc::parse_timespan("P"));
    CHECK_FALSE(oc::parse_timespan("2Y"));
    CHECK_FALSE(oc::parse_timespan("P1D2Y"));
  }

  TEST_CASE("index sample row") {
    testing::TempDir dir;
    testing::write(dir / "i.csv", std::string(kIndexHeader) +
                                      "oci:06404659278-06201483429,omid:br/06404659278,omid:br/06201483429,"
                                      "2023-11-29,P2Y3M12D,yes,no\n");
    csv::Reader r(dir / "i.csv");
    auto h = csv::read_header(r);
    oc::IndexLayout layout(h, "i.csv");
    csv::Row row;
    REQUIRE(r.next(row));
    auto e = oc::parse_citation_row(row, layout);
    REQUIRE(e);
    CHECK(e->creation == "2023-11-29");
    CHECK(e->timespan == oc::Timespan{false, 2, 3, 12});
    CHECK(e->journal_sc);
    CHECK_FALSE(e->author_sc);
    CHECK_FALSE(e->oci_mismatch);
  }

  TEST_CASE("meta row") {
    testing::TempDir dir;
    testing::write(dir / "m.csv", std::string(kMetaHeader) +
                                      "omid:br/0601 doi:10.1000/X issn:1234-5678 pmid:5,T,,,,,,2018-03,"
                                      "book chapter,,\nno omid here,T,,,,,,,,,\n");
    csv::Reader r(dir / "m.csv");
    auto h = csv::read_header(r);
    oc::MetaLayout layout(h, "m.csv");
    csv::Row row;
    REQUIRE(r.next(row));
    auto m = oc::parse_meta_row(row, layout);
    REQUIRE(m);
    CHECK(m->omid.str() == "br/0601");
    CHECK(m->external_ids == std::vector<std::string>{"doi:10.1000/x", "pmid:5"});
    CHECK(m->pub_year == 2018);
    CHECK(m->type == "book chapter");
    CHECK(m->non_empty_columns == 4);
    REQUIRE(r.next(row));
    CHECK_FALSE(oc::parse_meta_row(row, layout));
  }
}

TEST_SUITE("match") {
  TEST_CASE("statuses, collisions and temporal exclusion") {
    testing::TempDir dir;
    testing::write(dir / "meta/a.csv", std::string(kMetaHeader) +
                                           "omid:br/0601 doi:10.1000/a,T,A,,,V,,2020,journal article,,\n"
                                           "omid:br/0609 doi:10.1000/a,T,,,,,,2020,journal article,,\n"
                                           "omid:br/0602 doi:10.1000/late,T,,,,,,2027,journal article,,\n"
                                           "broken row,,,,,,,,,,\n");
    testing::write(dir / "meta/b.csv", std::string(kMetaHeader) +
                                           "omid:br/0603 pmid:7,T,,,,,,,journal article,,\n"
                                           "omid:br/0604 isbn:9788888095561,T,,,,,,2001,book,,\n");
    std::vector<dedup::UniqueRow> u = {unique("doi:10.1000/a", "A"), unique("doi:10.1000/late", "L"),
                                       unique("pmid:7", "P"), unique("doi:10.1000/none", "N"),
                                       unique("isbn:888809556x", "I")};
    match::MatchOptions opts;
    opts.cutoff_year = 2025;
    // pmid:7 has no Meta year, so the CRIS year decides
    auto res = match::match_against_meta(u, io::list_shards(dir / "meta"), {{"pmid:7", 2019}}, opts);

    REQUIRE(res.in_meta.size() == 2);
    CHECK(res.in_meta[0].pid.str() == "doi:10.1000/a");
    CHECK(res.in_meta[0].omid == "br/0601");
    CHECK(res.in_meta[1].pid.str() == "pmid:7");
    CHECK_FALSE(res.in_meta[1].meta_year);

    REQUIRE(res.not_in_meta.size() == 3);
    std::map<std::string, match::Status> st;
    for (auto& r : res.not_in_meta) st[r.pid.str()] = r.status;
    // year 2027 is beyond the plausible range, so it is absent, and no fallback exists
    CHECK(st["doi:10.1000/late"] == match::Status::ExcludedTemporal);
    CHECK(st["doi:10.1000/none"] == match::Status::NotInMeta);
    CHECK(st["isbn:888809556x"] == match::Status::NotInMeta);
    CHECK(res.stats.isbn_near_misses == 1);
    CHECK(res.stats.malformed_rows == 1);
    CHECK(res.stats.meta_rows == 6);

    REQUIRE(res.collisions.size() == 1);
    CHECK(res.collisions[0].candidates.front().omid == "br/0601");
    CHECK(in_meta_plus_rest(res, u));
  }

  TEST_CASE("better orders by completeness, then omid") {
    match::Candidate a{"br/0602", 5, "", std::nullopt, 1};
    match::Candidate b{"br/0601", 5, "", std::nullopt, 2};
    match::Candidate c{"br/0609", 6, "", std::nullopt, 3};
    CHECK(match::better(c, a));
    CHECK(match::better(b, a));
    CHECK_FALSE(match::better(a, a));
  }

  TEST_CASE("property: partition identity and shard-order invariance") {
    testing::Gen g(99);
    for (int round = 0; round < 25; ++round) {
      testing::TempDir dir;
      std::vector<dedup::UniqueRow> u;
      std::set<std::string> used;
      for (int i = 0, n = 1 + static_cast<int>(g.below(40)); i < n; ++i) {
        auto p = "doi:10.1000/w" + std::to_string(g.below(60));
        if (!used.insert(p).second) continue;
        u.push_back(unique(p, "I" + std::to_string(i)));
      }
      const int shard_count = 1 + static_cast<int>(g.below(5));
      std::vector<std::string> bodies(static_cast<std::size_t>(shard_count), kMetaHeader);
      for (int r = 0, n = static_cast<int>(g.below(120)); r < n; ++r) {
        auto& b = bodies[g.below(static_cast<std::uint64_t>(shard_count))];
        b += "omid:br/06" + std::to_string(r) + " doi:10.1000/w" + std::to_string(g.below(80)) + ",T," +
             (g.coin() ? "X" : "") + ",,,,," + std::to_string(2015 + g.below(15)) + ",journal article,,\n";
      }
      for (int s = 0; s < shard_count; ++s) testing::write_gz(dir / ("meta/m" + std::to_string(s) + ".csv.gz"), bodies[s]);
      auto shards = io::list_shards(dir / "meta");

      match::MatchOptions base_opts;
      auto base = match::match_against_meta(u, shards, {}, base_opts);
      CHECK(base.in_meta.size() + base.not_in_meta.size() == u.size());
      CHECK(in_meta_plus_rest(base, u));
      for (auto [order, workers] : {std::pair{shards::Order::Reversed, 2}, std::pair{shards::Order::Shuffled, 3}}) {
        match::MatchOptions o;
        o.run.order = order;
        o.run.workers = workers;
        o.run.shuffle_seed = static_cast<std::uint64_t>(round);
        auto other = match::match_against_meta(u, shards, {}, o);
        REQUIRE(other.in_meta.size() == base.in_meta.size());
        for (std::size_t i = 0; i < base.in_meta.size(); ++i) {
          CHECK(other.in_meta[i].omid == base.in_meta[i].omid);
          CHECK(other.in_meta[i].pid == base.in_meta[i].pid);
        }
        CHECK(other.not_in_meta.size() == base.not_in_meta.size());
        CHECK(other.collisions.size() == base.collisions.size());
      }
    }
  }
}

TEST_SUITE("scan") {
  TEST_CASE("twenty edges, four touching the set") {
    testing::TempDir dir;
    std::string body = kIndexHeader;
    auto edge = [&](const std::string& a, const std::string& b) {
      body += "oci:" + a + "-" + b + ",omid:br/" + a + ",omid:br/" + b + ",2020,P1Y,no,no\n";
    };
    edge("061", "069");  // citing
    edge("062", "068");  // citing
    edge("067", "061");  // cited
    edge("061", "062");  // both
    for (int i = 0; i < 16; ++i) edge("07" + std::to_string(i), "08" + std::to_string(i));
    testing::write(dir / "index/i.csv", body);
    scan::OmidSet set = {{"br/061", 2020}, {"br/062", 2020}};
    std::ostringstream edges;
    auto res = scan::scan_index(set, io::list_shards(dir / "index"), edges, {});
    CHECK(res.stats.rows == 20);
    CHECK(res.tally == scan::RoleTally{3, 2, 1, 4});
    CHECK(res.tally.consistent());

    testing::write(dir / "edges.csv", edges.str());
    CHECK(scan::tally_dataset(dir / "edges.csv") == res.tally);
    auto incoming = scan::incoming_citation_counts(dir / "edges.csv", set);
    CHECK(incoming == std::map<std::string, std::uint64_t>{{"br/061", 1}, {"br/062", 1}});
  }

  TEST_CASE("dates: cutoff, meta fallback, undated") {
    testing::TempDir dir;
    testing::write(dir / "index/i.csv", std::string(kIndexHeader) +
                                            "oci:061-070,omid:br/061,omid:br/070,2026-01-01,P1Y,no,no\n"
                                            "oci:061-071,omid:br/061,omid:br/071,,,no,no\n"
                                            "oci:072-061,omid:br/072,omid:br/061,,,no,no\n"
                                            "oci:063-071,omid:br/063,omid:br/071,,,no,no\n"
                                            "oci:999-071,omid:br/064,omid:br/071,2020,PXY,no,no\n"
                                            "oci:bad,garbage,omid:br/061,2020,,no,no\n");
    scan::OmidSet set = {{"br/061", 2020}, {"br/063", 2030}, {"br/064", std::nullopt}};
    std::ostringstream edges;
    scan::ScanOptions opts;
    opts.cutoff_year = 2025;
    auto res = scan::scan_index(set, io::list_shards(dir / "index"), edges, opts);
    // 2026 creation and the 2030 Meta fallback both fall after the cutoff
    CHECK(res.stats.excluded_temporal == 2);
    CHECK(res.stats.year_from_meta == 2);
    CHECK(res.stats.year_unknown == 1);
    CHECK(res.stats.malformed_rows == 1);
    CHECK(res.stats.oci_mismatches == 1);
    CHECK(res.stats.bad_timespans == 1);
    CHECK(res.tally == scan::RoleTally{2, 1, 0, 3});
  }

  TEST_CASE("property: tally matches brute force and is order independent") {
    testing::Gen g(31337);
    for (int round = 0; round < 20; ++round) {
      testing::TempDir dir;
      const int nodes = 5 + static_cast<int>(g.below(50));
      scan::OmidSet set;
      for (int i = 0; i < nodes; ++i)
        if (g.coin(0.3)) set["br/06" + std::to_string(i)] = g.coin(0.8) ? std::optional<int>(2000 + g.below(30)) : std::nullopt;
      const int shard_count = 1 + static_cast<int>(g.below(4));
      std::vector<std::string> bodies(static_cast<std::size_t>(shard_count), kIndexHeader);
      scan::RoleTally expect;
      for (int e = 0, n = static_cast<int>(g.below(400)); e < n; ++e) {
        const auto a = "06" + std::to_string(g.below(static_cast<std::uint64_t>(nodes)));
        const auto b = "06" + std::to_string(g.below(static_cast<std::uint64_t>(nodes)));
        std::optional<int> created;
        if (g.coin(0.8)) created = 2000 + static_cast<int>(g.below(30));
        bodies[g.below(static_cast<std::uint64_t>(shard_count))] +=
            "oci:" + a + "-" + b + ",omid:br/" + a + ",omid:br/" + b + "," +
            (created ? std::to_string(*created) + "-06-01" : "") + ",,no,no\n";
        const bool in_a = set.count("br/" + a), in_b = set.count("br/" + b);
        if (!in_a && !in_b) continue;
        std::optional<int> year = created;
        if (!year && in_a) year = set["br/" + a];
        if (year && *year > 2025) continue;
        expect.add(in_a && in_b ? scan::Role::Both : in_a ? scan::Role::Citing : scan::Role::Cited);
      }
      for (int s = 0; s < shard_count; ++s) testing::write(dir / ("ix/" + std::to_string(s) + ".csv"), bodies[s]);
      auto shards = io::list_shards(dir / "ix");
      std::ostringstream base_edges;
      auto base = scan::scan_index(set, shards, base_edges, {});
      CHECK(tally_key(base.tally) == tally_key(expect));
      CHECK(base.tally.consistent());
      scan::ScanOptions o;
      o.run.order = shards::Order::Shuffled;
      o.run.workers = 3;
      o.run.shuffle_seed = 5;
      std::ostringstream other_edges;
      auto other = scan::scan_index(set, shards, other_edges, o);
      CHECK(other.tally == base.tally);
      CHECK(other_edges.str() == base_edges.str());
    }
  }
}
