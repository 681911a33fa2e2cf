#include <doctest.h>

#include <set>

#include "ocov/errors.hpp"
#include "ocov/iris_ingest.hpp"
#include "ocov/selector.hpp"
#include "ocov/text.hpp"
#include "support.hpp"

using namespace ocov;
namespace fs = std::filesystem;

namespace {

iris::DumpAdapter default_adapter() { return iris::DumpAdapter::load(fs::path(OCOV_DEFAULT_DATA_DIR) / "iris_adapter.json"); }

const iris::Record& by_id(const std::vector<iris::Record>& rs, const std::string& id) {
  for (auto& r : rs)
    if (r.item_id == id) return r;
  FAIL("no record " << id);
  throw 0;
}

iris::Record record(std::string id, std::vector<pid::RawIdentifier> ids) {
  iris::Record r;
  r.item_id = std::move(id);
  r.identifiers = std::move(ids);
  return r;
}

// Minimal two-file dump for targeted cases.
const char* kTinyAdapter = R"({
  "files": {
    "master": {"file": "m.csv", "required": true,
               "columns": {"item_id": "ID", "title": "T", "pub_date": "D", "iris_type": "TY"}},
    "identifier": {"file": "i.csv", "required": true,
                   "columns": {"item_id": "ID", "id_scheme": "S", "id_value": "V"}}
  }
})";

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("micro dump joins every file") {
    auto res = iris::load_iris_dump(testing::fixtures() / "micro/iris", default_adapter(), {1000, 2026});
    REQUIRE(res.records.size() == 5);
    CHECK(res.records[0].item_id == "M1");
    const auto& m1 = by_id(res.records, "M1");
    CHECK(m1.pub_year == 2020);
    CHECK(m1.aux.at("venue") == "Journal of Tests");
    CHECK(m1.aux.at("publisher") == "Editrice Uno");
    CHECK(m1.aux.at("author_count") == "2");
    REQUIRE(m1.identifiers.size() == 1);
    CHECK(m1.identifiers[0] == pid::RawIdentifier{pid::Scheme::Doi, "https://doi.org/10.1000/ABC.1"});
    CHECK(iris::completeness_score(m1) == 7);
    CHECK(iris::completeness_score(by_id(res.records, "M4")) == 3);

    auto part = iris::partition_by_pid(res.records);
    CHECK(part.with_pid.size() == 4);
    REQUIRE(part.no_pid.size() == 1);
    CHECK(part.no_pid[0].item_id == "M5");
  }

  TEST_CASE("adapter validation") {
    CHECK_THROWS_AS(iris::DumpAdapter::from_json(R"({"files": {"bogus": {"file": "x", "columns": {}}}})"),
                    ConfigError);
    CHECK_THROWS_AS(iris::DumpAdapter::from_json(
                        R"({"files": {"master": {"file": "x", "columns": {"nonsense": "A"}}}})"),
                    ConfigError);
    CHECK_THROWS_AS(iris::DumpAdapter::from_json("not json"), ConfigError);
    CHECK_NOTHROW(iris::DumpAdapter::from_json(kTinyAdapter));
  }

  TEST_CASE("missing required file and missing column are input errors") {
    testing::TempDir dir;
    auto adapter = iris::DumpAdapter::from_json(kTinyAdapter);
    testing::write(dir / "m.csv", "ID,T,D,TY\nA,x,2000,1.01 Journal article\n");
    CHECK_THROWS_AS(iris::load_iris_dump(dir.path(), adapter), InputError);
    testing::write(dir / "i.csv", "ID,S\nA,doi\n");
    CHECK_THROWS_AS(iris::load_iris_dump(dir.path(), adapter), InputError);
  }

  TEST_CASE("long layout, orphans, duplicates and other schemes") {
    testing::TempDir dir;
    auto adapter = iris::DumpAdapter::from_json(kTinyAdapter);
    testing::write(dir / "m.csv",
                   "ID,T,D,TY\nA,Alpha,2000,1.01 Journal article\nB,Beta,n.d.,\nA,Again,2001,x\n,empty id,,\n");
    testing::write(dir / "i.csv", "ID,S,V\nA,doi,10.1000/a\nA,issn,1234-5678\nZ,doi,10.1000/z\nB,PMID,42\n");
    auto res = iris::load_iris_dump(dir.path(), adapter, {1000, 2026});
    REQUIRE(res.records.size() == 2);
    CHECK(res.stats.duplicate_master_rows == 1);
    CHECK(res.stats.skipped_missing_id == 1);
    CHECK(res.stats.orphan_rows == 1);
    CHECK(res.stats.ignored_identifiers == 1);
    CHECK(by_id(res.records, "A").title == "Alpha");  // first master row wins
    CHECK_FALSE(by_id(res.records, "B").pub_year);
    CHECK(by_id(res.records, "B").identifiers == std::vector<pid::RawIdentifier>{{pid::Scheme::Pmid, "42"}});
  }

  TEST_CASE("year histogram") {
    std::vector<std::optional<int>> years = {2004, 2004, 2004, 2005, 2005, std::nullopt, 1950};
    auto h = iris::year_histogram(years, 1953);
    CHECK(h.by_year == std::map<int, std::uint64_t>{{2004, 3}, {2005, 2}});
    CHECK(h.unknown == 1);
    CHECK(h.before_range == 1);

    iris::Record r;
    r.pub_date = "9999";
    r.pub_year = text::plausible_year("9999", 1000, 2026);
    auto h2 = iris::year_histogram(std::vector<iris::Record>{r}, 1953);
    CHECK(h2.unknown == 1);
    CHECK(h2.by_year.empty());
  }

  TEST_CASE("persisted datasets round trip") {
    auto res = iris::load_iris_dump(testing::fixtures() / "micro/iris", default_adapter(), {1000, 2026});
    auto part = iris::partition_by_pid(res.records);
    testing::TempDir dir;
    {
      std::ofstream out(dir / "c.csv");
      iris::write_candidates(out, part.with_pid, iris::default_completeness_fields());
    }
    {
      std::ofstream out(dir / "n.csv");
      iris::write_no_id(out, part.no_pid, iris::default_completeness_fields());
    }
    auto c = iris::read_candidates(dir / "c.csv");
    REQUIRE(c.records.size() == 4);
    for (auto& r : part.with_pid) {
      auto& back = by_id(c.records, r.item_id);
      CHECK(back.identifiers == r.identifiers);
      CHECK(back.pub_year == r.pub_year);
      CHECK(c.completeness.at(r.item_id) == iris::completeness_score(r));
    }
    auto n = iris::read_no_id(dir / "n.csv");
    REQUIRE(n.records.size() == 1);
    CHECK(n.records[0].aux.at("authors") == "Neri, Luca");
  }
}

TEST_SUITE("selector") {
  TEST_CASE("scheme order and fallback") {
    using pid::Scheme;
    auto sel = selector::select_pid(record("X", {{Scheme::Isbn, "888809556X"},
                                                 {Scheme::Pmid, "PMC 1"},
                                                 {Scheme::Doi, "10. 1/x"},
                                                 {Scheme::Pmid, "77"}}));
    REQUIRE(std::holds_alternative<selector::SelectedPid>(sel));
    auto& s = std::get<selector::SelectedPid>(sel);
    CHECK(s.pid.str() == "pmid:77");
    CHECK(s.scheme_rank == 1);
    CHECK(s.fallback_depth == 2);

    auto bad = selector::select_pid(record("Y", {{Scheme::Doi, "nope"}, {Scheme::Isbn, "12"}}));
    REQUIRE(std::holds_alternative<selector::InvalidOnly>(bad));
    CHECK(std::get<selector::InvalidOnly>(bad).rejections.size() == 2);
  }

  TEST_CASE("micro selection") {
    auto res = iris::load_iris_dump(testing::fixtures() / "micro/iris", default_adapter(), {1000, 2026});
    auto part = iris::partition_by_pid(res.records);
    auto run = selector::select_all(part.with_pid);
    REQUIRE(run.selected.size() == 3);
    REQUIRE(run.invalid_only.size() == 1);
    CHECK(run.invalid_only[0].item_id == "M4");
    auto stats = selector::validation_stats(part.with_pid);
    CHECK(stats.at(pid::Scheme::Doi).raw == 3);
    CHECK(stats.at(pid::Scheme::Doi).invalid == 1);
    CHECK(stats.at(pid::Scheme::Pmid).raw == 2);
    CHECK(stats.at(pid::Scheme::Isbn).valid == 1);
    CHECK(stats.doi_labels_stripped == 1);  // the URL form of M1
  }

  TEST_CASE("property: valid plus invalid equals raw, and selection is total") {
    testing::Gen g(77);
    const std::vector<std::string> doi_pool = {"10.1000/a", "doi:10.1000/B", "10. 12/x", "", "10.12/short", "x"};
    const std::vector<std::string> pmid_pool = {"123", "PMID: 9", "PMC 4", "12a", "000"};
    const std::vector<std::string> isbn_pool = {"888809556X", "978-88-88095-56-1", "88.6", "12345", "; 978"};
    for (int round = 0; round < 200; ++round) {
      std::vector<iris::Record> rs;
      std::uint64_t raw = 0;
      for (int i = 0, n = 1 + static_cast<int>(g.below(30)); i < n; ++i) {
        iris::Record r = record("R" + std::to_string(i), {});
        for (std::size_t k = 0, m = g.below(5); k < m; ++k) {
          switch (g.below(3)) {
            case 0: r.identifiers.push_back({pid::Scheme::Doi, g.pick(doi_pool)}); break;
            case 1: r.identifiers.push_back({pid::Scheme::Pmid, g.pick(pmid_pool)}); break;
            default: r.identifiers.push_back({pid::Scheme::Isbn, g.pick(isbn_pool)}); break;
          }
          ++raw;
        }
        rs.push_back(std::move(r));
      }
      auto stats = selector::validation_stats(rs);
      auto t = stats.total();
      CHECK(t.raw == raw);
      CHECK(t.valid + t.invalid == t.raw);
      for (auto& sc : stats.per_scheme) CHECK(sc.valid + sc.invalid == sc.raw);

      auto part = iris::partition_by_pid(rs);
      auto run = selector::select_all(part.with_pid);
      CHECK(run.selected.size() + run.invalid_only.size() == part.with_pid.size());
      std::set<std::string> ids;
      for (auto& s : run.selected) ids.insert(s.item_id);
      for (auto& s : run.invalid_only) ids.insert(s.item_id);
      CHECK(ids.size() == part.with_pid.size());
    }
  }

  TEST_CASE("selected rows round trip") {
    testing::TempDir dir;
    std::vector<selector::SelectedPid> sel = {
        {"A", *pid::parse_serialized("doi:10.1000/x"), 0, 0},
        {"B", *pid::parse_serialized("isbn:888809556x"), 2, 1},
    };
    {
      std::ofstream out(dir / "s.csv");
      selector::write_selected(out, sel);
    }
    CHECK(selector::read_selected(dir / "s.csv") == sel);
  }
}
