#include <doctest.h>

#include "ocov/pid.hpp"
#include "support.hpp"

using namespace ocov;
using pid::Reason;

namespace {

std::string accepted_str(const pid::Result& r) {
  REQUIRE(pid::accepted(r));
  return pid::value(r).str();
}

Reason reason(const pid::Result& r) {
  REQUIRE_FALSE(pid::accepted(r));
  return pid::rejection(r).reason;
}

}  // namespace

TEST_SUITE("pid") {
  TEST_CASE("validator examples table") {
    // The published validation examples, row by row.
    CHECK(accepted_str(pid::parse_doi("10.3303/CET1543057")) == "doi:10.3303/cet1543057");
    CHECK(reason(pid::parse_doi("10. 193 /infdis/jju617")) == Reason::Whitespace);
    CHECK(reason(pid::parse_doi("10. 193/infdis/jju617")) == Reason::Whitespace);
    CHECK(reason(pid::parse_doi("9788838697340")) == Reason::WrongSchemeShape);
    CHECK(accepted_str(pid::parse_pmid("PMID: 9276009")) == "pmid:9276009");
    CHECK(reason(pid::parse_pmid("PMC 4874964")) == Reason::PmcId);
    CHECK(reason(pid::parse_pmid("PMC 2206475")) == Reason::PmcId);
    CHECK(accepted_str(pid::parse_isbn("888809556X; 978-8888095561")) == "isbn:888809556x");
    CHECK(reason(pid::parse_isbn("88.6080.002.1")) == Reason::BadChars);
    CHECK(reason(pid::parse_isbn("(OBRA COMPLETA); (VOL. I)")) == Reason::BadChars);
  }

  TEST_CASE("doi rules") {
    CHECK(reason(pid::parse_doi("")) == Reason::Empty);
    CHECK(reason(pid::parse_doi("   ")) == Reason::Empty);
    CHECK(reason(pid::parse_doi("https://doi.org/")) == Reason::Empty);
    CHECK(accepted_str(pid::parse_doi("https://doi.org/10.1000/XYZ")) == "doi:10.1000/xyz");
    CHECK(accepted_str(pid::parse_doi("HTTP://DX.DOI.ORG/10.1000/a")) == "doi:10.1000/a");
    CHECK(accepted_str(pid::parse_doi("doi: 10.1000/a ")) == "doi:10.1000/a");
    CHECK(accepted_str(pid::parse_doi("doi.org/10.123456789/a")) == "doi:10.123456789/a");
    CHECK(reason(pid::parse_doi("10.123/a")) == Reason::WrongSchemeShape);         // registrant too short
    CHECK(reason(pid::parse_doi("10.1234567890/a")) == Reason::WrongSchemeShape);  // too long
    CHECK(reason(pid::parse_doi("10.1234/")) == Reason::WrongSchemeShape);
    CHECK(reason(pid::parse_doi("10.1234/a\xC2\xA0" "b")) == Reason::Whitespace);
    CHECK(reason(pid::parse_doi("urn:10.1234/abc")) == Reason::BadPrefix);
    CHECK(pid::strip_doi_label(" doi:10.1/x").second);
    CHECK_FALSE(pid::strip_doi_label("10.1/x").second);
  }

  TEST_CASE("pmid rules") {
    CHECK(accepted_str(pid::parse_pmid("0009276009")) == "pmid:9276009");
    CHECK(accepted_str(pid::parse_pmid("pmid:42")) == "pmid:42");
    CHECK(reason(pid::parse_pmid("PMID: PMC123")) == Reason::PmcId);
    CHECK(reason(pid::parse_pmid("12A34")) == Reason::NonDigit);
    CHECK(reason(pid::parse_pmid("")) == Reason::Empty);
    CHECK(reason(pid::parse_pmid("000")) == Reason::Empty);
    CHECK(reason(pid::parse_pmid("-5")) == Reason::NonDigit);
  }

  TEST_CASE("isbn rules") {
    CHECK(accepted_str(pid::parse_isbn("978-88-88095-56-1")) == "isbn:9788888095561");
    CHECK(accepted_str(pid::parse_isbn("ISBN-13: 978 88 88095 56 1")) == "isbn:9788888095561");
    CHECK(accepted_str(pid::parse_isbn("isbn 888809556x")) == "isbn:888809556x");
    CHECK(reason(pid::parse_isbn("12345")) == Reason::BadLength);
    CHECK(reason(pid::parse_isbn("88880X5561")) == Reason::BadChars);  // X not in the check position
    CHECK(reason(pid::parse_isbn("978888809556X")) == Reason::BadChars);
    CHECK(reason(pid::parse_isbn("; 978")) == Reason::Empty);
    pid::Options strict;
    strict.isbn_checksum = true;
    CHECK(accepted_str(pid::parse_isbn("888809556X", strict)) == "isbn:888809556x");
    CHECK(reason(pid::parse_isbn("8888095561", strict)) == Reason::BadChecksum);
    CHECK(reason(pid::parse_isbn("9788888095562", strict)) == Reason::BadChecksum);
    CHECK(accepted_str(pid::parse_isbn("9788888095562")) == "isbn:9788888095562");  // checksum off by default
  }

  TEST_CASE("normalize dispatches and serializes") {
    CHECK(accepted_str(pid::normalize(pid::Scheme::Doi, "10.3303/CET1543057")) == "doi:10.3303/cet1543057");
    CHECK(accepted_str(pid::normalize(pid::Scheme::Pmid, "PMID: 9276009")) == "pmid:9276009");
    CHECK(accepted_str(pid::normalize(pid::Scheme::Isbn, "978-88-88095-56-1")) == "isbn:9788888095561");
    auto p = pid::parse_serialized("doi:10.1000/ABC");
    REQUIRE(p);
    CHECK(p->str() == "doi:10.1000/abc");
    CHECK_FALSE(pid::parse_serialized("issn:1234-5678"));
    CHECK_FALSE(pid::parse_serialized("nocolon"));
  }

  TEST_CASE("isbn alternate forms round trip") {
    CHECK(pid::isbn_alternate("888809556x") == std::optional<std::string>("9788888095561"));
    CHECK(pid::isbn_alternate("9788888095561") == std::optional<std::string>("888809556x"));
    CHECK_FALSE(pid::isbn_alternate("9798888095561"));
    testing::Gen g(11);
    for (int i = 0; i < 500; ++i) {
      const auto body = g.digits(9);
      const auto thirteen = *pid::isbn_alternate(body + "0");
      CHECK(pid::isbn_checksum_ok(thirteen));
      const auto ten = *pid::isbn_alternate(thirteen);
      CHECK(pid::isbn_checksum_ok(ten));
      CHECK(ten.substr(0, 9) == body);
      CHECK(*pid::isbn_alternate(ten) == thirteen);
    }
  }

  TEST_CASE("property: spelling variants normalize to one canonical form") {
    testing::Gen g(2024);
    const std::vector<std::string> labels = {"", "doi:", "DOI:", "https://doi.org/", "http://dx.doi.org/", "doi.org/"};
    for (int i = 0; i < 1000; ++i) {
      std::string suffix;
      for (std::size_t k = 0, n = 1 + g.below(12); k < n; ++k)
        suffix += "abcXYZ019./-_()"[g.below(15)];
      const std::string canonical = "10." + g.digits(4 + g.below(6)) + "/" + suffix;
      std::string spelled = g.pick(labels) + canonical;
      for (auto& c : spelled)
        if (g.coin(0.3) && c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
      if (g.coin()) spelled = "  " + spelled + "\t";
      auto r = pid::parse_doi(spelled);
      REQUIRE_MESSAGE(pid::accepted(r), spelled);
      std::string lower = canonical;
      for (auto& c : lower)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
      CHECK(pid::value(r).value == lower);
      // Idempotent on its own output.
      CHECK(accepted_str(pid::parse_doi(pid::value(r).value)) == pid::value(r).str());

      const auto n = std::to_string(1 + g.below(99999999));
      const std::string zeros(g.below(4), '0');
      CHECK(accepted_str(pid::parse_pmid((g.coin() ? "PMID: " : "") + zeros + n)) == "pmid:" + n);

      std::string isbn = g.digits(13), spaced;
      for (char c : isbn) {
        spaced += c;
        if (g.coin(0.2)) spaced += g.coin() ? '-' : ' ';
      }
      CHECK(accepted_str(pid::parse_isbn(spaced)) == "isbn:" + isbn);
    }
  }
}
