#include <doctest.h>

#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "spidereval/csv.hpp"
#include "spidereval/data.hpp"
#include "spidereval/error.hpp"
#include "spidereval/image_io.hpp"

using namespace spidereval;

namespace {
RatingsLoad parse(const std::string& text, ParseMode mode = ParseMode::Strict) {
  std::istringstream in(text);
  return parse_ratings(in, mode);
}
const std::string kHeader = "participant_id,image_id,trial_index,rating\n";
}  // namespace

TEST_SUITE("data") {
  TEST_CASE("header-only ratings file gives an empty table") {
    const auto load = parse(kHeader);
    CHECK(load.table.size() == 0);
    CHECK(load.input_rows == 0);
  }

  TEST_CASE("valid rows are parsed with counts") {
    const auto load = parse(kHeader + "p1,i1,1,10\np1,i2,2,55.5\np2,i1,1,100\n");
    CHECK(load.table.size() == 3);
    CHECK(load.table.participant_ids() == std::vector<std::string>{"p1", "p2"});
    CHECK(load.table.image_ids() == std::vector<std::string>{"i1", "i2"});
  }

  TEST_CASE("rating out of range names the line") {
    try {
      parse(kHeader + "p1,i1,1,10\np1,i2,2,101\n");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("malformed and duplicate rows") {
    CHECK_THROWS_AS(parse(kHeader + "p1,i1,x,10\n"), ValidationError);
    CHECK_THROWS_AS(parse(kHeader + "p1,i1,1\n"), ValidationError);
    CHECK_THROWS_AS(parse(kHeader + "p1,i1,1,10\np1,i1,1,20\n"), ValidationError);
    CHECK_THROWS_AS(parse(kHeader + "p1,i1,0,10\n"), ValidationError);
    CHECK_THROWS_AS(parse("participant,image,trial,rating\n"), ValidationError);
  }

  TEST_CASE("lenient mode collects rejected rows") {
    const auto load = parse(kHeader + "p1,i1,1,10\np1,i2,2,-3\np1,i3,3,nan\n", ParseMode::Lenient);
    CHECK(load.table.size() == 1);
    CHECK(load.rejected.size() == 2);
    CHECK(load.rejected[0].line == 3);
  }

  TEST_CASE("quoted fields and CRLF") {
    const auto load = parse("participant_id,image_id,trial_index,rating\r\n\"p,1\",\"i \"\"a\"\"\",1,5\r\n");
    REQUIRE(load.table.size() == 1);
    CHECK(load.table.records()[0].participant_id == "p,1");
    CHECK(load.table.records()[0].image_id == "i \"a\"");
  }

  TEST_CASE("first-trial filter keeps the earliest trial per pair") {
    const auto t = parse(kHeader + "p1,i1,3,30\np1,i1,1,10\np1,i2,2,20\np2,i1,5,50\np2,i1,7,70\n").table;
    const auto f = first_trial_filter(t);
    REQUIRE(f.size() == 3);
    for (const auto& r : f.records()) {
      if (r.participant_id == "p1" && r.image_id == "i1") CHECK(r.rating == 10);
      if (r.participant_id == "p2") CHECK(r.rating == 50);
    }
  }

  TEST_CASE("ratings round-trip through CSV") {
    const auto t = parse(kHeader + "p1,i1,1,12.25\np2,i1,1,0\n").table;
    std::ostringstream out;
    write_ratings(out, t);
    std::istringstream in(out.str());
    const auto back = parse_ratings(in).table;
    REQUIRE(back.size() == 2);
    CHECK(back.records()[0].rating == t.records()[0].rating);
  }

  TEST_CASE("category table validates criteria and completeness") {
    std::istringstream ok("image_id,criterion,category\ni1,texture,hairy\ni2,texture,smooth\n");
    const auto c = parse_categories(ok);
    CHECK(c.label("i1", "texture") == std::optional<std::string>("hairy"));
    CHECK(!c.label("i1", "eyes"));
    std::istringstream bad("image_id,criterion,category\ni1,colour,red\n");
    CHECK_THROWS_AS(parse_categories(bad), ValidationError);
    std::istringstream incomplete(
        "image_id,criterion,category\ni1,texture,hairy\ni2,texture,smooth\ni1,eyes,visible\n");
    CHECK_THROWS_AS(parse_categories(incomplete), ValidationError);
  }

  TEST_CASE("feature table checks dimensions and values") {
    std::istringstream ok("image_id,f0,f1\na,1,2\nb,3,4.5\n");
    const auto f = parse_features(ok);
    CHECK(f.dimension() == 2);
    CHECK(f.at("b")[1] == 4.5);
    std::istringstream ragged("image_id,f0,f1\na,1\n");
    CHECK_THROWS_AS(parse_features(ragged), ValidationError);
    std::istringstream inf("image_id,f0\na,inf\n");
    CHECK_THROWS_AS(parse_features(inf), ValidationError);
    CHECK_THROWS_AS(FeatureTable({{"a", {1.0}}, {"b", {1.0, 2.0}}}), ValidationError);
  }

  TEST_CASE("format_double uses nine significant digits") {
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_double(1.0 / 3.0) == "0.333333333");
    CHECK(csv::format_double(-0.0) == "0");
    CHECK(csv::format_double(1e-12) == "1e-12");
  }

  TEST_CASE("PFM round trip and orientation") {
    const FloatGrid g(3, 2, {1, 2, 3, 4, 5, 6.5});
    std::ostringstream out;
    write_pfm(out, g);
    std::istringstream in(out.str());
    const auto back = read_pfm(in);
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.values == g.values);
    CHECK(back.at(0, 1) == 4);
  }

  TEST_CASE("big-endian PFM is read with rows flipped") {
    std::string payload = "Pf\n2 2\n1.0\n";
    // bottom row first: (3, 4) then (1, 2)
    for (float v : {3.0f, 4.0f, 1.0f, 2.0f}) {
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      for (int i = 3; i >= 0; --i) payload.push_back(static_cast<char>(b[i]));
    }
    std::istringstream in(payload);
    const auto g = read_pfm(in);
    CHECK(g.values == std::vector<double>{1, 2, 3, 4});
  }

  TEST_CASE("truncated PFM and bad PGM are rejected") {
    std::istringstream shortpfm("Pf\n2 2\n-1.0\nabc");
    CHECK_THROWS_AS(read_pfm(shortpfm), ValidationError);
    std::istringstream p2("P2\n2 1\n255\n0 255\n");
    CHECK_THROWS_AS(read_pgm_mask(p2), ValidationError);
  }

  TEST_CASE("PGM mask round trip with threshold") {
    std::string raw = "P5\n3 1\n255\n";
    raw.push_back(static_cast<char>(0));
    raw.push_back(static_cast<char>(200));
    raw.push_back(static_cast<char>(127));
    std::istringstream in(raw);
    const auto m = read_pgm_mask(in);
    CHECK(m.bits == std::vector<std::uint8_t>{0, 1, 0});
    std::ostringstream out;
    write_pgm_mask(out, m);
    std::istringstream again(out.str());
    CHECK(read_pgm_mask(again).bits == m.bits);
  }

  TEST_CASE("file loaders report missing files") {
    testutil::TempDir dir("data");
    CHECK_THROWS_AS(load_ratings(dir / "nope.csv"), ValidationError);
    testutil::write_file(dir / "r.csv", kHeader + "p1,i1,1,1\n");
    CHECK(load_ratings(dir / "r.csv").size() == 1);
  }
}
