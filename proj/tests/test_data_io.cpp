#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "wildsurvey/data_io.hpp"
#include "wildsurvey/estimators.hpp"
#include "wildsurvey/rng.hpp"

using namespace wildsurvey;

namespace {

const std::string kHeader = "transect_id,species,count,x_m,y_m,timestamp,observer\n";

std::vector<TransectArea> design_of(int n) {
  std::vector<TransectArea> t;
  for (int i = 1; i <= n; ++i) t.push_back({"T" + std::to_string(i), 0.019});
  return t;
}

SightingRecord rec(const std::string& transect, std::int64_t count, const std::string& obs) {
  SightingRecord r;
  r.transect_id = transect;
  r.species = "roe_deer";
  r.count = count;
  r.x_m = 100;
  r.y_m = 200;
  r.timestamp = *text::parse_timestamp("2024-10-26T09:15:00Z");
  r.observer = obs;
  return r;
}

}  // namespace

TEST_CASE("parse_sightings basic rows", "[data_io]") {
  SECTION("empty file with a header") {
    std::istringstream in(kHeader);
    const auto r = parse_sightings(in);
    CHECK(r.records.empty());
    CHECK(r.diagnostics.empty());
  }
  SECTION("one row maps field by field") {
    std::istringstream in(kHeader + "T12,roe_deer,3,4510.2,8821.0,2024-10-26T09:15:00Z,obs_A\n");
    const auto r = parse_sightings(in);
    REQUIRE(r.records.size() == 1);
    const auto& s = r.records[0];
    CHECK(s.transect_id == "T12");
    CHECK(s.species == "roe_deer");
    CHECK(s.count == 3);
    CHECK(s.x_m == 4510.2);
    CHECK(s.y_m == 8821.0);
    CHECK(text::format_timestamp(s.timestamp) == "2024-10-26T09:15:00Z");
    CHECK(s.observer == "obs_A");
  }
  SECTION("37 roe deer rows give 37 records") {
    std::string body = kHeader;
    for (int i = 0; i < 37; ++i) {
      body += "T" + std::to_string(i % 13 + 1) + ",roe_deer,1,1,1,2024-10-26T09:15:00Z,obs_A\n";
    }
    body += "T1,red_fox,1,1,1,2024-10-26T09:15:00Z,obs_A\n";
    std::istringstream in(body);
    CHECK(parse_sightings(in, std::string("roe_deer")).records.size() == 37);
  }
  SECTION("a missing column is fatal") {
    std::istringstream in("transect_id,species,count,x_m,y_m,observer\n");
    CHECK_THROWS_AS(parse_sightings(in), ValidationError);
  }
  SECTION("quoted fields, CRLF and column order are tolerated") {
    std::istringstream in(
        "observer,timestamp,y_m,x_m,count,species,transect_id\r\n"
        "\"obs, A\",2024-11-12T08:00:00.250Z,2,1,2,\"roe \"\"deer\"\"\",T3\r\n");
    const auto r = parse_sightings(in);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].observer == "obs, A");
    CHECK(r.records[0].species == "roe \"deer\"");
    CHECK(text::format_timestamp(r.records[0].timestamp) == "2024-11-12T08:00:00.250Z");
  }
}

TEST_CASE("malformed rows are isolated with line numbers", "[data_io]") {
  std::string body = kHeader;
  body += "T1,roe_deer,1,1,1,2024-10-26T09:15:00Z,a\n";   // line 2 ok
  body += "T2,roe_deer,0,1,1,2024-10-26T09:15:00Z,a\n";   // line 3 count 0
  body += "T3,roe_deer,x,1,1,2024-10-26T09:15:00Z,a\n";   // line 4 not int
  body += "T4,roe_deer,1,1,1,2024-13-26T09:15:00Z,a\n";   // line 5 bad month
  body += "T5,roe_deer,1,1,1,2024-10-26T09:15:00Z\n";     // line 6 short
  body += "T6,roe_deer,2,1,nan,2024-10-26T09:15:00Z,a\n"; // line 7 non-finite
  body += "T7,roe_deer,2,1,1,2024-10-26T09:15:00Z,a\n";   // line 8 ok
  std::istringstream in(body);
  const auto r = parse_sightings(in);
  CHECK(r.records.size() == 2);
  REQUIRE(r.diagnostics.size() == 5);
  std::vector<std::size_t> lines;
  for (const auto& d : r.diagnostics) lines.push_back(d.line);
  CHECK(lines == std::vector<std::size_t>{3, 4, 5, 6, 7});
}

TEST_CASE("sightings round-trip through the canonical writer", "[data_io][property]") {
  CounterRng rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SightingRecord> recs;
    const auto n = rng.uniform_index(12);
    for (std::uint64_t i = 0; i < n; ++i) {
      SightingRecord r;
      r.transect_id = "T" + std::to_string(rng.uniform_index(60));
      r.species = rng.bernoulli(0.5) ? "roe_deer" : "red deer, adult";
      r.count = 1 + static_cast<std::int64_t>(rng.uniform_index(5));
      r.x_m = rng.uniform(-1e5, 1e5);
      r.y_m = rng.uniform(0, 1e6);
      r.timestamp = Timestamp(std::chrono::milliseconds(
          1'700'000'000'000LL + static_cast<long long>(rng.uniform_index(1'000'000'000))));
      r.observer = rng.bernoulli(0.5) ? "obs_A" : "obs \"B\"";
      recs.push_back(r);
    }
    const std::string text1 = write_sightings(recs);
    std::istringstream in(text1);
    const auto parsed = parse_sightings(in);
    CHECK(parsed.diagnostics.empty());
    CHECK(parsed.records == recs);
    CHECK(write_sightings(parsed.records) == text1);
  }
}

TEST_CASE("reconcile_observers strategies", "[data_io]") {
  SECTION("agreeing observers reproduce either input") {
    std::vector<SightingRecord> a{rec("T1", 2, "obs_A"), rec("T2", 1, "obs_A")};
    std::vector<SightingRecord> both = a;
    both.push_back(rec("T1", 2, "obs_B"));
    both.push_back(rec("T2", 1, "obs_B"));
    CHECK(reconcile_observers(both, ReconcileStrategy::max) == a);
    CHECK(reconcile_observers(both, ReconcileStrategy::first) == a);
    const auto mean = reconcile_observers(both, ReconcileStrategy::mean_rounded);
    REQUIRE(mean.size() == 2);
    CHECK(mean[0].count == 2);
    CHECK(mean[1].count == 1);
  }
  SECTION("max keeps the larger per-transect total") {
    std::vector<SightingRecord> r{rec("T1", 3, "obs_A"), rec("T1", 1, "obs_A"),
                                  rec("T1", 2, "obs_B")};
    std::int64_t total = 0;
    for (const auto& s : reconcile_observers(r, ReconcileStrategy::max)) total += s.count;
    CHECK(total == 4);
  }
  SECTION("mean_rounded rounds 3.5 half up") {
    std::vector<SightingRecord> r{rec("T1", 3, "obs_A"), rec("T1", 4, "obs_B")};
    const auto out = reconcile_observers(r, ReconcileStrategy::mean_rounded);
    REQUIRE(out.size() == 1);
    CHECK(out[0].count == 4);
  }
  SECTION("first keeps a designated observer") {
    std::vector<SightingRecord> r{rec("T1", 3, "obs_A"), rec("T2", 4, "obs_B")};
    const auto out = reconcile_observers(r, ReconcileStrategy::first, std::string("obs_B"));
    REQUIRE(out.size() == 1);
    CHECK(out[0].transect_id == "T2");
  }
  SECTION("unknown strategy tag is a config error") {
    CHECK_THROWS_AS(parse_reconcile_strategy("median"), ValidationError);
    CHECK(parse_reconcile_strategy("mean_rounded") == ReconcileStrategy::mean_rounded);
  }
}

TEST_CASE("summarize_by_transect includes zero transects", "[data_io]") {
  SECTION("Survey A Oct: 40 transects, 9 with sightings") {
    std::vector<SightingRecord> r;
    const int per[9] = {3, 2, 2, 3, 2, 3, 2, 2, 2};  // 21 animals
    for (int i = 0; i < 9; ++i) r.push_back(rec("T" + std::to_string(i * 4 + 1), per[i], "a"));
    const auto counts = summarize_by_transect(r, design_of(40));
    REQUIRE(counts.size() == 40);
    std::int64_t total = 0;
    int zeros = 0;
    for (const auto& c : counts) {
      total += c.animal_count;
      zeros += c.animal_count == 0;
    }
    CHECK(total == 21);
    CHECK(zeros == 31);
    CHECK(zero_fraction(counts) == Catch::Approx(0.775));
  }
  SECTION("Survey C Oct: 45 transects, 17 with sightings") {
    std::vector<SightingRecord> r;
    for (int i = 0; i < 17; ++i) r.push_back(rec("T" + std::to_string(i + 1), i < 1 ? 19 : 1, "a"));
    const auto counts = summarize_by_transect(r, design_of(45));
    CHECK(zero_fraction(counts) == Catch::Approx(28.0 / 45.0));
    CHECK(std::round(zero_fraction(counts) * 1000) / 10 == 62.2);
  }
  SECTION("no sightings gives all zeros") {
    const auto counts = summarize_by_transect({}, design_of(12));
    CHECK(counts.size() == 12);
    CHECK(zero_fraction(counts) == 1.0);
  }
  SECTION("unknown transect ids are listed") {
    try {
      summarize_by_transect({rec("T99", 1, "a"), rec("X", 1, "a")}, design_of(3));
      FAIL("expected a referential error");
    } catch (const ValidationError& e) {
      CHECK(e.details() == std::vector<std::string>{"T99", "X"});
    }
  }
}

TEST_CASE("summaries conserve counts under random inputs", "[data_io][property]") {
  CounterRng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(50));
    std::vector<SightingRecord> r;
    std::int64_t expected = 0;
    const auto m = rng.uniform_index(30);
    for (std::uint64_t i = 0; i < m; ++i) {
      const auto c = 1 + static_cast<std::int64_t>(rng.uniform_index(4));
      r.push_back(rec("T" + std::to_string(1 + rng.uniform_index(n)), c, "a"));
      expected += c;
    }
    const auto counts = summarize_by_transect(reconcile_observers(r, ReconcileStrategy::max),
                                              design_of(n));
    std::int64_t got = 0;
    for (const auto& c : counts) got += c.animal_count;
    CHECK(counts.size() == static_cast<std::size_t>(n));
    CHECK(got == expected);
  }
}

TEST_CASE("camera-trap deployments and sequences", "[data_io]") {
  auto deployments = [](int n, const char* start, const char* end) {
    std::string s = "camera_id,x_m,y_m,start,end,detection_radius_m,detection_angle_rad,mount_height_m\n";
    for (int i = 0; i < n; ++i) {
      s += "CT" + std::to_string(i) + "," + std::to_string(350 * i) + ",0," + start + "," + end +
           ",10,0.7,0.5\n";
    }
    return s;
  };
  SECTION("21 deployments without sequences are valid") {
    std::istringstream d(deployments(21, "2024-10-15T00:00:00Z", "2024-11-14T00:00:00Z"));
    std::istringstream q("camera_id,start,end,group_size\n");
    const auto data = parse_encounters(d, q);
    CHECK(data.deployments.size() == 21);
    CHECK(data.sequences.empty());
    CHECK(data.deployments[0].burst_size == 8);
  }
  SECTION("a sequence before the deployment start is rejected") {
    std::istringstream d(deployments(2, "2024-10-15T00:00:00Z", "2024-11-14T00:00:00Z"));
    std::istringstream q("camera_id,start,end,group_size\n"
                         "CT1,2024-10-14T23:59:00Z,2024-10-15T00:01:00Z,1\n");
    CHECK_THROWS_AS(parse_encounters(d, q), ValidationError);
  }
  SECTION("unknown cameras and empty intervals are rejected") {
    std::istringstream d1(deployments(1, "2024-10-15T00:00:00Z", "2024-11-14T00:00:00Z"));
    std::istringstream q1("camera_id,start,end,group_size\nCT9,2024-10-20T00:00:00Z,2024-10-20T00:01:00Z,2\n");
    CHECK_THROWS_AS(parse_encounters(d1, q1), ValidationError);
    std::istringstream d2(deployments(1, "2024-10-15T00:00:00Z", "2024-10-15T00:00:00Z"));
    CHECK_THROWS_AS(parse_deployments(d2), ValidationError);
  }
  SECTION("writers round-trip") {
    std::istringstream d(deployments(3, "2024-10-15T00:00:00Z", "2024-11-14T00:00:00Z"));
    const auto deps = parse_deployments(d);
    std::istringstream back(write_deployments(deps));
    CHECK(parse_deployments(back) == deps);
    std::vector<EncounterSequence> seqs{{"CT0", *text::parse_timestamp("2024-10-20T01:00:00Z"),
                                         *text::parse_timestamp("2024-10-20T01:02:30Z"), 2}};
    std::istringstream qs(write_sequences(seqs));
    CHECK(parse_sequences(qs) == seqs);
  }
}
