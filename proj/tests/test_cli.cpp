#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  fs::path p = fs::path(WILDSURVEY_TEST_TMP) / "cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = "cd " + quote(dir.string()) + " && " + env + " " + quote(WILDSURVEY_BIN) + " " + args +
                          " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read(out);
  r.err = read(err);
  return r;
}

fs::path data(const std::string& name) { return fs::path(WILDSURVEY_SOURCE_DIR) / "tests" / "data" / name; }

std::string plan_args(const fs::path& out, const std::string& extra = "") {
  return "plan --region " + quote(data("region_5km2.geojson").string()) + " --launch-points " +
         quote(data("launch_points.csv").string()) + " --out " + quote(out.string()) + " " + extra;
}

// 40 transects of 0.019 km2 each: 0.76 km2 surveyed.
void write_survey_a_oct_design(const fs::path& p) {
  json features = json::array();
  for (int i = 1; i <= 40; ++i) {
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", {{0, 0}, {350, 0}}}}},
                        {"properties", {{"transect_id", "T" + std::to_string(i)}, {"covered_area_km2", 0.019}}}});
  }
  write(p, json{{"type", "FeatureCollection"}, {"features", features}}.dump());
}

// 21 animals over 9 occupied transects, 31 of 40 transects empty.
void write_survey_a_oct_sightings(const fs::path& p) {
  std::string s = "transect_id,species,count,x_m,y_m,timestamp,observer\n";
  const int counts[] = {5, 4, 3, 2, 2, 2, 1, 1, 1};
  for (int i = 0; i < 9; ++i) {
    s += "T" + std::to_string(3 * i + 2) + ",roe_deer," + std::to_string(counts[i]) +
         ",10,5,2024-10-26T07:1" + std::to_string(i) + ":00Z,A\n";
  }
  s += "T1,wild_boar,3,10,5,2024-10-26T07:30:00Z,A\n";
  write(p, s);
}

std::string units[] = {"A-Oct", "A-Nov", "B-Oct", "B-Nov", "C-Oct", "C-Nov"};

std::string density_table(bool equal) {
  const char* methods[] = {"rem", "naive", "bootstrap", "zinb"};
  const double method_shift[] = {-12.0, 4.0, 6.0, 3.0};
  std::string s = "survey_unit,method,density\n";
  for (int u = 0; u < 6; ++u) {
    for (int m = 0; m < 4; ++m) {
      const double noise = ((u * 7 + m * 3) % 5 - 2) * 1.7;
      const double v = equal ? 25.0 : 30.0 + 2.0 * u + method_shift[m] + noise;
      s += units[u] + "," + methods[m] + "," + std::to_string(v) + "\n";
    }
  }
  return s;
}

std::string deployments_csv(int n_cameras) {
  std::string s = "camera_id,x_m,y_m,start,end,detection_radius_m,detection_angle_rad,mount_height_m\n";
  for (int i = 0; i < n_cameras; ++i) {
    s += "CT" + std::to_string(i + 1) + "," + std::to_string(100 * i) +
         ",0,2024-10-01T00:00:00Z,2024-10-31T00:00:00Z,10,0.7,0.5\n";
  }
  return s;
}

std::string sequences_csv(int n) {
  std::string s = "camera_id,start,end,group_size\n";
  for (int i = 0; i < n; ++i) {
    s += "CT" + std::to_string(i % 22 + 1) + ",2024-10-0" + std::to_string(i % 9 + 1) + "T10:00:00Z,2024-10-0" +
         std::to_string(i % 9 + 1) + "T10:01:00Z,1\n";
  }
  return s;
}

const char* kRemParams =
    "day_range_km_per_day = 1.0\n"
    "detection_radius_km = 0.01\n"
    "detection_angle_rad = 0.7\n"
    "use_group_size = false\n";

}  // namespace

TEST_CASE("plan reaches a 17% target on a 5 km2 region", "[cli][plan]") {
  const auto dir = scratch("plan17");
  const auto r = run(dir, plan_args("a", "--target-coverage 17 --seed 11"));
  REQUIRE(r.code == 0);
  const auto summary = json::parse(read(dir / "a" / "summary.json"));
  CHECK(summary["covered_fraction"].get<double>() >= 0.16);
  CHECK(summary["covered_fraction"].get<double>() <= 0.19);
  CHECK(r.out.find("covered fraction") != std::string::npos);

  REQUIRE(run(dir, plan_args("b", "--target-coverage 17 --seed 11")).code == 0);
  CHECK(read(dir / "a" / "design.geojson") == read(dir / "b" / "design.geojson"));
  CHECK(read(dir / "a" / "summary.json") == read(dir / "b" / "summary.json"));
}

TEST_CASE("plan with a zero target gives an empty design", "[cli][plan]") {
  const auto dir = scratch("plan0");
  REQUIRE(run(dir, plan_args("o", "--target-coverage 0")).code == 0);
  const auto design = json::parse(read(dir / "o" / "design.geojson"));
  CHECK(design["features"].empty());
}

TEST_CASE("plan exit codes", "[cli][plan]") {
  const auto dir = scratch("planerr");
  CHECK(run(dir, plan_args("o", "--transect-length 300")).code == 2);
  CHECK(run(dir, plan_args("o", "--target-coverage 140")).code == 2);
  write(dir / "far.csv", "x_m,y_m\n90000,90000\n");
  const auto far = run(dir, "plan --region " + quote(data("region_5km2.geojson").string()) +
                                " --launch-points far.csv --out o");
  CHECK(far.code == 3);
  write(dir / "bad.geojson", "{\"type\": \"Polygon\"");
  CHECK(run(dir, "plan --region bad.geojson --launch-points far.csv --out o").code == 2);
  CHECK(run(dir, "plan --region missing.geojson --launch-points far.csv").code == 2);
  CHECK(run(dir, "plan --grid-spacing abc").code == 2);
  CHECK(run(dir, "frobnicate").code == 2);
}

TEST_CASE("estimate on a 40-transect survey day", "[cli][estimate]") {
  const auto dir = scratch("est");
  write_survey_a_oct_design(dir / "design.geojson");
  write_survey_a_oct_sightings(dir / "sightings.csv");
  const auto r = run(dir, "estimate --design design.geojson --sightings sightings.csv --species roe_deer "
                          "--method naive --out o");
  REQUIRE(r.code == 0);
  const auto rows = json::parse(read(dir / "o" / "estimates.json"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["density_per_km2"].get<double>() == Catch::Approx(21.0 / 0.76).epsilon(1e-12));
  CHECK(rows[0]["n_units"].get<int>() == 40);

  const auto all = run(dir, "estimate --design design.geojson --sightings sightings.csv --species roe_deer "
                            "--method all --bootstrap-iters 500 --seed 5 --survey-unit A-Oct --out all");
  REQUIRE(all.code == 0);
  const auto three = json::parse(read(dir / "all" / "estimates.json"));
  REQUIRE(three.size() == 3);
  CHECK(three[0]["method"] == "naive");
  CHECK(three[1]["method"] == "bootstrap");
  CHECK(three[2]["method"] == "zinb");
  CHECK(three[1]["survey_unit"] == "A-Oct");
  const auto csv = read(dir / "all" / "estimates.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  REQUIRE(run(dir, "estimate --design design.geojson --sightings sightings.csv --species roe_deer "
                   "--method all --bootstrap-iters 500 --seed 5 --survey-unit A-Oct --out again")
              .code == 0);
  CHECK(read(dir / "all" / "estimates.json") == read(dir / "again" / "estimates.json"));
}

TEST_CASE("estimate on empty sightings", "[cli][estimate]") {
  const auto dir = scratch("estempty");
  write_survey_a_oct_design(dir / "design.geojson");
  write(dir / "empty.csv", "");
  write(dir / "header.csv", "transect_id,species,count,x_m,y_m,timestamp,observer\n");
  for (const char* f : {"empty.csv", "header.csv"}) {
    const auto r = run(dir, std::string("estimate --design design.geojson --sightings ") + f + " --method naive --out o");
    REQUIRE(r.code == 0);
    CHECK(json::parse(read(dir / "o" / "estimates.json"))[0]["density_per_km2"].get<double>() == 0.0);
  }
}

TEST_CASE("estimate keeps other methods when zinb fails", "[cli][estimate]") {
  const auto dir = scratch("estzinb");
  write_survey_a_oct_design(dir / "design.geojson");
  write(dir / "empty.csv", "");
  const auto r = run(dir, "estimate --design design.geojson --sightings empty.csv --method all "
                          "--bootstrap-iters 200 --out o");
  CHECK(r.code == 4);
  CHECK(r.err.find("zinb") != std::string::npos);
  const auto rows = json::parse(read(dir / "o" / "estimates.json"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["method"] == "naive");
  CHECK(rows[1]["method"] == "bootstrap");
}

TEST_CASE("estimate referential errors", "[cli][estimate]") {
  const auto dir = scratch("estref");
  write_survey_a_oct_design(dir / "design.geojson");
  write(dir / "s.csv", "transect_id,species,count,x_m,y_m,timestamp,observer\nT99,roe_deer,2,0,0,2024-10-26T07:00:00Z,A\n");
  const auto r = run(dir, "estimate --design design.geojson --sightings s.csv --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("T99") != std::string::npos);
  CHECK(run(dir, "estimate --design design.geojson --sightings s.csv --method rem --out o").code == 2);
  CHECK(run(dir, "estimate --design design.geojson --sightings s.csv --reconcile median --out o").code == 2);
}

TEST_CASE("rem command", "[cli][rem]") {
  const auto dir = scratch("rem");
  write(dir / "deployments.csv", deployments_csv(22));
  write(dir / "params.txt", kRemParams);

  write(dir / "seq113.csv", sequences_csv(113));
  auto r = run(dir, "rem --deployments deployments.csv --sequences seq113.csv --params params.txt --out a");
  REQUIRE(r.code == 0);
  auto e = json::parse(read(dir / "a" / "rem_estimate.json"));
  CHECK(e["density_per_km2"].get<double>() == Catch::Approx(19.92).margin(0.005));
  CHECK(e["diagnostics"]["adequacy"] == "adequate");
  CHECK(r.out.find("adequate") != std::string::npos);

  write(dir / "seq40.csv", sequences_csv(40));
  r = run(dir, "rem --deployments deployments.csv --sequences seq40.csv --params params.txt --out b");
  REQUIRE(r.code == 0);
  CHECK(json::parse(read(dir / "b" / "rem_estimate.json"))["diagnostics"]["adequacy"] == "marginal");

  write(dir / "seq0.csv", sequences_csv(0));
  r = run(dir, "rem --deployments deployments.csv --sequences seq0.csv --params params.txt --out c");
  REQUIRE(r.code == 0);
  e = json::parse(read(dir / "c" / "rem_estimate.json"));
  CHECK(e["density_per_km2"].get<double>() == 0.0);
  CHECK(e["diagnostics"]["adequacy"] == "inadequate");
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("rem names a missing parameter key", "[cli][rem]") {
  const auto dir = scratch("remkey");
  write(dir / "deployments.csv", deployments_csv(22));
  write(dir / "seq.csv", sequences_csv(10));
  write(dir / "params.txt", "day_range_km_per_day = 1.0\ndetection_angle_rad = 0.7\nuse_group_size = false\n");
  const auto r = run(dir, "rem --deployments deployments.csv --sequences seq.csv --params params.txt --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("detection_radius_km") != std::string::npos);
}

TEST_CASE("compare on a balanced 4 x 6 table", "[cli][compare]") {
  const auto dir = scratch("cmp");
  write(dir / "d.csv", density_table(false));
  const auto r = run(dir, "compare --densities d.csv --out o");
  REQUIRE(r.code == 0);
  const auto anova = json::parse(read(dir / "o" / "anova.json"));
  int method_df = 0, unit_df = 0;
  for (const auto& t : anova["terms"]) {
    if (t["term"] == "method") method_df = t["df"];
    if (t["term"] == "survey_unit") unit_df = t["df"];
  }
  CHECK(method_df == 3);
  CHECK(unit_df == 5);
  CHECK(anova["residual"]["df"].get<int>() == 15);
  const auto tukey = json::parse(read(dir / "o" / "tukey.json"));
  CHECK(tukey["comparisons"].size() == 6);
  CHECK(fs::exists(dir / "o" / "comparison.txt"));
}

TEST_CASE("compare error paths", "[cli][compare]") {
  const auto dir = scratch("cmperr");
  write(dir / "eq.csv", density_table(true));
  CHECK(run(dir, "compare --densities eq.csv --out o").code == 4);

  auto table = density_table(false);
  const auto cut = table.find("B-Nov,zinb");
  table.erase(cut, table.find('\n', cut) - cut + 1);
  write(dir / "hole.csv", table);
  const auto r = run(dir, "compare --densities hole.csv --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("B-Nov/zinb") != std::string::npos);
}

TEST_CASE("simulate runs the shipped example config", "[cli][simulate]") {
  const auto dir = scratch("simex");
  const auto cfg = fs::path(WILDSURVEY_SOURCE_DIR) / "configs" / "simulate_example.cfg";
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(dir, "simulate --config " + quote(cfg.string()) + " --out o");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(r.code == 0);
  CHECK(secs < 60.0);
  for (const char* f : {"design.geojson", "sightings.csv", "deployments.csv", "sequences.csv", "recovery.json"}) {
    CHECK(fs::exists(dir / "o" / f));
  }
  const auto report = json::parse(read(dir / "o" / "recovery.json"));
  CHECK(report["methods"].size() == 4);
}

TEST_CASE("simulate with one replicate and a fixed seed", "[cli][simulate]") {
  const auto dir = scratch("sim1");
  write(dir / "c.cfg",
        "replicates = 1\n"
        "estimators = naive,bootstrap\n"
        "world.width_m = 1400\n"
        "world.height_m = 1400\n"
        "world.density_per_km2 = 30\n"
        "drone.target_coverage_pct = 20\n"
        "bootstrap.iterations = 200\n");
  REQUIRE(run(dir, "simulate --config c.cfg --seed 9 --out a").code == 0);
  REQUIRE(run(dir, "simulate --config c.cfg --seed 9 --out b").code == 0);
  CHECK(read(dir / "a" / "recovery.json") == read(dir / "b" / "recovery.json"));
  CHECK(read(dir / "a" / "sightings.csv") == read(dir / "b" / "sightings.csv"));
  const auto report = json::parse(read(dir / "a" / "recovery.json"));
  for (const auto& m : report["methods"]) {
    CHECK(m.contains("relative_bias"));
    CHECK(m["coverage"] == "n/a");
  }
  CHECK_FALSE(fs::exists(dir / "a" / "sequences.csv"));

  REQUIRE(run(dir, "simulate --config c.cfg --seed 10 --out c").code == 0);
  CHECK(read(dir / "a" / "sightings.csv") != read(dir / "c" / "sightings.csv"));
}

TEST_CASE("simulate rejects bad configs", "[cli][simulate]") {
  const auto dir = scratch("simerr");
  write(dir / "typo.cfg", "world.width_m = 1400\nworld.height_m = 1400\nworld.density_per_km2 = 30\nwrold.seed = 3\n");
  const auto r = run(dir, "simulate --config typo.cfg --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("wrold.seed") != std::string::npos);
  write(dir / "neg.cfg", "world.width_m = 1400\nworld.height_m = 1400\nworld.density_per_km2 = -3\n");
  CHECK(run(dir, "simulate --config neg.cfg --out o").code == 2);
  write(dir / "garbage.cfg", "this is not a config\n");
  CHECK(run(dir, "simulate --config garbage.cfg --out o").code == 2);
}

TEST_CASE("plot groups bars by survey unit", "[cli][plot]") {
  const auto dir = scratch("plot");
  json all = json::array();
  const char* methods[] = {"rem", "naive", "bootstrap", "zinb"};
  for (int u = 0; u < 6; ++u) {
    for (int m = 0; m < 4; ++m) {
      json e{{"survey_unit", units[u]}, {"method", methods[m]}, {"density_per_km2", 20.0 + u + m},
             {"se", nullptr}, {"ci_low", nullptr}, {"ci_high", nullptr}, {"n_units", 40}};
      if (m == 2) {
        e["se"] = 3.0;
        e["ci_low"] = 15.0 + u;
        e["ci_high"] = 30.0 + u;
      }
      all.push_back(e);
    }
  }
  write(dir / "a.json", json(std::vector<json>(all.begin(), all.begin() + 12)).dump());
  write(dir / "b.json", json(std::vector<json>(all.begin() + 12, all.end())).dump());
  REQUIRE(run(dir, "plot --estimates a.json b.json --out fig.svg").code == 0);
  REQUIRE(run(dir, "plot --estimates a.json b.json --out fig.csv").code == 0);
  const auto svg = read(dir / "fig.svg");
  std::size_t bars = 0, whiskers = 0;
  for (auto p = svg.find("class=\"bar\""); p != std::string::npos; p = svg.find("class=\"bar\"", p + 1)) ++bars;
  for (auto p = svg.find("class=\"whisker\""); p != std::string::npos; p = svg.find("class=\"whisker\"", p + 1)) {
    ++whiskers;
  }
  CHECK(bars == 24);
  CHECK(whiskers == 6);
  const auto csv = read(dir / "fig.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
  CHECK(csv.find("\n5,C-Nov,zinb,28,,,#006d2c\n") != std::string::npos);
  CHECK(svg.find("data-unit=\"C-Nov\" data-method=\"zinb\" data-value=\"28\"") != std::string::npos);
}

TEST_CASE("plot of a single naive estimate", "[cli][plot]") {
  const auto dir = scratch("plot1");
  write(dir / "e.csv",
        "survey_unit,method,density_per_km2,se,ci_low,ci_high,n_units\nA-Oct,naive,27.631578947368421,,,,40\n");
  REQUIRE(run(dir, "plot --estimates e.csv --out one.svg").code == 0);
  const auto svg = read(dir / "one.svg");
  CHECK(svg.find("class=\"bar\"") != std::string::npos);
  CHECK(svg.find("class=\"bar\"", svg.find("class=\"bar\"") + 1) == std::string::npos);
  CHECK(svg.find("class=\"whisker\"") == std::string::npos);
}

TEST_CASE("plot rejects malformed estimate files", "[cli][plot]") {
  const auto dir = scratch("plotbad");
  write(dir / "bad.json", "[{\"method\": \"naive\"}]");
  write(dir / "trunc.json", "[{\"method\": ");
  write(dir / "bad.csv", "survey_unit,method\nA,naive\n");
  write(dir / "ok.csv", "survey_unit,method,density_per_km2,se,ci_low,ci_high,n_units\nA,naive,1,,,,3\n");
  CHECK(run(dir, "plot --estimates bad.json --out x.svg").code == 2);
  CHECK(run(dir, "plot --estimates trunc.json --out x.svg").code == 2);
  CHECK(run(dir, "plot --estimates bad.csv --out x.svg").code == 2);
  CHECK(run(dir, "plot --estimates ok.csv --out x.png").code == 2);
  CHECK(run(dir, "plot --out x.svg").code == 2);
}

TEST_CASE("output directory from the environment", "[cli]") {
  const auto dir = scratch("env");
  write(dir / "d.csv", density_table(false));
  REQUIRE(run(dir, "compare --densities d.csv", "WILDSURVEY_OUT_DIR=fromenv").code == 0);
  CHECK(fs::exists(dir / "fromenv" / "anova.json"));
  REQUIRE(run(dir, "compare --densities d.csv --out flag", "WILDSURVEY_OUT_DIR=fromenv2").code == 0);
  CHECK(fs::exists(dir / "flag" / "anova.json"));
  CHECK_FALSE(fs::exists(dir / "fromenv2"));
}
