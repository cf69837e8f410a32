// wildsurvey: plan drone transect surveys, estimate densities, compare
// methods, simulate known-truth surveys and plot the results.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 planning
// impossible, 4 numeric or model failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wildsurvey/config.hpp"
#include "wildsurvey/data_io.hpp"
#include "wildsurvey/ecosim.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/estimators.hpp"
#include "wildsurvey/geojson.hpp"
#include "wildsurvey/geoplan.hpp"
#include "wildsurvey/plot.hpp"
#include "wildsurvey/rem.hpp"
#include "wildsurvey/stats_compare.hpp"
#include "wildsurvey/zinb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wildsurvey;

namespace {

constexpr const char* kOutDirEnv = "WILDSURVEY_OUT_DIR";

struct Globals {
  std::uint64_t seed = 0;
  int verbosity = 0;
  std::string out_dir;
};

void info(const Globals& g, const std::string& msg) {
  if (g.verbosity > 0) std::cerr << msg << '\n';
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::string slurp(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// --out, else $WILDSURVEY_OUT_DIR, else ./out.
fs::path output_dir(const Globals& g) {
  std::string dir = g.out_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
  }
  if (dir.empty()) dir = "out";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void require_readable(const std::vector<std::string>& paths) {
  std::vector<std::string> problems;
  for (const auto& p : paths) {
    if (p.empty()) continue;
    std::ifstream in(p);
    if (!in) problems.push_back(p + ": not readable");
  }
  if (!problems.empty()) throw ValidationError("input files missing", problems);
}

// ---------------------------------------------------------------- plan

struct PlanArgs {
  std::string region, launch_points;
  double grid_spacing = 350.0;
  std::optional<double> transect_length;
  std::size_t max_per_flight = 7;
  double swath_width = 55.0;
  double altitude = 60.0;
  std::optional<double> target_pct;
  std::optional<std::size_t> flights_per_launch;
  std::vector<double> grid_origin;
};

std::string coverage_table(const SurveyDesign& d) {
  const auto c = coverage(d);
  std::ostringstream os;
  os << "flights            " << d.flights.size() << '\n'
     << "transects          " << d.transect_count() << '\n'
     << "region km2         " << text::format_fixed(d.region.area_km2(), 4) << '\n'
     << "covered km2        " << text::format_fixed(c.covered_km2, 4) << '\n'
     << "covered fraction   " << text::format_fixed(100.0 * c.covered_fraction, 2) << " %\n"
     << "headings N/E/S/W   " << c.per_direction[0] << '/' << c.per_direction[1] << '/'
     << c.per_direction[2] << '/' << c.per_direction[3] << '\n';
  for (const auto& w : d.warnings) os << "warning: " << w << '\n';
  return os.str();
}

int cmd_plan(const Globals& g, const PlanArgs& a) {
  require_readable({a.region, a.launch_points});
  if (a.transect_length && std::abs(*a.transect_length - a.grid_spacing) > 1e-9) {
    throw ValidationError("transect length must equal the grid spacing (transects are grid edges)");
  }
  if (a.target_pct && !(*a.target_pct >= 0.0 && *a.target_pct <= 100.0)) {
    throw ValidationError("--target-coverage is a percentage in [0, 100]");
  }
  if (!a.grid_origin.empty() && a.grid_origin.size() != 2) {
    throw ValidationError("--grid-origin takes two numbers: X Y");
  }
  auto rin = open_input(a.region);
  const auto region = geojson::read_region(rin);
  auto lin = open_input(a.launch_points);
  const auto launch = geojson::read_launch_points(lin);

  GridSpec spec;
  spec.spacing = a.grid_spacing;
  if (a.grid_origin.size() == 2) spec.origin = PlanarPoint{a.grid_origin[0], a.grid_origin[1]};
  PlanConfig cfg;
  cfg.max_transects = a.max_per_flight;
  cfg.swath_width = a.swath_width;
  cfg.altitude_agl = a.altitude;
  cfg.flights_per_launch = a.flights_per_launch;
  if (a.target_pct) cfg.target_coverage_fraction = *a.target_pct / 100.0;

  const auto design = plan_design(region, spec, launch, g.seed, cfg);
  const auto dir = output_dir(g);
  write_file(dir / "design.geojson", dump(geojson::design_to_geojson(design)));
  write_file(dir / "summary.json", dump(geojson::design_summary(design)));
  std::cout << coverage_table(design);
  info(g, "wrote " + (dir / "design.geojson").string() + " and summary.json");
  return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string design, sightings, species, method = "all", survey_unit;
  std::size_t bootstrap_iters = 1000;
  double confidence = 0.95;
  std::string statistic = "ratio_of_sums";
  std::string reconcile = "max";
  std::string observer;
  unsigned threads = 1;
};

int cmd_estimate(const Globals& g, const EstimateArgs& a) {
  require_readable({a.design, a.sightings});
  std::vector<Method> methods;
  if (a.method == "all") {
    methods = {Method::naive, Method::bootstrap, Method::zinb};
  } else {
    methods = {method_from_string(a.method)};
    if (methods[0] == Method::rem) throw ValidationError("rem estimates come from the `rem` command");
  }
  const auto strategy = parse_reconcile_strategy(a.reconcile);
  BootstrapStatistic stat;
  if (a.statistic == "ratio_of_sums") {
    stat = BootstrapStatistic::ratio_of_sums;
  } else if (a.statistic == "mean_of_ratios") {
    stat = BootstrapStatistic::mean_of_ratios;
  } else {
    throw ValidationError("unknown bootstrap statistic '" + a.statistic + "'");
  }

  auto din = open_input(a.design);
  const auto areas = geojson::read_design_transects(din);
  const std::string raw = slurp(a.sightings);
  std::vector<SightingRecord> records;
  if (raw.find_first_not_of(" \t\r\n\xEF\xBB\xBF") != std::string::npos) {
    std::istringstream sin(raw);
    auto parsed = parse_sightings(sin, a.species.empty() ? std::nullopt : std::optional(a.species));
    for (const auto& d : parsed.diagnostics) {
      std::cerr << a.sightings << ":" << d.line << ": skipped: " << d.message << '\n';
    }
    records = std::move(parsed.records);
  }
  records = reconcile_observers(records, strategy,
                                a.observer.empty() ? std::nullopt : std::optional(a.observer));
  const auto counts = summarize_by_transect(records, areas);
  info(g, std::to_string(counts.size()) + " transects, zero fraction " +
              text::format_fixed(counts.empty() ? 0.0 : zero_fraction(counts), 3));

  std::vector<DensityEstimate> results;
  std::vector<std::string> failures;
  int exit_code = 0;
  const CounterRng root = CounterRng(g.seed);
  for (Method m : methods) {
    try {
      DensityEstimate e;
      switch (m) {
        case Method::naive:
          e = naive_density(counts);
          break;
        case Method::bootstrap: {
          BootstrapConfig cfg;
          cfg.iterations = a.bootstrap_iters;
          cfg.confidence = a.confidence;
          cfg.statistic = stat;
          cfg.threads = a.threads;
          cfg.seed = root.substream("bootstrap").key();
          e = bootstrap_density(counts, cfg);
          break;
        }
        case Method::zinb: {
          ZinbOptions opt;
          opt.seed = root.substream("zinb").key();
          e = zinb_density(fit_zinb(counts, opt), counts);
          break;
        }
        case Method::rem:
          break;
      }
      e.survey_unit = a.survey_unit;
      results.push_back(std::move(e));
    } catch (const NumericError& ex) {
      std::cerr << "error: " << to_string(m) << ": " << ex.what() << '\n';
      failures.push_back(std::string(to_string(m)) + ": " + ex.what());
      exit_code = 4;
    }
  }

  const auto dir = output_dir(g);
  json arr = json::array();
  std::string csv = estimate_csv_header();
  for (const auto& e : results) {
    arr.push_back(to_json(e));
    csv += to_csv_row(e);
  }
  write_file(dir / "estimates.json", dump(arr));
  write_file(dir / "estimates.csv", csv);
  if (!failures.empty()) write_file(dir / "estimate_errors.json", dump(json(failures)));
  std::cout << csv;
  return exit_code;
}

// ---------------------------------------------------------------- rem

struct RemArgs {
  std::string deployments, sequences, params, survey_unit;
};

int cmd_rem(const Globals& g, const RemArgs& a) {
  require_readable({a.deployments, a.sequences, a.params});
  const auto params = rem_params_from_config(KeyValueConfig::load(a.params));
  auto din = open_input(a.deployments);
  auto sin = open_input(a.sequences);
  const auto data = parse_encounters(din, sin);
  auto e = rem_density(rem_input(data, params));
  e.survey_unit = a.survey_unit;
  const auto dir = output_dir(g);
  write_file(dir / "rem_estimate.json", dump(to_json(e)));
  write_file(dir / "rem_estimate.csv", std::string(estimate_csv_header()) + to_csv_row(e));
  std::cout << "density_per_km2 " << text::format_fixed(e.density_per_km2, 4) << '\n'
            << "encounters      " << e.diagnostics["encounters"].get<std::int64_t>() << '\n'
            << "effort_days     " << text::format_fixed(e.diagnostics["effort_camera_days"].get<double>(), 3) << '\n'
            << "adequacy        " << e.diagnostics["adequacy"].get<std::string>() << '\n';
  for (const auto& w : e.diagnostics["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string densities;
  double confidence = 0.95;
};

int cmd_compare(const Globals& g, const CompareArgs& a) {
  require_readable({a.densities});
  auto in = open_input(a.densities);
  const auto table = read_density_table(in);
  if (const auto missing = table.missing_cells(); !missing.empty()) {
    throw ValidationError("density table is not a complete method x survey_unit crossing; missing cells",
                          missing);
  }
  const auto fit = fit_additive_model(table);
  const auto anova = anova_type2(fit);
  const auto tukey = tukey_hsd(fit, "method", a.confidence);
  const auto dir = output_dir(g);
  write_file(dir / "anova.json", dump(to_json(anova)));
  write_file(dir / "tukey.json", dump(to_json(tukey)));
  const std::string txt = to_text(anova) + "\n" + to_text(tukey);
  write_file(dir / "comparison.txt", txt);
  std::cout << txt;
  return 0;
}

// ---------------------------------------------------------------- simulate

std::vector<Method> parse_method_list(const std::string& s) {
  std::vector<Method> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = text::trim(item);
    if (!t.empty()) out.push_back(method_from_string(t));
  }
  return out;
}

RecoverySpec recovery_spec_from_config(const KeyValueConfig& c, const fs::path& config_dir,
                                       std::uint64_t cli_seed, bool cli_seed_set) {
  RecoverySpec spec;
  const std::uint64_t seed = cli_seed_set ? cli_seed : c.get_seed("seed", 0);

  std::optional<SurveyRegion> region;
  if (c.has("world.region")) {
    fs::path p = c.get_string("world.region");
    if (p.is_relative()) p = config_dir / p;
    auto in = open_input(p.string());
    region = geojson::read_region(in);
  } else {
    region = SurveyRegion::rectangle(c.get_double("world.origin_x", 0.0), c.get_double("world.origin_y", 0.0),
                                     c.get_double("world.width_m"), c.get_double("world.height_m"));
  }
  Placement placement;
  const auto kind = c.get_string("world.placement", "poisson");
  if (kind == "thomas") {
    placement.kind = PlacementKind::thomas;
    placement.mean_cluster_size = c.get_double("world.mean_cluster_size", 3.0);
    placement.cluster_sd_m = c.get_double("world.cluster_sd_m", 50.0);
  } else if (kind != "poisson") {
    throw ValidationError("world.placement must be poisson or thomas");
  }
  spec.world = SimWorld{*region, c.get_double("world.density_per_km2"), placement, seed};
  spec.world.validate();
  spec.replicates = static_cast<std::size_t>(std::max<std::int64_t>(0, c.get_int("replicates", 1)));
  if (c.get_int("replicates", 1) < 1) throw ValidationError("replicates must be >= 1");
  spec.threads = static_cast<unsigned>(std::max<std::int64_t>(1, c.get_int("threads", 1)));
  spec.estimators = parse_method_list(c.get_string("estimators", "naive,bootstrap,zinb"));
  spec.check_boundary = c.get_bool("check_boundary", false);

  const bool wants_drone = std::any_of(spec.estimators.begin(), spec.estimators.end(),
                                       [](Method m) { return m != Method::rem; });
  if (c.get_bool("drone.enabled", wants_drone)) {
    PlanConfig pc;
    pc.max_transects = static_cast<std::size_t>(c.get_int("drone.max_per_flight", 7));
    pc.swath_width = c.get_double("drone.swath_width_m", 55.0);
    if (c.has("drone.target_coverage_pct")) pc.target_coverage_fraction = c.get_double("drone.target_coverage_pct") / 100.0;
    GridSpec gs;
    gs.spacing = c.get_double("drone.grid_spacing_m", 350.0);
    pc.snap_tolerance = gs.spacing;
    const auto launch = launch_point_lattice(*region, static_cast<int>(c.get_int("drone.launch_nx", 3)),
                                             static_cast<int>(c.get_int("drone.launch_ny", 2)));
    DroneSurveySpec ds{plan_design(*region, gs, launch, CounterRng(seed).substream("plan").key(), pc), {}};
    ds.detection.drone_detection_prob = c.get_double("drone.detection_prob", 1.0);
    const auto overlap = c.get_string("drone.overlap", "first_transect");
    if (overlap == "every_transect") {
      ds.detection.overlap = SwathOverlap::every_transect;
    } else if (overlap != "first_transect") {
      throw ValidationError("drone.overlap must be first_transect or every_transect");
    }
    if (c.get_bool("drone.animals_move", false)) {
      MovementModel m;
      m.speed_km_per_day = c.get_double("drone.move_speed_km_per_day", 1.0);
      ds.detection.drone_movement = m;
      ds.detection.drone_speed_m_s = c.get_double("drone.speed_m_s", 5.0);
    }
    spec.drone = std::move(ds);
  }
  const bool wants_ct = std::any_of(spec.estimators.begin(), spec.estimators.end(),
                                    [](Method m) { return m == Method::rem; });
  if (c.get_bool("ct.enabled", wants_ct)) {
    CtSurveySpec ct;
    ct.duration_days = c.get_double("ct.days", 30.0);
    const double radius_km = c.get_double("ct.detection_radius_km", 0.01);
    const double angle = c.get_double("ct.detection_angle_rad", 0.7);
    const auto start = text::parse_timestamp(c.get_string("ct.start", "2024-10-01T00:00:00Z"));
    if (!start) throw ValidationError("ct.start is not an ISO-8601 UTC timestamp");
    ct.deployments = lattice_deployments(*region, static_cast<std::size_t>(c.get_int("ct.cameras", 22)),
                                         c.get_double("ct.spacing_m", 350.0), c.get_double("ct.margin_m", 50.0),
                                         *start, ct.duration_days, radius_km * 1000.0, angle);
    ct.movement.speed_km_per_day = c.get_double("ct.day_range_km_per_day", 1.0);
    ct.movement.mean_turn_minutes = c.get_double("ct.mean_turn_minutes", 60.0);
    ct.movement.step_minutes = c.get_double("ct.step_minutes", 1.0);
    ct.rem.day_range_km_per_day = ct.movement.speed_km_per_day;
    ct.rem.detection_radius_km = radius_km;
    ct.rem.detection_angle_rad = angle;
    ct.rem.use_group_size = c.get_bool("ct.use_group_size", false);
    spec.ct = std::move(ct);
  }
  spec.bootstrap.iterations = static_cast<std::size_t>(c.get_int("bootstrap.iterations", 1000));
  spec.bootstrap.confidence = c.get_double("bootstrap.confidence", 0.95);
  const auto stat = c.get_string("bootstrap.statistic", "ratio_of_sums");
  if (stat == "mean_of_ratios") {
    spec.bootstrap.statistic = BootstrapStatistic::mean_of_ratios;
  } else if (stat != "ratio_of_sums") {
    throw ValidationError("bootstrap.statistic must be ratio_of_sums or mean_of_ratios");
  }
  if (const auto unused = c.unused_keys(); !unused.empty()) {
    throw ValidationError("unknown configuration keys", unused);
  }
  spec.validate();
  return spec;
}

std::string recovery_text(const RecoveryReport& r) {
  std::ostringstream os;
  os << "true density       " << text::format_fixed(r.true_density, 3) << " /km2\n"
     << "replicates         " << r.replicates << '\n'
     << "mean animals       " << text::format_fixed(r.mean_animals, 2) << '\n';
  if (r.mean_drone_count) os << "mean drone count   " << text::format_fixed(*r.mean_drone_count, 2) << '\n';
  if (r.mean_encounters) os << "mean encounters    " << text::format_fixed(*r.mean_encounters, 2) << '\n';
  os << "\nmethod      mean_est   rel_bias   coverage  failed\n";
  for (const auto& m : r.methods) {
    std::string name = to_string(m.method);
    name.resize(10, ' ');
    auto col = [](const std::string& s) { return std::string(s.size() < 11 ? 11 - s.size() : 0, ' ') + s; };
    os << name << col(std::isfinite(m.mean_estimate) ? text::format_fixed(m.mean_estimate, 3) : "n/a")
       << col(std::isfinite(m.relative_bias) ? text::format_fixed(100 * m.relative_bias, 2) + "%" : "n/a")
       << col(m.coverage ? text::format_fixed(100 * *m.coverage, 1) + "%" : "n/a") << "  " << m.errors.size()
       << '\n';
  }
  return os.str();
}

int cmd_simulate(const Globals& g, const std::string& config, bool seed_set) {
  require_readable({config});
  const auto cfg = KeyValueConfig::load(config);
  const auto spec = recovery_spec_from_config(cfg, fs::path(config).parent_path(), g.seed, seed_set);
  const auto report = recovery_experiment(spec);
  const auto dir = output_dir(g);
  if (spec.drone) {
    write_file(dir / "design.geojson", dump(geojson::design_to_geojson(spec.drone->design)));
    write_file(dir / "sightings.csv", write_sightings(report.first.drone->sightings));
  }
  if (spec.ct) {
    write_file(dir / "deployments.csv", write_deployments(spec.ct->deployments));
    write_file(dir / "sequences.csv", write_sequences(report.first.sequences));
  }
  write_file(dir / "recovery.json", dump(to_json(report)));
  const auto txt = recovery_text(report);
  write_file(dir / "recovery.txt", txt);
  std::cout << txt;
  return 0;
}

// ---------------------------------------------------------------- plot

int cmd_plot(const Globals& g, const std::vector<std::string>& files, const std::string& out,
             const std::string& title) {
  require_readable(files);
  std::vector<DensityEstimate> estimates;
  for (const auto& f : files) {
    const std::string raw = slurp(f);
    const auto first = raw.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
    if (first != std::string::npos && (raw[first] == '{' || raw[first] == '[')) {
      json j;
      try {
        j = json::parse(raw);
      } catch (const json::exception& e) {
        throw ValidationError(f + ": not valid JSON: " + e.what());
      }
      try {
        for (auto& e : estimates_from_json(j)) estimates.push_back(std::move(e));
      } catch (const ValidationError& e) {
        throw ValidationError(f + ": " + e.what());
      }
    } else {
      std::istringstream in(raw);
      for (auto& e : read_estimates_csv(in)) estimates.push_back(std::move(e));
    }
  }
  const auto data = make_plot_data(estimates);
  fs::path path = out;
  const auto ext = path.extension().string();
  if (ext != ".svg" && ext != ".csv") throw ValidationError("--out must end in .svg or .csv");
  if (path.is_relative() && !path.has_parent_path() && (!g.out_dir.empty() || std::getenv(kOutDirEnv))) {
    path = output_dir(g) / path;
  } else if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  write_file(path, ext == ".svg" ? plot_svg(data, title) : plot_csv(data));
  info(g, "wrote " + path.string() + " (" + std::to_string(data.bars.size()) + " bars)");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drone and camera-trap wildlife survey planning and density estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed for every stochastic step")->default_val(0);
  app.add_flag("-v,--verbose", g.verbosity, "More diagnostics on stderr");

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Plan edge-disjoint transect flights over a region");
  p->add_option("--region", plan.region, "Region GeoJSON (projected metres)")->required();
  p->add_option("--launch-points", plan.launch_points, "Launch points (CSV x_m,y_m or GeoJSON)")->required();
  p->add_option("--grid-spacing", plan.grid_spacing, "Grid spacing in metres")->default_val(350.0);
  p->add_option("--transect-length", plan.transect_length, "Transect length in metres (equals grid spacing)");
  p->add_option("--max-per-flight", plan.max_per_flight, "Transects per flight")->default_val(7);
  p->add_option("--swath-width", plan.swath_width, "Swath width in metres")->default_val(55.0);
  p->add_option("--altitude", plan.altitude, "Flight altitude AGL in metres")->default_val(60.0);
  p->add_option("--target-coverage", plan.target_pct, "Target coverage in percent of the region");
  p->add_option("--flights-per-launch", plan.flights_per_launch, "Flight quota per launch point");
  p->add_option("--grid-origin", plan.grid_origin, "Grid origin X Y (default: region bbox minimum)")->expected(2);
  p->add_option("--out", g.out_dir, "Output directory");

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Drone density estimates from sightings");
  e->add_option("--design", est.design, "Design GeoJSON written by `plan`")->required();
  e->add_option("--sightings", est.sightings, "Sightings CSV")->required();
  e->add_option("--species", est.species, "Keep only this species tag");
  e->add_option("--method", est.method, "naive|bootstrap|zinb|all")->default_val("all");
  e->add_option("--bootstrap-iters", est.bootstrap_iters, "Bootstrap iterations")->default_val(1000);
  e->add_option("--confidence", est.confidence, "Bootstrap interval level")->default_val(0.95);
  e->add_option("--bootstrap-statistic", est.statistic, "ratio_of_sums|mean_of_ratios")->default_val("ratio_of_sums");
  e->add_option("--reconcile", est.reconcile, "Observer reconciliation: max|first|mean_rounded")->default_val("max");
  e->add_option("--observer", est.observer, "Designated observer for --reconcile first");
  e->add_option("--survey-unit", est.survey_unit, "Label stored with each estimate, e.g. A-Oct");
  e->add_option("--threads", est.threads, "Bootstrap worker threads")->default_val(1);
  e->add_option("--out", g.out_dir, "Output directory");

  RemArgs rem;
  auto* r = app.add_subcommand("rem", "Random encounter model density from camera traps");
  r->add_option("--deployments", rem.deployments, "Deployments CSV")->required();
  r->add_option("--sequences", rem.sequences, "Encounter sequences CSV")->required();
  r->add_option("--params", rem.params, "REM parameter file (key = value)")->required();
  r->add_option("--survey-unit", rem.survey_unit, "Label stored with the estimate");
  r->add_option("--out", g.out_dir, "Output directory");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Type II ANOVA and Tukey HSD across methods");
  c->add_option("--densities", cmp.densities, "CSV survey_unit,method,density")->required();
  c->add_option("--confidence", cmp.confidence, "Tukey family-wise level")->default_val(0.95);
  c->add_option("--out", g.out_dir, "Output directory");

  std::string sim_config;
  auto* s = app.add_subcommand("simulate", "Known-truth simulation and estimator recovery");
  s->add_option("--config", sim_config, "Simulation config (key = value)")->required();
  s->add_option("--out", g.out_dir, "Output directory");

  std::vector<std::string> plot_files;
  std::string plot_out, plot_title = "Density estimates";
  auto* pl = app.add_subcommand("plot", "Grouped bar chart of estimates (SVG or CSV)");
  pl->add_option("--estimates", plot_files, "Estimate files (JSON or CSV)")->required()->expected(1, -1);
  pl->add_option("--out", plot_out, "Output file ending in .svg or .csv")->required();
  pl->add_option("--title", plot_title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }

  try {
    if (p->parsed()) return cmd_plan(g, plan);
    if (e->parsed()) return cmd_estimate(g, est);
    if (r->parsed()) return cmd_rem(g, rem);
    if (c->parsed()) return cmd_compare(g, cmp);
    if (s->parsed()) return cmd_simulate(g, sim_config, app.count("--seed") > 0);
    if (pl->parsed()) return cmd_plot(g, plot_files, plot_out, plot_title);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return ex.exit_code();
  } catch (const json::exception& ex) {
    std::cerr << "error: malformed JSON input: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 4;
  }
  return 2;
}
