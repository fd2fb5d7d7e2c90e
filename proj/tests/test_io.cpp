#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbmlab/io.hpp"
#include "bbmlab/simulator.hpp"

using namespace bbm;

namespace {
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("bbmlab_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};
}  // namespace

TEST_CASE("point measure csv and json round trip") {
  const PointMeasure pm{-1.5, 0.0, 2.25};
  std::ostringstream os;
  write_point_measure_csv(os, pm);
  REQUIRE(os.str() == "position\n-1.5\n0\n2.25\n");
  const auto j = point_measure_to_json(pm);
  REQUIRE(point_measure_from_json(j) == pm);
}

TEST_CASE("snapshot json round trip preserves structure") {
  SimConfig cfg;
  cfg.norm = Normalization::tilted();
  cfg.t_end = 2.0;
  cfg.checkpoints = default_checkpoints(2.0, 8);
  cfg.seed = 99;
  const auto snap = simulate(cfg);
  const auto j = snapshot_to_json(snap);
  const auto back = snapshot_from_json(j);
  REQUIRE(back.final_time == snap.final_time);
  REQUIRE(back.rng_seed == snap.rng_seed);
  REQUIRE(back.norm.is_tilted());
  REQUIRE(back.particles.size() == snap.particles.size());
  REQUIRE(back.checkpoint_values == snap.checkpoint_values);
  REQUIRE(back.leaves == snap.leaves);
  for (std::size_t i = 0; i < snap.particles.size(); ++i) {
    REQUIRE(back.particles[i].position == snap.particles[i].position);
    REQUIRE(back.particles[i].parent == snap.particles[i].parent);
    REQUIRE(back.particles[i].birth_time == snap.particles[i].birth_time);
  }
  // derived queries keep working after the round trip
  REQUIRE(back.window_decoration(1.0).atoms() ==
          snap.window_decoration(1.0).atoms());
}

TEST_CASE("field csv and sidecar") {
  Grid g;
  g.x_min = 0.0;
  g.x_max = 0.04;
  g.dx = 0.02;
  Field f;
  f.grid = g;
  f.t = 1.0;
  f.values = {1.0, 0.5, 0.0};
  std::ostringstream os;
  write_field_csv(os, f);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "x,u");
  int rows = 0;
  while (std::getline(in, line)) {
    double x, u;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &x, &u) == 2);
    REQUIRE(x == Catch::Approx(f.grid.x(rows)));
    REQUIRE(u == f.values[rows]);
    ++rows;
  }
  REQUIRE(rows == 3);
  const auto side = field_sidecar_json(f);
  REQUIRE(side.at("t").get<double>() == 1.0);
  REQUIRE(side.at("grid").at("dx").get<double>() == 0.02);
}

TEST_CASE("config parsing, overrides, and unknown keys") {
  TempDir tmp;
  const auto cfile = tmp.path / "exp.cfg";
  {
    std::ofstream out(cfile);
    out << "# comment line\n";
    out << "t = 9.5\n";
    out << "replicas=200   # trailing comment\n";
    out << "label = tail run\n";
  }
  auto cfg = Config::from_file(cfile.string());
  REQUIRE(cfg.get_double("t", 0.0) == 9.5);
  REQUIRE(cfg.get_long("replicas", 0) == 200);
  REQUIRE(cfg.get_string("label", "") == "tail run");
  REQUIRE(cfg.get_double("missing", 4.25) == 4.25);

  cfg.apply_override("t=12");
  REQUIRE(cfg.get_double("t", 0.0) == 12.0);
  REQUIRE_THROWS_AS(cfg.apply_override("no_equals_sign"), ConfigError);

  REQUIRE_NOTHROW(cfg.require_known_keys({"t", "replicas", "label"}));
  REQUIRE_THROWS_AS(cfg.require_known_keys({"t", "replicas"}), ConfigError);

  REQUIRE_THROWS_AS(cfg.get_long("label", 0), ConfigError);
  REQUIRE_THROWS_AS(Config::from_file((tmp.path / "nope.cfg").string()),
                    ConfigError);
  {
    std::ofstream out(cfile);
    out << "just a bare line\n";
  }
  REQUIRE_THROWS_AS(Config::from_file(cfile.string()), ConfigError);
}

TEST_CASE("csv writer emits the config echo and rows") {
  TempDir tmp;
  const auto path = (tmp.path / "rows.csv").string();
  {
    CsvWriter w(path, {"a", "b"}, json{{"seed", 7}});
    w.row({1.0, 2.5});
    w.row({-3.0, 0.125});
    REQUIRE_THROWS_AS(w.row({1.0}), Error);
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  REQUIRE(line.rfind("# {", 0) == 0);
  std::getline(in, line);
  REQUIRE(line == "a,b");
  std::getline(in, line);
  REQUIRE(line == "1,2.5");
  std::getline(in, line);
  REQUIRE(line == "-3,0.125");
}

TEST_CASE("json file writer") {
  TempDir tmp;
  const auto path = (tmp.path / "m.json").string();
  write_json_file(path, json{{"experiment", "demo"}, {"pass", true}});
  std::ifstream in(path);
  json j;
  in >> j;
  REQUIRE(j.at("experiment") == "demo");
  REQUIRE(j.at("pass") == true);
}
