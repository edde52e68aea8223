#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <fracwave/cli.hpp>
#include <fracwave/scenario_io.hpp>

using namespace fracwave;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream stream(path, std::ios::binary);
  REQUIRE(stream);
  std::stringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) lines.push_back(line);
  return lines;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrajectoryRecord small_impact_record() {
  ScenarioConfig cfg = preset("paper-fig1");
  cfg.n_cells = 48;
  cfg.n_steps = 40;
  cfg.T = 0.4;
  return run_evolution(build_scenario(cfg));
}

}  // namespace

TEST_CASE("preset catalogue") {
  SECTION("paper-fig1 carries the reference experiment data") {
    const ScenarioConfig cfg = preset("paper-fig1");
    CHECK(cfg.n_cells == 200);
    CHECK(cfg.T / cfg.n_steps == Approx(0.01).epsilon(1e-15));
    CHECK(cfg.a == 0.0);
    CHECK(cfg.b == Approx(2.0 * kPi).epsilon(1e-15));
    CHECK(cfg.bc_left == 1.2);
    CHECK(cfg.bc_right == 1.2);
    CHECK(cfg.s == 1.0);
    CHECK(cfg.u0.kind == ProfileSpec::Kind::sine);
    CHECK(cfg.u0.offset == 1.2);
    CHECK(cfg.u0.amplitude == 1.0);
    CHECK(cfg.v0.kind == ProfileSpec::Kind::constant);
    CHECK(cfg.v0.value == -2.0);
    REQUIRE(cfg.obstacle.kind == ObstacleSpec::Kind::lower);
    CHECK(cfg.obstacle.lower->kind == ProfileSpec::Kind::constant);
    CHECK(cfg.obstacle.lower->value == 0.0);

    const Scenario sc = build_scenario(cfg);
    CHECK(sc.grid.h == Approx(2.0 * kPi / 200).epsilon(1e-15));
    CHECK(sc.tau() == Approx(0.01).epsilon(1e-15));
    CHECK(sc.v0.interior.minCoeff() == -2.0);
    CHECK(sc.v0.interior.maxCoeff() == -2.0);
    for (int j : {1, 57, 140})
      CHECK(sc.u0.value(j) == Approx(std::sin(sc.grid.node(j)) + 1.2).epsilon(1e-15));
    CHECK(sc.solver.grad_tol > 0.0);
  }

  SECTION("free presets") {
    const ScenarioConfig cfg = preset("free-sine");
    CHECK(cfg.b == Approx(kPi));
    CHECK(cfg.bc_left == 0.0);
    CHECK(cfg.obstacle.kind == ObstacleSpec::Kind::none);
    CHECK(cfg.s == 1.0);

    const ScenarioConfig frac = preset("fractional-free");
    CHECK(frac.s == 0.5);
    CHECK(frac.bc_left == 0.0);
    CHECK(frac.bc_right == 0.0);
  }

  SECTION("double obstacle demo is flagged experimental") {
    const ScenarioConfig cfg = preset("double-obstacle-demo");
    CHECK(cfg.experimental);
    REQUIRE(cfg.obstacle.kind == ObstacleSpec::Kind::lower_upper);
    CHECK(cfg.obstacle.lower->value < cfg.obstacle.upper->value);
    // the demo must build and run a few steps while honoring both bounds
    ScenarioConfig quick = cfg;
    quick.n_cells = 40;
    quick.n_steps = 30;
    quick.T = 0.3;
    const TrajectoryRecord rec = run_evolution(build_scenario(quick));
    for (int i = 0; i <= rec.n(); ++i) {
      CHECK((rec.u(i).interior - rec.scenario.lower->interior).minCoeff() >= -1e-9);
      CHECK((rec.scenario.upper->interior - rec.u(i).interior).minCoeff() >= -1e-9);
    }
    const double e0 = rec.energies.front();
    for (std::size_t i = 1; i < rec.energies.size(); ++i)
      CHECK(rec.energies[i] <= rec.energies[i - 1] + 1e-8 * e0);
  }

  SECTION("unknown names list the valid presets") {
    try {
      preset("nope");
      FAIL("expected UnknownPresetError");
    } catch (const UnknownPresetError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("paper-fig1") != std::string::npos);
      CHECK(msg.find("free-sine") != std::string::npos);
    }
  }
}

TEST_CASE("config round trip") {
  for (const auto& name : preset_names()) {
    const ScenarioConfig cfg = preset(name);
    const ScenarioConfig again = parse_config_text(serialize_config(cfg).dump(2));
    CHECK(again == cfg);
  }
}

TEST_CASE("config rejection") {
  SECTION("fractional order with nonzero boundary data") {
    ScenarioConfig cfg = preset("free-sine");
    cfg.s = 0.5;
    cfg.bc_left = 0.3;
    try {
      parse_config_text(serialize_config(cfg).dump());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("zero") != std::string::npos);
    }
    CHECK_THROWS_AS(build_scenario(cfg), ConfigError);
  }

  SECTION("field specific messages") {
    auto reject = [](const std::string& text, const std::string& needle) {
      try {
        parse_config_text(text);
        FAIL("expected ConfigError for " + needle);
      } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
      }
    };
    reject("{", "JSON");
    reject(R"({"n_cells": 10})", "domain");
    const std::string base = serialize_config(preset("free-sine")).dump();
    nlohmann::json j = nlohmann::json::parse(base);
    j["n_cells"] = 1;
    reject(j.dump(), "n_cells");
    j = nlohmann::json::parse(base);
    j["s"] = 2.0;
    reject(j.dump(), "'s'");

    j = nlohmann::json::parse(base);
    j["u0"]["profile"] = "polynomial";
    reject(j.dump(), "u0");
    j = nlohmann::json::parse(base);
    j["u0"] = {{"profile", "table"}, {"x", {0.0, 1.0}}, {"y", {0.0}}};
    reject(j.dump(), "table");
    j = nlohmann::json::parse(base);
    j["output"] = {{"stride", 0}};
    reject(j.dump(), "stride");
    j = nlohmann::json::parse(base);
    j["obstacle"] = {{"kind", "both"}};
    reject(j.dump(), "obstacle.kind");
  }

  SECTION("table profiles interpolate linearly") {
    nlohmann::json j = nlohmann::json::parse(serialize_config(preset("free-sine")).dump());
    j["u0"] = {{"profile", "table"}, {"x", {0.0, kPi / 2, kPi}}, {"y", {0.0, 1.0, 0.0}}};
    const ScenarioConfig cfg = parse_config_text(j.dump());
    const Scenario sc = build_scenario(cfg);
    CHECK(eval_p1(sc.u0, kPi / 4) == Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("output files") {
  SECTION("rest state energies are written as zeros") {
    ScenarioConfig cfg = preset("free-sine");
    cfg.n_cells = 12;
    cfg.n_steps = 5;
    cfg.T = 0.5;
    cfg.u0 = ProfileSpec{};
    cfg.v0 = ProfileSpec{};
    const TrajectoryRecord rec = run_evolution(build_scenario(cfg));
    const StabilizationReport rep = detect_stabilization(rec, 0.02);
    const fs::path dir = fresh_dir("fracwave_io_rest");
    write_outputs(rec, rep, dir, 1, &cfg);

    const auto energy_lines = lines_of(slurp(dir / "energy.csv"));
    REQUIRE(energy_lines.size() == 7);  // header + 6 steps
    CHECK(energy_lines[0] == "t,E,kinetic,seminorm_sq");
    for (std::size_t i = 1; i < energy_lines.size(); ++i)
      CHECK(energy_lines[i].substr(energy_lines[i].find(',')) == ",0,0,0");

    const auto contact_lines = lines_of(slurp(dir / "contacts.csv"));
    REQUIRE(contact_lines.size() == 1);
    CHECK(contact_lines[0] == "t,j_min,j_max");
  }

  SECTION("impact outputs carry contacts and impacts") {
    const TrajectoryRecord rec = small_impact_record();
    const StabilizationReport rep = detect_stabilization(rec, 0.02);
    const ScenarioConfig cfg = preset("paper-fig1");
    const fs::path dir = fresh_dir("fracwave_io_impact");
    const auto files = write_outputs(rec, rep, dir, 4, &cfg);
    CHECK(files.size() == 5);

    const auto contact_lines = lines_of(slurp(dir / "contacts.csv"));
    CHECK(contact_lines.size() > 1);
    const auto first = contact_lines[1];
    const auto comma = first.find(',');
    const int j_min = std::stoi(first.substr(comma + 1, first.rfind(',') - comma - 1));
    const int j_max = std::stoi(first.substr(first.rfind(',') + 1));
    CHECK(j_min >= 1);
    CHECK(j_max <= rec.scenario.grid.n_cells - 1);
    CHECK(j_min <= j_max);

    const auto impacts = nlohmann::json::parse(slurp(dir / "impacts.json"));
    CHECK(impacts.contains("t_bar"));
    CHECK(impacts.contains("impacts"));
    CHECK(impacts["impacts"].size() == rep.impacts.size());

    const auto meta = nlohmann::json::parse(slurp(dir / "run_meta.json"));
    const ScenarioConfig echoed = parse_config(meta["config"]);
    CHECK(echoed == cfg);
    CHECK(meta["derived"]["tau"].get<double>() == Approx(rec.tau).epsilon(1e-15));

    // snapshots: strided in t, full sweep in x, final step always present
    const auto snap_lines = lines_of(slurp(dir / "snapshots.csv"));
    CHECK(snap_lines[0] == "t,x,u,v");
    const int per_step = rec.scenario.grid.n_cells + 1;
    const int expected_steps = rec.n() / 4 + 2;  // 0,4,...,40 always includes the last here
    REQUIRE(static_cast<int>(snap_lines.size()) == 1 + (expected_steps - 1) * per_step);
    CHECK(snap_lines[1].rfind("0,", 0) == 0);
    // x increases within a block
    const auto row2 = snap_lines[2];
    CHECK(std::stod(row2.substr(row2.find(',') + 1)) == Approx(rec.scenario.grid.node(1)));
  }

  SECTION("writes are deterministic") {
    const TrajectoryRecord rec = small_impact_record();
    const StabilizationReport rep = detect_stabilization(rec, 0.02);
    const ScenarioConfig cfg = preset("paper-fig1");
    const fs::path dir_a = fresh_dir("fracwave_io_det_a");
    const fs::path dir_b = fresh_dir("fracwave_io_det_b");
    write_outputs(rec, rep, dir_a, 2, &cfg);
    write_outputs(rec, rep, dir_b, 2, &cfg);
    for (const char* name :
         {"energy.csv", "snapshots.csv", "contacts.csv", "impacts.json", "run_meta.json"})
      CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }

  SECTION("floats carry full precision") {
    const TrajectoryRecord rec = small_impact_record();
    const StabilizationReport rep = detect_stabilization(rec, 0.02);
    const fs::path dir = fresh_dir("fracwave_io_digits");
    write_outputs(rec, rep, dir, 1, nullptr);
    const auto snap_lines = lines_of(slurp(dir / "snapshots.csv"));
    // the second x value is h = 2 pi / 48, irrational: expect 17 significant digits
    const std::string row = snap_lines[2];
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    const std::string x_text = row.substr(c1 + 1, c2 - c1 - 1);
    CHECK(x_text.size() >= 17);
    CHECK(std::stod(x_text) == rec.scenario.grid.node(1));
  }
}

TEST_CASE("command line interface") {
  SECTION("presets listing succeeds") {
    CHECK(run_cli({"presets"}) == 0);
  }

  SECTION("unknown preset exits with a usage error") {
    CHECK(run_cli({"run", "--preset", "nope"}) == 2);
  }

  SECTION("bad flags and missing subcommands exit with a usage error") {
    CHECK(run_cli({"run", "--bogus"}) == 2);
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"run"}) == 2);  // neither --preset nor --config
  }

  SECTION("run writes the expected file set") {
    ScenarioConfig cfg = preset("paper-fig1");
    cfg.n_cells = 48;
    cfg.n_steps = 40;
    cfg.T = 0.4;
    const fs::path dir = fresh_dir("fracwave_cli_run");
    const fs::path config_path = dir / "config.json";
    {
      std::ofstream out(config_path);
      out << serialize_config(cfg).dump(2) << "\n";
    }
    const fs::path out_dir = dir / "out";
    CHECK(run_cli({"run", "--config", config_path.string(), "--out", out_dir.string()}) == 0);
    for (const char* name :
         {"energy.csv", "snapshots.csv", "contacts.csv", "impacts.json", "run_meta.json"})
      CHECK(fs::exists(out_dir / name));
  }

  SECTION("verify passes on the small free preset") {
    ScenarioConfig cfg = preset("free-sine");
    cfg.n_cells = 48;
    cfg.n_steps = 60;
    cfg.T = 1.0;
    const fs::path dir = fresh_dir("fracwave_cli_verify");
    const fs::path config_path = dir / "config.json";
    {
      std::ofstream out(config_path);
      out << serialize_config(cfg).dump(2) << "\n";
    }
    CHECK(run_cli({"verify", "--config", config_path.string()}) == 0);
  }

  SECTION("convergence emits a table") {
    ScenarioConfig cfg = preset("free-sine");
    cfg.n_cells = 32;
    cfg.n_steps = 32;
    cfg.T = 1.0;
    const fs::path dir = fresh_dir("fracwave_cli_conv");
    const fs::path config_path = dir / "config.json";
    {
      std::ofstream out(config_path);
      out << serialize_config(cfg).dump(2) << "\n";
    }
    const fs::path table_path = dir / "table.csv";
    CHECK(run_cli({"convergence", "--config", config_path.string(), "--levels", "2", "--out",
                   table_path.string()}) == 0);
    const auto lines = lines_of(slurp(table_path));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "n_cells,n_steps,err_max_l2,err_at_T,rate");
  }
}
