#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geowave/cli.hpp"
#include "geowave/errors.hpp"
#include "json.hpp"

using namespace geowave;
using namespace geowave::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geowave_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.cfg";
  std::ofstream(p) << text;
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "geowave");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_command(static_cast<int>(argv.size()), argv.data());
}

ErrorCode parse_error(const std::string& text) {
  try {
    const Config c = Config::parse(text);
    Experiment::from(c);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;  // sentinel: no error
}

std::string parse_message(const std::string& text) {
  try {
    const Config c = Config::parse(text);
    Experiment::from(c);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("config grammar") {
  const Config c = Config::parse(
      "# comment line\n"
      "\n"
      "manifold.kind = circle   # trailing comment\n"
      "grid.points=384\n"
      "  noise.atoms = [[0, 1], [3, 0.125]]\n"
      "experiment.eps_list = [0.1, 0.01]\n"
      "solver.renormalize = false\n");
  CHECK(c.get_string("manifold.kind") == "circle");
  CHECK(c.get_int("grid.points") == 384);
  CHECK(c.get_double("grid.domain_radius") == 6.0);
  CHECK(!c.get_bool("solver.renormalize"));
  CHECK(c.get_doubles("experiment.eps_list") == std::vector<double>{0.1, 0.01});
  const auto atoms = c.get_pairs("noise.atoms");
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[1][0] == 3.0);
  CHECK(atoms[1][1] == 0.125);

  // Canonical text covers every key and ignores order and formatting.
  const Config d = Config::parse(
      "solver.renormalize = false\nexperiment.eps_list = [0.1, 0.01]\n"
      "noise.atoms = [[0, 1], [3, 0.125]]\ngrid.points = 384\nmanifold.kind = circle\n");
  CHECK(c.canonical() == d.canonical());
  const std::string text = c.canonical();
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(config_schema().size()));
  CHECK(Config::parse("").canonical() != c.canonical());
}

TEST_CASE("config errors name the key") {
  CHECK(parse_error("grid.pionts = 128\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_message("grid.pionts = 128\n").find("grid.pionts") != std::string::npos);
  CHECK(parse_message("grid.points = many\n").find("grid.points") != std::string::npos);
  CHECK(parse_message("grid.points = 32\n").find("grid.points") != std::string::npos);
  CHECK(parse_message("time.horizon = 7\n").find("time.horizon") != std::string::npos);
  CHECK(parse_message("time.horizon = 0.3\n").find("time.horizon") != std::string::npos);
  CHECK(parse_message("noise.atoms = []\n").find("noise.atoms") != std::string::npos);
  CHECK(parse_message("noise.atoms = [[1]]\n").find("noise.atoms") != std::string::npos);
  CHECK(parse_message("solver.renormalize = yes\n").find("solver.renormalize") != std::string::npos);
  CHECK(parse_message("manifold.kind = torus\n").find("manifold.kind") != std::string::npos);
  CHECK(parse_message("control.mode = 9\n").find("control.mode") != std::string::npos);
  CHECK(parse_message("grid.points = 64\ngrid.points = 128\n").find("grid.points") != std::string::npos);
  CHECK(parse_error("just text\n") == ErrorCode::ConfigInvalid);
  CHECK(parse_error("grid.points = 192\n") == ErrorCode::Io);
}

TEST_CASE("initial data lies on the target") {
  for (const char* kind : {"circle", "sphere"}) {
    Config c = Config::parse(std::string("manifold.kind = ") + kind + "\ngrid.points = 96\ninitial.speed = 0.7\n");
    const Experiment ex = Experiment::from(c);
    const State z = ex.initial_state();
    for (int i = 0; i < z.u.size(); ++i) {
      const Vec q = z.u.point(i);
      CHECK(std::abs(q.norm() - 1.0) < 1e-14);
      CHECK(std::abs(q.dot(z.v.point(i))) < 1e-14);
    }
  }
}

TEST_CASE("usage and error exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(run({"verify"}) == 2);
  CHECK(run({"launch", "--config", "x", "--out", "y"}) == 2);
  const fs::path bad = write_config(dir, "bogus.key = 1\n");
  CHECK(run({"skeleton", "--config", bad.string(), "--out", (dir / "o").string()}) ==
        exit_code(ErrorCode::ConfigInvalid));
  CHECK(run({"skeleton", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()}) ==
        exit_code(ErrorCode::Io));
  CHECK(exit_code(ErrorCode::ConfigInvalid) != exit_code(ErrorCode::Io));
}

TEST_CASE("skeleton geodesic run: residual column and manifest") {
  const fs::path dir = scratch("skeleton");
  const fs::path cfg = write_config(dir, "manifold.kind = circle\ngrid.points = 384\ninitial.amplitude = 0\n"
                                         "initial.speed = 1.3\nsolver.record_stride = 4\n");
  const fs::path out = dir / "out";
  REQUIRE(run({"skeleton", "--config", cfg.string(), "--out", out.string()}) == 0);

  std::ifstream in(out / "trajectory.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.substr(line.rfind(',') + 1) == "residual");
  double worst = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    worst = std::max(worst, std::stod(line.substr(line.rfind(',') + 1)));
    ++rows;
  }
  CHECK(rows > 0);
  CHECK(worst < 1e-9);

  const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(m["command"] == "skeleton");
  CHECK(m["seed"] == 1);
  CHECK(m["wall_time_seconds"].get<double>() >= 0.0);
  const Config c = Config::parse(m["config"].get<std::string>());
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(c.canonical());
  CHECK(m["config_hash"] == hash.str());
  for (const auto& [name, h] : m["outputs"].items()) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(slurp(out / name));
    CHECK(h == os.str());
  }

  // Replay from the manifest's resolved config reproduces every output.
  const fs::path replay_cfg = dir / "replay.cfg";
  std::ofstream(replay_cfg) << m["config"].get<std::string>();
  const fs::path again = dir / "again";
  REQUIRE(run({"skeleton", "--config", replay_cfg.string(), "--out", again.string()}) == 0);
  const auto m2 = nlohmann::json::parse(slurp(again / "manifest.json"));
  CHECK(m2["outputs"] == m["outputs"]);
  CHECK(m2["config_hash"] == m["config_hash"]);
}

TEST_CASE("simulate is deterministic across thread counts") {
  const fs::path dir = scratch("simulate");
  const fs::path cfg = write_config(dir, "grid.points = 192\nexperiment.trials = 4\n");
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "a").string(), "--threads", "1"}) == 0);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "b").string(), "--threads", "3"}) == 0);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "2"}) == 0);
  for (const char* f : {"paths.csv", "summary.json", "trajectory_0.csv"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(slurp(dir / "a" / "paths.csv") != slurp(dir / "c" / "paths.csv"));
  CHECK(nlohmann::json::parse(slurp(dir / "c" / "manifest.json"))["seed"] == 2);
}

TEST_CASE("verify suite passes on a coarse grid") {
  const fs::path dir = scratch("verify");
  const fs::path cfg = write_config(dir, "grid.points = 384\n");
  REQUIRE(run({"verify", "--config", cfg.string(), "--out", (dir / "a").string(), "--threads", "2"}) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "a" / "verify.json"));
  CHECK(rep["groups_passed"].get<int>() >= 25);
  CHECK(rep["groups_passed"] == rep["groups_total"]);
}
