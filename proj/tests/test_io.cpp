// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vortexflux/error.hpp"
#include "vortexflux/io.hpp"

using namespace vflux;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
[grid]
dimension = 1
extents = 1
counts = 21

[time]
T = 0.5
output_dt = 0.1

[model]
epsilon = 1e-2
R = 4

[data]
a = rows: 0 0 -0.2; 0 1 0.2
b = 1
omega0 = 0
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vortexflux_test_io_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

int line_of(const std::string& text, const std::string& needle) {
  const auto pos = text.find(needle);
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

}  // namespace

TEST_CASE("config: minimal file with defaults") {
  const ParsedConfig pc = parse_config_text(kMinimal);
  CHECK(pc.config.grid.size() == 21);
  CHECK(pc.config.T == 0.5);
  CHECK(pc.config.epsilon == 1e-2);
  CHECK(pc.config.cfl == 0.4);
  CHECK(pc.config.picard_tol == 1e-10);
  CHECK(pc.config.aleph == 1.0);
  CHECK(pc.workers == 1);
  bool aleph_recorded = false;
  for (const std::string& d : pc.defaults) aleph_recorded = aleph_recorded || d.rfind("model.aleph", 0) == 0;
  CHECK(aleph_recorded);
  CHECK(pc.config.data.a.rows.size() == 2);
}

TEST_CASE("config: validation errors name the key and the line") {
  const std::string text = replace(kMinimal, "R = 4", "R = 0");
  try {
    parse_config_text(text);
    FAIL("accepted R = 0");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "model.R");
    CHECK(e.line() == line_of(text, "R = 0"));
    CHECK(e.message() == "R must be positive");
  }
}

TEST_CASE("config: unknown, duplicate and missing keys") {
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "R = 4", "R = 4\nwobble = 2")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "R = 4", "R = 4\nR = 5")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "R = 4\n", "")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "[time]", "[clock]")), ConfigError);
  CHECK_THROWS_AS(parse_config_text(replace(kMinimal, "T = 0.5", "T = soon")), ConfigError);
  try {
    parse_config_text(replace(kMinimal, "R = 4\n", ""));
  } catch (const ConfigError& e) {
    CHECK(e.key() == "model.R");
  }
}

TEST_CASE("config: aleph below the initial density is rejected") {
  const std::string text = replace(replace(kMinimal, "omega0 = 0", "omega0 = 2"), "R = 4", "R = 4\naleph = 1.5");
  try {
    parse_config_text(text);
    FAIL("accepted aleph < omega0");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "model.aleph");
  }
}

TEST_CASE("config: canonical text reparses to the same hash, seed changes it") {
  const ParsedConfig pc = parse_config_text(kMinimal);
  const std::string canon = canonical_text(pc);
  const ParsedConfig again = parse_config_text(canon);
  CHECK(canonical_text(again) == canon);
  CHECK(config_hash(again) == config_hash(pc));
  ParsedConfig seeded = pc;
  seeded.config.seed = 99;
  CHECK(config_hash(seeded) != config_hash(pc));
  const std::string more = replace(kMinimal, "R = 4", "R = 4\n[sweep]\nworkers = 3");
  CHECK(config_hash(parse_config_text(more)) == config_hash(pc));
  CHECK(parse_config_text(more).workers == 3);
  CHECK(hex64(0x0123456789abcdefull) == "0123456789abcdef");
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("config: data files resolve against the config directory") {
  const fs::path dir = scratch("data_paths");
  fs::create_directories(dir / "sub");
  {
    std::ofstream a(dir / "sub" / "a.csv");
    a << "time,arc,value\n0,0,-0.1\n0,1,0.1\n";
  }
  {
    std::ofstream f(dir / "run.ini");
    f << replace(kMinimal, "a = rows: 0 0 -0.2; 0 1 0.2", "a = sub/a.csv");
  }
  const ParsedConfig pc = parse_config((dir / "run.ini").string());
  CHECK(pc.config.data.a.rows.size() == 2);
  CHECK(fs::path(pc.a_source).is_absolute());
  CHECK_THROWS(parse_config_text(replace(kMinimal, "a = rows: 0 0 -0.2; 0 1 0.2", "a = missing.csv"), dir));
}

TEST_CASE("field CSV: bit-identical round trip and malformed rows") {
  const Grid g = Grid::build(2, {1.5, 1.0}, {7, 5});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(g.size());
  for (double& v : f) v = u(rng) * 1e-7 + u(rng);
  std::stringstream ss;
  write_field_csv(ss, g, 0.1 + 0.2, f);
  const std::string text = ss.str();
  const FieldFile back = read_field_csv(ss);
  CHECK(back.grid == g);
  CHECK(back.t == 0.1 + 0.2);
  CHECK(back.values == f);

  std::istringstream dup(replace(text, "\n1,0,", "\n0,0,"));
  CHECK_THROWS(read_field_csv(dup));
  std::istringstream bad(replace(text, "\n1,0,", "\n1,0,x"));
  CHECK_THROWS(read_field_csv(bad));
  std::istringstream oob(replace(text, "\n1,0,", "\n9,0,"));
  CHECK_THROWS(read_field_csv(oob));
  std::string missing = text;
  missing.erase(missing.rfind('\n', missing.size() - 2) + 1);
  std::istringstream short_(missing);
  CHECK_THROWS(read_field_csv(short_));
}

TEST_CASE("steps CSV and manifest round trip") {
  std::vector<StepStats> steps(2);
  steps[0] = {0.01, 0.01, 3, 0.25, 1.0 / 3.0, -1e-300, 2.0, 0.5, 0.125, 7.0, 1e-17, 1};
  steps[1] = {0.02, 0.01, 2, 0.0, 0.4, 0.0, 1.5, 0.25, 0.0625, 3.0, 0.0, 0};
  std::stringstream ss;
  write_steps_csv(ss, steps);
  const auto back = read_steps_csv(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back[k].t == steps[k].t);
    CHECK(back[k].iterations == steps[k].iterations);
    CHECK(back[k].l1 == steps[k].l1);
    CHECK(back[k].min_omega == steps[k].min_omega);
    CHECK(back[k].mass_defect == steps[k].mass_defect);
    CHECK(back[k].retries == steps[k].retries);
  }

  const fs::path dir = scratch("manifest");
  fs::create_directories(dir);
  RunManifest m;
  m.config_hash = "00ff";
  m.run_id = "vf-test";
  m.started = utc_now();
  m.finished = m.started;
  m.seed = 18446744073709551615ull;
  m.files = {"a", "b/c"};
  m.defaults = {"time.cfl = 0.4"};
  m.metadata = {{"epsilon", "0.01"}, {"command", "run"}};
  write_manifest(dir / "manifest.json", m);
  const RunManifest r = read_manifest(dir / "manifest.json");
  CHECK(r.config_hash == m.config_hash);
  CHECK(r.seed == m.seed);
  CHECK(r.files == m.files);
  CHECK(r.defaults == m.defaults);
  CHECK(r.metadata == m.metadata);
  CHECK(m.started.size() == 20);
  CHECK(m.started.back() == 'Z');
}

TEST_CASE("cmd_run: constant config passes, outputs are reproducible and re-validate") {
  const ParsedConfig pc = parse_config(VF_SOURCE_DIR "/configs/constant.ini");
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const CommandResult ra = cmd_run(pc, a);
  CHECK(ra.passed());
  for (const char* f : {"manifest.json", "steps.csv", "diagnostics.csv", "config.resolved.ini", "l1_series.dat",
                        "fields/omega_00000.csv", "fields/h_00010.csv"})
    CHECK_MESSAGE(fs::exists(a / f), f);
  const CommandResult rb = cmd_run(pc, b);
  CHECK(slurp(a / "diagnostics.csv") == slurp(b / "diagnostics.csv"));
  CHECK(slurp(a / "fields/omega_00007.csv") == slurp(b / "fields/omega_00007.csv"));
  CHECK(read_manifest(a / "manifest.json").config_hash == hex64(config_hash(pc)));

  const CommandResult v = cmd_validate(a);
  CHECK(v.passed());
  CHECK(v.report.find("config_hash")->status == CheckStatus::Pass);

  const Trajectory t = load_trajectory(a);
  CHECK(t.snapshots.size() == 11);
  CHECK(t.epsilon == pc.config.epsilon);
}

TEST_CASE("cmd_validate flags a corrupted field and a changed configuration") {
  const ParsedConfig pc = parse_config(VF_SOURCE_DIR "/configs/constant.ini");
  const fs::path dir = scratch("corrupt");
  cmd_run(pc, dir);
  FieldFile f = read_field_file(dir / "fields/omega_00004.csv");
  f.values[10] = 1.5;
  write_field_file(dir / "fields/omega_00004.csv", f.grid, f.t, f.values);
  const CommandResult v = cmd_validate(dir);
  CHECK_FALSE(v.passed());
  CHECK(v.report.find("max_principle")->status == CheckStatus::Fail);
  CHECK(v.report.find("step_statistics")->status == CheckStatus::Fail);

  ParsedConfig other = pc;
  other.config.seed = 5;
  CHECK(cmd_validate(other, dir).report.find("config_hash")->status == CheckStatus::Fail);
  CHECK_THROWS(cmd_validate(scratch("nothing_here")));
}

TEST_CASE("cmd_sweep: four epsilons on a small grid") {
  std::string text = replace(kMinimal, "counts = 21", "counts = 41");
  text += "\n[sweep]\neps_list = 2e-2, 1e-2, 5e-3, 2.5e-3\nr_star = false\n";
  const ParsedConfig pc = parse_config_text(text);
  const fs::path out = scratch("sweep");
  const CommandResult r = cmd_sweep(pc, out, 2);
  for (int k = 0; k < 4; ++k) CHECK(fs::exists(out / ("eps_" + std::to_string(k)) / "manifest.json"));
  CHECK(fs::exists(out / "cauchy_table.csv"));
  CHECK(fs::exists(out / "family.csv"));
  CHECK(fs::exists(out / "layer_table.csv"));
  std::ifstream cauchy(out / "cauchy_table.csv");
  std::string line;
  int rows = 0;
  while (std::getline(cauchy, line)) ++rows;
  CHECK(rows == 4);  // header plus three consecutive pairs
  CHECK(r.report.find("family_failures")->status == CheckStatus::Pass);
}

TEST_CASE("cmd_extend: square configuration") {
  const ParsedConfig pc = parse_config(VF_SOURCE_DIR "/configs/square.ini");
  const fs::path out = scratch("extend");
  const CommandResult r = cmd_extend(pc, out);
  CHECK(r.passed());
  CHECK(fs::exists(out / "classification.csv"));
  CHECK(fs::exists(out / "a_eps.csv"));
  CHECK(fs::exists(out / "fields/omega_breve_00000.csv"));
  const FieldFile f = read_field_file(out / "fields/omega_breve_00000.csv");
  for (double v : f.values) CHECK(v == doctest::Approx(0.25));
}
