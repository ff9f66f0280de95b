// qce-rkpm tests: config parsing, CSV/VTK writers and the command line
// driver (exit codes, output files, run-to-run determinism).
// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qce/config.hpp"
#include "qce/io.hpp"
#include "qce/problems.hpp"

using namespace qce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// Fresh scratch directory per section; removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("qce_test_" + std::to_string(std::rand()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this) & 0xffff));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

#ifdef QCE_BIN
int run_cli(const TempDir& dir, const std::string& args) {
  const std::string cmd = std::string(QCE_BIN) + " " + args + " > " +
                          (dir.path / "stdout.txt").string() + " 2> " +
                          (dir.path / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}
#endif

}  // namespace

// ---------------------------------------------------------------------------
// config parser
// ---------------------------------------------------------------------------

TEST_CASE("config: well-formed input") {
  const std::string text =
      "# leading comment\n"
      "name = bar_sine\n"
      "\n"
      "count = 12\n"
      "scale = 2.5e-3   # trailing comment\n"
      "flag_on = true\n"
      "flag_off = 0\n"
      "list_a = [0.2, 0.1, 0.05]\n"
      "list_b = 1 2 3\n"
      "seed = 18446744073709551615\n";
  auto c = cfg::Config::parse(text);

  CHECK(c.str("name") == "bar_sine");
  CHECK(c.integer("count") == 12);
  CHECK(c.real("scale") == 2.5e-3);
  CHECK(c.boolean("flag_on"));
  CHECK_FALSE(c.boolean("flag_off"));
  CHECK(c.reals("list_a") == std::vector<Real>{0.2, 0.1, 0.05});
  CHECK(c.reals("list_b") == std::vector<Real>{1.0, 2.0, 3.0});
  CHECK(c.seed("seed", 0) == 18446744073709551615ull);

  // defaults only apply for absent keys
  CHECK(c.real("absent", 7.0) == 7.0);
  CHECK(c.str("absent", "d") == "d");
  CHECK(c.integer("absent", -2) == -2);
  CHECK(c.boolean("absent", true));
  CHECK(c.reals("absent", {4.0}) == std::vector<Real>{4.0});
  CHECK(c.seed("absent", 9) == 9);

  CHECK_NOTHROW(c.finish());  // every present key was consumed
}

TEST_CASE("config: malformed input") {
  CHECK_THROWS_AS(cfg::Config::parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(cfg::Config::parse("= 3\n"), ConfigError);
  CHECK_THROWS_AS(cfg::Config::parse("a =\n"), ConfigError);
  CHECK_THROWS_AS(cfg::Config::parse("a = 1\na = 2\n"), ConfigError);

  auto c = cfg::Config::parse(
      "num = abc\nint = 1.5\nflag = yep\nlist = [1, 2\nempty = []\nseed = -1\n");
  CHECK_THROWS_AS(c.real("num"), ConfigError);
  CHECK_THROWS_AS(c.integer("int"), ConfigError);
  CHECK_THROWS_AS(c.boolean("flag"), ConfigError);
  CHECK_THROWS_AS(c.reals("list"), ConfigError);
  CHECK_THROWS_AS(c.reals("empty"), ConfigError);
  CHECK_THROWS_AS(c.seed("seed", 0), ConfigError);
  CHECK_THROWS_AS(c.str("missing"), ConfigError);

  // line numbers point at the offending line
  try {
    cfg::Config::parse("a = 1\nbroken line\n", "mine.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mine.cfg:2") != std::string::npos);
  }

  auto d = cfg::Config::parse("known = 1\nmistyped = 2\n");
  (void)d.real("known");
  CHECK_THROWS_AS(d.finish(), ConfigError);

  CHECK_THROWS_AS(cfg::Config::parse_file("/nonexistent/qce.cfg"), ConfigError);
}

// ---------------------------------------------------------------------------
// CSV / VTK writers
// ---------------------------------------------------------------------------

TEST_CASE("io: format_real round-trips doubles") {
  // %.17g is lossless for IEEE doubles
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), expo(rng));
    const std::string s = io::format_real(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  for (double v : {0.0, -0.0, 0.1, 1.0 / 3.0, 1e308, -2.2250738585072014e-308}) {
    const std::string s = io::format_real(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(io::format_real(0.5) == "0.5");
  CHECK(io::format_real(1.0 / 3.0) == "0.33333333333333331");
  CHECK(io::format_real(-1.0) == "-1");
}

TEST_CASE("io: write_csv golden bytes") {
  TempDir dir;
  io::Csv t;
  t.header = {"a", "b", "c"};
  auto& r0 = t.add_row();
  io::append_cell(r0, 1);
  io::append_cell(r0, 0.25);
  io::append_cell(r0, std::string("ok"));
  auto& r1 = t.add_row();
  io::append_cell(r1, -7);
  io::append_cell(r1, 1.0 / 3.0);
  io::append_cell(r1, std::string(""));
  const auto path = dir.path / "t.csv";
  io::write_csv(path.string(), t);
  CHECK(slurp(path) == "a,b,c\n1,0.25,ok\n-7,0.33333333333333331,\n");
}

TEST_CASE("io: nodal table and VTK for a small bar run") {
  bench::BarSpec spec;
  spec.n_bg = 12;
  spec.n_fg = 13;
  auto p = bench::build_bar_patch(spec);
  const auto& run = p.run;
  const auto t = io::nodal_csv(*run.D, run.d, run.fields->fields());

  const std::vector<std::string> expect_header = {
      "id",          "x",           "in_matrix",   "inclusion",  "is_interface",
      "u_x",         "strain_m_xx", "stress_m_xx", "has_m",      "strain_i_xx",
      "stress_i_xx", "has_i"};
  CHECK(t.header == expect_header);
  REQUIRE(static_cast<int>(t.rows.size()) == run.D->cloud.size());
  for (int i = 0; i < run.D->cloud.size(); ++i) {
    const auto& row = t.rows[i];
    REQUIRE(row.size() == expect_header.size());
    CHECK(row[0] == std::to_string(i));
    CHECK(std::strtod(row[1].c_str(), nullptr) == run.D->cloud.nodes[i].x(0));
    CHECK(std::strtod(row[5].c_str(), nullptr) == run.d(i));
  }

  TempDir dir;
  const auto vpath = dir.path / "f.vtk";
  io::write_vtk(vpath.string(), *run.D, run.d, run.fields->fields());
  std::ifstream in(vpath);
  std::string l1, l2, l3, l4, l5;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  std::getline(in, l5);
  CHECK(l1 == "# vtk DataFile Version 3.0");
  CHECK(l3 == "ASCII");
  CHECK(l4 == "DATASET UNSTRUCTURED_GRID");
  CHECK(l5 == "POINTS " + std::to_string(run.D->cloud.size()) + " double");
  // first point matches the first node, padded to 3D
  std::string px, py, pz;
  in >> px >> py >> pz;
  CHECK(std::strtod(px.c_str(), nullptr) == run.D->cloud.nodes[0].x(0));
  CHECK(py == "0");
  CHECK(pz == "0");
  const std::string body = slurp(vpath);
  for (const char* sec :
       {"CELLS", "CELL_TYPES", "POINT_DATA", "VECTORS displacement double",
        "SCALARS inclusion int 1", "FIELD recovered 6", "strain_matrix",
        "stress_inclusion", "has_matrix", "has_inclusion"})
    CHECK(body.find(sec) != std::string::npos);
}

TEST_CASE("io: identical pipelines produce identical bytes") {
  TempDir dir;
  auto emit = [&](const std::string& stem) {
    bench::PlateSpec spec;
    spec.h_minus = 0.4;
    auto p = bench::build_plate(spec);
    io::write_csv((dir.path / (stem + ".csv")).string(),
                  io::nodal_csv(*p.run.D, p.run.d, p.run.fields->fields()));
    io::write_vtk((dir.path / (stem + ".vtk")).string(), *p.run.D, p.run.d,
                  p.run.fields->fields());
  };
  emit("a");
  emit("b");
  CHECK(slurp(dir.path / "a.csv") == slurp(dir.path / "b.csv"));
  CHECK(slurp(dir.path / "a.vtk") == slurp(dir.path / "b.vtk"));
}

// ---------------------------------------------------------------------------
// command line driver
// ---------------------------------------------------------------------------

#ifdef QCE_BIN

TEST_CASE("cli: run is deterministic and writes the documented files") {
  TempDir dir;
  const auto cfg = dir.path / "bar.cfg";
  const auto out1 = dir.path / "out1";
  const auto out2 = dir.path / "out2";
  spit(cfg, "problem = bar_patch\nn_bg = 12\nn_fg = 13\noutput_dir = " +
                out1.string() + "\n");
  REQUIRE(run_cli(dir, "run " + cfg.string()) == 0);
  for (const char* f : {"nodal.csv", "fields.vtk", "summary.csv"})
    CHECK(fs::exists(out1 / f));

  spit(cfg, "problem = bar_patch\nn_bg = 12\nn_fg = 13\noutput_dir = " +
                out2.string() + "\n");
  REQUIRE(run_cli(dir, "run " + cfg.string()) == 0);
  for (const char* f : {"nodal.csv", "fields.vtk", "summary.csv"})
    CHECK(slurp(out1 / f) == slurp(out2 / f));
}

TEST_CASE("cli: micro run emits the layout") {
  TempDir dir;
  const auto cfg = dir.path / "micro.cfg";
  spit(cfg, "problem = micro\nn_inclusions = 3\nr_max = 0.4\noutput_dir = " +
                (dir.path / "out").string() + "\n");
  REQUIRE(run_cli(dir, "run " + cfg.string()) == 0);
  const std::string layout = slurp(dir.path / "out" / "layout.csv");
  CHECK(layout.rfind("x,y,radius\n", 0) == 0);
  CHECK(std::count(layout.begin(), layout.end(), '\n') == 4);  // header + 3
}

TEST_CASE("cli: converge reports rates and enforces thresholds") {
  TempDir dir;
  const auto cfg = dir.path / "sine.cfg";
  spit(cfg, "problem = bar_sine\nlevels = 2\noutput_dir = " +
                (dir.path / "out").string() + "\n");
  REQUIRE(run_cli(dir, "converge " + cfg.string()) == 0);
  const std::string table = slurp(dir.path / "out" / "convergence.csv");
  CHECK(table.rfind("h,nodes,l2,h1,rel_l2,rel_h1,status\n", 0) == 0);
  CHECK(table.find("rate,") != std::string::npos);

  // an unattainable rate bound turns into the threshold exit code
  spit(cfg, "problem = bar_sine\nlevels = 2\nmin_l2_rate = 10\noutput_dir = " +
                (dir.path / "out").string() + "\n");
  CHECK(run_cli(dir, "converge " + cfg.string()) == 2);
}

TEST_CASE("cli: patch-test suite passes") {
  TempDir dir;
  CHECK(run_cli(dir, "patch-test") == 0);
  const std::string log = slurp(dir.path / "stdout.txt");
  CHECK(log.find("PASS") != std::string::npos);
  CHECK(log.find("FAIL") == std::string::npos);
}

TEST_CASE("cli: export-discretization is deterministic") {
  TempDir dir;
  const auto cfg = dir.path / "e.cfg";
  spit(cfg, "problem = bar_patch\noutput_dir = " + (dir.path / "o1").string() + "\n");
  REQUIRE(run_cli(dir, "export-discretization " + cfg.string()) == 0);
  spit(cfg, "problem = bar_patch\noutput_dir = " + (dir.path / "o2").string() + "\n");
  REQUIRE(run_cli(dir, "export-discretization " + cfg.string()) == 0);
  const std::string text = slurp(dir.path / "o1" / "discretization.txt");
  CHECK(text == slurp(dir.path / "o2" / "discretization.txt"));
  CHECK_FALSE(text.empty());
}

TEST_CASE("cli: error exit codes") {
  TempDir dir;
  const auto cfg = dir.path / "bad.cfg";

  // usage errors
  CHECK(run_cli(dir, "") == 1);
  CHECK(run_cli(dir, "frobnicate") == 1);
  CHECK(run_cli(dir, "run /nonexistent/q.cfg") == 1);

  // config errors
  spit(cfg, "problem = bar_patch\nmistyped_key = 3\n");
  CHECK(run_cli(dir, "run " + cfg.string()) == 1);
  spit(cfg, "problem = no_such_problem\n");
  CHECK(run_cli(dir, "run " + cfg.string()) == 1);
  spit(cfg, "not a key value line\n");
  CHECK(run_cli(dir, "run " + cfg.string()) == 1);

  // geometry errors: an impossible inclusion layout
  spit(cfg, "problem = micro\nn_inclusions = 50\noutput_dir = " +
                (dir.path / "out").string() + "\n");
  CHECK(run_cli(dir, "run " + cfg.string()) == 3);
}

#endif  // QCE_BIN
