// qce-rkpm command line: single runs, convergence studies, built-in patch
// tests and discretization export.
// SPDX-License-Identifier: MIT
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "qce/config.hpp"
#include "qce/convergence.hpp"
#include "qce/io.hpp"
#include "qce/norms.hpp"
#include "qce/problems.hpp"

namespace fs = std::filesystem;
using namespace qce;

namespace {

constexpr int kExitThreshold = 2;  // an acceptance threshold failed
constexpr int kExitGeometry = 3;   // geometry or coverage error

// ---------------------------------------------------------------------------
// config -> problem specs
// ---------------------------------------------------------------------------

void load_common(const cfg::Config& c, Real& alpha, Real& beta_mult, bool& recovery) {
  alpha = c.real("alpha", alpha);
  beta_mult = c.real("beta_mult", beta_mult);
  recovery = c.boolean("recovery", recovery);
}

bench::BarSpec load_bar(const cfg::Config& c) {
  bench::BarSpec s;
  s.x1 = c.real("x1", s.x1);
  s.x2 = c.real("x2", s.x2);
  s.length = c.real("length", s.length);
  s.e_matrix = c.real("e_matrix", s.e_matrix);
  s.e_inclusion = c.real("e_inclusion", s.e_inclusion);
  s.n_bg = c.integer("n_bg", s.n_bg);
  s.n_fg = c.integer("n_fg", s.n_fg);
  s.g = c.real("g", s.g);
  s.a1 = c.real("a1", s.a1);
  s.a2 = c.real("a2", s.a2);
  s.a3 = c.real("a3", s.a3);
  load_common(c, s.alpha, s.beta_mult, s.recovery);
  return s;
}

bench::PlateSpec load_plate(const cfg::Config& c) {
  bench::PlateSpec s;
  s.half = c.real("half", s.half);
  s.radius = c.real("radius", s.radius);
  s.load = c.real("load", s.load);
  s.matrix = {c.real("e_matrix", s.matrix.E), c.real("nu_matrix", s.matrix.nu)};
  s.inclusion = {c.real("e_inclusion", s.inclusion.E),
                 c.real("nu_inclusion", s.inclusion.nu)};
  s.h_minus = c.real("h_minus", s.h_minus);
  s.h_plus = c.real("h_plus", s.h_plus);
  load_common(c, s.alpha, s.beta_mult, s.recovery);
  return s;
}

bench::MicroSpec load_micro(const cfg::Config& c) {
  bench::MicroSpec s;
  s.side = c.real("side", s.side);
  s.matrix = {c.real("e_matrix", s.matrix.E), c.real("nu_matrix", s.matrix.nu)};
  s.inclusion = {c.real("e_inclusion", s.inclusion.E),
                 c.real("nu_inclusion", s.inclusion.nu)};
  if (c.has("g")) {
    const auto g = c.reals("g");
    if (g.size() != 2) throw ConfigError("key `g`: expected two components");
    s.g = Vec2(g[0], g[1]);
  }
  s.h_minus = c.real("h_minus", s.h_minus);
  s.h_plus = c.real("h_plus", s.h_plus);
  s.seed = c.seed("seed", s.seed);
  s.n_inclusions = c.integer("n_inclusions", s.n_inclusions);
  s.r_min = c.real("r_min", s.r_min);
  s.r_max = c.real("r_max", s.r_max);
  s.boundary_margin = c.real("boundary_margin", s.boundary_margin);
  s.gap = c.real("gap", s.gap);
  if (c.has("circles")) {
    const auto v = c.reals("circles");
    if (v.size() % 3 != 0)
      throw ConfigError("key `circles`: expected x, y, r triples");
    for (size_t i = 0; i < v.size(); i += 3)
      s.circles.push_back({Vec2(v[i], v[i + 1]), v[i + 2]});
  }
  load_common(c, s.alpha, s.beta_mult, s.recovery);
  return s;
}

fs::path prepare_output(const cfg::Config& c) {
  fs::path dir = c.str("output_dir", "out");
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

template <int Dim>
void write_fields(const fs::path& dir, const bench::Run<Dim>& run) {
  io::write_csv((dir / "nodal.csv").string(),
                io::nodal_csv(*run.D, run.d, run.fields->fields()));
  io::write_vtk((dir / "fields.vtk").string(), *run.D, run.d, run.fields->fields());
}

void append_norms(io::Csv& summary, const norms::NormReport& rep) {
  auto& row = summary.add_row();
  io::append_cell(row, std::string("l2"));
  io::append_cell(row, rep.l2);
  auto& row2 = summary.add_row();
  io::append_cell(row2, std::string("h1"));
  io::append_cell(row2, rep.h1);
  auto& row3 = summary.add_row();
  io::append_cell(row3, std::string("rel_l2"));
  io::append_cell(row3, rep.rel_l2());
  auto& row4 = summary.add_row();
  io::append_cell(row4, std::string("rel_h1"));
  io::append_cell(row4, rep.rel_h1());
}

template <int Dim>
void append_run_stats(io::Csv& summary, const bench::Run<Dim>& run) {
  auto add = [&summary](const std::string& key, Real v) {
    auto& row = summary.add_row();
    io::append_cell(row, key);
    io::append_cell(row, v);
  };
  add("nodes", run.D->cloud.size());
  add("cells", static_cast<Real>(run.D->cells.size()));
  add("residual", run.report.residual);
  add("cond1", run.report.cond1);
}

int cmd_run(const std::string& config_path) {
  cfg::Config c = cfg::Config::parse_file(config_path);
  const std::string problem = c.str("problem");
  const fs::path dir = prepare_output(c);

  io::Csv summary;
  summary.header = {"key", "value"};

  if (problem == "bar_patch" || problem == "bar_sine") {
    const bench::BarSpec spec = load_bar(c);
    c.finish();
    norms::NormReport rep;
    if (problem == "bar_patch") {
      auto p = bench::build_bar_patch(spec);
      rep = norms::error_norms(*p.run.D, p.run.field_fn(), norms::fields_of(p.exact));
      write_fields(dir, p.run);
      append_run_stats(summary, p.run);
    } else {
      auto p = bench::build_bar_sine(spec);
      rep = norms::error_norms(*p.run.D, p.run.field_fn(), norms::fields_of(p.exact));
      write_fields(dir, p.run);
      append_run_stats(summary, p.run);
    }
    append_norms(summary, rep);
  } else if (problem == "plate") {
    const bench::PlateSpec spec = load_plate(c);
    c.finish();
    auto p = bench::build_plate(spec);
    const auto rep =
        norms::error_norms(*p.run.D, p.run.field_fn(), norms::fields_of(p.exact));
    write_fields(dir, p.run);
    append_run_stats(summary, p.run);
    append_norms(summary, rep);
  } else if (problem == "micro") {
    const bench::MicroSpec spec = load_micro(c);
    c.finish();
    auto p = bench::build_micro(spec);
    write_fields(dir, p.run);
    append_run_stats(summary, p.run);

    io::Csv layout;
    layout.header = {"x", "y", "radius"};
    for (const auto& circ : p.layout) {
      auto& row = layout.add_row();
      io::append_cell(row, circ.center.x());
      io::append_cell(row, circ.center.y());
      io::append_cell(row, circ.radius);
    }
    io::write_csv((dir / "layout.csv").string(), layout);
  } else {
    throw ConfigError("unknown problem `" + problem + "`");
  }

  io::write_csv((dir / "summary.csv").string(), summary);
  std::cout << "run: wrote " << (dir / "nodal.csv").string() << ", fields.vtk, summary.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

struct LevelRow {
  Real h = 0.0;
  int nodes = 0;
  norms::NormReport rep;
  bool ok = false;
  std::string error;
};

int error_exit_code(const Error& e) {
  if (dynamic_cast<const GeometryError*>(&e) ||
      dynamic_cast<const CoverageError*>(&e))
    return kExitGeometry;
  return 1;
}

int cmd_converge(const std::string& config_path) {
  cfg::Config c = cfg::Config::parse_file(config_path);
  const std::string problem = c.str("problem");
  const fs::path dir = prepare_output(c);
  const Real min_l2_rate = c.real("min_l2_rate", 0.0);
  const Real min_h1_rate = c.real("min_h1_rate", 0.0);

  std::vector<LevelRow> rows;
  int err_exit = 0;

  if (problem == "bar_sine") {
    const bench::BarSpec base = load_bar(c);
    const int levels = c.integer("levels", 4);
    const int first = c.integer("first_level", 0);
    c.finish();
    for (int l = first; l < first + levels; ++l) {
      const bench::BarSpec spec = base.refined(l);
      LevelRow row;
      row.h = spec.h_minus();
      try {
        auto p = bench::build_bar_sine(spec);
        row.nodes = p.run.D->cloud.size();
        row.rep =
            norms::error_norms(*p.run.D, p.run.field_fn(), norms::fields_of(p.exact));
        row.ok = true;
      } catch (const Error& e) {
        row.error = e.what();
        err_exit = std::max(err_exit, error_exit_code(e));
      }
      rows.push_back(row);
    }
  } else if (problem == "plate") {
    const bench::PlateSpec base = load_plate(c);
    const auto h_list = c.reals("h_list", {0.2, 0.1, 0.05, 0.025});
    c.finish();
    for (Real h : h_list) {
      bench::PlateSpec spec = base;
      spec.h_minus = h;
      spec.h_plus = 0.0;
      LevelRow row;
      row.h = h;
      try {
        auto p = bench::build_plate(spec);
        row.nodes = p.run.D->cloud.size();
        // Rate studies need a few significant digits, not machine accuracy;
        // the lighter rule agrees with the full one to ~6 digits and is an
        // order of magnitude cheaper on the fine levels.
        norms::NormOptions opt;
        opt.conical_n = 4;
        opt.edge_factor = 1.0;
        row.rep = norms::error_norms(*p.run.D, p.run.field_fn(),
                                     norms::fields_of(p.exact), opt);
        row.ok = true;
      } catch (const Error& e) {
        row.error = e.what();
        err_exit = std::max(err_exit, error_exit_code(e));
      }
      rows.push_back(row);
    }
  } else if (problem == "micro") {
    // no analytical reference: report L2 differences between consecutive levels
    const bench::MicroSpec base = load_micro(c);
    const int levels = c.integer("levels", 3);
    c.finish();
    std::vector<bench::MicroProblem> runs;
    io::Csv table;
    table.header = {"level", "h_minus", "nodes", "l2_diff_prev", "status"};
    // Differences between consecutive numerical solutions only need a couple
    // of significant digits, so a degree-8 rule on the raw tiling suffices.
    norms::NormOptions diff_opt;
    diff_opt.conical_n = 4;
    diff_opt.edge_factor = 1.0;
    for (int l = 0; l < levels; ++l) {
      auto& row = table.add_row();
      io::append_cell(row, l);
      const bench::MicroSpec spec = base.refined(l);
      io::append_cell(row, spec.h_minus);
      try {
        runs.push_back(bench::build_micro(spec));
        io::append_cell(row, runs.back().run.D->cloud.size());
        if (runs.size() >= 2) {
          const auto& fine = runs.back().run;
          const auto& coarse = runs[runs.size() - 2].run;
          const auto rep = norms::error_norms(*fine.D, fine.field_fn(),
                                              coarse.field_fn(), diff_opt);
          io::append_cell(row, rep.l2);
        } else {
          io::append_cell(row, std::string(""));
        }
        io::append_cell(row, std::string("ok"));
      } catch (const Error& e) {
        io::append_cell(row, std::string(""));
        io::append_cell(row, std::string("failed: ") + e.what());
        err_exit = std::max(err_exit, error_exit_code(e));
      }
    }
    io::write_csv((dir / "convergence.csv").string(), table);
    std::cout << "converge: wrote " << (dir / "convergence.csv").string() << "\n";
    return err_exit;
  } else {
    throw ConfigError("converge: unsupported problem `" + problem + "`");
  }

  io::Csv table;
  table.header = {"h", "nodes", "l2", "h1", "rel_l2", "rel_h1", "status"};
  std::vector<Real> hs, l2s, h1s;
  for (const auto& row : rows) {
    auto& r = table.add_row();
    io::append_cell(r, row.h);
    io::append_cell(r, row.nodes);
    if (row.ok) {
      io::append_cell(r, row.rep.l2);
      io::append_cell(r, row.rep.h1);
      io::append_cell(r, row.rep.rel_l2());
      io::append_cell(r, row.rep.rel_h1());
      io::append_cell(r, std::string("ok"));
      hs.push_back(row.h);
      l2s.push_back(row.rep.l2);
      h1s.push_back(row.rep.h1);
    } else {
      for (int i = 0; i < 4; ++i) io::append_cell(r, std::string(""));
      io::append_cell(r, std::string("failed: ") + row.error);
    }
  }

  Real l2_rate = 0.0, h1_rate = 0.0;
  const bool rates_ok = hs.size() >= 2;
  if (rates_ok) {
    l2_rate = conv::fit_rate(hs, l2s).rate;
    h1_rate = conv::fit_rate(hs, h1s).rate;
    auto& r = table.add_row();
    io::append_cell(r, std::string("rate"));
    io::append_cell(r, std::string(""));
    io::append_cell(r, l2_rate);
    io::append_cell(r, h1_rate);
    io::append_cell(r, std::string(""));
    io::append_cell(r, std::string(""));
    io::append_cell(r, std::string("least-squares"));
  }
  io::write_csv((dir / "convergence.csv").string(), table);

  std::cout << "converge: wrote " << (dir / "convergence.csv").string() << "\n";
  if (rates_ok)
    std::cout << "rates: L2 " << l2_rate << ", H1 " << h1_rate << "\n";
  for (const auto& row : rows)
    if (!row.ok) std::cout << "level h=" << row.h << " failed: " << row.error << "\n";

  if (err_exit != 0) return err_exit;
  if (min_l2_rate > 0.0 && (!rates_ok || l2_rate < min_l2_rate)) return kExitThreshold;
  if (min_h1_rate > 0.0 && (!rates_ok || h1_rate < min_h1_rate)) return kExitThreshold;
  return 0;
}

// ---------------------------------------------------------------------------
// patch-test
// ---------------------------------------------------------------------------

bool report(const std::string& name, bool pass, Real value, Real threshold) {
  std::printf("%-52s %s  (%.3e, threshold %.1e)\n", name.c_str(),
              pass ? "PASS" : "FAIL", value, threshold);
  return pass;
}

int cmd_patch_test() {
  bool all = true;

  // 1D bimaterial patch, both volume-recovery variants
  for (bool recovery : {true, false}) {
    bench::BarSpec spec;
    spec.recovery = recovery;
    auto p = bench::build_bar_patch(spec);
    Real nodal = 0.0;
    for (int i = 0; i < p.run.D->cloud.size(); ++i)
      nodal = std::max(nodal, std::abs(p.run.d(i) -
                                       p.exact.displacement(p.run.D->cloud.nodes[i].x(0))));
    const auto rep =
        norms::error_norms(*p.run.D, p.run.field_fn(), norms::fields_of(p.exact));
    const std::string tag = recovery ? "recovery on" : "recovery off";
    all &= report("1D bimaterial patch, nodal (" + tag + ")", nodal <= 1e-10, nodal, 1e-10);
    all &= report("1D bimaterial patch, L2 (" + tag + ")", rep.l2 <= 1e-10, rep.l2, 1e-10);
  }

  // alpha-insensitivity of the 1D patch test
  {
    std::vector<Eigen::VectorXd> sols;
    for (Real alpha : {0.0, 0.5, 1.0}) {
      bench::BarSpec spec;
      spec.alpha = alpha;
      sols.push_back(bench::build_bar_patch(spec).run.d);
    }
    Real spread = 0.0;
    for (size_t i = 0; i < sols.size(); ++i)
      for (size_t j = i + 1; j < sols.size(); ++j)
        spread = std::max(spread, (sols[i] - sols[j]).cwiseAbs().maxCoeff());
    all &= report("1D patch alpha in {0, 0.5, 1} pairwise", spread <= 1e-9, spread, 1e-9);
  }

  // 2D equal-material affine patch through the embedded pipeline
  {
    bench::PlateSpec spec;
    spec.inclusion = spec.matrix;
    auto D = bench::build_plate_discretization(spec);

    sys::Problem<2> prob;
    prob.matrix = spec.matrix;
    prob.inclusions = {spec.inclusion};
    prob.bc.dirichlet = {true, true, true, true};
    const Eigen::Matrix2d A =
        (Eigen::Matrix2d() << 1.0e-3, 5.0e-4, 2.0e-4, 1.5e-3).finished();
    const Vec2 c(2.0e-3, -1.0e-3);
    prob.bc.g = [A, c](const Vec2& x) -> Vec2 { return A * x + c; };

    auto run = bench::run_problem(std::move(D), std::move(prob));
    Real nodal = 0.0, scale = 0.0;
    for (int i = 0; i < run.D->cloud.size(); ++i) {
      const Vec2 ue = A * run.D->cloud.nodes[i].x + c;
      nodal = std::max(nodal, (run.d.segment<2>(2 * i) - ue).cwiseAbs().maxCoeff());
      scale = std::max(scale, ue.cwiseAbs().maxCoeff());
    }
    all &= report("2D affine patch, nodal / scale", nodal <= 1e-9 * scale,
                  nodal / scale, 1e-9);
  }

  return all ? 0 : kExitThreshold;
}

// ---------------------------------------------------------------------------
// export-discretization
// ---------------------------------------------------------------------------

int cmd_export(const std::string& config_path) {
  cfg::Config c = cfg::Config::parse_file(config_path);
  const std::string problem = c.str("problem");
  const fs::path dir = prepare_output(c);
  std::string text;
  if (problem == "bar_patch" || problem == "bar_sine") {
    auto spec = load_bar(c);
    c.finish();
    text = disc::serialize(*bench::build_bar_discretization(spec));
  } else if (problem == "plate") {
    auto spec = load_plate(c);
    c.finish();
    text = disc::serialize(*bench::build_plate_discretization(spec));
  } else if (problem == "micro") {
    auto spec = load_micro(c);
    c.finish();
    text = disc::serialize(*bench::build_micro_discretization(spec));
  } else {
    throw ConfigError("unknown problem `" + problem + "`");
  }
  const fs::path path = dir / "discretization.txt";
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << text;
  std::cout << "export-discretization: wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-conforming embedded RKPM bench driver"};
  app.require_subcommand(1);

  std::string run_config, converge_config, export_config;
  auto* run = app.add_subcommand("run", "single solve, nodal CSV/VTK output");
  run->add_option("config", run_config, "key = value config file")->required();
  auto* converge = app.add_subcommand("converge", "refinement study with rates");
  converge->add_option("config", converge_config, "key = value config file")->required();
  auto* patch = app.add_subcommand("patch-test", "built-in patch-test suite");
  auto* exp = app.add_subcommand("export-discretization", "embedding pipeline output");
  exp->add_option("config", export_config, "key = value config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (converge->parsed()) return cmd_converge(converge_config);
    if (patch->parsed()) return cmd_patch_test();
    if (exp->parsed()) return cmd_export(export_config);
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const CoverageError& e) {
    std::cerr << "coverage error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
