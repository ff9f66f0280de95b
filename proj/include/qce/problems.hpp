// qce-rkpm: benchmark problem builders and the assemble/solve/recover driver.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "qce/assembly.hpp"
#include "qce/discretization.hpp"
#include "qce/exact_solutions.hpp"
#include "qce/integration.hpp"
#include "qce/norms.hpp"

namespace qce::bench {

// A solved problem instance. Owns the discretization and evaluators so the
// field callbacks stay valid; move-only.
template <int Dim>
struct Run {
  std::unique_ptr<disc::EmbeddedDiscretization<Dim>> D;
  std::unique_ptr<rk::RKEvaluator<Dim>> ev;
  integ::IntegrationTables<Dim> tables;
  sys::Problem<Dim> prob;
  Eigen::VectorXd d;
  sys::SolveReport report;
  std::unique_ptr<sys::FieldEvaluator<Dim>> fields;

  norms::FieldFn<Dim> field_fn() const { return norms::fields_of(*fields); }
};

template <int Dim>
Run<Dim> run_problem(std::unique_ptr<disc::EmbeddedDiscretization<Dim>> D,
                     sys::Problem<Dim> prob, const integ::TableOptions& topt = {}) {
  Run<Dim> run;
  run.D = std::move(D);
  run.prob = std::move(prob);
  run.ev = std::make_unique<rk::RKEvaluator<Dim>>(run.D->cloud, run.D->domain);
  run.tables = integ::build_tables(*run.D, *run.ev, topt);
  auto system = sys::assemble(*run.D, run.tables, run.prob);
  run.d = sys::solve_system(system.K, system.f, &run.report);
  auto recovered = sys::recover_fields(*run.D, run.tables, *run.ev, run.prob, run.d);
  run.fields = std::make_unique<sys::FieldEvaluator<Dim>>(*run.D, *run.ev, run.d,
                                                          std::move(recovered));
  return run;
}

// ---------------------------------------------------------------------------
// 1D bar, stiff middle segment
// ---------------------------------------------------------------------------

// Default geometry: middle segment [0.775, 2.225] of a length-3 bar, so that
// 30 foreground nodes have exactly half the spacing of 30 background nodes.
struct BarSpec {
  Real x1 = 0.775, x2 = 2.225, length = 3.0;
  Real e_matrix = 1000.0, e_inclusion = 100000.0;
  int n_bg = 30, n_fg = 30;
  bool recovery = true;
  Real alpha = 1.0, beta_mult = 100.0;

  // end displacement (patch test)
  Real g = 0.3;
  // body-force amplitudes (sinusoidal case)
  Real a1 = 10.0, a2 = 50.0, a3 = 10.0;

  Real h_minus() const { return length / n_bg; }

  // refine: halve spacings, keeping foreground spacing at h_minus/2
  BarSpec refined(int level) const {
    BarSpec s = *this;
    s.n_bg = n_bg << level;
    s.n_fg = ((n_fg - 1) << level) + 1;
    return s;
  }
};

inline std::unique_ptr<disc::EmbeddedDiscretization<1>> build_bar_discretization(
    const BarSpec& spec) {
  auto fg = disc::generate_foreground(spec.x1, spec.x2, spec.n_fg);
  auto bg = disc::generate_background(0.0, spec.length, spec.h_minus());
  auto D = std::make_unique<disc::EmbeddedDiscretization<1>>(disc::embed(bg, {fg}, {}));
  disc::share_interface_nodes(*D);
  if (spec.recovery) disc::add_volume_recovery_cells(*D);
  return D;
}

struct BarPatchProblem {
  Run<1> run;
  exact::BarPatch exact;
};

// End-displacement patch test: u = 0 at x = 0, u = g at x = L.
inline BarPatchProblem build_bar_patch(const BarSpec& spec) {
  BarPatchProblem out;
  out.exact.x1 = spec.x1;
  out.exact.x2 = spec.x2;
  out.exact.L = spec.length;
  out.exact.Em = spec.e_matrix;
  out.exact.Ei = spec.e_inclusion;
  out.exact.g = spec.g;

  sys::Problem<1> prob;
  prob.matrix = {spec.e_matrix, 0.0};
  prob.inclusions = {{spec.e_inclusion, 0.0}};
  prob.alpha = spec.alpha;
  prob.beta_mult = spec.beta_mult;
  prob.bc.dirichlet = {true, true};
  const exact::BarPatch ex = out.exact;
  prob.bc.g = [ex](const Vec1& x) { return Vec1(ex.displacement(x(0))); };

  out.run = run_problem(build_bar_discretization(spec), std::move(prob));
  return out;
}

struct BarSineProblem {
  Run<1> run;
  exact::BarSine exact;
};

// Piecewise-sinusoidal body force: u = 0 at x = 0, traction-free at x = L.
inline BarSineProblem build_bar_sine(const BarSpec& spec) {
  BarSineProblem out;
  out.exact.x1 = spec.x1;
  out.exact.x2 = spec.x2;
  out.exact.L = spec.length;
  out.exact.Em = spec.e_matrix;
  out.exact.Ei = spec.e_inclusion;
  out.exact.A1 = spec.a1;
  out.exact.A2 = spec.a2;
  out.exact.A3 = spec.a3;

  sys::Problem<1> prob;
  prob.matrix = {spec.e_matrix, 0.0};
  prob.inclusions = {{spec.e_inclusion, 0.0}};
  prob.alpha = spec.alpha;
  prob.beta_mult = spec.beta_mult;
  prob.bc.dirichlet = {true, false};
  const exact::BarSine ex = out.exact;
  prob.bc.body = [ex](const Vec1& x) { return Vec1(ex.body(x(0))); };

  out.run = run_problem(build_bar_discretization(spec), std::move(prob));
  return out;
}

// ---------------------------------------------------------------------------
// 2D plate with one circular inclusion under far-field traction
// ---------------------------------------------------------------------------

struct PlateSpec {
  Real half = 2.0;   // computational domain [-half, half]^2
  Real radius = 1.0; // inclusion radius (diameter 2)
  Real load = 100.0; // far-field traction
  elas::Material matrix{1000.0, 0.3};
  elas::Material inclusion{100000.0, 0.3};
  Real h_minus = 0.2;
  Real h_plus = 0.0;  // foreground spacing; 0: h_minus / 2
  bool recovery = true;
  Real alpha = 1.0, beta_mult = 100.0;

  Real h_plus_eff() const { return h_plus > 0.0 ? h_plus : 0.5 * h_minus; }
};

inline std::unique_ptr<disc::EmbeddedDiscretization<2>> build_plate_discretization(
    const PlateSpec& spec) {
  auto fg = disc::generate_foreground(Vec2::Zero(), spec.radius, spec.h_plus_eff());
  auto bg = disc::generate_background(Vec2(-spec.half, -spec.half),
                                      Vec2(spec.half, spec.half), spec.h_minus);
  auto D = std::make_unique<disc::EmbeddedDiscretization<2>>(disc::embed(bg, {fg}, {}));
  disc::share_interface_nodes(*D);
  if (spec.recovery) disc::add_volume_recovery_cells(*D);
  return D;
}

struct PlateProblem {
  Run<2> run;
  exact::CircularInclusion exact;
};

// The analytical solution is imposed as the Dirichlet datum on the whole
// outer boundary, so it is also the exact solution of the finite problem.
inline PlateProblem build_plate(const PlateSpec& spec) {
  exact::CircularInclusion exact(spec.radius, spec.load, spec.matrix, spec.inclusion);

  sys::Problem<2> prob;
  prob.matrix = spec.matrix;
  prob.inclusions = {spec.inclusion};
  prob.alpha = spec.alpha;
  prob.beta_mult = spec.beta_mult;
  prob.bc.dirichlet = {true, true, true, true};
  prob.bc.g = [exact](const Vec2& x) { return exact.displacement(x, kMatrix); };

  PlateProblem out{run_problem(build_plate_discretization(spec), std::move(prob)),
                   exact};
  return out;
}

// ---------------------------------------------------------------------------
// multi-inclusion microstructure under combined tension and shear
// ---------------------------------------------------------------------------

struct Circle {
  Vec2 center = Vec2::Zero();
  Real radius = 0.0;
};

struct MicroSpec {
  Real side = 4.0;
  elas::Material matrix{1000.0, 0.3};
  elas::Material inclusion{100000.0, 0.3};
  Vec2 g = Vec2(0.02, 0.02);  // imposed on the top edge; bottom edge fixed
  Real h_minus = 4.0 / 23.0;  // ~0.174, coarse level
  Real h_plus = 0.125;        // 0: equal to h_minus
  bool recovery = true;
  Real alpha = 1.0, beta_mult = 100.0;

  // seeded layout generation (used when `circles` is empty); the defaults
  // land the coarse model at ~710 nodes with h_intf/h_minus < 1.5 so no
  // interface-driven background subdivision is triggered
  std::uint64_t seed = 3;
  int n_inclusions = 8;
  Real r_min = 0.3, r_max = 0.5;
  Real boundary_margin = 0.25;  // clearance to the outer boundary
  Real gap = 0.2;               // clearance between inclusions

  std::vector<Circle> circles;  // explicit layout; overrides the sampler

  Real h_plus_eff() const { return h_plus > 0.0 ? h_plus : h_minus; }

  // Each self-refinement step shrinks all spacings by 2.1x. Plain halving
  // falls just short of quadrupling the node count (the interface rings only
  // double), and the refined model is required to carry at least 4x the
  // nodes of its predecessor.
  MicroSpec refined(int level) const {
    MicroSpec s = *this;
    const Real n0 = std::round(side / h_minus);
    const Real n = std::round(n0 * std::pow(2.1, level));
    s.h_minus = side / n;
    s.h_plus = h_plus_eff() * (n0 / n);
    return s;
  }
};

// Rejection-sample disjoint circles. Deterministic for a fixed spec.
inline std::vector<Circle> sample_circles(const MicroSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<Real> ur(0.0, 1.0);
  std::vector<Circle> out;
  const int max_tries = 20000;
  for (int t = 0; t < max_tries && static_cast<int>(out.size()) < spec.n_inclusions;
       ++t) {
    Circle c;
    c.radius = spec.r_min + (spec.r_max - spec.r_min) * ur(rng);
    const Real lo = c.radius + spec.boundary_margin;
    const Real hi = spec.side - c.radius - spec.boundary_margin;
    if (hi <= lo) continue;
    c.center = Vec2(lo + (hi - lo) * ur(rng), lo + (hi - lo) * ur(rng));
    bool ok = true;
    for (const auto& e : out)
      if ((e.center - c.center).norm() < e.radius + c.radius + spec.gap) {
        ok = false;
        break;
      }
    if (ok) out.push_back(c);
  }
  if (static_cast<int>(out.size()) < spec.n_inclusions)
    throw InvalidLayout("sample_circles: could not place " +
                        std::to_string(spec.n_inclusions) + " disjoint inclusions");
  return out;
}

inline void validate_layout(const std::vector<Circle>& circles, Real side) {
  for (size_t i = 0; i < circles.size(); ++i) {
    const auto& a = circles[i];
    if (a.radius <= 0.0) throw InvalidLayout("microstructure: nonpositive radius");
    if (a.center.x() - a.radius <= 0.0 || a.center.x() + a.radius >= side ||
        a.center.y() - a.radius <= 0.0 || a.center.y() + a.radius >= side)
      throw InvalidLayout("microstructure: inclusion crosses the outer boundary");
    for (size_t j = i + 1; j < circles.size(); ++j) {
      const auto& b = circles[j];
      if ((a.center - b.center).norm() < a.radius + b.radius)
        throw InvalidLayout("microstructure: inclusions overlap");
    }
  }
}

inline std::unique_ptr<disc::EmbeddedDiscretization<2>> build_micro_discretization(
    const MicroSpec& spec, std::vector<Circle>* layout_out = nullptr) {
  std::vector<Circle> circles = spec.circles.empty() ? sample_circles(spec) : spec.circles;
  validate_layout(circles, spec.side);
  if (layout_out) *layout_out = circles;

  std::vector<disc::Foreground<2>> fgs;
  fgs.reserve(circles.size());
  for (const auto& c : circles)
    fgs.push_back(disc::generate_foreground(c.center, c.radius, spec.h_plus_eff()));
  auto bg = disc::generate_background(Vec2::Zero(), Vec2(spec.side, spec.side),
                                      spec.h_minus);
  auto D = std::make_unique<disc::EmbeddedDiscretization<2>>(
      disc::embed(bg, std::move(fgs), {}));
  disc::share_interface_nodes(*D);
  if (spec.recovery) disc::add_volume_recovery_cells(*D);
  return D;
}

struct MicroProblem {
  Run<2> run;
  std::vector<Circle> layout;
};

// Fixed bottom edge, g on the top edge, traction-free sides.
inline MicroProblem build_micro(const MicroSpec& spec) {
  MicroProblem out;
  auto D = build_micro_discretization(spec, &out.layout);

  sys::Problem<2> prob;
  prob.matrix = spec.matrix;
  prob.inclusions.assign(out.layout.size(), spec.inclusion);
  prob.alpha = spec.alpha;
  prob.beta_mult = spec.beta_mult;
  prob.bc.dirichlet = {false, false, true, true};  // y = lo and y = hi
  const Vec2 g = spec.g;
  const Real y_mid = 0.5 * spec.side;
  prob.bc.g = [g, y_mid](const Vec2& x) {
    return x.y() > y_mid ? g : Vec2(Vec2::Zero());
  };

  out.run = run_problem(std::move(D), std::move(prob));
  return out;
}

}  // namespace qce::bench
