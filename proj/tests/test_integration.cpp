// qce-rkpm tests: smoothed gradients, constraint correction, stabilization.
// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>

#include "helpers.hpp"
#include "qce/integration.hpp"

using namespace qce;
using qce::testing::bar_discretization;
using qce::testing::plate_discretization;

namespace {

// Minimal hand-built discretization: three wide-support nodes and one square
// smoothing cell. With exactly three contributors the shape functions are the
// barycentric coordinates of the node triangle, so every table entry has a
// closed-form value.
disc::EmbeddedDiscretization<2> affine_discretization() {
  disc::EmbeddedDiscretization<2> D;
  D.domain.lo = Vec2(0, 0);
  D.domain.hi = Vec2(1, 1);

  const Vec2 P[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0.3, 1.0)};
  for (const Vec2& p : P) {
    rk::Node<2> n;
    n.x = p;
    n.h = 3.0;
    n.a = 6.0;
    n.in_matrix = true;
    D.cloud.nodes.push_back(n);
  }
  D.cloud.nodes[0].cell_matrix = true;

  disc::SmoothingCell<2> cell;
  cell.owner = 0;
  cell.subdomain = kMatrix;
  cell.poly.v = {Vec2(0.2, 0.1), Vec2(0.6, 0.1), Vec2(0.6, 0.5), Vec2(0.2, 0.5)};
  const auto props = geom::polygon_properties(geom::Polygon{cell.poly.v}, P[0]);
  cell.V = props.area;
  cell.M2 = Vec2(props.Mx, props.My);
  const auto& g2 = quad::segment2();
  for (int e = 0; e < 4; ++e) {
    const Vec2 a = cell.poly.v[e], b = cell.poly.v[(e + 1) % 4];
    const Vec2 n = Vec2((b - a).y(), -(b - a).x()) / (b - a).norm();
    for (int q = 0; q < 2; ++q)
      cell.bq.push_back({a + 0.5 * (g2.x[q] + 1.0) * (b - a), n, 0.5 * (b - a).norm()});
  }
  D.cells.push_back(cell);
  D.cell_of_node_matrix = {0, -1, -1};
  D.cell_of_node_inclusion = {-1, -1, -1};
  D.h_minus = 1.0;
  return D;
}

// Barycentric-coordinate oracle: lambda_I(x) = alpha_I + beta_I.x, solved
// independently from the interpolation conditions lambda_I(P_J) = delta_IJ.
void barycentric_gradients(const Vec2 P[3], Vec2 grad[3]) {
  Eigen::Matrix3d A;
  for (int j = 0; j < 3; ++j) A.row(j) << 1.0, P[j].x(), P[j].y();
  const Eigen::Matrix3d Ainv = A.inverse();
  for (int i = 0; i < 3; ++i) grad[i] = Vec2(Ainv(1, i), Ainv(2, i));
}

}  // namespace

TEST_CASE("smoothed gradient of an affine basis is its exact gradient") {
  auto D = affine_discretization();
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  integ::TableOptions opt;
  opt.apply_vc = false;
  auto T = integ::build_tables(D, ev, opt);

  const Vec2 P[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0.3, 1.0)};
  Vec2 exact[3];
  barycentric_gradients(P, exact);

  REQUIRE(T.cells.size() == 1);
  REQUIRE(T.cells[0].entries.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const auto* e = T.cells[0].find(i);
    REQUIRE(e != nullptr);
    // smoothing recovers the constant gradient of a linear function exactly
    REQUIRE((e->grad_sm - exact[i]).norm() < 1e-12);
    // the implicit gradient is the same constant, so its smoothed derivative
    // over a closed contour vanishes
    REQUIRE(e->nsni.norm() < 1e-12);
    // direct nodal weight is the shape value at the owner node
    REQUIRE(e->psi == Catch::Approx(i == 0 ? 1.0 : 0.0).margin(1e-12));
    REQUIRE(e->theta);
  }
}

TEST_CASE("table accumulation matches an independent re-accumulation") {
  auto D = plate_discretization(0.2, 0.1, true);
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  auto T = integ::build_tables(D, ev);

  // pick one cell of every origin that occurs
  std::map<disc::CellOrigin, int> pick;
  for (size_t ci = 0; ci < D.cells.size(); ++ci)
    pick.emplace(D.cells[ci].origin, static_cast<int>(ci));
  REQUIRE(pick.size() >= 3);

  rk::ShapeEval<2> se;
  for (const auto& [origin, ci] : pick) {
    const auto& cell = D.cells[ci];
    std::map<int, Vec2> grad;
    std::map<int, Eigen::Matrix2d> nsni;
    for (const auto& q : cell.bq) {
      ev.evaluate(q.x, cell.subdomain, rk::kValues | rk::kImplicitGrad, se);
      for (int i = 0; i < se.size(); ++i) {
        auto [it, fresh] = grad.try_emplace(se.ids[i], Vec2::Zero());
        it->second += (se.N[i] * q.w / cell.V) * q.n;
        auto [jt, f2] = nsni.try_emplace(se.ids[i], Eigen::Matrix2d::Zero());
        jt->second += (q.w / cell.V) * q.n * se.igrad[i].transpose();
      }
    }
    for (const auto& [node, g] : grad) {
      const auto* e = T.cells[ci].find(node);
      REQUIRE(e != nullptr);
      REQUIRE((e->grad_sm - g).norm() < 1e-13);
      REQUIRE((e->nsni - nsni[node]).norm() < 1e-13);
    }
    // no spurious entries beyond contour contributors and the coverage set
    for (const auto& e : T.cells[ci].entries) {
      if (!grad.count(e.node)) {
        REQUIRE(e.theta);
        REQUIRE(e.grad_sm.norm() == 0.0);
      }
    }
  }
}

TEST_CASE("per-cell smoothed gradients reproduce constants and linears") {
  auto D = plate_discretization(0.2, 0.1, true);
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  auto T = integ::build_tables(D, ev);

  for (size_t ci = 0; ci < D.cells.size(); ++ci) {
    Vec2 sum = Vec2::Zero();
    Eigen::Matrix2d lin = Eigen::Matrix2d::Zero();
    for (const auto& e : T.cells[ci].entries) {
      sum += e.grad_sm;
      lin += e.grad_sm * D.cloud.nodes[e.node].x.transpose();
    }
    // gradient of 1 vanishes; gradient of x reproduces the identity
    REQUIRE(sum.norm() < 1e-9);
    REQUIRE((lin - Eigen::Matrix2d::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("stabilization gradients annihilate affine nodal fields") {
  auto D = plate_discretization(0.2, 0.1, true);
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  auto T = integ::build_tables(D, ev);

  std::mt19937 rng(77);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double c0 = U(rng);
  const Vec2 c(U(rng), U(rng));
  for (size_t ci = 0; ci < D.cells.size(); ++ci) {
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
    for (const auto& e : T.cells[ci].entries)
      acc += e.nsni * (c0 + c.dot(D.cloud.nodes[e.node].x));
    REQUIRE(acc.norm() < 1e-9);
  }
}

TEST_CASE("corrected gradients satisfy the integration constraint") {
  struct Case {
    const char* name;
    bool recover;
  };
  for (const Case c : {Case{"plain", false}, Case{"recovered", true}}) {
    SECTION(std::string("plate ") + c.name) {
      auto D = plate_discretization(0.2, 0.1, c.recover);
      rk::RKEvaluator<2> ev(D.cloud, D.domain);
      auto T = integ::build_tables(D, ev);
      double perim = 0.0;
      for (const auto& p : D.outer_pieces) perim += (p.b - p.a).norm();
      for (const auto& p : D.interface_pieces) perim += (p.b - p.a).norm();
      REQUIRE(integ::max_constraint_residual(D, T, true) < 1e-12 * perim);
      // the raw smoothed gradients fail the constraint on cut cells
      if (!c.recover) REQUIRE(integ::max_constraint_residual(D, T, false) > 1e-6);
    }
  }
  SECTION("bar, both recovery variants") {
    for (bool recover : {false, true}) {
      auto D = bar_discretization(0.775, 2.225, 30, 0.1, recover);
      rk::RKEvaluator<1> ev(D.cloud, D.domain);
      auto T = integ::build_tables(D, ev);
      REQUIRE(integ::max_constraint_residual(D, T, true) < 1e-12 * 3.0);
    }
  }
}

TEST_CASE("conforming foreground cells need essentially no correction") {
  SECTION("plate inclusion subdomain") {
    auto D = plate_discretization(0.2, 0.1, false);
    rk::RKEvaluator<2> ev(D.cloud, D.domain);
    auto T = integ::build_tables(D, ev);
    REQUIRE(integ::max_zeta(T, 0) < 1e-10);
    // matrix side is genuinely non-conforming before correction
    REQUIRE(integ::max_zeta(T, kMatrix) > 1e-6);
  }
  SECTION("bar inclusion subdomain") {
    auto D = bar_discretization(0.775, 2.225, 30, 0.1, false);
    rk::RKEvaluator<1> ev(D.cloud, D.domain);
    auto T = integ::build_tables(D, ev);
    REQUIRE(integ::max_zeta(T, 0) < 1e-12);
  }
}

TEST_CASE("volume probes: residuals see exactly the missing volume") {
  for (bool recover : {false, true}) {
    auto D = plate_discretization(0.2, 0.1, recover);
    rk::RKEvaluator<2> ev(D.cloud, D.domain);
    auto T = integ::build_tables(D, ev);

    // partition-of-unity probe: residuals of all nodes in a subdomain cancel
    const int n_tags = 2;
    for (int t = 0; t < n_tags; ++t) {
      Vec2 total = Vec2::Zero();
      for (const auto& r : T.r[t]) total += r;
      REQUIRE(total.norm() < 1e-10);
    }

    // moment probe: sum_I x_I . r_I^x equals the subdomain volume defect
    double covered = 0.0;
    for (const auto& cell : D.cells)
      if (cell.subdomain == kMatrix) covered += cell.V;
    const double defect = D.matrix_volume() - covered;
    double probe = 0.0;
    for (int i = 0; i < D.cloud.size(); ++i)
      probe += D.cloud.nodes[i].x.x() * T.r[T.tag_index(kMatrix)][i].x();
    REQUIRE(probe == Catch::Approx(defect).margin(1e-10));
    if (recover) REQUIRE(std::abs(defect) < 1e-10);

    // same probe on the conforming inclusion side gives zero defect
    double probe_inc = 0.0;
    for (int i = 0; i < D.cloud.size(); ++i)
      probe_inc += D.cloud.nodes[i].x.x() * T.r[T.tag_index(0)][i].x();
    REQUIRE(std::abs(probe_inc) < 1e-10);
  }
}

TEST_CASE("node with boundary presence but no covered cell is rejected") {
  disc::EmbeddedDiscretization<1> D;
  D.domain.x0 = 0.0;
  D.domain.x1 = 1.0;
  auto add_node = [&](double x, double a, bool owns) {
    rk::Node<1> n;
    n.x = Vec1(x);
    n.h = a / 2;
    n.a = a;
    n.in_matrix = true;
    n.cell_matrix = owns;
    D.cloud.nodes.push_back(n);
  };
  add_node(0.25, 0.9, true);
  add_node(0.75, 0.9, true);
  add_node(1.0, 0.15, false);  // hangs onto the boundary only

  auto add_cell = [&](int owner, double a, double b) {
    disc::SmoothingCell<1> cell;
    cell.owner = owner;
    cell.subdomain = kMatrix;
    cell.a = a;
    cell.b = b;
    cell.V = b - a;
    cell.bq.push_back({Vec1(a), Vec1(-1.0), 1.0});
    cell.bq.push_back({Vec1(b), Vec1(1.0), 1.0});
    D.cells.push_back(cell);
  };
  // cells stop short of x = 1, so the boundary term cannot telescope away
  add_cell(0, 0.0, 0.45);
  add_cell(1, 0.45, 0.9);
  D.outer_pieces.push_back({0.0, -1.0, 0});
  D.outer_pieces.push_back({1.0, 1.0, 1});
  D.cell_of_node_matrix = {0, 1, -1};
  D.cell_of_node_inclusion = {-1, -1, -1};
  D.h_minus = 0.5;

  rk::RKEvaluator<1> ev(D.cloud, D.domain);
  REQUIRE_THROWS_AS(integ::build_tables(D, ev), IsolatedNode);
}

TEST_CASE("all tables stay finite with recovery cells present") {
  auto D = plate_discretization(0.2, 0.1, true);
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  auto T = integ::build_tables(D, ev);
  for (const auto& table : T.cells) {
    for (const auto& e : table.entries) {
      REQUIRE(std::isfinite(e.psi));
      REQUIRE(e.grad_sm.allFinite());
      REQUIRE(e.grad_vc.allFinite());
      REQUIRE(e.nsni.allFinite());
    }
  }
  for (const auto& cp : T.contour) {
    double pu = 0.0;
    for (double v : cp.matrix_side.N) pu += v;
    if (cp.kind == integ::ContourKind::Interface) {
      double pu_inc = 0.0;
      for (double v : cp.inclusion_side.N) pu_inc += v;
      REQUIRE(pu_inc == Catch::Approx(1.0).margin(1e-9));
      REQUIRE(cp.nearest_cell_inclusion >= 0);
    }
    REQUIRE(pu == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(cp.nearest_cell_matrix >= 0);
  }
}

TEST_CASE("contour evaluations reuse the canonical interface quadrature") {
  auto D = plate_discretization(0.2, 0.1, false);
  rk::RKEvaluator<2> ev(D.cloud, D.domain);
  auto T = integ::build_tables(D, ev);

  // every interface piece produces exactly two Gauss points whose weighted
  // lengths add up to the piece length
  std::map<int, double> wsum;
  std::map<int, int> count;
  for (const auto& cp : T.contour) {
    if (cp.kind != integ::ContourKind::Interface) continue;
    wsum[cp.piece] += cp.w;
    count[cp.piece] += 1;
    REQUIRE((cp.n - D.interface_pieces[cp.piece].nplus).norm() == 0.0);
  }
  REQUIRE(count.size() == D.interface_pieces.size());
  for (const auto& [pi, c] : count) {
    REQUIRE(c == 2);
    const auto& p = D.interface_pieces[pi];
    REQUIRE(wsum[pi] == Catch::Approx((p.b - p.a).norm()).epsilon(1e-12));
  }
}
