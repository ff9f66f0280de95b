// qce-rkpm: L2 / H1-seminorm error integration over triangulated subdomains.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "qce/assembly.hpp"
#include "qce/discretization.hpp"
#include "qce/elasticity.hpp"
#include "qce/exact_solutions.hpp"
#include "qce/quadrature.hpp"

namespace qce::norms {

// Combined field callback: writes displacement and strain at (x, tag) in one
// call, so discrete fields pay a single shape evaluation per quadrature point.
template <int Dim>
using FieldFn =
    std::function<void(const Vec<Dim>&, int, Vec<Dim>&, elas::VoigtVec<Dim>&)>;

struct NormOptions {
  int gauss_1d = 10;       // Gauss-Legendre points per 1D subinterval
  int conical_n = 6;       // n*n conical rule on triangles (degree 2n-2)
  Real edge_factor = 0.5;  // max triangle edge / subinterval, times h_minus
};

struct NormReport {
  Real l2 = 0.0, h1 = 0.0;          // ||a - b||
  Real l2_ref = 0.0, h1_ref = 0.0;  // ||b||, for relative errors
  Real measure = 0.0;               // integrated length/area (coverage check)

  Real rel_l2() const { return l2_ref > 0.0 ? l2 / l2_ref : l2; }
  Real rel_h1() const { return h1_ref > 0.0 ? h1 / h1_ref : h1; }
};

// Frobenius norm squared of the strain tensor from its Voigt form (engineering
// shear): exx^2 + eyy^2 + gamma^2 / 2.
template <int Dim>
inline Real strain_norm2(const elas::VoigtVec<Dim>& e) {
  if constexpr (Dim == 1) return e(0) * e(0);
  return e(0) * e(0) + e(1) * e(1) + 0.5 * e(2) * e(2);
}

namespace detail {

struct Tri {
  Vec2 a, b, c;
  Real area() const { return 0.5 * geom::cross2(b - a, c - a); }
  Real max_edge() const {
    return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  }
};

// Uniform 4-way refinement until every edge is below the target.
inline void split_to(const Tri& t, Real target, std::vector<Tri>& out) {
  std::deque<Tri> queue{t};
  while (!queue.empty()) {
    Tri cur = queue.front();
    queue.pop_front();
    if (cur.max_edge() <= target) {
      out.push_back(cur);
      continue;
    }
    const Vec2 ab = 0.5 * (cur.a + cur.b), bc = 0.5 * (cur.b + cur.c),
               ca = 0.5 * (cur.c + cur.a);
    queue.push_back({cur.a, ab, ca});
    queue.push_back({ab, cur.b, bc});
    queue.push_back({ca, bc, cur.c});
    queue.push_back({ab, bc, ca});
  }
}

inline Real polygon_area(const geom::TaggedPolygon& p) {
  Real a = 0.0;
  for (int i = 0; i < p.size(); ++i)
    a += geom::cross2(p.v[i], p.v[(i + 1) % p.size()]);
  return 0.5 * a;
}

// Fan-triangulate a convex polygon, refine, append. Degenerate slivers from
// clipping are dropped; their area is below any norm tolerance.
inline void fan(const geom::TaggedPolygon& poly, Real target, Real area_eps,
                std::vector<Tri>& out) {
  for (int i = 1; i + 1 < poly.size(); ++i) {
    Tri t{poly.v[0], poly.v[i], poly.v[i + 1]};
    if (t.area() > area_eps) split_to(t, target, out);
  }
}

// Decompose piece \ P (P convex, CCW) into disjoint convex polygons by the
// half-plane chain: the part outside edge i and inside edges 0..i-1.
inline void convex_difference(const geom::TaggedPolygon& piece, const geom::Polygon& P,
                              Real area_eps, std::vector<geom::TaggedPolygon>& out) {
  geom::TaggedPolygon inside = piece;
  const int n = static_cast<int>(P.v.size());
  for (int i = 0; i < n; ++i) {
    const Vec2 a = P.v[i], b = P.v[(i + 1) % n];
    const Vec2 e = b - a;
    const Vec2 m(-e.y(), e.x());  // inward (left of edge) for a CCW polygon
    geom::TaggedPolygon outside = geom::clip_halfplane(inside, a, -m, 0);
    if (outside.size() >= 3 && polygon_area(outside) > area_eps)
      out.push_back(std::move(outside));
    inside = geom::clip_halfplane(inside, a, m, 0);
    if (inside.size() < 3) return;  // nothing left to be inside P
  }
}

inline geom::TaggedPolygon square_poly(const Vec2& lo, Real h) {
  geom::TaggedPolygon s;
  s.v = {lo, lo + Vec2(h, 0), lo + Vec2(h, h), lo + Vec2(0, h)};
  s.tag = {0, 0, 0, 0};
  return s;
}

// Matrix subdomain: fresh uniform grid; squares cut by an inclusion are
// decomposed into the convex pieces lying outside it.
inline std::vector<Tri> triangulate_matrix(const disc::EmbeddedDiscretization<2>& D,
                                           Real target) {
  std::vector<Tri> tris;
  const Vec2 lo = D.domain.lo;
  const Real h = D.h_minus;
  const int nx = static_cast<int>(std::round((D.domain.hi.x() - lo.x()) / h));
  const int ny = static_cast<int>(std::round((D.domain.hi.y() - lo.y()) / h));
  const Real area_eps = 1e-13 * h * h;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 slo = lo + Vec2(i * h, j * h);
      geom::TaggedPolygon sq = square_poly(slo, h);
      std::vector<geom::TaggedPolygon> pieces{sq};
      for (const auto& inc : D.domain.inclusions) {
        if (slo.x() > inc.bb_hi.x() || slo.x() + h < inc.bb_lo.x() ||
            slo.y() > inc.bb_hi.y() || slo.y() + h < inc.bb_lo.y())
          continue;
        std::vector<geom::TaggedPolygon> next;
        for (const auto& p : pieces) convex_difference(p, inc.poly, area_eps, next);
        pieces = std::move(next);
        if (pieces.empty()) break;
      }
      for (const auto& p : pieces) fan(p, target, area_eps, tris);
    }
  return tris;
}

// Inclusion subdomain: the conforming foreground Voronoi cells tile the
// polygon exactly; fan each cell.
inline std::vector<Tri> triangulate_inclusion(const disc::EmbeddedDiscretization<2>& D,
                                              int k, Real target) {
  std::vector<Tri> tris;
  const Real area_eps = 1e-13 * D.h_minus * D.h_minus;
  for (const auto& c : D.cells)
    if (c.subdomain == k && c.origin == disc::CellOrigin::ForegroundVoronoi)
      fan(c.poly, target, area_eps, tris);
  return tris;
}

}  // namespace detail

// 2D: quadrature subdomain-by-subdomain over an exact triangulation of each
// polyline-bounded region.
inline NormReport error_norms(const disc::EmbeddedDiscretization<2>& D,
                              const FieldFn<2>& numeric, const FieldFn<2>& reference,
                              const NormOptions& opt = {}) {
  const quad::TriRule& rule = quad::cached_triangle_rule(opt.conical_n);
  const Real target = opt.edge_factor * D.h_minus;
  NormReport rep;
  Vec2 ua, ub;
  elas::VoigtVec<2> ea, eb;

  auto integrate = [&](const std::vector<detail::Tri>& tris, int tag, Real volume) {
    Real covered = 0.0;
    for (const auto& t : tris) covered += t.area();
    if (std::abs(covered - volume) > 1e-8 * std::max(volume, 1.0))
      throw GeometryError("error_norms: triangulation of " + tag_name(tag) +
                          " covers " + std::to_string(covered) + " of " +
                          std::to_string(volume));
    for (const auto& t : tris) {
      const Real two_a = 2.0 * t.area();
      for (int q = 0; q < rule.size(); ++q) {
        const Vec2 x =
            t.a + rule.p[q].x() * (t.b - t.a) + rule.p[q].y() * (t.c - t.a);
        const Real w = two_a * rule.w[q];
        numeric(x, tag, ua, ea);
        reference(x, tag, ub, eb);
        rep.l2 += w * (ua - ub).squaredNorm();
        rep.h1 += w * strain_norm2<2>(ea - eb);
        rep.l2_ref += w * ub.squaredNorm();
        rep.h1_ref += w * strain_norm2<2>(eb);
        rep.measure += w;
      }
    }
  };

  integrate(detail::triangulate_matrix(D, target), kMatrix, D.matrix_volume());
  for (int k = 0; k < static_cast<int>(D.domain.inclusions.size()); ++k)
    integrate(detail::triangulate_inclusion(D, k, target), k, D.inclusion_volume(k));

  rep.l2 = std::sqrt(rep.l2);
  rep.h1 = std::sqrt(rep.h1);
  rep.l2_ref = std::sqrt(rep.l2_ref);
  rep.h1_ref = std::sqrt(rep.h1_ref);
  return rep;
}

// 1D: per-subdomain intervals split at the material breakpoints.
inline NormReport error_norms(const disc::EmbeddedDiscretization<1>& D,
                              const FieldFn<1>& numeric, const FieldFn<1>& reference,
                              const NormOptions& opt = {}) {
  const quad::Rule1D& gl = quad::cached_gauss_legendre(opt.gauss_1d);
  const Real target = opt.edge_factor * D.h_minus;
  NormReport rep;
  Vec1 ua, ub;
  elas::VoigtVec<1> ea, eb;

  auto integrate = [&](Real a, Real b, int tag) {
    if (b <= a) return;
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / target)));
    const Real len = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p) {
      const Real pa = a + p * len;
      for (int q = 0; q < gl.size(); ++q) {
        const Vec1 x(pa + 0.5 * (gl.x[q] + 1.0) * len);
        const Real w = 0.5 * len * gl.w[q];
        numeric(x, tag, ua, ea);
        reference(x, tag, ub, eb);
        rep.l2 += w * (ua - ub).squaredNorm();
        rep.h1 += w * strain_norm2<1>(ea - eb);
        rep.l2_ref += w * ub.squaredNorm();
        rep.h1_ref += w * strain_norm2<1>(eb);
        rep.measure += w;
      }
    }
  };

  Real cursor = D.domain.x0;
  for (int k = 0; k < static_cast<int>(D.domain.inclusions.size()); ++k) {
    const auto& inc = D.domain.inclusions[k];
    integrate(cursor, inc.a, kMatrix);
    integrate(inc.a, inc.b, k);
    cursor = inc.b;
  }
  integrate(cursor, D.domain.x1, kMatrix);

  rep.l2 = std::sqrt(rep.l2);
  rep.h1 = std::sqrt(rep.h1);
  rep.l2_ref = std::sqrt(rep.l2_ref);
  rep.h1_ref = std::sqrt(rep.h1_ref);
  return rep;
}

// ---------------------------------------------------------------------------
// field adapters
// ---------------------------------------------------------------------------

// Wraps a solved discrete field. Captures by reference: the evaluator must
// outlive the callback.
template <int Dim>
inline FieldFn<Dim> fields_of(const sys::FieldEvaluator<Dim>& fe) {
  return [&fe](const Vec<Dim>& x, int tag, Vec<Dim>& u, elas::VoigtVec<Dim>& e) {
    fe.probe(x, tag, u, e);
  };
}

inline FieldFn<1> fields_of(const exact::BarPatch& s) {
  return [s](const Vec1& x, int, Vec1& u, elas::VoigtVec<1>& e) {
    u(0) = s.displacement(x(0));
    e(0) = s.strain(x(0));
  };
}

inline FieldFn<1> fields_of(const exact::BarSine& s) {
  return [s](const Vec1& x, int, Vec1& u, elas::VoigtVec<1>& e) {
    u(0) = s.displacement(x(0));
    e(0) = s.strain(x(0));
  };
}

inline FieldFn<2> fields_of(const exact::CircularInclusion& s) {
  return [s](const Vec2& x, int tag, Vec2& u, elas::VoigtVec<2>& e) {
    u = s.displacement(x, tag);
    e = s.strain(x, tag);
  };
}

}  // namespace qce::norms
