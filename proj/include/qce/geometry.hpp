// qce-rkpm: planar/interval geometry kernel (polygon moments, point
// classification, line-of-sight, interface clipping).
// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qce/common.hpp"

namespace qce::geom {

// ---------------------------------------------------------------------------
// polygons
// ---------------------------------------------------------------------------

struct Polygon {
  std::vector<Vec2> v;  // CCW
  int size() const { return static_cast<int>(v.size()); }
  const Vec2& at(int i) const { return v[((i % size()) + size()) % size()]; }
};

inline Real cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct PolygonProperties {
  Real area = 0.0;
  Vec2 centroid = Vec2::Zero();
  Real Mx = 0.0;  // integral of (x - ref.x)^2 over the polygon
  Real My = 0.0;  // integral of (y - ref.y)^2
};

// Shoelace/Green's-theorem moments about `ref` (shifting first keeps the
// second moments well conditioned far from the origin).
inline PolygonProperties polygon_properties(const Polygon& poly, const Vec2& ref) {
  const int n = poly.size();
  if (n < 3) throw DegenerateCell("polygon_properties: fewer than 3 vertices");
  Real A = 0.0, cx = 0.0, cy = 0.0, mx = 0.0, my = 0.0;
  Real scale = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec2 p = poly.v[i] - ref;
    const Vec2 q = poly.v[(i + 1) % n] - ref;
    const Real cr = cross2(p, q);
    A += cr;
    cx += (p.x() + q.x()) * cr;
    cy += (p.y() + q.y()) * cr;
    mx += (p.x() * p.x() + p.x() * q.x() + q.x() * q.x()) * cr;
    my += (p.y() * p.y() + p.y() * q.y() + q.y() * q.y()) * cr;
    scale = std::max(scale, p.norm());
  }
  A *= 0.5;
  if (!(A > 1e-14 * scale * scale))
    throw DegenerateCell("polygon_properties: zero or negative area");
  PolygonProperties out;
  out.area = A;
  out.centroid = ref + Vec2(cx / (6.0 * A), cy / (6.0 * A));
  out.Mx = mx / 12.0;
  out.My = my / 12.0;
  return out;
}

inline Real polygon_area(const Polygon& poly) {
  Real A = 0.0;
  const int n = poly.size();
  for (int i = 0; i < n; ++i) A += cross2(poly.v[i], poly.v[(i + 1) % n]);
  return 0.5 * A;
}

inline Real polygon_perimeter(const Polygon& poly) {
  Real s = 0.0;
  const int n = poly.size();
  for (int i = 0; i < n; ++i) s += (poly.v[(i + 1) % n] - poly.v[i]).norm();
  return s;
}

// Crossing-number test; points on the boundary count as inside.
inline bool point_in_polygon(const Polygon& poly, const Vec2& p, Real tol = 0.0) {
  const int n = poly.size();
  bool in = false;
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly.v[j];
    const Vec2& b = poly.v[i];
    // boundary band
    const Vec2 d = b - a;
    const Real len2 = d.squaredNorm();
    if (len2 > 0.0) {
      const Real t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
      if ((p - (a + t * d)).norm() <= tol) return true;
    }
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const Real xi = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < xi) in = !in;
    }
  }
  return in;
}

// For convex CCW polygons: min over edges of the inward signed distance.
// Positive inside, negative outside (near vertices the magnitude is a lower
// bound of the true exterior distance, which is fine at tolerance scale).
inline Real inside_depth_convex(const Polygon& poly, const Vec2& p) {
  Real depth = std::numeric_limits<Real>::max();
  const int n = poly.size();
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly.v[i];
    const Vec2 e = poly.v[(i + 1) % n] - a;
    const Real len = e.norm();
    if (len == 0.0) continue;
    const Vec2 n_in(-e.y() / len, e.x() / len);
    depth = std::min(depth, n_in.dot(p - a));
  }
  return depth;
}

inline Vec2 closest_point_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 d = b - a;
  const Real len2 = d.squaredNorm();
  if (len2 == 0.0) return a;
  const Real t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return a + t * d;
}

inline Vec2 closest_point_on_polyline(const Polygon& poly, const Vec2& p) {
  Real best = std::numeric_limits<Real>::max();
  Vec2 out = poly.v.front();
  const int n = poly.size();
  for (int i = 0; i < n; ++i) {
    const Vec2 c = closest_point_on_segment(poly.v[i], poly.v[(i + 1) % n], p);
    const Real d2 = (p - c).squaredNorm();
    if (d2 < best) {
      best = d2;
      out = c;
    }
  }
  return out;
}

// Liang-Barsky clip of segment p + t (q - p), t in [0,1], against a convex
// CCW polygon. Returns false if the intersection is empty.
inline bool convex_chord(const Polygon& poly, const Vec2& p, const Vec2& q,
                         Real* t0_out, Real* t1_out) {
  Real t0 = 0.0, t1 = 1.0;
  const Vec2 d = q - p;
  const int n = poly.size();
  for (int i = 0; i < n; ++i) {
    const Vec2& a = poly.v[i];
    const Vec2 e = poly.v[(i + 1) % n] - a;
    const Vec2 n_in(-e.y(), e.x());  // keep n_in . (x - a) >= 0
    const Real denom = n_in.dot(d);
    const Real num = n_in.dot(p - a);
    if (std::abs(denom) < 1e-300) {
      if (num < 0.0) return false;  // parallel and outside
      continue;
    }
    const Real t = -num / denom;
    if (denom > 0.0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
    if (t0 > t1) return false;
  }
  *t0_out = t0;
  *t1_out = t1;
  return true;
}

// Tagged polygon for Sutherland-Hodgman clipping that remembers provenance of
// each edge (edge i runs v[i] -> v[i+1]).
struct TaggedPolygon {
  std::vector<Vec2> v;
  std::vector<int> tag;
  int size() const { return static_cast<int>(v.size()); }
};

// Clip against half-plane n_keep . (x - a) >= 0. Edges created by the cut get
// `new_tag`; surviving edge parts keep their source tag.
inline TaggedPolygon clip_halfplane(const TaggedPolygon& in, const Vec2& a,
                                    const Vec2& n_keep, int new_tag) {
  TaggedPolygon out;
  const int n = in.size();
  if (n == 0) return out;
  std::vector<Real> s(n);
  for (int i = 0; i < n; ++i) s[i] = n_keep.dot(in.v[i] - a);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const bool in_i = s[i] >= 0.0, in_j = s[j] >= 0.0;
    if (in_i) {
      out.v.push_back(in.v[i]);
      out.tag.push_back(in.tag[i]);
    }
    if (in_i != in_j) {
      const Real t = s[i] / (s[i] - s[j]);
      out.v.push_back(in.v[i] + t * (in.v[j] - in.v[i]));
      // leaving the half-plane: the cut edge bridges along the clip line;
      // entering: the remainder of the source edge continues.
      out.tag.push_back(in_i ? new_tag : in.tag[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// domain specification
// ---------------------------------------------------------------------------

template <int Dim>
struct DomainSpec;

template <>
struct DomainSpec<1> {
  Real x0 = 0.0, x1 = 1.0;  // bar extent
  struct Inclusion {
    Real a = 0.0, b = 0.0;  // open interval (a, b)
  };
  std::vector<Inclusion> inclusions;
  Real diameter() const { return x1 - x0; }
  Real tol() const { return 1e-9 * diameter(); }
};

template <>
struct DomainSpec<2> {
  Vec2 lo = Vec2::Zero(), hi = Vec2::Ones();  // rectangle
  struct Inclusion {
    Polygon poly;  // convex CCW interface polyline
    Vec2 bb_lo = Vec2::Zero(), bb_hi = Vec2::Zero();
    // Inscribed/circumscribed circles about the vertex centroid. They bracket
    // the polygon, so most point and segment queries resolve against a circle
    // instead of walking the edges.
    Vec2 center = Vec2::Zero();
    Real r_in = 0.0, r_out = 0.0;
  };
  std::vector<Inclusion> inclusions;

  void add_inclusion(Polygon poly) {
    Inclusion inc;
    inc.bb_lo = poly.v.front();
    inc.bb_hi = poly.v.front();
    for (const Vec2& p : poly.v) {
      inc.bb_lo = inc.bb_lo.cwiseMin(p);
      inc.bb_hi = inc.bb_hi.cwiseMax(p);
      inc.center += p;
    }
    inc.center /= static_cast<Real>(poly.v.size());
    inc.r_in = std::numeric_limits<Real>::infinity();
    for (int i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly.v[i];
      const Vec2& b = poly.v[(i + 1) % poly.size()];
      inc.r_out = std::max(inc.r_out, (a - inc.center).norm());
      const Vec2 foot = closest_point_on_segment(a, b, inc.center);
      inc.r_in = std::min(inc.r_in, (foot - inc.center).norm());
    }
    inc.poly = std::move(poly);
    inclusions.push_back(std::move(inc));
  }

  Real diameter() const { return (hi - lo).norm(); }
  Real tol() const { return 1e-9 * diameter(); }
};

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

inline PointClass classify(const DomainSpec<1>& dom, const Vec1& p, Real tol = -1.0) {
  if (tol < 0.0) tol = dom.tol();
  const Real x = p(0);
  if (x < dom.x0 - tol || x > dom.x1 + tol)
    throw OutsideDomain("classify: point outside the bar");
  for (int k = 0; k < static_cast<int>(dom.inclusions.size()); ++k) {
    const auto& inc = dom.inclusions[k];
    if (std::abs(x - inc.a) <= tol || std::abs(x - inc.b) <= tol)
      return {Region::Interface, k};
    if (x > inc.a && x < inc.b) return {Region::Inclusion, k};
  }
  return {Region::Matrix, -1};
}

inline PointClass classify(const DomainSpec<2>& dom, const Vec2& p, Real tol = -1.0) {
  if (tol < 0.0) tol = dom.tol();
  if (p.x() < dom.lo.x() - tol || p.x() > dom.hi.x() + tol ||
      p.y() < dom.lo.y() - tol || p.y() > dom.hi.y() + tol)
    throw OutsideDomain("classify: point outside the rectangle");
  for (int k = 0; k < static_cast<int>(dom.inclusions.size()); ++k) {
    const auto& inc = dom.inclusions[k];
    if (p.x() < inc.bb_lo.x() - tol || p.x() > inc.bb_hi.x() + tol ||
        p.y() < inc.bb_lo.y() - tol || p.y() > inc.bb_hi.y() + tol)
      continue;
    const Real depth = inside_depth_convex(inc.poly, p);
    if (std::abs(depth) <= tol) return {Region::Interface, k};
    if (depth > tol) return {Region::Inclusion, k};
  }
  return {Region::Matrix, -1};
}

// ---------------------------------------------------------------------------
// line of sight
// ---------------------------------------------------------------------------

namespace detail {

// True when the open segment (p, q) carries a chord of positive length whose
// midpoint lies strictly inside some inclusion.
inline bool segment_blocked(const DomainSpec<2>& dom, const Vec2& p, const Vec2& q) {
  const Real eps = dom.tol();
  const Real seg_len = (q - p).norm();
  if (seg_len <= eps) return false;
  for (const auto& inc : dom.inclusions) {
    const Vec2 mn = p.cwiseMin(q), mx = p.cwiseMax(q);
    if (mx.x() < inc.bb_lo.x() - eps || mn.x() > inc.bb_hi.x() + eps ||
        mx.y() < inc.bb_lo.y() - eps || mn.y() > inc.bb_hi.y() + eps)
      continue;
    // Circle screens before the edge walk. A segment clear of the
    // circumscribed circle cannot touch the polygon. A fat chord through the
    // inscribed circle proves blockage outright: penetration depth is concave
    // along the segment and at least half its maximum at the chord midpoint,
    // so a point deeper than 2 eps inside the circle certifies the polygon
    // chord midpoint is deeper than eps.
    const Vec2 dir = q - p;
    const Real t_perp = (inc.center - p).dot(dir) / (seg_len * seg_len);
    const Real t_seg = std::min(std::max(t_perp, Real(0)), Real(1));
    if ((p + t_seg * dir - inc.center).norm() >= inc.r_out + eps) continue;
    const Real d_line2 = (p + t_perp * dir - inc.center).squaredNorm();
    if (d_line2 < inc.r_in * inc.r_in) {
      const Real half = std::sqrt(inc.r_in * inc.r_in - d_line2) / seg_len;
      const Real s0 = std::max(t_perp - half, Real(0));
      const Real s1 = std::min(t_perp + half, Real(1));
      if ((s1 - s0) * seg_len > eps) {
        const Vec2 mid = p + (0.5 * (s0 + s1)) * dir;
        if (inc.r_in - (mid - inc.center).norm() > 2 * eps) return true;
      }
    }
    Real t0, t1;
    if (!convex_chord(inc.poly, p, q, &t0, &t1)) continue;
    if ((t1 - t0) * seg_len <= eps) continue;  // grazing contact
    const Vec2 mid = p + 0.5 * (t0 + t1) * (q - p);
    if (inside_depth_convex(inc.poly, mid) > eps) return true;
  }
  return false;
}

inline bool segment_blocked(const DomainSpec<1>& dom, const Vec1& p, const Vec1& q) {
  const Real eps = dom.tol();
  const Real a = std::min(p(0), q(0)), b = std::max(p(0), q(0));
  for (const auto& inc : dom.inclusions) {
    const Real lo = std::max(a, inc.a), hi = std::min(b, inc.b);
    if (hi - lo <= eps) continue;
    const Real mid = 0.5 * (lo + hi);
    if (mid > inc.a + eps && mid < inc.b - eps) return true;
  }
  return false;
}

// Matrix-side evaluation points may sit strictly inside an inclusion (the
// volume-recovery cells straddle the interface on purpose). Visibility is
// then judged from the nearest interface point instead.
inline Vec2 matrix_visibility_anchor(const DomainSpec<2>& dom, const Vec2& p) {
  const Real eps = dom.tol();
  for (const auto& inc : dom.inclusions) {
    if (p.x() < inc.bb_lo.x() - eps || p.x() > inc.bb_hi.x() + eps ||
        p.y() < inc.bb_lo.y() - eps || p.y() > inc.bb_hi.y() + eps)
      continue;
    const Real dc = (p - inc.center).norm();
    if (dc >= inc.r_out + eps) continue;  // clear of the circumscribed circle
    const bool inside = dc <= inc.r_in - 2 * eps  // deep in the inscribed circle
                        || inside_depth_convex(inc.poly, p) > eps;
    if (inside) return closest_point_on_polyline(inc.poly, p);
  }
  return p;
}

inline Vec1 matrix_visibility_anchor(const DomainSpec<1>& dom, const Vec1& p) {
  const Real eps = dom.tol();
  for (const auto& inc : dom.inclusions) {
    if (p(0) > inc.a + eps && p(0) < inc.b - eps) {
      const Real d_a = p(0) - inc.a, d_b = inc.b - p(0);
      return Vec1(d_a <= d_b ? inc.a : inc.b);
    }
  }
  return p;
}

}  // namespace detail

// Visibility between evaluation point p and node q within subdomain `tag`.
// Inclusion subdomains are convex, hence always visible; the matrix subdomain
// blocks segments that cut through an inclusion interior.
template <int Dim>
inline bool line_of_sight(const DomainSpec<Dim>& dom, int tag, const Vec<Dim>& p,
                          const Vec<Dim>& q) {
  if (tag != kMatrix) return true;
  const Vec<Dim> pa = detail::matrix_visibility_anchor(dom, p);
  const Vec<Dim> qa = detail::matrix_visibility_anchor(dom, q);
  return !detail::segment_blocked(dom, pa, qa);
}

// ---------------------------------------------------------------------------
// cell vs interface classification
// ---------------------------------------------------------------------------

enum class CellClass { FullyMatrix, FullyInclusion, Straddles };

namespace detail {

// Proper (transversal) segment crossing; contact within `tol` of either
// segment counts as touching, not crossing.
inline bool proper_crossing(const Vec2& a, const Vec2& b, const Vec2& c,
                            const Vec2& d, Real tol) {
  const Real lab = (b - a).norm(), lcd = (d - c).norm();
  if (lab == 0.0 || lcd == 0.0) return false;
  const Real d1 = cross2(d - c, a - c);  // |cd| * dist(a, line cd)
  const Real d2 = cross2(d - c, b - c);
  const Real d3 = cross2(b - a, c - a);
  const Real d4 = cross2(b - a, d - a);
  const Real e1 = tol * lcd, e2 = tol * lab;
  const bool opp1 = (d1 > e1 && d2 < -e1) || (d1 < -e1 && d2 > e1);
  const bool opp2 = (d3 > e2 && d4 < -e2) || (d3 < -e2 && d4 > e2);
  return opp1 && opp2;
}

}  // namespace detail

// How a candidate cell polygon sits relative to the interface polylines:
// vertex classification plus edge/polyline crossing tests, with touching
// within tolerance treated as not straddling.
inline CellClass classify_cell(const DomainSpec<2>& dom, const Polygon& cell,
                               Real tol = -1.0) {
  if (tol < 0.0) tol = dom.tol();
  const int n = cell.size();
  int n_matrix = 0, n_inside = 0, inside_k = -1;
  for (const Vec2& p : cell.v) {
    Region r = Region::Matrix;
    int k_hit = -1;
    for (int k = 0; k < static_cast<int>(dom.inclusions.size()); ++k) {
      const auto& inc = dom.inclusions[k];
      if (p.x() < inc.bb_lo.x() - tol || p.x() > inc.bb_hi.x() + tol ||
          p.y() < inc.bb_lo.y() - tol || p.y() > inc.bb_hi.y() + tol)
        continue;
      const Real depth = inside_depth_convex(inc.poly, p);
      if (std::abs(depth) <= tol) {
        r = Region::Interface;
        k_hit = k;
        break;
      }
      if (depth > tol) {
        r = Region::Inclusion;
        k_hit = k;
        break;
      }
    }
    if (r == Region::Matrix) ++n_matrix;
    if (r == Region::Inclusion) {
      ++n_inside;
      inside_k = k_hit;
    }
  }
  if (n_matrix > 0 && n_inside > 0) return CellClass::Straddles;
  for (const auto& inc : dom.inclusions) {
    const int m = inc.poly.size();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        if (detail::proper_crossing(cell.v[i], cell.v[(i + 1) % n], inc.poly.v[j],
                                    inc.poly.v[(j + 1) % m], tol))
          return CellClass::Straddles;
    // an inclusion swallowed whole by the cell
    for (const Vec2& p : inc.poly.v)
      if (point_in_polygon(cell, p, 0.0) && inside_depth_convex(cell, p) > tol)
        return CellClass::Straddles;
  }
  if (n_inside == n && n > 0) return CellClass::FullyInclusion;
  (void)inside_k;
  return CellClass::FullyMatrix;
}

struct Interval {
  Real a = 0.0, b = 0.0;
};

inline CellClass classify_cell(const DomainSpec<1>& dom, const Interval& cell,
                               Real tol = -1.0) {
  if (tol < 0.0) tol = dom.tol();
  for (const auto& inc : dom.inclusions) {
    const Real lo = std::max(cell.a, inc.a), hi = std::min(cell.b, inc.b);
    const Real overlap = hi - lo;
    if (overlap <= tol) continue;
    if (overlap >= (cell.b - cell.a) - tol) return CellClass::FullyInclusion;
    return CellClass::Straddles;
  }
  return CellClass::FullyMatrix;
}

}  // namespace qce::geom
