// qce-rkpm: embedded discretization pipeline (conforming foreground cells,
// background grid with local quadtree subdivision, overlap removal, volume
// recovery, interface-node sharing, contour quadrature pieces).
// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qce/geometry.hpp"
#include "qce/quadrature.hpp"
#include "qce/rk.hpp"

namespace qce::disc {

// ---------------------------------------------------------------------------
// edge tags inside cell polygons
// ---------------------------------------------------------------------------
// -1: interior edge; -2-s: outer boundary side s; >= 0: interface edge with
// inclusion k = tag >> 20 and polyline segment j = tag & 0xFFFFF.

constexpr int kTagInterior = -1;
inline int outer_tag(int side) { return -2 - side; }
inline bool is_outer_tag(int tag) { return tag <= -2; }
inline int outer_side(int tag) { return -2 - tag; }
inline int interface_tag(int inclusion, int segment) {
  return (inclusion << 20) | segment;
}
inline bool is_interface_tag(int tag) { return tag >= 0; }
inline int interface_inclusion(int tag) { return tag >> 20; }
inline int interface_segment(int tag) { return tag & 0xFFFFF; }

enum class CellOrigin : std::uint8_t {
  ForegroundVoronoi = 0,
  BackgroundGrid = 1,
  QuadtreeRefined = 2,
  VolumeRecovery = 3,
};

template <int Dim>
struct BQPoint {
  Vec<Dim> x = Vec<Dim>::Zero();
  Vec<Dim> n = Vec<Dim>::Zero();  // outward unit normal
  Real w = 0.0;                   // boundary measure weight
};

template <int Dim>
struct SmoothingCell {
  int owner = -1;
  int subdomain = kMatrix;
  CellOrigin origin = CellOrigin::BackgroundGrid;
  int level = 0;
  Real V = 0.0;
  Vec<Dim> M2 = Vec<Dim>::Zero();  // second moments about the owner node
  std::vector<BQPoint<Dim>> bq;
  bool conforming = false;
  geom::TaggedPolygon poly;  // 2D payload
  Real a = 0.0, b = 0.0;     // 1D payload
};

template <int Dim>
struct InterfacePiece;

template <>
struct InterfacePiece<2> {
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();
  Vec2 nplus = Vec2::Zero();  // outward from the inclusion into the matrix
  int inclusion = 0;
  int segment = 0;
  int owner = -1;  // foreground interface node whose cell contributed the edge
};

template <>
struct InterfacePiece<1> {
  Real x = 0.0;
  Real nplus = 0.0;
  int inclusion = 0;
  int segment = 0;
  int owner = -1;
};

template <int Dim>
struct OuterPiece;

template <>
struct OuterPiece<2> {
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();
  Vec2 n = Vec2::Zero();
  int side = 0;  // 0: x=lo.x, 1: x=hi.x, 2: y=lo.y, 3: y=hi.y
};

template <>
struct OuterPiece<1> {
  Real x = 0.0;
  Real n = 0.0;
  int side = 0;
};

struct EmbedParams {
  Real k_round = 0.5;      // rounding threshold for the spacing-ratio fraction
  Real band_factor = 1.5;  // refinement band, multiples of the interface spacing
  Real kernel_c = 2.0;
  Real merge_tol_factor = 1e-8;  // duplicate-node distance, times h_minus
  bool balance = true;           // enforce 2:1 level transitions
};

template <int Dim>
struct EmbeddedDiscretization {
  geom::DomainSpec<Dim> domain;
  rk::NodeCloud<Dim> cloud;
  std::vector<SmoothingCell<Dim>> cells;
  std::vector<InterfacePiece<Dim>> interface_pieces;
  std::vector<OuterPiece<Dim>> outer_pieces;
  EmbedParams params;

  Real h_minus = 0.0;
  std::vector<Real> h_plus;  // nominal foreground spacing per inclusion
  std::vector<Real> h_intf;  // realized interface spacing per inclusion
  std::vector<int> n_R;      // subdivision levels per inclusion

  // bookkeeping
  int removed_cells = 0;
  int removed_nodes = 0;
  int merged_nodes = 0;
  Real missing_volume = 0.0;  // matrix volume not covered by surviving bg cells
  bool recovery_applied = false;
  bool recovery_noop = false;
  int interface_node_count = 0;

  // node -> owning smoothing cell per subdomain side (-1: none)
  std::vector<int> cell_of_node_matrix;
  std::vector<int> cell_of_node_inclusion;

  Real matrix_volume() const;
  Real inclusion_volume(int k) const;
};

template <>
inline Real EmbeddedDiscretization<2>::matrix_volume() const {
  Real v = (domain.hi - domain.lo).prod();
  for (const auto& inc : domain.inclusions) v -= geom::polygon_area(inc.poly);
  return v;
}

template <>
inline Real EmbeddedDiscretization<1>::matrix_volume() const {
  Real v = domain.x1 - domain.x0;
  for (const auto& inc : domain.inclusions) v -= inc.b - inc.a;
  return v;
}

template <>
inline Real EmbeddedDiscretization<2>::inclusion_volume(int k) const {
  return geom::polygon_area(domain.inclusions[k].poly);
}

template <>
inline Real EmbeddedDiscretization<1>::inclusion_volume(int k) const {
  return domain.inclusions[k].b - domain.inclusions[k].a;
}

// ---------------------------------------------------------------------------
// subdivision level from the spacing ratio
// ---------------------------------------------------------------------------

inline int subdivision_level(Real h_minus, Real h_intf, Real k_round = 0.5) {
  if (h_minus <= 0.0 || h_intf <= 0.0)
    throw InvalidArgument("subdivision_level: spacings must be positive");
  const Real R = h_minus / h_intf;
  if (R <= 1.0) return 0;
  const Real fp_tol = 1e-9;
  const Real frac = R - std::floor(R);
  int Rp;
  if (frac >= k_round - fp_tol)
    Rp = static_cast<int>(std::floor(R)) + 1;
  else
    Rp = static_cast<int>(std::floor(R));
  if (Rp < 1) Rp = 1;
  return std::bit_width(static_cast<unsigned>(Rp)) - 1;
}

// ---------------------------------------------------------------------------
// foreground generation
// ---------------------------------------------------------------------------

template <int Dim>
struct Foreground;

template <>
struct Foreground<2> {
  std::vector<rk::Node<2>> nodes;  // local ids; center first, rings inside-out
  std::vector<int> interface_ids;  // into nodes, polyline (CCW) order
  geom::Polygon polyline;
  Real h_plus = 0.0;
  Real h_intf = 0.0;
  // Voronoi cell polygon per node; edge tags: kTagInterior or the polyline
  // segment index (inclusion id is attached later by embed)
  std::vector<geom::TaggedPolygon> cell_polys;
};

template <>
struct Foreground<1> {
  std::vector<rk::Node<1>> nodes;  // ascending
  std::vector<int> interface_ids;  // {0, n-1}
  Real x1 = 0.0, x2 = 0.0;
  Real h_plus = 0.0;
  Real h_intf = 0.0;
  std::vector<std::pair<Real, Real>> cell_intervals;
};

namespace detail {

// Voronoi cell of node i: clip the inclusion polygon by perpendicular
// bisectors against nearby nodes, expanding the candidate radius until no
// farther node can possibly cut the cell.
inline geom::TaggedPolygon voronoi_cell(const std::vector<Vec2>& pts, int i,
                                        const geom::TaggedPolygon& hull,
                                        const rk::NeighborGrid<2>& grid,
                                        Real h_seed) {
  geom::TaggedPolygon cell = hull;
  std::vector<int> cand;
  Real radius = 4.0 * h_seed;
  std::vector<char> used(pts.size(), 0);
  used[i] = 1;
  for (int expand = 0; expand < 32; ++expand) {
    grid.gather(pts[i], radius, cand);
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
      const Real da = (pts[a] - pts[i]).squaredNorm();
      const Real db = (pts[b] - pts[i]).squaredNorm();
      return da < db || (da == db && a < b);
    });
    for (int l : cand) {
      if (used[l]) continue;
      used[l] = 1;
      const Vec2 mid = 0.5 * (pts[i] + pts[l]);
      const Vec2 n = pts[i] - pts[l];
      cell = geom::clip_halfplane(cell, mid, n, kTagInterior);
      if (cell.size() == 0) return cell;
    }
    Real max_r = 0.0;
    for (const auto& v : cell.v) max_r = std::max(max_r, (v - pts[i]).norm());
    if (2.0 * max_r <= radius) break;
    radius *= 2.0;
  }
  return cell;
}

}  // namespace detail

// Circular inclusion: rings of nodes at spacing ~ h_plus, the outermost ring
// becoming the interface nodes/polyline, plus conforming Voronoi cells.
inline Foreground<2> generate_foreground(const Vec2& center, Real R, Real h_plus,
                                         Real kernel_c = 2.0) {
  if (R <= 0.0 || h_plus <= 0.0)
    throw InvalidArgument("generate_foreground: radius and spacing must be positive");
  Foreground<2> fg;
  fg.h_plus = h_plus;
  const int n_ring = std::max(1, static_cast<int>(std::round(R / h_plus)));
  const Real dr = R / n_ring;
  if (static_cast<int>(std::round(2.0 * M_PI * R / h_plus)) < 3)
    throw UnderResolvedInclusion(
        "generate_foreground: spacing too coarse to form an interface polygon");

  rk::Node<2> c;
  c.x = center;
  c.h = h_plus;
  c.a = kernel_c * h_plus;
  c.origin = rk::NodeOrigin::Foreground;
  fg.nodes.push_back(c);
  for (int k = 1; k <= n_ring; ++k) {
    const Real r = k * dr;
    const int m = std::max(3, static_cast<int>(std::round(2.0 * M_PI * r / h_plus)));
    for (int i = 0; i < m; ++i) {
      const Real th = 2.0 * M_PI * i / m;
      rk::Node<2> nd;
      nd.x = center + r * Vec2(std::cos(th), std::sin(th));
      nd.h = h_plus;
      nd.a = kernel_c * h_plus;
      nd.origin = rk::NodeOrigin::Foreground;
      if (k == n_ring) {
        nd.is_interface = true;
        nd.origin = rk::NodeOrigin::Interface;
        fg.interface_ids.push_back(static_cast<int>(fg.nodes.size()));
      }
      fg.nodes.push_back(nd);
    }
  }
  if (static_cast<int>(fg.nodes.size()) < 4)
    throw UnderResolvedInclusion("generate_foreground: fewer than 4 nodes for a 2D inclusion");

  for (int id : fg.interface_ids) fg.polyline.v.push_back(fg.nodes[id].x);
  fg.h_intf = geom::polygon_perimeter(fg.polyline) / fg.polyline.size();
  for (int id : fg.interface_ids) {
    fg.nodes[id].h = fg.h_intf;
    fg.nodes[id].a = kernel_c * fg.h_intf;
  }

  // conforming Voronoi tiling of the polyline polygon
  geom::TaggedPolygon hull;
  hull.v = fg.polyline.v;
  hull.tag.resize(hull.v.size());
  for (int j = 0; j < static_cast<int>(hull.v.size()); ++j) hull.tag[j] = j;
  std::vector<Vec2> pts;
  for (const auto& nd : fg.nodes) pts.push_back(nd.x);
  rk::NeighborGrid<2> grid;
  grid.build(pts, 2.0 * h_plus);
  fg.cell_polys.resize(fg.nodes.size());
  for (int i = 0; i < static_cast<int>(fg.nodes.size()); ++i) {
    fg.cell_polys[i] = detail::voronoi_cell(pts, i, hull, grid, h_plus);
    if (fg.cell_polys[i].size() < 3)
      throw DegenerateCell("generate_foreground: empty Voronoi cell for node " +
                           std::to_string(i));
  }
  return fg;
}

// 1D inclusion [x1, x2] with n_nodes equally spaced nodes.
inline Foreground<1> generate_foreground(Real x1, Real x2, int n_nodes,
                                         Real kernel_c = 2.0) {
  if (n_nodes < 3)
    throw UnderResolvedInclusion("generate_foreground: fewer than 3 nodes for a 1D inclusion");
  if (x2 <= x1) throw InvalidArgument("generate_foreground: empty interval");
  Foreground<1> fg;
  fg.x1 = x1;
  fg.x2 = x2;
  fg.h_plus = (x2 - x1) / (n_nodes - 1);
  fg.h_intf = fg.h_plus;
  for (int i = 0; i < n_nodes; ++i) {
    rk::Node<1> nd;
    nd.x = Vec1(x1 + i * fg.h_plus);
    nd.h = fg.h_plus;
    nd.a = kernel_c * fg.h_plus;
    nd.origin = rk::NodeOrigin::Foreground;
    if (i == 0 || i == n_nodes - 1) {
      nd.is_interface = true;
      nd.origin = rk::NodeOrigin::Interface;
      fg.interface_ids.push_back(i);
    }
    fg.nodes.push_back(nd);
    const Real a = std::max(x1, x1 + (i - 0.5) * fg.h_plus);
    const Real b = std::min(x2, x1 + (i + 0.5) * fg.h_plus);
    fg.cell_intervals.emplace_back(a, b);
  }
  return fg;
}

// ---------------------------------------------------------------------------
// background grid
// ---------------------------------------------------------------------------

template <int Dim>
struct Background;

template <>
struct Background<2> {
  Vec2 lo = Vec2::Zero(), hi = Vec2::Ones();
  Real h = 0.1;
  int nx = 0, ny = 0;
};

template <>
struct Background<1> {
  Real x0 = 0.0, x3 = 1.0;
  Real h = 0.1;
  int n = 0;
};

inline Background<2> generate_background(const Vec2& lo, const Vec2& hi, Real h) {
  Background<2> bg;
  bg.lo = lo;
  bg.hi = hi;
  bg.h = h;
  const Real w = hi.x() - lo.x(), ht = hi.y() - lo.y();
  bg.nx = static_cast<int>(std::round(w / h));
  bg.ny = static_cast<int>(std::round(ht / h));
  if (bg.nx < 1 || bg.ny < 1 || std::abs(bg.nx * h - w) > 1e-9 * std::max(w, 1.0) ||
      std::abs(bg.ny * h - ht) > 1e-9 * std::max(ht, 1.0))
    throw GridMismatch("generate_background: spacing does not tile the rectangle");
  return bg;
}

inline Background<1> generate_background(Real x0, Real x3, Real h) {
  Background<1> bg;
  bg.x0 = x0;
  bg.x3 = x3;
  bg.h = h;
  bg.n = static_cast<int>(std::round((x3 - x0) / h));
  if (bg.n < 1 || std::abs(bg.n * h - (x3 - x0)) > 1e-9 * std::max(x3 - x0, 1.0))
    throw GridMismatch("generate_background: spacing does not tile the bar");
  return bg;
}

// ---------------------------------------------------------------------------
// embed pipeline internals
// ---------------------------------------------------------------------------

namespace detail {

// Background leaf cell in exact integer quadtree coordinates: root cell
// (gi, gj), refinement level, position (ix, iy) within the root at that level.
struct Leaf2 {
  int gi = 0, gj = 0;
  int level = 0;
  int ix = 0, iy = 0;
  bool cell_alive = true;
  bool node_alive = true;

  std::array<std::int64_t, 4> fine_span(int L) const {
    const std::int64_t side = std::int64_t(1) << (L - level);
    const std::int64_t x0 = (std::int64_t(gi) << L) + ix * side;
    const std::int64_t y0 = (std::int64_t(gj) << L) + iy * side;
    return {x0, y0, x0 + side, y0 + side};
  }
};

struct Leaf1 {
  int gi = 0;
  int level = 0;
  int ix = 0;
  bool cell_alive = true;
  bool node_alive = true;

  std::array<std::int64_t, 2> fine_span(int L) const {
    const std::int64_t side = std::int64_t(1) << (L - level);
    const std::int64_t x0 = (std::int64_t(gi) << L) + ix * side;
    return {x0, x0 + side};
  }
};

inline bool leaf_key_less(const Leaf2& a, const Leaf2& b) {
  return std::tie(a.gj, a.gi, a.level, a.iy, a.ix) <
         std::tie(b.gj, b.gi, b.level, b.iy, b.ix);
}

inline bool leaf_key_less(const Leaf1& a, const Leaf1& b) {
  return std::tie(a.gi, a.level, a.ix) < std::tie(b.gi, b.level, b.ix);
}

inline Vec2 leaf_lo(const Background<2>& bg, const Leaf2& c) {
  const Real inv = std::ldexp(1.0, -c.level);
  return Vec2(bg.lo.x() + bg.h * (c.gi + c.ix * inv),
              bg.lo.y() + bg.h * (c.gj + c.iy * inv));
}

inline Real leaf_size(Real h, int level) { return h * std::ldexp(1.0, -level); }

inline geom::Polygon leaf_polygon(const Background<2>& bg, const Leaf2& c) {
  const Vec2 lo = leaf_lo(bg, c);
  const Real s = leaf_size(bg.h, c.level);
  geom::Polygon p;
  p.v = {lo, lo + Vec2(s, 0), lo + Vec2(s, s), lo + Vec2(0, s)};
  return p;
}

inline Vec2 leaf_center(const Background<2>& bg, const Leaf2& c) {
  const Real s = leaf_size(bg.h, c.level);
  return leaf_lo(bg, c) + Vec2(0.5 * s, 0.5 * s);
}

inline Real leaf_lo(const Background<1>& bg, const Leaf1& c) {
  const Real inv = std::ldexp(1.0, -c.level);
  return bg.x0 + bg.h * (c.gi + c.ix * inv);
}

inline Real leaf_center(const Background<1>& bg, const Leaf1& c) {
  return leaf_lo(bg, c) + 0.5 * leaf_size(bg.h, c.level);
}

inline Real dist_to_polyline(const geom::Polygon& poly, const Vec2& p) {
  return (p - geom::closest_point_on_polyline(poly, p)).norm();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// embed: 2D
// ---------------------------------------------------------------------------

inline EmbeddedDiscretization<2> embed(const Background<2>& bg,
                                       std::vector<Foreground<2>> fgs,
                                       const EmbedParams& params = {}) {
  using detail::Leaf2;
  EmbeddedDiscretization<2> D;
  D.params = params;
  D.h_minus = bg.h;
  D.domain.lo = bg.lo;
  D.domain.hi = bg.hi;
  for (auto& fg : fgs) {
    D.domain.add_inclusion(fg.polyline);
    D.h_plus.push_back(fg.h_plus);
    D.h_intf.push_back(fg.h_intf);
    D.n_R.push_back(subdivision_level(bg.h, fg.h_intf, params.k_round));
  }
  const auto& dom = D.domain;
  const Real tol = dom.tol();
  const int n_inc = static_cast<int>(fgs.size());

  // --- background quadtree: removal and subdivision sweeps -----------------
  std::vector<Leaf2> leaves;
  leaves.reserve(bg.nx * bg.ny);
  for (int j = 0; j < bg.ny; ++j)
    for (int i = 0; i < bg.nx; ++i) leaves.push_back(Leaf2{i, j, 0, 0, 0});

  auto inside_sweep = [&](Leaf2& c) {
    // Stage 1 of the embedding sweep: drop nodes and cells wholly inside an inclusion
    if (!c.cell_alive && !c.node_alive) return;
    const geom::Polygon rect = detail::leaf_polygon(bg, c);
    if (c.node_alive) {
      const auto pc = geom::classify(dom, detail::leaf_center(bg, c));
      if (pc.region == Region::Inclusion) {
        c.node_alive = false;
        ++D.removed_nodes;
      }
    }
    if (c.cell_alive &&
        geom::classify_cell(dom, rect, tol) == geom::CellClass::FullyInclusion) {
      c.cell_alive = false;
      ++D.removed_cells;
    }
  };
  for (auto& c : leaves) inside_sweep(c);

  auto straddles_inclusion = [&](const Leaf2& c, int k) {
    geom::DomainSpec<2> one;
    one.lo = dom.lo;
    one.hi = dom.hi;
    one.inclusions.push_back(dom.inclusions[k]);
    return geom::classify_cell(one, detail::leaf_polygon(bg, c), tol) ==
           geom::CellClass::Straddles;
  };

  auto split_leaf = [&](std::vector<Leaf2>& out, const Leaf2& c) {
    for (int sy = 0; sy < 2; ++sy)
      for (int sx = 0; sx < 2; ++sx) {
        Leaf2 ch{c.gi, c.gj, c.level + 1, 2 * c.ix + sx, 2 * c.iy + sy};
        inside_sweep(ch);
        out.push_back(ch);
      }
  };

  const int max_nR =
      n_inc ? *std::max_element(D.n_R.begin(), D.n_R.end()) : 0;
  for (int pass = 0; pass < max_nR; ++pass) {
    std::vector<Leaf2> next;
    next.reserve(leaves.size());
    for (const Leaf2& c : leaves) {
      bool refine = false;
      if ((c.cell_alive || c.node_alive) && c.level == pass) {
        for (int k = 0; k < n_inc && !refine; ++k) {
          if (D.n_R[k] < pass + 1) continue;
          const bool strad = straddles_inclusion(c, k);
          if (pass == 0) {
            const Real d =
                detail::dist_to_polyline(dom.inclusions[k].poly, detail::leaf_center(bg, c));
            refine = strad || d <= params.band_factor * fgs[k].h_intf;
          } else {
            refine = strad;
          }
        }
      }
      if (refine)
        split_leaf(next, c);
      else
        next.push_back(c);
    }
    leaves.swap(next);
  }

  // 2:1 balancing so refined bands fade out one level per cell
  if (params.balance && max_nR >= 1) {
    bool changed = true;
    while (changed) {
      changed = false;
      int L = 0;
      for (const auto& c : leaves)
        if (c.cell_alive || c.node_alive) L = std::max(L, c.level);
      // bucket leaves by root cell: adjacency only reaches neighbor roots
      std::map<std::pair<int, int>, std::vector<int>> by_root;
      for (size_t i = 0; i < leaves.size(); ++i)
        if (leaves[i].cell_alive || leaves[i].node_alive)
          by_root[{leaves[i].gi, leaves[i].gj}].push_back(static_cast<int>(i));
      std::vector<char> split_flag(leaves.size(), 0);
      auto adjacent_finer = [&](const Leaf2& a, const Leaf2& b, int Lm) {
        if (b.level <= a.level + 1) return false;
        const auto sa = a.fine_span(Lm);
        const auto sb = b.fine_span(Lm);
        const bool touch_x = sa[2] == sb[0] || sb[2] == sa[0];
        const bool touch_y = sa[3] == sb[1] || sb[3] == sa[1];
        const bool overlap_x = std::min(sa[2], sb[2]) > std::max(sa[0], sb[0]);
        const bool overlap_y = std::min(sa[3], sb[3]) > std::max(sa[1], sb[1]);
        return (touch_x && overlap_y) || (touch_y && overlap_x);
      };
      for (const auto& [root, ids] : by_root) {
        for (int i : ids) {
          if (split_flag[i]) continue;
          bool split = false;
          for (int dj = -1; dj <= 1 && !split; ++dj)
            for (int di = -1; di <= 1 && !split; ++di) {
              auto it = by_root.find({root.first + di, root.second + dj});
              if (it == by_root.end()) continue;
              for (int j : it->second)
                if (adjacent_finer(leaves[i], leaves[j], L)) {
                  split = true;
                  break;
                }
            }
          if (split) {
            split_flag[i] = 1;
            changed = true;
          }
        }
      }
      if (!changed) break;
      std::vector<Leaf2> next;
      next.reserve(leaves.size());
      for (size_t i = 0; i < leaves.size(); ++i) {
        if (split_flag[i])
          split_leaf(next, leaves[i]);
        else
          next.push_back(leaves[i]);
      }
      leaves.swap(next);
    }
  }

  std::sort(leaves.begin(), leaves.end(),
            [](const Leaf2& a, const Leaf2& b) { return detail::leaf_key_less(a, b); });

  // Final embedding stage: drop cells whose boundary quadrature reaches an overlap
  const auto& g2 = quad::segment2();
  auto bq_inside_overlap = [&](const Leaf2& c) {
    const geom::Polygon rect = detail::leaf_polygon(bg, c);
    for (int e = 0; e < 4; ++e) {
      const Vec2 a = rect.v[e], b2 = rect.v[(e + 1) % 4];
      for (int q = 0; q < 2; ++q) {
        const Vec2 x = a + 0.5 * (g2.x[q] + 1.0) * (b2 - a);
        if (geom::classify(dom, x).region == Region::Inclusion) return true;
      }
    }
    return false;
  };
  for (auto& c : leaves) {
    if (c.cell_alive && bq_inside_overlap(c)) {
      c.cell_alive = false;
      ++D.removed_cells;
    }
    if (c.cell_alive && !c.node_alive) {
      // never keep an ownerless cell (sliver passed between quadrature points)
      c.cell_alive = false;
      ++D.removed_cells;
    }
  }

  // --- merge node clouds ----------------------------------------------------
  std::vector<int> fg_offset(n_inc, 0);
  for (int k = 0; k < n_inc; ++k) {
    fg_offset[k] = D.cloud.size();
    for (auto nd : fgs[k].nodes) {
      nd.inclusion = k;
      nd.in_matrix = false;
      D.cloud.nodes.push_back(nd);
    }
  }

  rk::NeighborGrid<2> fg_grid;
  std::vector<Vec2> fg_pts;
  Vec2 fg_lo = Vec2::Constant(1e300), fg_hi = Vec2::Constant(-1e300);
  for (const auto& nd : D.cloud.nodes) {
    fg_pts.push_back(nd.x);
    fg_lo = fg_lo.cwiseMin(nd.x);
    fg_hi = fg_hi.cwiseMax(nd.x);
  }
  fg_grid.build(fg_pts, std::max(D.h_minus, 1e-12));
  const Real merge_tol = params.merge_tol_factor * D.h_minus;

  std::vector<int> leaf_node_id(leaves.size(), -1);
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].node_alive) continue;
    const Vec2 x = detail::leaf_center(bg, leaves[i]);
    int near = -1;
    if (!fg_pts.empty() && (x.array() >= fg_lo.array() - merge_tol).all() &&
        (x.array() <= fg_hi.array() + merge_tol).all())
      near = fg_grid.nearest(x, [](int) { return true; });
    if (near >= 0 && (fg_pts[near] - x).norm() <= merge_tol) {
      // duplicate node: keep the foreground record, grant it matrix membership
      D.cloud.nodes[near].in_matrix = true;
      leaf_node_id[i] = near;
      ++D.merged_nodes;
      continue;
    }
    rk::Node<2> nd;
    nd.x = x;
    nd.h = detail::leaf_size(bg.h, leaves[i].level);
    nd.a = params.kernel_c * nd.h;
    nd.in_matrix = true;
    nd.origin = leaves[i].level > 0 ? rk::NodeOrigin::BackgroundRefined
                                    : rk::NodeOrigin::Background;
    leaf_node_id[i] = D.cloud.size();
    D.cloud.nodes.push_back(nd);
  }

  // --- smoothing cells -------------------------------------------------------
  auto push_polygon_cell = [&](int owner, int subdomain, CellOrigin origin, int level,
                               geom::TaggedPolygon poly, bool conforming) {
    SmoothingCell<2> cell;
    cell.owner = owner;
    cell.subdomain = subdomain;
    cell.origin = origin;
    cell.level = level;
    cell.conforming = conforming;
    const auto props =
        geom::polygon_properties(geom::Polygon{poly.v}, D.cloud.nodes[owner].x);
    cell.V = props.area;
    cell.M2 = Vec2(props.Mx, props.My);
    const int ne = poly.size();
    for (int e = 0; e < ne; ++e) {
      const Vec2 a = poly.v[e], b2 = poly.v[(e + 1) % ne];
      const Real len = (b2 - a).norm();
      if (len <= 0.0) continue;
      const Vec2 n = Vec2((b2 - a).y(), -(b2 - a).x()) / len;
      for (int q = 0; q < 2; ++q) {
        BQPoint<2> p;
        p.x = a + 0.5 * (g2.x[q] + 1.0) * (b2 - a);
        p.n = n;
        p.w = 0.5 * len;
        cell.bq.push_back(p);
      }
    }
    cell.poly = std::move(poly);
    D.cells.push_back(std::move(cell));
  };

  for (int k = 0; k < n_inc; ++k) {
    for (int i = 0; i < static_cast<int>(fgs[k].nodes.size()); ++i) {
      geom::TaggedPolygon poly = fgs[k].cell_polys[i];
      for (auto& t : poly.tag)
        if (t >= 0) t = interface_tag(k, t);
      push_polygon_cell(fg_offset[k] + i, k, CellOrigin::ForegroundVoronoi, 0,
                        std::move(poly), true);
    }
  }

  for (size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].cell_alive) continue;
    const geom::Polygon rect = detail::leaf_polygon(bg, leaves[i]);
    geom::TaggedPolygon poly;
    poly.v = rect.v;
    poly.tag.assign(4, kTagInterior);
    const Real btol = 1e-9 * D.h_minus;
    // bottom, right, top, left edges of the CCW rect
    if (std::abs(rect.v[0].y() - bg.lo.y()) < btol) poly.tag[0] = outer_tag(2);
    if (std::abs(rect.v[1].x() - bg.hi.x()) < btol) poly.tag[1] = outer_tag(1);
    if (std::abs(rect.v[2].y() - bg.hi.y()) < btol) poly.tag[2] = outer_tag(3);
    if (std::abs(rect.v[3].x() - bg.lo.x()) < btol) poly.tag[3] = outer_tag(0);
    push_polygon_cell(leaf_node_id[i], kMatrix,
                      leaves[i].level > 0 ? CellOrigin::QuadtreeRefined
                                          : CellOrigin::BackgroundGrid,
                      leaves[i].level, std::move(poly), false);
    // exact quadtree volume (power-of-two scaling keeps sums exact)
    D.cells.back().V = bg.h * bg.h * std::ldexp(1.0, -2 * leaves[i].level);
  }

  // --- canonical interface pieces -------------------------------------------
  for (const auto& cell : D.cells) {
    if (cell.subdomain == kMatrix) continue;
    const int ne = cell.poly.size();
    for (int e = 0; e < ne; ++e) {
      const int t = cell.poly.tag[e];
      if (!is_interface_tag(t)) continue;
      InterfacePiece<2> piece;
      piece.inclusion = interface_inclusion(t);
      piece.segment = interface_segment(t);
      piece.owner = cell.owner;
      const geom::Polygon& poly = D.domain.inclusions[piece.inclusion].poly;
      const Vec2 s0 = poly.v[piece.segment];
      const Vec2 s1 = poly.v[(piece.segment + 1) % poly.size()];
      const Vec2 dir = s1 - s0;
      Vec2 a = cell.poly.v[e], b2 = cell.poly.v[(e + 1) % ne];
      if ((b2 - a).dot(dir) < 0.0) std::swap(a, b2);
      piece.a = a;
      piece.b = b2;
      piece.nplus = Vec2(dir.y(), -dir.x()).normalized();
      D.interface_pieces.push_back(piece);
    }
  }
  std::sort(D.interface_pieces.begin(), D.interface_pieces.end(),
            [&](const InterfacePiece<2>& p, const InterfacePiece<2>& q) {
              if (p.inclusion != q.inclusion) return p.inclusion < q.inclusion;
              if (p.segment != q.segment) return p.segment < q.segment;
              const Vec2 s0 = D.domain.inclusions[p.inclusion].poly.v[p.segment];
              return (0.5 * (p.a + p.b) - s0).norm() < (0.5 * (q.a + q.b) - s0).norm();
            });

  // --- outer boundary pieces --------------------------------------------------
  {
    struct Span {
      Real a, b;
    };
    std::array<std::vector<Span>, 4> covered;
    for (const auto& cell : D.cells) {
      if (cell.subdomain != kMatrix) continue;
      const int ne = cell.poly.size();
      for (int e = 0; e < ne; ++e) {
        if (!is_outer_tag(cell.poly.tag[e])) continue;
        const int side = outer_side(cell.poly.tag[e]);
        const Vec2 a = cell.poly.v[e], b2 = cell.poly.v[(e + 1) % ne];
        const int axis = side < 2 ? 1 : 0;  // tangential coordinate
        covered[side].push_back({std::min(a(axis), b2(axis)), std::max(a(axis), b2(axis))});
        OuterPiece<2> piece;
        piece.a = a;
        piece.b = b2;
        piece.side = side;
        piece.n = side == 0   ? Vec2(-1, 0)
                  : side == 1 ? Vec2(1, 0)
                  : side == 2 ? Vec2(0, -1)
                              : Vec2(0, 1);
        D.outer_pieces.push_back(piece);
      }
    }
    // fill gaps where boundary cells were removed
    for (int side = 0; side < 4; ++side) {
      const int axis = side < 2 ? 1 : 0;
      const Real t0 = axis == 0 ? bg.lo.x() : bg.lo.y();
      const Real t1 = axis == 0 ? bg.hi.x() : bg.hi.y();
      auto& spans = covered[side];
      std::sort(spans.begin(), spans.end(),
                [](const Span& a, const Span& b) { return a.a < b.a; });
      Real cursor = t0;
      auto emit_gap = [&](Real a, Real b) {
        if (b - a <= 1e-9 * D.h_minus) return;
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / D.h_minus)));
        for (int i = 0; i < pieces; ++i) {
          const Real pa = a + (b - a) * i / pieces;
          const Real pb = a + (b - a) * (i + 1) / pieces;
          OuterPiece<2> piece;
          piece.side = side;
          piece.n = side == 0   ? Vec2(-1, 0)
                    : side == 1 ? Vec2(1, 0)
                    : side == 2 ? Vec2(0, -1)
                                : Vec2(0, 1);
          const Real fixed = side == 0   ? bg.lo.x()
                             : side == 1 ? bg.hi.x()
                             : side == 2 ? bg.lo.y()
                                         : bg.hi.y();
          if (axis == 1) {
            piece.a = Vec2(fixed, pa);
            piece.b = Vec2(fixed, pb);
          } else {
            piece.a = Vec2(pa, fixed);
            piece.b = Vec2(pb, fixed);
          }
          D.outer_pieces.push_back(piece);
        }
      };
      for (const Span& s : spans) {
        if (s.a > cursor) emit_gap(cursor, s.a);
        cursor = std::max(cursor, s.b);
      }
      if (cursor < t1) emit_gap(cursor, t1);
    }
    std::sort(D.outer_pieces.begin(), D.outer_pieces.end(),
              [](const OuterPiece<2>& p, const OuterPiece<2>& q) {
                if (p.side != q.side) return p.side < q.side;
                const int axis = p.side < 2 ? 1 : 0;
                return 0.5 * (p.a(axis) + p.b(axis)) < 0.5 * (q.a(axis) + q.b(axis));
              });
  }

  // --- bookkeeping and maps ---------------------------------------------------
  Real bg_vol = 0.0;
  for (const auto& cell : D.cells)
    if (cell.subdomain == kMatrix) bg_vol += cell.V;
  D.missing_volume = D.matrix_volume() - bg_vol;

  D.cell_of_node_matrix.assign(D.cloud.size(), -1);
  D.cell_of_node_inclusion.assign(D.cloud.size(), -1);
  for (int ci = 0; ci < static_cast<int>(D.cells.size()); ++ci) {
    const auto& cell = D.cells[ci];
    if (cell.subdomain == kMatrix) {
      D.cell_of_node_matrix[cell.owner] = ci;
      D.cloud.nodes[cell.owner].cell_matrix = true;
    } else {
      D.cell_of_node_inclusion[cell.owner] = ci;
      D.cloud.nodes[cell.owner].cell_inclusion = true;
    }
  }
  for (const auto& nd : D.cloud.nodes)
    if (nd.is_interface) ++D.interface_node_count;
  return D;
}

// ---------------------------------------------------------------------------
// embed: 1D
// ---------------------------------------------------------------------------

inline EmbeddedDiscretization<1> embed(const Background<1>& bg,
                                       std::vector<Foreground<1>> fgs,
                                       const EmbedParams& params = {}) {
  using detail::Leaf1;
  EmbeddedDiscretization<1> D;
  D.params = params;
  D.h_minus = bg.h;
  D.domain.x0 = bg.x0;
  D.domain.x1 = bg.x3;
  for (auto& fg : fgs) {
    D.domain.inclusions.push_back({fg.x1, fg.x2});
    D.h_plus.push_back(fg.h_plus);
    D.h_intf.push_back(fg.h_intf);
    D.n_R.push_back(subdivision_level(bg.h, fg.h_intf, params.k_round));
  }
  const auto& dom = D.domain;
  const Real tol = dom.tol();
  const int n_inc = static_cast<int>(fgs.size());

  std::vector<Leaf1> leaves;
  for (int i = 0; i < bg.n; ++i) leaves.push_back(Leaf1{i, 0, 0});

  auto leaf_interval = [&](const Leaf1& c) {
    const Real a = detail::leaf_lo(bg, c);
    return geom::Interval{a, a + detail::leaf_size(bg.h, c.level)};
  };
  auto inside_sweep = [&](Leaf1& c) {
    if (c.node_alive) {
      const auto pc = geom::classify(dom, Vec1(detail::leaf_center(bg, c)));
      if (pc.region == Region::Inclusion) {
        c.node_alive = false;
        ++D.removed_nodes;
      }
    }
    if (c.cell_alive &&
        geom::classify_cell(dom, leaf_interval(c), tol) == geom::CellClass::FullyInclusion) {
      c.cell_alive = false;
      ++D.removed_cells;
    }
  };
  for (auto& c : leaves) inside_sweep(c);

  auto straddles_any = [&](const Leaf1& c, int pass) {
    const auto iv = leaf_interval(c);
    for (int k = 0; k < n_inc; ++k) {
      if (D.n_R[k] < pass + 1) continue;
      geom::DomainSpec<1> one;
      one.x0 = dom.x0;
      one.x1 = dom.x1;
      one.inclusions.push_back(dom.inclusions[k]);
      const bool strad =
          geom::classify_cell(one, iv, tol) == geom::CellClass::Straddles;
      if (pass == 0) {
        const Real c0 = 0.5 * (iv.a + iv.b);
        const Real d = std::min(std::abs(c0 - dom.inclusions[k].a),
                                std::abs(c0 - dom.inclusions[k].b));
        if (strad || d <= params.band_factor * fgs[k].h_intf) return true;
      } else if (strad) {
        return true;
      }
    }
    return false;
  };

  auto split_leaf = [&](std::vector<Leaf1>& out, const Leaf1& c) {
    for (int s = 0; s < 2; ++s) {
      Leaf1 ch{c.gi, c.level + 1, 2 * c.ix + s};
      inside_sweep(ch);
      out.push_back(ch);
    }
  };

  const int max_nR = n_inc ? *std::max_element(D.n_R.begin(), D.n_R.end()) : 0;
  for (int pass = 0; pass < max_nR; ++pass) {
    std::vector<Leaf1> next;
    for (const Leaf1& c : leaves) {
      if ((c.cell_alive || c.node_alive) && c.level == pass && straddles_any(c, pass))
        split_leaf(next, c);
      else
        next.push_back(c);
    }
    leaves.swap(next);
  }

  if (params.balance && max_nR >= 1) {
    bool changed = true;
    while (changed) {
      changed = false;
      int L = 0;
      for (const auto& c : leaves)
        if (c.cell_alive || c.node_alive) L = std::max(L, c.level);
      std::vector<char> split_flag(leaves.size(), 0);
      for (size_t i = 0; i < leaves.size(); ++i) {
        const auto& a = leaves[i];
        if (!(a.cell_alive || a.node_alive)) continue;
        const auto sa = a.fine_span(L);
        for (size_t j = 0; j < leaves.size(); ++j) {
          const auto& b = leaves[j];
          if (!(b.cell_alive || b.node_alive) || b.level <= a.level + 1) continue;
          const auto sb = b.fine_span(L);
          if (sa[1] == sb[0] || sb[1] == sa[0]) {
            split_flag[i] = 1;
            changed = true;
            break;
          }
        }
      }
      std::vector<Leaf1> next;
      for (size_t i = 0; i < leaves.size(); ++i) {
        if (split_flag[i])
          split_leaf(next, leaves[i]);
        else
          next.push_back(leaves[i]);
      }
      leaves.swap(next);
    }
  }

  std::sort(leaves.begin(), leaves.end(),
            [](const Leaf1& a, const Leaf1& b) { return detail::leaf_key_less(a, b); });

  for (auto& c : leaves) {
    if (!c.cell_alive) continue;
    const auto iv = leaf_interval(c);
    bool bad = false;
    for (Real x : {iv.a, iv.b})
      if (geom::classify(dom, Vec1(x)).region == Region::Inclusion) bad = true;
    if (bad || !c.node_alive) {
      c.cell_alive = false;
      ++D.removed_cells;
    }
  }

  // merge clouds
  std::vector<int> fg_offset(n_inc, 0);
  for (int k = 0; k < n_inc; ++k) {
    fg_offset[k] = D.cloud.size();
    for (auto nd : fgs[k].nodes) {
      nd.inclusion = k;
      nd.in_matrix = false;
      D.cloud.nodes.push_back(nd);
    }
  }
  const Real merge_tol = params.merge_tol_factor * D.h_minus;
  std::vector<int> leaf_node_id(leaves.size(), -1);
  const int n_fg_nodes = D.cloud.size();
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].node_alive) continue;
    const Real x = detail::leaf_center(bg, leaves[i]);
    int near = -1;
    for (int f = 0; f < n_fg_nodes; ++f)
      if (std::abs(D.cloud.nodes[f].x(0) - x) <= merge_tol) near = f;
    if (near >= 0) {
      D.cloud.nodes[near].in_matrix = true;
      leaf_node_id[i] = near;
      ++D.merged_nodes;
      continue;
    }
    rk::Node<1> nd;
    nd.x = Vec1(x);
    nd.h = detail::leaf_size(bg.h, leaves[i].level);
    nd.a = params.kernel_c * nd.h;
    nd.in_matrix = true;
    nd.origin = leaves[i].level > 0 ? rk::NodeOrigin::BackgroundRefined
                                    : rk::NodeOrigin::Background;
    leaf_node_id[i] = D.cloud.size();
    D.cloud.nodes.push_back(nd);
  }

  // smoothing cells
  auto push_interval_cell = [&](int owner, int subdomain, CellOrigin origin, int level,
                                Real a, Real b, bool conforming) {
    SmoothingCell<1> cell;
    cell.owner = owner;
    cell.subdomain = subdomain;
    cell.origin = origin;
    cell.level = level;
    cell.conforming = conforming;
    cell.a = a;
    cell.b = b;
    cell.V = b - a;
    const Real o = D.cloud.nodes[owner].x(0);
    cell.M2 = Vec1((std::pow(b - o, 3) - std::pow(a - o, 3)) / 3.0);
    cell.bq.push_back({Vec1(a), Vec1(-1.0), 1.0});
    cell.bq.push_back({Vec1(b), Vec1(1.0), 1.0});
    D.cells.push_back(std::move(cell));
  };

  for (int k = 0; k < n_inc; ++k)
    for (int i = 0; i < static_cast<int>(fgs[k].nodes.size()); ++i)
      push_interval_cell(fg_offset[k] + i, k, CellOrigin::ForegroundVoronoi, 0,
                         fgs[k].cell_intervals[i].first, fgs[k].cell_intervals[i].second,
                         true);
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].cell_alive) continue;
    const auto iv = leaf_interval(leaves[i]);
    push_interval_cell(leaf_node_id[i], kMatrix,
                       leaves[i].level > 0 ? CellOrigin::QuadtreeRefined
                                           : CellOrigin::BackgroundGrid,
                       leaves[i].level, iv.a, iv.b, false);
    D.cells.back().V = bg.h * std::ldexp(1.0, -leaves[i].level);
  }

  // interface pieces: one per inclusion endpoint, owned by the fg end nodes
  for (int k = 0; k < n_inc; ++k) {
    InterfacePiece<1> left;
    left.x = fgs[k].x1;
    left.nplus = -1.0;
    left.inclusion = k;
    left.segment = 0;
    left.owner = fg_offset[k] + fgs[k].interface_ids.front();
    D.interface_pieces.push_back(left);
    InterfacePiece<1> right;
    right.x = fgs[k].x2;
    right.nplus = 1.0;
    right.inclusion = k;
    right.segment = 1;
    right.owner = fg_offset[k] + fgs[k].interface_ids.back();
    D.interface_pieces.push_back(right);
  }
  D.outer_pieces.push_back({bg.x0, -1.0, 0});
  D.outer_pieces.push_back({bg.x3, 1.0, 1});

  Real bg_vol = 0.0;
  for (const auto& cell : D.cells)
    if (cell.subdomain == kMatrix) bg_vol += cell.V;
  D.missing_volume = D.matrix_volume() - bg_vol;

  D.cell_of_node_matrix.assign(D.cloud.size(), -1);
  D.cell_of_node_inclusion.assign(D.cloud.size(), -1);
  for (int ci = 0; ci < static_cast<int>(D.cells.size()); ++ci) {
    const auto& cell = D.cells[ci];
    if (cell.subdomain == kMatrix) {
      D.cell_of_node_matrix[cell.owner] = ci;
      D.cloud.nodes[cell.owner].cell_matrix = true;
    } else {
      D.cell_of_node_inclusion[cell.owner] = ci;
      D.cloud.nodes[cell.owner].cell_inclusion = true;
    }
  }
  for (const auto& nd : D.cloud.nodes)
    if (nd.is_interface) ++D.interface_node_count;
  return D;
}

// ---------------------------------------------------------------------------
// interface-node sharing and volume recovery
// ---------------------------------------------------------------------------

// Grants every interface node membership in the matrix subdomain as well, so
// one DOF block serves both sides of the interface.
template <int Dim>
inline void share_interface_nodes(EmbeddedDiscretization<Dim>& D) {
  for (auto& nd : D.cloud.nodes)
    if (nd.is_interface) nd.in_matrix = true;
}

// Equal-area square (interval) cells centered at the interface nodes restore
// the matrix volume removed together with the overlap cells.
template <int Dim>
inline void add_volume_recovery_cells(EmbeddedDiscretization<Dim>& D) {
  const Real missing = D.missing_volume;
  const Real vol_tol = 1e-12 * std::max(D.matrix_volume(), Real(1.0));
  std::vector<int> intf_nodes;
  for (int i = 0; i < D.cloud.size(); ++i)
    if (D.cloud.nodes[i].is_interface) intf_nodes.push_back(i);
  if (missing <= vol_tol || intf_nodes.empty()) {
    D.recovery_applied = true;
    D.recovery_noop = true;
    return;
  }
  const Real share = missing / intf_nodes.size();
  const auto& g2 = quad::segment2();
  for (int id : intf_nodes) {
    if (!D.cloud.nodes[id].in_matrix)
      throw InvalidLayout("add_volume_recovery_cells: interface nodes must be shared first");
    SmoothingCell<Dim> cell;
    cell.owner = id;
    cell.subdomain = kMatrix;
    cell.origin = CellOrigin::VolumeRecovery;
    cell.conforming = false;
    if constexpr (Dim == 2) {
      const Real s = std::sqrt(share);
      const Vec2 c = D.cloud.nodes[id].x;
      cell.poly.v = {c + Vec2(-s / 2, -s / 2), c + Vec2(s / 2, -s / 2),
                     c + Vec2(s / 2, s / 2), c + Vec2(-s / 2, s / 2)};
      cell.poly.tag.assign(4, kTagInterior);
      const auto props = geom::polygon_properties(geom::Polygon{cell.poly.v}, c);
      cell.V = props.area;
      cell.M2 = Vec2(props.Mx, props.My);
      for (int e = 0; e < 4; ++e) {
        const Vec2 a = cell.poly.v[e], b2 = cell.poly.v[(e + 1) % 4];
        const Real len = (b2 - a).norm();
        const Vec2 n = Vec2((b2 - a).y(), -(b2 - a).x()) / len;
        for (int q = 0; q < 2; ++q)
          cell.bq.push_back({a + 0.5 * (g2.x[q] + 1.0) * (b2 - a), n, 0.5 * len});
      }
    } else {
      const Real xc = D.cloud.nodes[id].x(0);
      cell.a = xc - share / 2;
      cell.b = xc + share / 2;
      cell.V = share;
      cell.M2 = Vec1(2.0 * std::pow(share / 2, 3) / 3.0);
      cell.bq.push_back({Vec1(cell.a), Vec1(-1.0), 1.0});
      cell.bq.push_back({Vec1(cell.b), Vec1(1.0), 1.0});
    }
    const int ci = static_cast<int>(D.cells.size());
    D.cells.push_back(std::move(cell));
    D.cell_of_node_matrix[id] = ci;
    D.cloud.nodes[id].cell_matrix = true;
  }
  D.recovery_applied = true;
}

// ---------------------------------------------------------------------------
// serialization (versioned plain text; stable field order, 17 digits)
// ---------------------------------------------------------------------------

namespace detail {

inline void fmt_real(std::string& out, Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

template <int Dim>
inline void fmt_vec(std::string& out, const Vec<Dim>& v) {
  for (int d = 0; d < Dim; ++d) {
    if (d) out += ' ';
    fmt_real(out, v(d));
  }
}

}  // namespace detail

template <int Dim>
inline std::string serialize(const EmbeddedDiscretization<Dim>& D) {
  std::string s;
  s.reserve(1 << 20);
  s += "qce-discretization v1\ndim " + std::to_string(Dim) + "\n";
  s += "h_minus ";
  detail::fmt_real(s, D.h_minus);
  s += "\ninclusions " + std::to_string(D.h_plus.size()) + "\n";
  for (size_t k = 0; k < D.h_plus.size(); ++k) {
    s += "  h_plus ";
    detail::fmt_real(s, D.h_plus[k]);
    s += " h_intf ";
    detail::fmt_real(s, D.h_intf[k]);
    s += " n_R " + std::to_string(D.n_R[k]) + "\n";
  }
  s += "nodes " + std::to_string(D.cloud.size()) + "\n";
  for (int i = 0; i < D.cloud.size(); ++i) {
    const auto& nd = D.cloud.nodes[i];
    s += std::to_string(i) + " ";
    detail::fmt_vec<Dim>(s, nd.x);
    s += " ";
    detail::fmt_real(s, nd.h);
    s += " ";
    detail::fmt_real(s, nd.a);
    s += " " + std::to_string(nd.in_matrix ? 1 : 0) + " " + std::to_string(nd.inclusion) +
         " " + std::to_string(nd.is_interface ? 1 : 0) + " " +
         std::to_string(static_cast<int>(nd.origin)) + "\n";
  }
  s += "cells " + std::to_string(D.cells.size()) + "\n";
  for (size_t c = 0; c < D.cells.size(); ++c) {
    const auto& cell = D.cells[c];
    s += std::to_string(c) + " owner " + std::to_string(cell.owner) + " sub " +
         std::to_string(cell.subdomain) + " origin " +
         std::to_string(static_cast<int>(cell.origin)) + " level " +
         std::to_string(cell.level) + " conforming " +
         std::to_string(cell.conforming ? 1 : 0) + " V ";
    detail::fmt_real(s, cell.V);
    s += " M2 ";
    detail::fmt_vec<Dim>(s, cell.M2);
    if constexpr (Dim == 2) {
      s += " verts " + std::to_string(cell.poly.size());
      for (int i = 0; i < cell.poly.size(); ++i) {
        s += " ";
        detail::fmt_vec<2>(s, cell.poly.v[i]);
        s += " " + std::to_string(cell.poly.tag[i]);
      }
    } else {
      s += " span ";
      detail::fmt_real(s, cell.a);
      s += " ";
      detail::fmt_real(s, cell.b);
    }
    s += "\n";
  }
  s += "interface_pieces " + std::to_string(D.interface_pieces.size()) + "\n";
  for (const auto& p : D.interface_pieces) {
    s += std::to_string(p.inclusion) + " " + std::to_string(p.segment) + " owner " +
         std::to_string(p.owner) + " ";
    if constexpr (Dim == 2) {
      detail::fmt_vec<2>(s, p.a);
      s += " ";
      detail::fmt_vec<2>(s, p.b);
      s += " n ";
      detail::fmt_vec<2>(s, p.nplus);
    } else {
      detail::fmt_real(s, p.x);
      s += " n ";
      detail::fmt_real(s, p.nplus);
    }
    s += "\n";
  }
  s += "outer_pieces " + std::to_string(D.outer_pieces.size()) + "\n";
  for (const auto& p : D.outer_pieces) {
    s += std::to_string(p.side) + " ";
    if constexpr (Dim == 2) {
      detail::fmt_vec<2>(s, p.a);
      s += " ";
      detail::fmt_vec<2>(s, p.b);
    } else {
      detail::fmt_real(s, p.x);
    }
    s += "\n";
  }
  s += "bookkeeping removed_cells " + std::to_string(D.removed_cells) +
       " removed_nodes " + std::to_string(D.removed_nodes) + " merged_nodes " +
       std::to_string(D.merged_nodes) + " missing_volume ";
  detail::fmt_real(s, D.missing_volume);
  s += " recovery " + std::to_string(D.recovery_applied ? 1 : 0) +
       (D.recovery_noop ? " (noop)" : "") + "\n";
  return s;
}

}  // namespace qce::disc
