// qce-rkpm: nodal-integration tables (smoothed gradients, integration
// constraint correction, gradient-smoothing stabilization).
// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qce/discretization.hpp"
#include "qce/rk.hpp"

namespace qce::integ {

template <int Dim>
struct CellEntry {
  int node = -1;
  Real psi = 0.0;                             // Psi_I at the owner node (direct nodal weight)
  Vec<Dim> grad_sm = Vec<Dim>::Zero();        // smoothed gradient
  Vec<Dim> grad_vc = Vec<Dim>::Zero();        // constraint-corrected gradient
  Eigen::Matrix<Real, Dim, Dim> nsni =        // (i,j): smoothing direction i of
      Eigen::Matrix<Real, Dim, Dim>::Zero();  // the j-th implicit derivative
  bool theta = false;                         // node covers the cell's node point
};

template <int Dim>
struct CellTable {
  std::vector<CellEntry<Dim>> entries;  // sorted by node id
  const CellEntry<Dim>* find(int node) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), node,
                               [](const CellEntry<Dim>& e, int n) { return e.node < n; });
    return (it != entries.end() && it->node == node) ? &*it : nullptr;
  }
};

struct PointEval {
  std::vector<int> ids;
  std::vector<Real> N;
};

enum class ContourKind { Outer = 0, Interface = 1 };

template <int Dim>
struct ContourPoint {
  Vec<Dim> x = Vec<Dim>::Zero();
  Vec<Dim> n = Vec<Dim>::Zero();  // outer: outward; interface: n-plus
  Real w = 0.0;
  ContourKind kind = ContourKind::Outer;
  int piece = -1;  // index into outer_pieces / interface_pieces
  PointEval matrix_side;
  PointEval inclusion_side;           // interface points only
  int nearest_cell_matrix = -1;       // smoothing cell supplying one-sided gradients
  int nearest_cell_inclusion = -1;
};

template <int Dim>
struct IntegrationTables {
  std::vector<CellTable<Dim>> cells;  // parallel to discretization cells
  std::vector<ContourPoint<Dim>> contour;
  // per subdomain tag (index tag+1) and node
  std::vector<std::vector<Real>> M;
  std::vector<std::vector<Vec<Dim>>> r;
  std::vector<std::vector<Vec<Dim>>> zeta;
  bool vc_applied = false;

  int tag_index(int tag) const { return tag + 1; }
};

struct TableOptions {
  bool with_nsni = true;
  bool apply_vc = true;
  int contour_gauss = 2;  // Gauss points per contour piece (dense for oracles)
};

namespace detail {

template <int Dim>
inline void store_eval(const rk::ShapeEval<Dim>& se, PointEval& out) {
  out.ids.assign(se.ids.begin(), se.ids.end());
  out.N.assign(se.N.begin(), se.N.end());
}

}  // namespace detail

template <int Dim>
IntegrationTables<Dim> build_tables(const disc::EmbeddedDiscretization<Dim>& D,
                                    const rk::RKEvaluator<Dim>& ev,
                                    const TableOptions& opt = {}) {
  IntegrationTables<Dim> T;
  const int n_tags = 1 + static_cast<int>(D.domain.inclusions.size());
  const int n_nodes = D.cloud.size();
  T.M.assign(n_tags, std::vector<Real>(n_nodes, 0.0));
  T.r.assign(n_tags, std::vector<Vec<Dim>>(n_nodes, Vec<Dim>::Zero()));
  T.zeta.assign(n_tags, std::vector<Vec<Dim>>(n_nodes, Vec<Dim>::Zero()));
  T.cells.resize(D.cells.size());

  rk::ShapeEval<Dim> se;

  // --- per-cell smoothing ---------------------------------------------------
  for (size_t ci = 0; ci < D.cells.size(); ++ci) {
    const auto& cell = D.cells[ci];
    auto& table = T.cells[ci];
    const int tag = cell.subdomain;
    const Vec<Dim> xL = D.cloud.nodes[cell.owner].x;

    // node point values (direct nodal weights) and coverage set
    ev.evaluate(xL, tag, rk::kValues, se);
    table.entries.reserve(se.size() + 8);
    for (int i = 0; i < se.size(); ++i) {
      CellEntry<Dim> e;
      e.node = se.ids[i];
      e.psi = se.N[i];
      e.theta = true;
      table.entries.push_back(e);
    }
    auto slot = [&](int node) -> CellEntry<Dim>& {
      for (auto& e : table.entries)
        if (e.node == node) return e;
      CellEntry<Dim> e;
      e.node = node;
      table.entries.push_back(e);
      return table.entries.back();
    };

    const unsigned want = opt.with_nsni ? (rk::kValues | rk::kImplicitGrad) : rk::kValues;
    for (const auto& q : cell.bq) {
      try {
        ev.evaluate(q.x, tag, want, se);
      } catch (const CoverageError& err) {
        throw CoverageError(std::string(err.what()) + " [smoothing cell " +
                            std::to_string(ci) + ", owner node " +
                            std::to_string(cell.owner) + "]");
      }
      for (int i = 0; i < se.size(); ++i) {
        auto& e = slot(se.ids[i]);
        e.grad_sm += (se.N[i] * q.w / cell.V) * q.n;
        if (opt.with_nsni)
          e.nsni += (q.w / cell.V) * q.n * se.igrad[i].transpose();
      }
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const CellEntry<Dim>& a, const CellEntry<Dim>& b) { return a.node < b.node; });

    const int ti = T.tag_index(tag);
    for (const auto& e : table.entries) {
      if (e.theta) T.M[ti][e.node] += cell.V;
      T.r[ti][e.node] -= e.grad_sm * cell.V;
    }
  }

  // --- contour evaluations (the same quadrature feeds the assembly) ---------
  const auto& rule = quad::cached_gauss_legendre(opt.contour_gauss);
  auto nearest_cell = [&](const Vec<Dim>& x, int tag) {
    const int node = ev.grid().nearest(x, [&](int id) {
      return D.cloud.nodes[id].member(tag) && D.cloud.nodes[id].has_cell(tag);
    });
    if (node < 0) return -1;
    return tag == kMatrix ? D.cell_of_node_matrix[node] : D.cell_of_node_inclusion[node];
  };

  for (size_t pi = 0; pi < D.outer_pieces.size(); ++pi) {
    const auto& piece = D.outer_pieces[pi];
    if constexpr (Dim == 2) {
      for (int g = 0; g < rule.size(); ++g) {
        ContourPoint<Dim> cp;
        cp.x = piece.a + 0.5 * (rule.x[g] + 1.0) * (piece.b - piece.a);
        cp.n = piece.n;
        cp.w = 0.5 * rule.w[g] * (piece.b - piece.a).norm();
        cp.kind = ContourKind::Outer;
        cp.piece = static_cast<int>(pi);
        ev.evaluate(cp.x, kMatrix, rk::kValues, se);
        detail::store_eval(se, cp.matrix_side);
        cp.nearest_cell_matrix = nearest_cell(cp.x, kMatrix);
        T.contour.push_back(std::move(cp));
      }
    } else {
      ContourPoint<Dim> cp;
      cp.x = Vec1(piece.x);
      cp.n = Vec1(piece.n);
      cp.w = 1.0;
      cp.kind = ContourKind::Outer;
      cp.piece = static_cast<int>(pi);
      ev.evaluate(cp.x, kMatrix, rk::kValues, se);
      detail::store_eval(se, cp.matrix_side);
      cp.nearest_cell_matrix = nearest_cell(cp.x, kMatrix);
      T.contour.push_back(std::move(cp));
    }
  }

  for (size_t pi = 0; pi < D.interface_pieces.size(); ++pi) {
    const auto& piece = D.interface_pieces[pi];
    const int k = piece.inclusion;
    auto emit = [&](const Vec<Dim>& x, const Vec<Dim>& nplus, Real w) {
      ContourPoint<Dim> cp;
      cp.x = x;
      cp.n = nplus;
      cp.w = w;
      cp.kind = ContourKind::Interface;
      cp.piece = static_cast<int>(pi);
      ev.evaluate(cp.x, kMatrix, rk::kValues, se);
      detail::store_eval(se, cp.matrix_side);
      ev.evaluate(cp.x, k, rk::kValues, se);
      detail::store_eval(se, cp.inclusion_side);
      cp.nearest_cell_matrix = nearest_cell(cp.x, kMatrix);
      cp.nearest_cell_inclusion = nearest_cell(cp.x, k);
      T.contour.push_back(std::move(cp));
    };
    if constexpr (Dim == 2) {
      for (int g = 0; g < rule.size(); ++g)
        emit(piece.a + 0.5 * (rule.x[g] + 1.0) * (piece.b - piece.a), piece.nplus,
             0.5 * rule.w[g] * (piece.b - piece.a).norm());
    } else {
      emit(Vec1(piece.x), Vec1(piece.nplus), 1.0);
    }
  }

  // --- constraint residuals over the full subdomain boundaries ---------------
  for (const auto& cp : T.contour) {
    if (cp.kind == ContourKind::Outer) {
      for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i)
        T.r[T.tag_index(kMatrix)][cp.matrix_side.ids[i]] +=
            cp.matrix_side.N[i] * cp.w * cp.n;
    } else {
      const int k = D.interface_pieces[cp.piece].inclusion;
      // matrix boundary runs opposite to the inclusion outward normal
      for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i)
        T.r[T.tag_index(kMatrix)][cp.matrix_side.ids[i]] -=
            cp.matrix_side.N[i] * cp.w * cp.n;
      for (size_t i = 0; i < cp.inclusion_side.ids.size(); ++i)
        T.r[T.tag_index(k)][cp.inclusion_side.ids[i]] +=
            cp.inclusion_side.N[i] * cp.w * cp.n;
    }
  }

  // --- correction factors -----------------------------------------------------
  std::vector<Real> perimeter(n_tags, 0.0);
  if constexpr (Dim == 2) {
    for (const auto& p : D.outer_pieces)
      perimeter[T.tag_index(kMatrix)] += (p.b - p.a).norm();
    for (const auto& p : D.interface_pieces) {
      const Real len = (p.b - p.a).norm();
      perimeter[T.tag_index(kMatrix)] += len;
      perimeter[T.tag_index(p.inclusion)] += len;
    }
  } else {
    perimeter.assign(n_tags, 2.0);
  }

  for (int t = 0; t < n_tags; ++t) {
    for (int i = 0; i < n_nodes; ++i) {
      const Real rn = T.r[t][i].norm();
      if (T.M[t][i] > 0.0) {
        T.zeta[t][i] = T.r[t][i] / T.M[t][i];
      } else if (rn > 1e-12 * std::max(perimeter[t], Real(1.0))) {
        throw IsolatedNode("vc_assemble_residual: node " + std::to_string(i) + " (" +
                           tag_name(t - 1) + ") has boundary residual " +
                           std::to_string(rn) + " but no covered cell volume");
      }
    }
  }

  T.vc_applied = opt.apply_vc;
  for (size_t ci = 0; ci < D.cells.size(); ++ci) {
    const int ti = T.tag_index(D.cells[ci].subdomain);
    for (auto& e : T.cells[ci].entries)
      e.grad_vc = e.grad_sm + ((opt.apply_vc && e.theta) ? T.zeta[ti][e.node] : Vec<Dim>::Zero());
  }
  return T;
}

// Residual of the integration constraint with the corrected gradients; should
// vanish for every node by construction.
template <int Dim>
inline Real max_constraint_residual(const disc::EmbeddedDiscretization<Dim>& D,
                                    const IntegrationTables<Dim>& T,
                                    bool corrected = true) {
  const int n_tags = 1 + static_cast<int>(D.domain.inclusions.size());
  const int n_nodes = D.cloud.size();
  std::vector<std::vector<Vec<Dim>>> acc(n_tags,
                                         std::vector<Vec<Dim>>(n_nodes, Vec<Dim>::Zero()));
  for (size_t ci = 0; ci < D.cells.size(); ++ci) {
    const int ti = T.tag_index(D.cells[ci].subdomain);
    for (const auto& e : T.cells[ci].entries)
      acc[ti][e.node] += (corrected ? e.grad_vc : e.grad_sm) * D.cells[ci].V;
  }
  for (const auto& cp : T.contour) {
    if (cp.kind == ContourKind::Outer) {
      for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i)
        acc[0][cp.matrix_side.ids[i]] -= cp.matrix_side.N[i] * cp.w * cp.n;
    } else {
      const int k = D.interface_pieces[cp.piece].inclusion;
      for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i)
        acc[0][cp.matrix_side.ids[i]] += cp.matrix_side.N[i] * cp.w * cp.n;
      for (size_t i = 0; i < cp.inclusion_side.ids.size(); ++i)
        acc[1 + k][cp.inclusion_side.ids[i]] -= cp.inclusion_side.N[i] * cp.w * cp.n;
    }
  }
  Real worst = 0.0;
  for (int t = 0; t < n_tags; ++t)
    for (int i = 0; i < n_nodes; ++i) worst = std::max(worst, acc[t][i].norm());
  return worst;
}

template <int Dim>
inline Real max_zeta(const IntegrationTables<Dim>& T, int tag) {
  Real worst = 0.0;
  for (const auto& z : T.zeta[T.tag_index(tag)]) worst = std::max(worst, z.norm());
  return worst;
}

}  // namespace qce::integ
