// qce-rkpm: system assembly (volume smoothing terms, weak Dirichlet boundary,
// interface traction coupling) and the sparse direct solve.
// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <functional>
#include <iostream>
#include <vector>

#include "qce/elasticity.hpp"
#include "qce/integration.hpp"

namespace qce::sys {

template <int Dim>
struct BoundaryConditions {
  // outer sides: 1D {x lo, x hi}; 2D {x lo, x hi, y lo, y hi}
  std::array<bool, 2 * Dim> dirichlet{};
  std::function<Vec<Dim>(const Vec<Dim>&)> g = [](const Vec<Dim>&) { return Vec<Dim>::Zero(); };
  std::function<Vec<Dim>(const Vec<Dim>&)> traction = [](const Vec<Dim>&) {
    return Vec<Dim>::Zero();
  };
  std::function<Vec<Dim>(const Vec<Dim>&)> body = [](const Vec<Dim>&) { return Vec<Dim>::Zero(); };

  bool any_dirichlet() const {
    for (bool b : dirichlet)
      if (b) return true;
    return false;
  }
};

template <int Dim>
struct Problem {
  elas::Material matrix;
  std::vector<elas::Material> inclusions;
  BoundaryConditions<Dim> bc;
  Real alpha = 1.0;       // interface traction blend (1: inclusion side)
  Real beta_mult = 100.0; // Nitsche penalty multiplier

  const elas::Material& material(int tag) const {
    return tag == kMatrix ? matrix : inclusions.at(tag);
  }
};

template <int Dim>
struct AssembledSystem {
  Eigen::SparseMatrix<Real> K;
  Eigen::VectorXd f;
  Real beta = 0.0;
  int ndof = 0;
  bool has_dirichlet = false;
};

// optional split for diagnostics and tests
struct AssemblyBreakdown {
  Eigen::SparseMatrix<Real> coupling;  // interface blend terms
  Eigen::SparseMatrix<Real> boundary;  // weak Dirichlet terms
};

namespace detail {

// Block-compressed sparse accumulator over node pairs. The value layout is
// exactly the dof-level row-major CSR, so the final matrix is a single copy.
template <int Dim>
class SystemBuilder {
 public:
  explicit SystemBuilder(int n_nodes) : n_(n_nodes), adj_(n_nodes) {}

  std::vector<int>& scratch() { return scratch_; }

  void set_row(int node, std::vector<int>& cols) {
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    adj_[node] = cols;
  }

  void finalize_pattern() {
    rowptr_.assign(n_ + 1, 0);
    for (int i = 0; i < n_; ++i) rowptr_[i + 1] = rowptr_[i] + static_cast<int>(adj_[i].size());
    cols_.reserve(rowptr_[n_]);
    for (int i = 0; i < n_; ++i) cols_.insert(cols_.end(), adj_[i].begin(), adj_[i].end());
    adj_.clear();
    adj_.shrink_to_fit();
    val_.assign(static_cast<size_t>(rowptr_[n_]) * Dim * Dim, 0.0);
  }

  void add(int i, int j, const Eigen::Matrix<Real, Dim, Dim>& blk) {
    const int lo = rowptr_[i], hi = rowptr_[i + 1];
    const int* first = cols_.data() + lo;
    const int* last = cols_.data() + hi;
    const int* it = std::lower_bound(first, last, j);
    const int p = static_cast<int>(it - first);
    const int deg = hi - lo;
    Real* base = val_.data() + static_cast<size_t>(lo) * Dim * Dim;
    for (int c = 0; c < Dim; ++c)
      for (int t = 0; t < Dim; ++t) base[c * (Dim * deg) + Dim * p + t] += blk(c, t);
  }

  Eigen::SparseMatrix<Real> build() const {
    const int nrows = Dim * n_;
    std::vector<int> outer(nrows + 1);
    std::vector<int> inner(val_.size());
    size_t at = 0;
    for (int i = 0; i < n_; ++i) {
      const int deg = rowptr_[i + 1] - rowptr_[i];
      for (int c = 0; c < Dim; ++c) {
        outer[Dim * i + c] = static_cast<int>(at);
        for (int p = rowptr_[i]; p < rowptr_[i + 1]; ++p)
          for (int t = 0; t < Dim; ++t) inner[at++] = Dim * cols_[p] + t;
      }
      (void)deg;
    }
    outer[nrows] = static_cast<int>(at);
    Eigen::Map<const Eigen::SparseMatrix<Real, Eigen::RowMajor, int>> mapped(
        nrows, nrows, static_cast<int>(val_.size()), outer.data(), inner.data(), val_.data());
    return Eigen::SparseMatrix<Real>(mapped);
  }

 private:
  int n_ = 0;
  std::vector<std::vector<int>> adj_;
  std::vector<int> rowptr_, cols_;
  std::vector<Real> val_;
  std::vector<int> scratch_;
};

}  // namespace detail

template <int Dim>
AssembledSystem<Dim> assemble(const disc::EmbeddedDiscretization<Dim>& D,
                              const integ::IntegrationTables<Dim>& T,
                              const Problem<Dim>& prob,
                              AssemblyBreakdown* breakdown = nullptr) {
  using MatDD = Eigen::Matrix<Real, Dim, Dim>;
  const int n = D.cloud.size();
  const int n_inc = static_cast<int>(D.domain.inclusions.size());
  if (static_cast<int>(prob.inclusions.size()) != n_inc)
    throw InvalidArgument("assemble: expected " + std::to_string(n_inc) +
                          " inclusion materials, got " + std::to_string(prob.inclusions.size()));
  if (!prob.bc.any_dirichlet())
    std::cerr << "qce warning: no Dirichlet side declared; the system has rigid body modes\n";

  std::vector<elas::VoigtMat<Dim>> C(n_inc + 1);
  C[0] = elas::stiffness<Dim>(prob.matrix);
  for (int k = 0; k < n_inc; ++k) C[k + 1] = elas::stiffness<Dim>(prob.inclusions[k]);

  const Real beta = prob.beta_mult * prob.matrix.E / D.h_minus;

  auto dirichlet_point = [&](const integ::ContourPoint<Dim>& cp) {
    return cp.kind == integ::ContourKind::Outer &&
           prob.bc.dirichlet[D.outer_pieces[cp.piece].side];
  };

  // ---- sparsity pattern ----------------------------------------------------
  detail::SystemBuilder<Dim> builder(n);
  {
    std::vector<std::vector<int>> inc_cell(n), inc_val(n), inc_tab(n);
    for (size_t ci = 0; ci < T.cells.size(); ++ci)
      for (const auto& e : T.cells[ci].entries)
        inc_cell[e.node].push_back(static_cast<int>(ci));
    for (size_t pi = 0; pi < T.contour.size(); ++pi) {
      const auto& cp = T.contour[pi];
      if (cp.kind == integ::ContourKind::Outer) {
        if (!dirichlet_point(cp)) continue;  // pure load point
        for (int id : cp.matrix_side.ids) inc_val[id].push_back(static_cast<int>(pi));
        for (const auto& e : T.cells[cp.nearest_cell_matrix].entries)
          inc_tab[e.node].push_back(static_cast<int>(pi));
      } else {
        for (int id : cp.matrix_side.ids) inc_val[id].push_back(static_cast<int>(pi));
        for (int id : cp.inclusion_side.ids) inc_val[id].push_back(static_cast<int>(pi));
      }
    }
    auto trial_cols = [&](const integ::ContourPoint<Dim>& cp, std::vector<int>& out) {
      if (cp.kind == integ::ContourKind::Outer) {
        for (const auto& e : T.cells[cp.nearest_cell_matrix].entries) out.push_back(e.node);
      } else {
        for (const auto& e : T.cells[cp.nearest_cell_inclusion].entries) out.push_back(e.node);
        for (const auto& e : T.cells[cp.nearest_cell_matrix].entries) out.push_back(e.node);
      }
    };
    std::vector<int> row;
    for (int i = 0; i < n; ++i) {
      row.clear();
      row.push_back(i);  // keep the diagonal present even for dangling nodes
      for (int ci : inc_cell[i])
        for (const auto& e : T.cells[ci].entries) row.push_back(e.node);
      for (int pi : inc_val[i]) {
        const auto& cp = T.contour[pi];
        trial_cols(cp, row);
        if (cp.kind == integ::ContourKind::Outer)  // penalty couples point values
          for (int id : cp.matrix_side.ids) row.push_back(id);
      }
      for (int pi : inc_tab[i])
        for (int id : T.contour[pi].matrix_side.ids) row.push_back(id);
      builder.set_row(i, row);
    }
  }
  builder.finalize_pattern();

  AssembledSystem<Dim> sys;
  sys.ndof = Dim * n;
  sys.beta = beta;
  sys.has_dirichlet = prob.bc.any_dirichlet();
  sys.f = Eigen::VectorXd::Zero(sys.ndof);

  std::vector<Eigen::Triplet<Real>> trip_coupling, trip_boundary;
  auto record = [&](std::vector<Eigen::Triplet<Real>>* dst, int i, int j, const MatDD& blk) {
    if (!dst) return;
    for (int c = 0; c < Dim; ++c)
      for (int t = 0; t < Dim; ++t) dst->emplace_back(Dim * i + c, Dim * j + t, blk(c, t));
  };

  // ---- volume terms ---------------------------------------------------------
  for (size_t ci = 0; ci < T.cells.size(); ++ci) {
    const auto& cell = D.cells[ci];
    const auto& Ct = C[cell.subdomain + 1];
    const auto& entries = T.cells[ci].entries;
    const Vec<Dim> xL = D.cloud.nodes[cell.owner].x;
    const Vec<Dim> b = prob.bc.body(xL);
    for (const auto& ei : entries) {
      const auto BiT_C = (elas::bmat<Dim>(ei.grad_vc).transpose() * Ct).eval();
      // Stabilization pairs direction d with the full smoothed gradient of the
      // d-th implicit derivative, i.e. column d of the nsni matrix.
      std::array<Eigen::Matrix<Real, Dim, elas::kVoigt<Dim>>, Dim> SiT_C;
      for (int d = 0; d < Dim; ++d)
        SiT_C[d] = elas::bmat<Dim>(ei.nsni.col(d)).transpose() * Ct;
      for (const auto& ej : entries) {
        MatDD blk = BiT_C * elas::bmat<Dim>(ej.grad_sm) * cell.V;
        for (int d = 0; d < Dim; ++d)
          blk += SiT_C[d] * elas::bmat<Dim>(ej.nsni.col(d)) * cell.M2(d);
        builder.add(ei.node, ej.node, blk);
      }
      sys.f.template segment<Dim>(Dim * ei.node) += ei.psi * cell.V * b;
    }
  }

  // ---- contour terms ---------------------------------------------------------
  for (const auto& cp : T.contour) {
    if (cp.kind == integ::ContourKind::Outer) {
      if (!dirichlet_point(cp)) {
        // Neumann load
        const Vec<Dim> t = prob.bc.traction(cp.x);
        for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i)
          sys.f.template segment<Dim>(Dim * cp.matrix_side.ids[i]) +=
              cp.w * cp.matrix_side.N[i] * t;
        continue;
      }
      const auto eta = elas::eta<Dim>(cp.n);
      const auto& table = T.cells[cp.nearest_cell_matrix].entries;
      const Vec<Dim> g = prob.bc.g(cp.x);
      for (const auto& ej : table) {
        const MatDD Tj = eta * C[0] * elas::bmat<Dim>(ej.grad_sm);  // traction operator
        sys.f.template segment<Dim>(Dim * ej.node) -= cp.w * Tj.transpose() * g;
        for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i) {
          const Real vw = cp.w * cp.matrix_side.N[i];
          const MatDD cons = -vw * Tj;
          const MatDD dual = -vw * Tj.transpose();
          builder.add(cp.matrix_side.ids[i], ej.node, cons);
          builder.add(ej.node, cp.matrix_side.ids[i], dual);
          record(breakdown ? &trip_boundary : nullptr, cp.matrix_side.ids[i], ej.node, cons);
          record(breakdown ? &trip_boundary : nullptr, ej.node, cp.matrix_side.ids[i], dual);
        }
      }
      for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i) {
        sys.f.template segment<Dim>(Dim * cp.matrix_side.ids[i]) +=
            beta * cp.w * cp.matrix_side.N[i] * g;
        for (size_t j = 0; j < cp.matrix_side.ids.size(); ++j) {
          const MatDD pen =
              beta * cp.w * cp.matrix_side.N[i] * cp.matrix_side.N[j] * MatDD::Identity();
          builder.add(cp.matrix_side.ids[i], cp.matrix_side.ids[j], pen);
          record(breakdown ? &trip_boundary : nullptr, cp.matrix_side.ids[i],
                 cp.matrix_side.ids[j], pen);
        }
      }
    } else {
      // interface traction blend, normal taken from the inclusion side
      const int k = D.interface_pieces[cp.piece].inclusion;
      const auto eta = elas::eta<Dim>(cp.n);
      auto scatter = [&](const integ::CellTable<Dim>& table, const elas::VoigtMat<Dim>& Ct,
                         Real weight) {
        if (weight == 0.0) return;
        for (const auto& ej : table.entries) {
          const MatDD Tj = weight * eta * Ct * elas::bmat<Dim>(ej.grad_sm);
          for (size_t i = 0; i < cp.matrix_side.ids.size(); ++i) {
            const MatDD blk = cp.w * cp.matrix_side.N[i] * Tj;
            builder.add(cp.matrix_side.ids[i], ej.node, blk);
            record(breakdown ? &trip_coupling : nullptr, cp.matrix_side.ids[i], ej.node, blk);
          }
          for (size_t i = 0; i < cp.inclusion_side.ids.size(); ++i) {
            const MatDD blk = -cp.w * cp.inclusion_side.N[i] * Tj;
            builder.add(cp.inclusion_side.ids[i], ej.node, blk);
            record(breakdown ? &trip_coupling : nullptr, cp.inclusion_side.ids[i], ej.node, blk);
          }
        }
      };
      scatter(T.cells[cp.nearest_cell_inclusion], C[k + 1], prob.alpha);
      scatter(T.cells[cp.nearest_cell_matrix], C[0], 1.0 - prob.alpha);
    }
  }

  sys.K = builder.build();
  if (breakdown) {
    breakdown->coupling.resize(sys.ndof, sys.ndof);
    breakdown->coupling.setFromTriplets(trip_coupling.begin(), trip_coupling.end());
    breakdown->boundary.resize(sys.ndof, sys.ndof);
    breakdown->boundary.setFromTriplets(trip_boundary.begin(), trip_boundary.end());
  }
  return sys;
}

// ---------------------------------------------------------------------------
// sparse direct solve with a 1-norm condition estimate
// ---------------------------------------------------------------------------

struct SolveReport {
  Real residual = 0.0;
  Real cond1 = 0.0;
};

namespace detail {

template <class Solver>
Real inverse_norm1_estimate(Solver& lu, int n) {
  // Hager's power method on |A^-1|
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
  Real est = 0.0;
  for (int iter = 0; iter < 6; ++iter) {
    const Eigen::VectorXd y = lu.solve(x);
    est = std::max(est, y.template lpNorm<1>());
    Eigen::VectorXd xi(n);
    for (int i = 0; i < n; ++i) xi(i) = (y(i) >= 0.0) ? 1.0 : -1.0;
    const Eigen::VectorXd z = lu.transpose().solve(xi);
    int j = 0;
    const Real zmax = z.cwiseAbs().maxCoeff(&j);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x(j) = 1.0;
  }
  return est;
}

}  // namespace detail

inline Eigen::VectorXd solve_system(const Eigen::SparseMatrix<Real>& K, const Eigen::VectorXd& f,
                                    SolveReport* report = nullptr) {
  Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu;
  lu.compute(K);
  if (lu.info() != Eigen::Success)
    throw SingularSystem("solve_system: sparse LU factorization failed");
  const Eigen::VectorXd d = lu.solve(f);
  const Real fn = std::max(f.norm(), Real(1e-300));
  const Real residual = (K * d - f).norm() / fn;
  if (!d.allFinite() || residual > 1e-6)
    throw SingularSystem("solve_system: relative residual " + std::to_string(residual) +
                         "; the system is singular or severely ill-conditioned");
  if (report) {
    report->residual = residual;
    Real norm1 = 0.0;
    for (int c = 0; c < K.outerSize(); ++c) {
      Real s = 0.0;
      for (Eigen::SparseMatrix<Real>::InnerIterator it(K, c); it; ++it) s += std::abs(it.value());
      norm1 = std::max(norm1, s);
    }
    report->cond1 = norm1 * detail::inverse_norm1_estimate(lu, static_cast<int>(K.rows()));
  }
  return d;
}

// ---------------------------------------------------------------------------
// field recovery
// ---------------------------------------------------------------------------

template <int Dim>
struct RecoveredFields {
  std::vector<elas::VoigtVec<Dim>> strain_matrix, stress_matrix;
  std::vector<elas::VoigtVec<Dim>> strain_incl, stress_incl;
  std::vector<char> has_matrix, has_incl;
};

// Nodal strains: the owner's smoothed gradient where the node owns a cell in
// that subdomain, the direct gradient otherwise.
template <int Dim>
RecoveredFields<Dim> recover_fields(const disc::EmbeddedDiscretization<Dim>& D,
                                    const integ::IntegrationTables<Dim>& T,
                                    const rk::RKEvaluator<Dim>& ev, const Problem<Dim>& prob,
                                    const Eigen::VectorXd& d) {
  const int n = D.cloud.size();
  RecoveredFields<Dim> out;
  out.strain_matrix.assign(n, elas::VoigtVec<Dim>::Zero());
  out.stress_matrix.assign(n, elas::VoigtVec<Dim>::Zero());
  out.strain_incl.assign(n, elas::VoigtVec<Dim>::Zero());
  out.stress_incl.assign(n, elas::VoigtVec<Dim>::Zero());
  out.has_matrix.assign(n, 0);
  out.has_incl.assign(n, 0);

  rk::ShapeEval<Dim> se;
  auto strain_at = [&](int node, int tag) {
    const auto& nd = D.cloud.nodes[node];
    elas::VoigtVec<Dim> eps = elas::VoigtVec<Dim>::Zero();
    const int ci = tag == kMatrix ? D.cell_of_node_matrix[node] : D.cell_of_node_inclusion[node];
    if (ci >= 0 && D.cells[ci].owner == node) {
      for (const auto& e : T.cells[ci].entries)
        eps += elas::bmat<Dim>(e.grad_sm) * d.template segment<Dim>(Dim * e.node);
    } else {
      ev.evaluate(nd.x, tag, rk::kValues | rk::kDirectGrad, se);
      for (int i = 0; i < se.size(); ++i)
        eps += elas::bmat<Dim>(se.dN[i]) * d.template segment<Dim>(Dim * se.ids[i]);
    }
    return eps;
  };

  for (int i = 0; i < n; ++i) {
    const auto& nd = D.cloud.nodes[i];
    if (nd.in_matrix) {
      out.strain_matrix[i] = strain_at(i, kMatrix);
      out.stress_matrix[i] = elas::stiffness<Dim>(prob.matrix) * out.strain_matrix[i];
      out.has_matrix[i] = 1;
    }
    if (nd.inclusion >= 0) {
      out.strain_incl[i] = strain_at(i, nd.inclusion);
      out.stress_incl[i] =
          elas::stiffness<Dim>(prob.inclusions[nd.inclusion]) * out.strain_incl[i];
      out.has_incl[i] = 1;
    }
  }
  return out;
}

// Pointwise solution fields: displacement by direct summation, strain and
// stress by re-interpolating the recovered nodal values.
template <int Dim>
class FieldEvaluator {
 public:
  FieldEvaluator(const disc::EmbeddedDiscretization<Dim>& D, const rk::RKEvaluator<Dim>& ev,
                 Eigen::VectorXd d, RecoveredFields<Dim> fields)
      : D_(&D), ev_(&ev), d_(std::move(d)), fields_(std::move(fields)) {}

  Vec<Dim> displacement(const Vec<Dim>& x, int tag) const {
    ev_->evaluate(x, tag, rk::kValues, se_);
    Vec<Dim> u = Vec<Dim>::Zero();
    for (int i = 0; i < se_.size(); ++i)
      u += se_.N[i] * d_.template segment<Dim>(Dim * se_.ids[i]);
    return u;
  }

  elas::VoigtVec<Dim> strain(const Vec<Dim>& x, int tag) const {
    ev_->evaluate(x, tag, rk::kValues, se_);
    elas::VoigtVec<Dim> eps = elas::VoigtVec<Dim>::Zero();
    for (int i = 0; i < se_.size(); ++i)
      eps += se_.N[i] * (tag == kMatrix ? fields_.strain_matrix[se_.ids[i]]
                                        : fields_.strain_incl[se_.ids[i]]);
    return eps;
  }

  elas::VoigtVec<Dim> stress(const Vec<Dim>& x, int tag) const {
    ev_->evaluate(x, tag, rk::kValues, se_);
    elas::VoigtVec<Dim> sig = elas::VoigtVec<Dim>::Zero();
    for (int i = 0; i < se_.size(); ++i)
      sig += se_.N[i] * (tag == kMatrix ? fields_.stress_matrix[se_.ids[i]]
                                        : fields_.stress_incl[se_.ids[i]]);
    return sig;
  }

  // displacement and strain from one shape evaluation; the norm-integration
  // hot path
  void probe(const Vec<Dim>& x, int tag, Vec<Dim>& u, elas::VoigtVec<Dim>& eps) const {
    ev_->evaluate(x, tag, rk::kValues, se_);
    u.setZero();
    eps.setZero();
    const auto& nodal = tag == kMatrix ? fields_.strain_matrix : fields_.strain_incl;
    for (int i = 0; i < se_.size(); ++i) {
      u += se_.N[i] * d_.template segment<Dim>(Dim * se_.ids[i]);
      eps += se_.N[i] * nodal[se_.ids[i]];
    }
  }

  const Eigen::VectorXd& dofs() const { return d_; }
  const RecoveredFields<Dim>& fields() const { return fields_; }

 private:
  const disc::EmbeddedDiscretization<Dim>* D_;
  const rk::RKEvaluator<Dim>* ev_;
  Eigen::VectorXd d_;
  RecoveredFields<Dim> fields_;
  mutable rk::ShapeEval<Dim> se_;
};

}  // namespace qce::sys
