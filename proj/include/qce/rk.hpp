// qce-rkpm: reproducing-kernel approximation with kernel-support visibility.
// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qce/common.hpp"
#include "qce/geometry.hpp"

namespace qce::rk {

// ---------------------------------------------------------------------------
// cubic B-spline kernel on the normalized distance z = |x - x_I| / a_I
// ---------------------------------------------------------------------------

struct KernelValue {
  Real phi = 0.0;
  Real dphi = 0.0;  // d(phi)/dz
};

inline KernelValue kernel_eval(Real z) {
  if (z < 0.0) throw InvalidArgument("kernel_eval: negative normalized distance");
  if (z <= 0.5) return {2.0 / 3.0 - 4.0 * z * z + 4.0 * z * z * z, -8.0 * z + 12.0 * z * z};
  if (z <= 1.0) {
    const Real t = 1.0 - z;
    return {4.0 / 3.0 * t * t * t, -4.0 * t * t};
  }
  return {0.0, 0.0};
}

inline Real kernel_second(Real z) {
  if (z < 0.0) throw InvalidArgument("kernel_second: negative normalized distance");
  if (z <= 0.5) return -8.0 + 24.0 * z;
  if (z <= 1.0) return 8.0 * (1.0 - z);
  return 0.0;
}

struct KernelSpec {
  Real c = 2.0;  // support radius over nodal spacing, a_I = c * h_I
};

// ---------------------------------------------------------------------------
// node cloud
// ---------------------------------------------------------------------------

enum class NodeOrigin : std::uint8_t {
  Background = 0,
  BackgroundRefined = 1,
  Foreground = 2,
  Interface = 3,
};

template <int Dim>
struct Node {
  Vec<Dim> x = Vec<Dim>::Zero();
  Real h = 0.0;  // generation-time local spacing
  Real a = 0.0;  // kernel support radius
  bool in_matrix = false;
  int inclusion = -1;  // inclusion membership (-1: none)
  bool is_interface = false;
  NodeOrigin origin = NodeOrigin::Background;
  bool cell_matrix = false;     // owns a smoothing cell in the matrix subdomain
  bool cell_inclusion = false;  // owns a smoothing cell in its inclusion

  bool member(int tag) const { return tag == kMatrix ? in_matrix : inclusion == tag; }
  bool has_cell(int tag) const { return tag == kMatrix ? cell_matrix : cell_inclusion; }
};

template <int Dim>
struct NodeCloud {
  std::vector<Node<Dim>> nodes;
  int size() const { return static_cast<int>(nodes.size()); }
  Real max_support() const {
    Real a = 0.0;
    for (const auto& n : nodes) a = std::max(a, n.a);
    return a;
  }
};

// ---------------------------------------------------------------------------
// uniform-bin neighbor grid
// ---------------------------------------------------------------------------

template <int Dim>
class NeighborGrid {
 public:
  void build(const std::vector<Vec<Dim>>& pts, Real bin_size) {
    pts_ = &pts;
    bin_ = std::max(bin_size, Real(1e-12));
    lo_.setConstant(0.0);
    if (!pts.empty()) {
      lo_ = pts[0];
      Vec<Dim> hi = pts[0];
      for (const auto& p : pts) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      for (int d = 0; d < Dim; ++d)
        dims_[d] = std::max(1, static_cast<int>((hi(d) - lo_(d)) / bin_) + 1);
    } else {
      dims_.fill(1);
    }
    int total = 1;
    for (int d = 0; d < Dim; ++d) total *= dims_[d];
    bins_.assign(total, {});
    for (int i = 0; i < static_cast<int>(pts.size()); ++i)
      bins_[bin_index(pts[i])].push_back(i);
  }

  // Collect indices of points within `radius` of x (superset guaranteed when
  // radius <= bin size times the scanned ring; exact filtering by caller).
  void gather(const Vec<Dim>& x, Real radius, std::vector<int>& out) const {
    out.clear();
    if (!pts_ || pts_->empty()) return;
    const int rings = static_cast<int>(radius / bin_) + 1;
    std::array<int, Dim> c = coords(x);
    std::array<int, Dim> a, b;
    for (int d = 0; d < Dim; ++d) {
      a[d] = std::max(0, c[d] - rings);
      b[d] = std::min(dims_[d] - 1, c[d] + rings);
    }
    if constexpr (Dim == 1) {
      for (int i = a[0]; i <= b[0]; ++i)
        for (int id : bins_[i]) out.push_back(id);
    } else {
      for (int j = a[1]; j <= b[1]; ++j)
        for (int i = a[0]; i <= b[0]; ++i)
          for (int id : bins_[i + dims_[0] * j]) out.push_back(id);
    }
  }

  // Nearest point satisfying `accept`; -1 when none exists.
  template <class Pred>
  int nearest(const Vec<Dim>& x, Pred&& accept) const {
    if (!pts_ || pts_->empty()) return -1;
    const std::array<int, Dim> c = coords(x);
    int max_ring = 0;
    for (int d = 0; d < Dim; ++d)
      max_ring = std::max({max_ring, c[d] + 1, dims_[d] - c[d]});
    int best = -1;
    Real best_d2 = std::numeric_limits<Real>::max();
    for (int r = 0; r <= max_ring; ++r) {
      scan_ring(c, r, [&](int id) {
        if (!accept(id)) return;
        const Real d2 = ((*pts_)[id] - x).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
          best_d2 = d2;
          best = id;
        }
      });
      if (best >= 0 && std::sqrt(best_d2) <= r * bin_) break;
    }
    return best;
  }

 private:
  std::array<int, Dim> coords(const Vec<Dim>& x) const {
    std::array<int, Dim> c;
    for (int d = 0; d < Dim; ++d)
      c[d] = std::clamp(static_cast<int>(std::floor((x(d) - lo_(d)) / bin_)), 0,
                        dims_[d] - 1);
    return c;
  }

  int bin_index(const Vec<Dim>& x) const {
    const auto c = coords(x);
    if constexpr (Dim == 1) return c[0];
    return c[0] + dims_[0] * c[1];
  }

  template <class F>
  void scan_ring(const std::array<int, Dim>& c, int r, F&& f) const {
    if constexpr (Dim == 1) {
      for (int i : {c[0] - r, c[0] + r}) {
        if (i < 0 || i >= dims_[0]) continue;
        if (r == 0 && i != c[0]) continue;
        for (int id : bins_[i]) f(id);
        if (r == 0) break;
      }
    } else {
      for (int j = c[1] - r; j <= c[1] + r; ++j) {
        if (j < 0 || j >= dims_[1]) continue;
        const bool j_edge = (j == c[1] - r || j == c[1] + r);
        for (int i = c[0] - r; i <= c[0] + r; ++i) {
          if (i < 0 || i >= dims_[0]) continue;
          if (!j_edge && i != c[0] - r && i != c[0] + r) continue;
          for (int id : bins_[i + dims_[0] * j]) f(id);
        }
      }
    }
  }

  const std::vector<Vec<Dim>>* pts_ = nullptr;
  Real bin_ = 1.0;
  Vec<Dim> lo_ = Vec<Dim>::Zero();
  std::array<int, Dim> dims_{};
  std::vector<std::vector<int>> bins_;
};

// ---------------------------------------------------------------------------
// shape-function evaluation
// ---------------------------------------------------------------------------

template <int Dim>
struct ShapeEval {
  std::vector<int> ids;
  std::vector<Real> N;
  std::vector<Vec<Dim>> dN;     // direct (analytic) gradient
  std::vector<Vec<Dim>> igrad;  // implicit gradient
  Real cond = 0.0;

  int size() const { return static_cast<int>(ids.size()); }
  void clear() {
    ids.clear();
    N.clear();
    dN.clear();
    igrad.clear();
  }
};

enum EvalWant : unsigned {
  kValues = 1u,
  kDirectGrad = 2u,
  kImplicitGrad = 4u,
};

template <int Dim>
class RKEvaluator {
  static constexpr int B = Dim + 1;  // linear basis size
  using MatB = Eigen::Matrix<Real, B, B>;
  using VecB = Eigen::Matrix<Real, B, 1>;

 public:
  RKEvaluator(const NodeCloud<Dim>& cloud, const geom::DomainSpec<Dim>& dom)
      : cloud_(&cloud), dom_(&dom) {
    pts_.reserve(cloud.nodes.size());
    for (const auto& n : cloud.nodes) pts_.push_back(n.x);
    grid_.build(pts_, std::max(cloud.max_support(), Real(1e-12)));
  }

  const NodeCloud<Dim>& cloud() const { return *cloud_; }
  const geom::DomainSpec<Dim>& domain() const { return *dom_; }
  const NeighborGrid<Dim>& grid() const { return grid_; }

  // Contributor set at x for subdomain `tag`: membership, kernel support and
  // line-of-sight all required.
  void contributors(const Vec<Dim>& x, int tag, std::vector<int>& out) const {
    grid_.gather(x, cloud_->max_support(), scratch_);
    std::sort(scratch_.begin(), scratch_.end());
    out.clear();
    const bool check_vis = (tag == kMatrix) && !dom_->inclusions.empty();
    Vec<Dim> anchor = x;
    if (check_vis) anchor = geom::detail::matrix_visibility_anchor(*dom_, x);
    for (int id : scratch_) {
      const auto& nd = cloud_->nodes[id];
      if (!nd.member(tag)) continue;
      const Real r = (x - nd.x).norm();
      if (r >= nd.a) continue;
      if (check_vis && geom::detail::segment_blocked(*dom_, anchor, nd.x)) continue;
      out.push_back(id);
    }
  }

  void evaluate(const Vec<Dim>& x, int tag, unsigned want, ShapeEval<Dim>& out) const {
    out.clear();
    contributors(x, tag, out.ids);
    const int m = out.size();

    // common scale for the shifted basis keeps the moment matrix conditioned
    // without disturbing exact reproduction
    Real s = 0.0;
    for (int id : out.ids) s = std::max(s, cloud_->nodes[id].a);
    if (m < B || s <= 0.0)
      throw CoverageError("shape_functions: " + std::to_string(m) +
                          " contributing nodes at " + point_str(x) + " (" +
                          tag_name(tag) + ")");

    MatB M = MatB::Zero();
    phis_.resize(m);
    Hs_.resize(m);
    for (int k = 0; k < m; ++k) {
      const auto& nd = cloud_->nodes[out.ids[k]];
      const Real z = (x - nd.x).norm() / nd.a;
      const KernelValue kv = kernel_eval(z);
      VecB H;
      H(0) = 1.0;
      for (int d = 0; d < Dim; ++d) H(d + 1) = (x(d) - nd.x(d)) / s;
      M.noalias() += kv.phi * H * H.transpose();
      phis_[k] = kv;
      Hs_[k] = H;
    }

    // The pivot ratio of the factorization is a cheap conditioning estimate;
    // M must be positive definite for a usable node set.
    Eigen::LDLT<MatB> ldlt(M);
    Real dmin = std::numeric_limits<Real>::infinity(), dmax = 0.0;
    for (int i = 0; i < B; ++i) {
      const Real d = ldlt.vectorD()(i);
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
    out.cond = (dmin > 0.0) ? dmax / dmin : std::numeric_limits<Real>::infinity();
    if (ldlt.info() != Eigen::Success || !(dmin > 0.0) || out.cond > 1e12)
      throw CoverageError("shape_functions: moment matrix condition " +
                          std::to_string(out.cond) + " at " + point_str(x) + " (" +
                          tag_name(tag) + ", " + std::to_string(m) + " nodes)");
    VecB e0 = VecB::Zero();
    e0(0) = 1.0;
    const VecB b = ldlt.solve(e0);

    if (want & kValues) {
      out.N.resize(m);
      for (int k = 0; k < m; ++k) out.N[k] = b.dot(Hs_[k]) * phis_[k].phi;
    }

    if (want & kDirectGrad) {
      // dM/dx_j and the chain rule through b = M^{-1} e0
      std::array<MatB, Dim> dM;
      dphi_.resize(m);
      for (int j = 0; j < Dim; ++j) dM[j].setZero();
      for (int k = 0; k < m; ++k) {
        const auto& nd = cloud_->nodes[out.ids[k]];
        const Real r = (x - nd.x).norm();
        Vec<Dim> gphi = Vec<Dim>::Zero();
        if (r > 1e-300) gphi = phis_[k].dphi / (r * nd.a) * (x - nd.x);
        dphi_[k] = gphi;
        for (int j = 0; j < Dim; ++j) {
          VecB dH = VecB::Zero();
          dH(j + 1) = 1.0 / s;
          const MatB sym = dH * Hs_[k].transpose() + Hs_[k] * dH.transpose();
          dM[j].noalias() += gphi(j) * (Hs_[k] * Hs_[k].transpose()) + phis_[k].phi * sym;
        }
      }
      std::array<VecB, Dim> db;
      for (int j = 0; j < Dim; ++j) db[j] = -ldlt.solve(dM[j] * b);
      out.dN.resize(m);
      for (int k = 0; k < m; ++k) {
        const Real bH = b.dot(Hs_[k]);
        for (int j = 0; j < Dim; ++j) {
          const Real dbH = db[j].dot(Hs_[k]) + b(j + 1) / s;
          out.dN[k](j) = dbH * phis_[k].phi + bH * dphi_[k](j);
        }
      }
    }

    if (want & kImplicitGrad) {
      out.igrad.resize(m);
      std::array<VecB, Dim> bj;
      for (int j = 0; j < Dim; ++j) {
        VecB rhs = VecB::Zero();
        rhs(j + 1) = -1.0 / s;
        bj[j] = ldlt.solve(rhs);
      }
      for (int k = 0; k < m; ++k)
        for (int j = 0; j < Dim; ++j)
          out.igrad[k](j) = bj[j].dot(Hs_[k]) * phis_[k].phi;
    }
  }

  ShapeEval<Dim> evaluate(const Vec<Dim>& x, int tag, unsigned want = kValues) const {
    ShapeEval<Dim> out;
    evaluate(x, tag, want, out);
    return out;
  }

 private:
  static std::string point_str(const Vec<Dim>& x) {
    std::string s = "(";
    for (int d = 0; d < Dim; ++d) s += (d ? ", " : "") + std::to_string(x(d));
    return s + ")";
  }

  const NodeCloud<Dim>* cloud_;
  const geom::DomainSpec<Dim>* dom_;
  std::vector<Vec<Dim>> pts_;
  NeighborGrid<Dim> grid_;
  mutable std::vector<int> scratch_;
  mutable std::vector<KernelValue> phis_;
  mutable std::vector<VecB> Hs_;
  mutable std::vector<Vec<Dim>> dphi_;
};

}  // namespace qce::rk
