// qce-rkpm: Gauss rules (Golub-Welsch) for segments, intervals and triangles.
// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "qce/common.hpp"

namespace qce::quad {

struct Rule1D {
  std::vector<Real> x, w;
  int size() const { return static_cast<int>(x.size()); }
};

// Nodes/weights from the symmetric tridiagonal Jacobi matrix of a three-term
// recurrence: eigenvalues are the nodes, mu0 * (first eigenvector component)^2
// the weights.
inline Rule1D golub_welsch(const std::vector<Real>& diag,
                           const std::vector<Real>& offdiag, Real mu0) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) J(i, i) = diag[i];
  for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule1D r;
  r.x.resize(n);
  r.w.resize(n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return es.eigenvalues()(a) < es.eigenvalues()(b);
  });
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    r.x[k] = es.eigenvalues()(i);
    const Real v0 = es.eigenvectors()(0, i);
    r.w[k] = mu0 * v0 * v0;
  }
  return r;
}

// Gauss-Legendre on [-1, 1].
inline Rule1D gauss_legendre(int n) {
  if (n < 1) throw InvalidArgument("gauss_legendre: order must be >= 1");
  std::vector<Real> a(n, 0.0), b;
  for (int k = 1; k < n; ++k) b.push_back(k / std::sqrt(4.0 * k * k - 1.0));
  return golub_welsch(a, b, 2.0);
}

// Gauss-Legendre mapped to [0, 1].
inline Rule1D gauss_legendre_01(int n) {
  Rule1D r = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    r.x[i] = 0.5 * (r.x[i] + 1.0);
    r.w[i] *= 0.5;
  }
  return r;
}

// Gauss-Jacobi with weight (1-u) on [0, 1]; recurrence for alpha=1, beta=0 on
// [-1, 1] then affine map (the (1-u) factor is absorbed into the weights).
inline Rule1D gauss_jacobi10_01(int n) {
  if (n < 1) throw InvalidArgument("gauss_jacobi10_01: order must be >= 1");
  std::vector<Real> a, b;
  for (int k = 0; k < n; ++k) a.push_back(-1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0)));
  for (int k = 1; k < n; ++k) {
    const Real t = 2.0 * k + 1.0;
    b.push_back(std::sqrt(k * (k + 1.0)) / t);
  }
  Rule1D r = golub_welsch(a, b, 2.0);
  for (int i = 0; i < n; ++i) {
    r.x[i] = 0.5 * (r.x[i] + 1.0);
    r.w[i] *= 0.25;
  }
  return r;
}

// Conical-product rule on the reference triangle (0,0)-(1,0)-(0,1), exact for
// total degree <= 2n-1. n=6 gives the degree-10 rule used by the error norms.
struct TriRule {
  std::vector<Vec2> p;
  std::vector<Real> w;
  int size() const { return static_cast<int>(p.size()); }
};

inline TriRule triangle_rule(int n = 6) {
  const Rule1D gj = gauss_jacobi10_01(n);
  const Rule1D gl = gauss_legendre_01(n);
  TriRule t;
  t.p.reserve(n * n);
  t.w.reserve(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t.p.push_back(Vec2(gj.x[i], gl.x[j] * (1.0 - gj.x[i])));
      t.w.push_back(gj.w[i] * gl.w[j]);
    }
  return t;
}

// Two-point Gauss rule on [-1, 1]; the cell-boundary workhorse.
inline const Rule1D& segment2() {
  static const Rule1D r = gauss_legendre(2);
  return r;
}

inline const Rule1D& cached_gauss_legendre(int n) {
  static std::map<int, Rule1D> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

inline const TriRule& cached_triangle_rule(int n = 6) {
  static std::map<int, TriRule> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, triangle_rule(n)).first;
  return it->second;
}

}  // namespace qce::quad
