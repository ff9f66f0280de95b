// qce-rkpm: linear elastic constitutive helpers (Voigt convention).
// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>

#include "qce/common.hpp"

namespace qce::elas {

struct Material {
  Real E = 1.0;
  Real nu = 0.0;
};

// Voigt sizes: 1D -> [e_xx], 2D -> [e_xx, e_yy, g_xy] with engineering shear.
template <int Dim>
inline constexpr int kVoigt = Dim * (Dim + 1) / 2;

template <int Dim>
using VoigtVec = Eigen::Matrix<Real, kVoigt<Dim>, 1>;
template <int Dim>
using VoigtMat = Eigen::Matrix<Real, kVoigt<Dim>, kVoigt<Dim>>;
template <int Dim>
using BMat = Eigen::Matrix<Real, kVoigt<Dim>, Dim>;
template <int Dim>
using EtaMat = Eigen::Matrix<Real, Dim, kVoigt<Dim>>;

template <int Dim>
inline VoigtMat<Dim> stiffness(const Material& m) {
  if constexpr (Dim == 1) {
    return VoigtMat<1>::Constant(m.E);
  } else {
    // plane stress
    VoigtMat<2> C;
    const Real f = m.E / (1.0 - m.nu * m.nu);
    C << f, f * m.nu, 0.0,            //
        f * m.nu, f, 0.0,             //
        0.0, 0.0, f * (1.0 - m.nu) / 2.0;
    return C;
  }
}

// compliance: strain from stress
template <int Dim>
inline VoigtVec<Dim> strain_of_stress(const Material& m, const VoigtVec<Dim>& s) {
  if constexpr (Dim == 1) {
    return VoigtVec<1>(s(0) / m.E);
  } else {
    VoigtVec<2> e;
    e(0) = (s(0) - m.nu * s(1)) / m.E;
    e(1) = (s(1) - m.nu * s(0)) / m.E;
    e(2) = 2.0 * (1.0 + m.nu) / m.E * s(2);
    return e;
  }
}

// maps a Voigt stress to the traction vector for unit normal n
template <int Dim>
inline EtaMat<Dim> eta(const Vec<Dim>& n) {
  if constexpr (Dim == 1) {
    return EtaMat<1>::Constant(n(0));
  } else {
    EtaMat<2> m;
    m << n.x(), 0.0, n.y(),  //
        0.0, n.y(), n.x();
    return m;
  }
}

// strain-displacement block of one node from its gradient vector
template <int Dim>
inline BMat<Dim> bmat(const Vec<Dim>& g) {
  if constexpr (Dim == 1) {
    return BMat<1>::Constant(g(0));
  } else {
    BMat<2> b;
    b << g.x(), 0.0,  //
        0.0, g.y(),   //
        g.y(), g.x();
    return b;
  }
}

}  // namespace qce::elas
