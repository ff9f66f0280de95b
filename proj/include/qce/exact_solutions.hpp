// qce-rkpm: closed-form reference solutions for verification problems.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <complex>

#include "qce/elasticity.hpp"

namespace qce::exact {

// ---------------------------------------------------------------------------
// 1D bar with a stiff segment, end displacement g: uniform stress
// ---------------------------------------------------------------------------

struct BarPatch {
  Real x1 = 0.775, x2 = 2.225, L = 3.0;
  Real Em = 1000.0, Ei = 100000.0;
  Real g = 0.3;

  Real stress() const { return g / (x1 / Em + (x2 - x1) / Ei + (L - x2) / Em); }

  Real modulus(Real x) const { return (x > x1 && x < x2) ? Ei : Em; }

  Real strain(Real x) const { return stress() / modulus(x); }

  Real displacement(Real x) const {
    const Real s = stress();
    if (x <= x1) return s * x / Em;
    if (x <= x2) return s * x1 / Em + s * (x - x1) / Ei;
    return s * x1 / Em + s * (x2 - x1) / Ei + s * (x - x2) / Em;
  }
};

// ---------------------------------------------------------------------------
// 1D bar under piecewise sinusoidal body force, fixed left end, free right end
// ---------------------------------------------------------------------------

struct BarSine {
  Real x1 = 0.775, x2 = 2.225, L = 3.0;
  Real Em = 1000.0, Ei = 100000.0;
  Real A1 = 10.0, A2 = 50.0, A3 = 10.0;

  // segment index and local coordinate
  int segment(Real x) const { return x <= x1 ? 0 : (x <= x2 ? 1 : 2); }
  Real seg_lo(int s) const { return s == 0 ? 0.0 : (s == 1 ? x1 : x2); }
  Real seg_len(int s) const { return s == 0 ? x1 : (s == 1 ? x2 - x1 : L - x2); }
  Real amp(int s) const { return s == 0 ? A1 : (s == 1 ? A2 : A3); }
  Real modulus_of(int s) const { return s == 1 ? Ei : Em; }
  Real modulus(Real x) const { return modulus_of(segment(x)); }

  Real body(Real x) const {
    const int s = segment(x);
    return amp(s) * std::sin(M_PI * (x - seg_lo(s)) / seg_len(s));
  }

  // total load carried by segment s
  Real seg_load(int s) const { return 2.0 * amp(s) * seg_len(s) / M_PI; }

  // equilibrium with a traction-free right end: sigma(x) = integral of b to L
  Real stress(Real x) const {
    const int s = segment(x);
    const Real t = x - seg_lo(s), len = seg_len(s);
    Real tail = 0.0;
    for (int r = s + 1; r < 3; ++r) tail += seg_load(r);
    return amp(s) * len / M_PI * (std::cos(M_PI * t / len) + 1.0) + tail;
  }

  Real strain(Real x) const { return stress(x) / modulus(x); }

  Real displacement(Real x) const {
    const int s = segment(x);
    Real u = 0.0;
    for (int r = 0; r < s; ++r) u += seg_disp_jump(r);
    const Real t = x - seg_lo(s), len = seg_len(s);
    Real tail = 0.0;
    for (int r = s + 1; r < 3; ++r) tail += seg_load(r);
    const Real part =
        amp(s) * len / M_PI * (len / M_PI * std::sin(M_PI * t / len) + t) + tail * t;
    return u + part / modulus_of(s);
  }

 private:
  // displacement accumulated across one full segment
  Real seg_disp_jump(int s) const {
    const Real len = seg_len(s);
    Real tail = 0.0;
    for (int r = s + 1; r < 3; ++r) tail += seg_load(r);
    return (amp(s) * len / M_PI * len + tail * len) / modulus_of(s);
  }
};

// ---------------------------------------------------------------------------
// circular elastic inclusion in an infinite plate under remote uniaxial
// tension (plane stress), via complex potentials
// ---------------------------------------------------------------------------

class CircularInclusion {
 public:
  CircularInclusion(Real R, Real F, elas::Material matrix, elas::Material inclusion)
      : R_(R), F_(F), mat_(matrix), inc_(inclusion) {
    const Real mu1 = mu(mat_), mu2 = mu(inc_);
    const Real k1 = kappa(mat_), k2 = kappa(inc_);
    const Real gc = F_ / 4.0;   // Re Gamma
    const Real gp = -F_ / 2.0;  // Gamma'
    cD_ = mu2 * (k1 + 1.0) * gc / (mu1 * (k2 - 1.0) + 2.0 * mu2);
    cA_ = (mu2 - mu1) * gp * R_ * R_ / (mu1 + mu2 * k1);
    cB_ = 2.0 * (cD_ - gc) * R_ * R_;
    cC_ = cA_ * R_ * R_;
    cE_ = cA_ / (R_ * R_) + gp;
    gc_ = gc;
    gp_ = gp;
  }

  Real radius() const { return R_; }
  Real load() const { return F_; }
  const elas::Material& material(int tag) const { return tag == kMatrix ? mat_ : inc_; }

  // interior fields are uniform
  elas::VoigtVec<2> interior_stress() const {
    return elas::VoigtVec<2>(2.0 * cD_ - cE_, 2.0 * cD_ + cE_, 0.0);
  }

  elas::VoigtVec<2> stress(const Vec2& x, int tag) const {
    const std::complex<Real> z(x.x(), x.y());
    std::complex<Real> dphi, ddphi, dpsi;
    if (tag == kMatrix) {
      dphi = gc_ - cA_ / (z * z);
      ddphi = 2.0 * cA_ / (z * z * z);
      dpsi = gp_ - cB_ / (z * z) - 3.0 * cC_ / (z * z * z * z);
    } else {
      dphi = cD_;
      ddphi = 0.0;
      dpsi = cE_;
    }
    const Real trace = 4.0 * dphi.real();                          // sxx + syy
    const std::complex<Real> dev = 2.0 * (std::conj(z) * ddphi + dpsi);
    const Real sxx = (trace - dev.real()) / 2.0;
    const Real syy = (trace + dev.real()) / 2.0;
    const Real sxy = dev.imag() / 2.0;
    return elas::VoigtVec<2>(sxx, syy, sxy);
  }

  Vec2 displacement(const Vec2& x, int tag) const {
    const std::complex<Real> z(x.x(), x.y());
    std::complex<Real> phi, dphi, psi;
    Real mu2, kap;
    if (tag == kMatrix) {
      phi = gc_ * z + cA_ / z;
      dphi = gc_ - cA_ / (z * z);
      psi = gp_ * z + cB_ / z + cC_ / (z * z * z);
      mu2 = mu(mat_);
      kap = kappa(mat_);
    } else {
      phi = cD_ * z;
      dphi = cD_;
      psi = cE_ * z;
      mu2 = mu(inc_);
      kap = kappa(inc_);
    }
    const std::complex<Real> u = (kap * phi - z * std::conj(dphi) - std::conj(psi)) / (2.0 * mu2);
    return Vec2(u.real(), u.imag());
  }

  elas::VoigtVec<2> strain(const Vec2& x, int tag) const {
    return elas::strain_of_stress<2>(material(tag), stress(x, tag));
  }

  static Real mu(const elas::Material& m) { return m.E / (2.0 * (1.0 + m.nu)); }
  static Real kappa(const elas::Material& m) { return (3.0 - m.nu) / (1.0 + m.nu); }  // plane stress

 private:
  Real R_, F_;
  elas::Material mat_, inc_;
  Real gc_ = 0.0, gp_ = 0.0;
  Real cA_ = 0.0, cB_ = 0.0, cC_ = 0.0, cD_ = 0.0, cE_ = 0.0;
};

}  // namespace qce::exact
