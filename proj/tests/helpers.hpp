// qce-rkpm tests: shared fixture builders.
// SPDX-License-Identifier: MIT
#pragma once

#include "qce/discretization.hpp"

namespace qce::testing {

// Square plate [-2,2]^2 with one circular inclusion of radius R at the origin.
inline disc::EmbeddedDiscretization<2> plate_discretization(double h_minus, double h_plus,
                                                            bool recover, double R = 1.0) {
  auto fg = disc::generate_foreground(Vec2(0, 0), R, h_plus);
  auto bg = disc::generate_background(Vec2(-2, -2), Vec2(2, 2), h_minus);
  auto D = disc::embed(bg, {fg}, {});
  disc::share_interface_nodes(D);
  if (recover) disc::add_volume_recovery_cells(D);
  return D;
}

// Bar [0,3] with one stiff segment [x1,x2].
inline disc::EmbeddedDiscretization<1> bar_discretization(double x1, double x2, int n_fg,
                                                          double h_minus, bool recover) {
  auto fg = disc::generate_foreground(x1, x2, n_fg);
  auto bg = disc::generate_background(0.0, 3.0, h_minus);
  auto D = disc::embed(bg, {fg}, {});
  disc::share_interface_nodes(D);
  if (recover) disc::add_volume_recovery_cells(D);
  return D;
}

}  // namespace qce::testing
