// qce-rkpm: quasi-conforming embedded reproducing-kernel particle method
// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qce {

using Real = double;

template <int Dim>
using Vec = Eigen::Matrix<Real, Dim, 1>;
using Vec1 = Vec<1>;
using Vec2 = Vec<2>;

// Subdomain tags: kMatrix for the embedding matrix body, 0..n-1 for inclusions.
constexpr int kMatrix = -1;

enum class Region { Matrix, Inclusion, Interface };

struct PointClass {
  Region region = Region::Matrix;
  int inclusion = -1;  // valid when region != Matrix
};

// Error taxonomy. GeometryError groups the failures the CLI maps to exit code 3
// together with CoverageError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

#define QCE_DEFINE_ERROR(NAME, BASE)     \
  class NAME : public BASE {             \
   public:                               \
    using BASE::BASE;                    \
  }

QCE_DEFINE_ERROR(OutsideDomain, GeometryError);
QCE_DEFINE_ERROR(DegenerateCell, GeometryError);
QCE_DEFINE_ERROR(GridMismatch, GeometryError);
QCE_DEFINE_ERROR(UnderResolvedInclusion, GeometryError);
QCE_DEFINE_ERROR(InvalidLayout, GeometryError);
QCE_DEFINE_ERROR(CoverageError, Error);
QCE_DEFINE_ERROR(IsolatedNode, Error);
QCE_DEFINE_ERROR(SingularSystem, Error);
QCE_DEFINE_ERROR(InvalidArgument, Error);
QCE_DEFINE_ERROR(ConfigError, Error);

#undef QCE_DEFINE_ERROR

inline std::string tag_name(int tag) {
  return tag == kMatrix ? std::string("matrix")
                        : "inclusion " + std::to_string(tag);
}

}  // namespace qce
