#pragma once

#include <optional>
#include <utility>

#include "loopflow/immersion.hpp"
#include "loopflow/loop.hpp"

namespace loopflow {

/// Exact integer fraction; closure multiplicities must be exact, so no
/// floating point is allowed anywhere near them.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d);
  Rational reduced() const;
  bool is_integer() const { return reduced().den == 1; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b);
};

/// r1^2 + r2^2 < 1 with all radii positive; r3 is derived so the squares sum
/// to 1 exactly.
struct HomogeneousParams {
  double r1sq = 1.0 / 3.0;
  double r2sq = 1.0 / 3.0;
  std::optional<std::pair<Rational, Rational>> exact;

  double r3sq() const { return 1.0 - r1sq - r2sq; }
  double r1() const;
  double r2() const;
  double r3() const;

  static HomogeneousParams from_r_squared(double r1sq, double r2sq);
  static HomogeneousParams from_fractions(const Rational& r1sq, const Rational& r2sq);
  static HomogeneousParams clifford() { return from_fractions({1, 3}, {1, 3}); }
};

/// The explicit family
///   f(x,y) = ( r1 e^{i((1-r1^2)x - r2^2 y)},
///              r2 e^{i(-r1^2 x + (1-r2^2) y)},
///              r3 e^{i(-r1^2 x - r2^2 y)} ),
/// a flat doubly periodic (as a CP^2 map) Legendrian immersion.
CVec3 homogeneous_point(const HomogeneousParams& params, double x, double y);

/// Evaluate f on the grid; beta is filled from the closed affine formula.
ImmersionData homogeneous_immersion(const HomogeneousParams& params,
                                    const GridSpec& spec);

struct AngleCoefficients {
  double cx = 0.0;  // 1 - 3 r1^2
  double cy = 0.0;  // 1 - 3 r2^2
  double c0 = 0.0;  // pi
};

/// beta(x,y) = cx x + cy y + c0.
AngleCoefficients lagrangian_angle_homogeneous(const HomogeneousParams& params);

/// (1 - 3 r1^2, 1 - 3 r2^2) for the homology basis t -> (2 pi t, 0),
/// t -> (0, 2 pi t). Orientation flips negate the class.
std::pair<double, double> maslov_class(const HomogeneousParams& params);

/// Smallest positive (kx, ky) with kx (1 - 3 r1^2) and ky (1 - 3 r2^2)
/// integers: the lift closes over (kx, ky)-fold covers (in the quotient of
/// S^5 by cube roots of unity, where the angle is globally defined).
/// (1,1) iff both Maslov numbers are integers. Exact rational arithmetic;
/// throws IrrationalInput when the params carry no exact fractions.
std::pair<long long, long long> legendrian_closure(const HomogeneousParams& params);

/// Holonomy oracle: integrate the accumulated phase of the lift around k
/// x-loops (axis = 0) or y-loops (axis = 1) in small steps and return the
/// distance of 3*theta from 2 pi Z — zero iff the lift closes over k covers.
double closure_holonomy_defect(const HomogeneousParams& params, int axis, long long k,
                               int steps_per_loop = 4096);

/// Constant framing data for the isometric reparametrization of f: the basis
/// change L (metric^{-1/2}), the base unitary frame F0 = [e1, e2, f(0)], the
/// constant connection values A(d/dx~), A(d/dy~), their tau-eigenparts
/// X, C along d/dz~, and the angle derivative a = (1/2) dbeta/dz~.
/// This is the ground-truth fixture for the Killing-field machinery.
struct HomogeneousFrameData {
  Eigen::Matrix2d metric;
  Eigen::Matrix2d L;
  CMat F0;
  CMat A1;  // A(d/dx~), constant over the plane
  CMat A2;  // A(d/dy~)
  CMat X;   // eigenspace -1 part of A(d/dz~)
  CMat C;   // eigenspace  0 part of A(d/dz~)
  Complex a;
  AngleCoefficients beta_iso;  // angle coefficients in the isometric coordinates
};

HomogeneousFrameData homogeneous_frame_connection(const HomogeneousParams& params);

}  // namespace loopflow
