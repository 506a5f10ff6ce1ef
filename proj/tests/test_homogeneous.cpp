#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <loopflow/errors.hpp>
#include <loopflow/frame.hpp>
#include <loopflow/homogeneous.hpp>

using namespace loopflow;

namespace {

// Hermitian-orthonormal moving frame of the non-conformal parametrization:
// e1 = f_x / (r1 sqrt(1-r1^2)),  f_y = r2/sqrt(1-r1^2) (r3 e2 - r1 r2 e1).
// The determinant of (e1, e2, f) is the independent oracle for beta.
double beta_det_oracle(const HomogeneousParams& prm, double x, double y) {
  const Complex i(0, 1);
  const double r1s = prm.r1sq, r2s = prm.r2sq;
  const CVec3 f = homogeneous_point(prm, x, y);
  CVec3 fx, fy;
  fx << i * (1.0 - r1s) * f(0), -i * r1s * f(1), -i * r1s * f(2);
  fy << -i * r2s * f(0), i * (1.0 - r2s) * f(1), -i * r2s * f(2);
  const CVec3 e1 = fx / (prm.r1() * std::sqrt(1.0 - r1s));
  const CVec3 e2 =
      ((std::sqrt(1.0 - r1s) / prm.r2()) * fy + prm.r1() * prm.r2() * e1) / prm.r3();
  CMat frame;
  frame.col(0) = e1;
  frame.col(1) = e2;
  frame.col(2) = f;
  return std::arg(frame.determinant());
}

double mod_2pi_distance(double a, double b) {
  double d = a - b;
  d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
  return std::abs(d);
}

}  // namespace

TEST_CASE("clifford point at the origin") {
  const auto prm = HomogeneousParams::clifford();
  const CVec3 f = homogeneous_point(prm, 0, 0);
  const double s = 1.0 / std::sqrt(3.0);
  CHECK((f - CVec3(s, s, s)).norm() < 1e-15);
}

TEST_CASE("legendrian identity <df, f> = 0 at random parameters") {
  Rng rng(5);
  for (int it = 0; it < 100; ++it) {
    const double r1s = 0.05 + 0.5 * rng.uniform();
    const double r2s = 0.05 + 0.4 * (1.0 - r1s) * rng.uniform() + 0.05;
    if (r1s + r2s >= 0.98) continue;
    const auto prm = HomogeneousParams::from_r_squared(r1s, r2s);
    const double x = 6.0 * rng.uniform(), y = 6.0 * rng.uniform();
    const Complex i(0, 1);
    const CVec3 f = homogeneous_point(prm, x, y);
    CVec3 fx;
    fx << i * (1.0 - r1s) * f(0), -i * r1s * f(1), -i * r1s * f(2);
    CHECK(std::abs(f.dot(fx)) < 1e-14);
  }
}

TEST_CASE("double periodicity as CP^2 points") {
  const auto prm = HomogeneousParams::from_fractions({1, 2}, {1, 4});
  Rng rng(11);
  for (int it = 0; it < 20; ++it) {
    const double x = 6.0 * rng.uniform() - 3.0, y = 6.0 * rng.uniform() - 3.0;
    const CVec3 f0 = homogeneous_point(prm, x, y);
    const CVec3 fx = homogeneous_point(prm, x + 2.0 * M_PI, y);
    const CVec3 fyp = homogeneous_point(prm, x, y + 2.0 * M_PI);
    // Projectors u u^dag agree even though the lifts differ by a phase.
    CHECK((f0 * f0.adjoint() - fx * fx.adjoint()).norm() < 1e-13);
    CHECK((f0 * f0.adjoint() - fyp * fyp.adjoint()).norm() < 1e-13);
  }
}

TEST_CASE("lagrangian angle: clifford constant, generic affine") {
  const auto cliff = lagrangian_angle_homogeneous(HomogeneousParams::clifford());
  CHECK(cliff.cx == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cliff.cy == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cliff.c0 == doctest::Approx(M_PI));

  const auto prm = HomogeneousParams::from_fractions({1, 2}, {1, 4});
  const auto ang = lagrangian_angle_homogeneous(prm);
  CHECK(ang.cx == doctest::Approx(-0.5));
  CHECK(ang.cy == doctest::Approx(0.25));
  CHECK(ang.c0 == doctest::Approx(M_PI));
}

TEST_CASE("beta formula against the framing-determinant oracle") {
  Rng rng(13);
  for (const auto& prm :
       {HomogeneousParams::clifford(), HomogeneousParams::from_fractions({1, 2}, {1, 4}),
        HomogeneousParams::from_r_squared(0.22, 0.41)}) {
    const auto ang = lagrangian_angle_homogeneous(prm);
    for (int it = 0; it < 25; ++it) {
      const double x = 8.0 * rng.uniform() - 4.0, y = 8.0 * rng.uniform() - 4.0;
      const double expect = ang.cx * x + ang.cy * y + ang.c0;
      CHECK(mod_2pi_distance(beta_det_oracle(prm, x, y), expect) < 1e-12);
    }
  }
}

TEST_CASE("maslov class and closure multiplicities") {
  const auto cliff = HomogeneousParams::clifford();
  CHECK(maslov_class(cliff).first == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(maslov_class(cliff).second == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(legendrian_closure(cliff) == std::pair<long long, long long>{1, 1});

  const auto prm = HomogeneousParams::from_fractions({1, 2}, {1, 4});
  CHECK(maslov_class(prm).first == doctest::Approx(-0.5));
  CHECK(maslov_class(prm).second == doctest::Approx(0.25));
  CHECK(legendrian_closure(prm) == std::pair<long long, long long>{2, 4});

  // Rational inputs always give exact integer outputs.
  const auto odd = HomogeneousParams::from_fractions({3, 7}, {2, 11});
  const auto [kx, ky] = legendrian_closure(odd);
  const Rational mx = Rational{1, 1} - Rational{3, 1} * Rational{3, 7};
  const Rational my = Rational{1, 1} - Rational{3, 1} * Rational{2, 11};
  CHECK((Rational{kx, 1} * mx).is_integer());
  CHECK((Rational{ky, 1} * my).is_integer());
}

TEST_CASE("closure rejects irrational parameters") {
  const auto prm = HomogeneousParams::from_r_squared(0.3123, 0.17);
  CHECK_THROWS_AS(legendrian_closure(prm), IrrationalInput);
}

TEST_CASE("holonomy oracle confirms closure and minimality") {
  const auto prm = HomogeneousParams::from_fractions({1, 2}, {1, 4});
  const auto [kx, ky] = legendrian_closure(prm);
  CHECK(closure_holonomy_defect(prm, 0, kx) < 1e-10);
  CHECK(closure_holonomy_defect(prm, 1, ky) < 1e-10);
  for (long long j = 1; j < kx; ++j) CHECK(closure_holonomy_defect(prm, 0, j) > 1e-2);
  for (long long j = 1; j < ky; ++j) CHECK(closure_holonomy_defect(prm, 1, j) > 1e-2);

  const auto cliff = HomogeneousParams::clifford();
  CHECK(closure_holonomy_defect(cliff, 0, 1) < 1e-10);
  CHECK(closure_holonomy_defect(cliff, 1, 1) < 1e-10);
}

TEST_CASE("homogeneous immersion: fixtures pass their analytic residuals") {
  const auto prm = HomogeneousParams::from_fractions({1, 2}, {1, 4});
  GridSpec spec{48, 40, 2.0 * M_PI / 47, 2.0 * M_PI / 39};
  const ImmersionData data = homogeneous_immersion(prm, spec);
  CHECK(data.unit_norm_residual() < 1e-14);
  CHECK(data.max_residual("legendrian") < 1e-12);
  CHECK(harmonicity_residual(data.beta, spec) < 1e-11);
}

TEST_CASE("harmonicity residual: known Laplacian of x^2") {
  GridSpec spec{17, 17, 0.25, 0.25};
  std::vector<double> beta(static_cast<std::size_t>(spec.nodes()));
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      beta[static_cast<std::size_t>(spec.index(i, j))] = spec.x(i) * spec.x(i);
    }
  }
  CHECK(harmonicity_residual(beta, spec) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("metric is flat, translation invariant, with the stated coefficients") {
  const auto prm = HomogeneousParams::from_r_squared(0.37, 0.21);
  Rng rng(17);
  const Complex i(0, 1);
  const double expect_gx = prm.r1sq * (1.0 - prm.r1sq);
  for (int it = 0; it < 30; ++it) {
    const double x = 9.0 * rng.uniform(), y = 9.0 * rng.uniform();
    const CVec3 f = homogeneous_point(prm, x, y);
    CVec3 fx, fy;
    fx << i * (1.0 - prm.r1sq) * f(0), -i * prm.r1sq * f(1), -i * prm.r1sq * f(2);
    fy << -i * prm.r2sq * f(0), i * (1.0 - prm.r2sq) * f(1), -i * prm.r2sq * f(2);
    CHECK(std::abs(fx.squaredNorm() - expect_gx) < 1e-13);
    CHECK(std::abs(fy.squaredNorm() - prm.r2sq * (1.0 - prm.r2sq)) < 1e-13);
    CHECK(std::abs(fx.dot(fy).real() - (-prm.r1sq * prm.r2sq)) < 1e-13);
    CHECK(std::abs(fx.dot(fy).imag()) < 1e-13);  // Lagrangian
  }
}

TEST_CASE("special Lagrangian iff clifford") {
  const auto cm = maslov_class(HomogeneousParams::clifford());
  CHECK(std::abs(cm.first) + std::abs(cm.second) == doctest::Approx(0.0).epsilon(1e-15));
  const auto gm = maslov_class(HomogeneousParams::from_r_squared(0.32, 0.34));
  CHECK(std::abs(gm.first) + std::abs(gm.second) > 1e-3);
}

TEST_CASE("isometric frame connection: shapes, constants and flatness") {
  for (const auto& prm :
       {HomogeneousParams::from_fractions({1, 25}, {1, 20}),
        HomogeneousParams::from_fractions({1, 2}, {1, 4}), HomogeneousParams::clifford()}) {
    const HomogeneousFrameData fd = homogeneous_frame_connection(prm);
    // F0 unitary, metric normalized by L.
    CHECK(unitarity_residual(fd.F0) < 1e-13);
    const Eigen::Matrix2d gram = fd.L.transpose() * fd.metric * fd.L;
    CHECK((gram - Eigen::Matrix2d::Identity()).norm() < 1e-13);
    // The framing is Legendrian: A^3_3 = 0 for both directions.
    CHECK(std::abs(fd.A1(2, 2)) < 1e-13);
    CHECK(std::abs(fd.A2(2, 2)) < 1e-13);
    // Conformality: the dzbar part of A has no eigenvalue -1 component.
    const Complex i(0, 1);
    const CMat adzbar = (fd.A1 + i * fd.A2) / 2.0;
    CHECK(eigenspace_project(adzbar, -1).norm() < 1e-13);
    // Constant connection of a genuine solution: flat.
    CHECK(bracket(fd.A1, fd.A2).norm() < 1e-13);
    // Eigenparts are where they claim to be.
    CHECK(eigenspace_residual(fd.X, -1) < 1e-13);
    CHECK(eigenspace_residual(fd.C, 0) < 1e-13);
    // a = (1/2) dbeta/dz in the isometric coordinates.
    const Complex expect_a = Complex(fd.beta_iso.cx, -fd.beta_iso.cy) / 4.0;
    CHECK(std::abs(fd.a - expect_a) < 1e-13);
    // det F0 = e^{i beta(0,0)} = -1: the +pi constant in the angle formula.
    CHECK(std::abs(fd.F0.determinant() - Complex(-1, 0)) < 1e-12);
  }
}

TEST_CASE("rational arithmetic reduces and detects integers") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK((Rational{6, 3}).is_integer());
  CHECK_FALSE((Rational{5, 3}).is_integer());
  CHECK_THROWS_AS(Rational(1, 0), IrrationalInput);
}
