#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <loopflow/cmat.hpp>
#include <loopflow/errors.hpp>
#include <loopflow/util.hpp>

using namespace loopflow;

namespace {

CMat random_cmat(Rng& rng) {
  CMat m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = rng.cgaussian();
  return m;
}

CMat random_skew(Rng& rng) {
  const CMat m = random_cmat(rng);
  return (m - m.adjoint()) / 2.0;
}

// Independent polar-factor oracle via SVD: M = U S V^dag -> polar = U V^dag.
CMat polar_oracle_svd(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace

TEST_CASE("structural constants hold to machine precision") {
  CHECK(structural::verify() <= 1e-15);
  const Complex i(0, 1);
  CHECK((structural::J() * structural::epsilon() - i * structural::epsilon()).norm() ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK((structural::J() * structural::epsilon_bar() +
         i * structural::epsilon_bar())
            .norm() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("bracket: diagonal matrices commute") {
  const Complex i(0, 1);
  CMat a = CMat::Zero(), b = CMat::Zero();
  a.diagonal() << i, 2.0 * i, 3.0 * i;
  b.diagonal() << 5.0 * i, 7.0 * i, 11.0 * i;
  CHECK(bracket(a, b).norm() == 0.0);
}

TEST_CASE("bracket with pi0_perp flips the sign of the bottom row") {
  // [pi0, [[0,0,a],[0,0,b],[-+ib, +-ia, 0]]] = [[0,0,a],[0,0,b],[+-ib, -+ia, 0]]
  Rng rng(7);
  for (int sign : {+1, -1}) {
    const Complex a = rng.cgaussian(), b = rng.cgaussian();
    const Complex i(0, 1);
    CMat m = CMat::Zero();
    m(0, 2) = a;
    m(1, 2) = b;
    m(2, 0) = -double(sign) * i * b;
    m(2, 1) = double(sign) * i * a;
    CMat expect = m;
    expect(2, 0) = -m(2, 0);
    expect(2, 1) = -m(2, 1);
    CHECK((bracket(structural::pi0_perp(), m) - expect).norm() < 1e-15);
  }
}

TEST_CASE("bracket: antisymmetry and Jacobi on random input") {
  Rng rng(11);
  for (int it = 0; it < 100; ++it) {
    const CMat m = random_cmat(rng), n = random_cmat(rng), q = random_cmat(rng);
    CHECK(bracket(m, m).norm() == 0.0);
    CHECK((bracket(m, n) + bracket(n, m)).norm() < 1e-14);
    CHECK((bracket(m, bracket(n, q)) + bracket(n, bracket(q, m)) +
           bracket(q, bracket(m, n)))
              .norm() < 1e-12);
  }
}

TEST_CASE("mexp_skew: identity and scalar phase") {
  CHECK((mexp_skew(CMat::Zero()) - CMat::Identity()).norm() < 1e-15);
  CMat m = CMat::Zero();
  m(0, 0) = Complex(0, M_PI);
  CMat expect = CMat::Identity();
  expect(0, 0) = -1;
  CHECK((mexp_skew(m) - expect).norm() < 1e-12);
}

TEST_CASE("mexp_skew reproduces the x-dependence of the homogeneous family") {
  // exp(x diag(i(1-r1^2), -i r1^2, -i r1^2)) p deforms p = (r1, r2, r3) the
  // same way as the first coordinate of the explicit torus family at y = 0.
  Rng rng(23);
  for (int it = 0; it < 20; ++it) {
    const double r1s = 0.2 + 0.4 * rng.uniform();
    const double r2s = 0.1 + 0.3 * rng.uniform();
    const double r3s = 1.0 - r1s - r2s;
    REQUIRE(r3s > 0.0);
    const double x = 4.0 * rng.uniform() - 2.0;
    CMat gen = CMat::Zero();
    gen(0, 0) = Complex(0, 1.0 - r1s);
    gen(1, 1) = Complex(0, -r1s);
    gen(2, 2) = Complex(0, -r1s);
    const CVec3 p(std::sqrt(r1s), std::sqrt(r2s), std::sqrt(r3s));
    const CVec3 got = mexp_skew(x * gen) * p;
    const CVec3 expect(std::sqrt(r1s) * std::polar(1.0, (1.0 - r1s) * x),
                       std::sqrt(r2s) * std::polar(1.0, -r1s * x),
                       std::sqrt(r3s) * std::polar(1.0, -r1s * x));
    CHECK((got - expect).norm() < 1e-12);
  }
}

TEST_CASE("mexp_skew: inverse pairing, determinant identity, unitarity") {
  Rng rng(31);
  for (int it = 0; it < 200; ++it) {
    const CMat s = random_skew(rng);
    const CMat u = mexp_skew(s);
    CHECK(unitarity_residual(u) < 1e-12);
    CHECK((u * mexp_skew(CMat(-s)) - CMat::Identity()).norm() < 1e-12);
    CHECK(std::abs(u.determinant() - std::exp(s.trace())) < 1e-12);
  }
}

TEST_CASE("mexp_skew rejects non-skew input") {
  CMat m = CMat::Identity();
  CHECK_THROWS_AS(mexp_skew(m), NotSkewHermitian);
}

TEST_CASE("polar_unitarize: fixed point and scalar factor") {
  Rng rng(41);
  const CMat u = mexp_skew(random_skew(rng));
  CHECK((polar_unitarize(u) - u).norm() < 1e-13);
  CHECK((polar_unitarize(CMat(1.01 * CMat::Identity())) - CMat::Identity()).norm() <
        1e-13);
}

TEST_CASE("polar_unitarize matches the SVD oracle under perturbation") {
  Rng rng(43);
  for (int it = 0; it < 100; ++it) {
    const CMat u = mexp_skew(random_skew(rng));
    const CMat raw = random_cmat(rng);
    CMat e = (raw + raw.adjoint()) / 2.0;
    e *= 1e-3 / e.norm();
    const CMat m = u * (CMat::Identity() + e);
    const CMat got = polar_unitarize(m);
    const CMat oracle = polar_oracle_svd(m);
    CHECK(unitarity_residual(got) < 1e-13);
    CHECK((got - oracle).norm() < 1e-10);
    CHECK((got - u).norm() < 10.0 * 1e-3);
  }
}

TEST_CASE("polar_unitarize rejects singular input") {
  CMat m = CMat::Zero();
  m(0, 0) = 1;
  CHECK_THROWS_AS(polar_unitarize(m), Singular);
}
