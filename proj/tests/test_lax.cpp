#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <loopflow/errors.hpp>
#include <loopflow/lax.hpp>

using namespace loopflow;

namespace {

double pair_real(const LaurentLoop& a, const LaurentLoop& b) {
  double s = 0.0;
  for (int k = std::min(a.kmin(), b.kmin()); k <= std::max(a.kmax(), b.kmax()); ++k) {
    s += (a.coeff(k).cwiseProduct(b.coeff(k).conjugate())).sum().real();
  }
  return s;
}

}  // namespace

TEST_CASE("vacuum states are fixed points of both flows") {
  for (int p : {0, 1}) {
    const LaxState v = LaxState::vacuum(p, Complex(0.7, 0.2));
    CHECK(vector_field(v, FlowDirection::X1).norm() < 1e-15);
    CHECK(vector_field(v, FlowDirection::X2).norm() < 1e-15);
  }
}

TEST_CASE("random admissible states satisfy the construction invariants") {
  for (int p : {0, 1}) {
    const LaxState s = LaxState::random_admissible(p, Complex(0.5, 0.1), 0.2, 1234);
    CHECK(s.reality_res() < 1e-14);
    CHECK(s.twist_res() < 1e-13);
    CHECK(s.bottom_form_res() < 1e-15);
    CHECK(std::abs(s.bottom_a() - Complex(0.5, 0.1)) < 1e-14);
  }
}

TEST_CASE("tangency: vector_field output stays in band on random states") {
  for (int it = 0; it < 1000; ++it) {
    const int p = it % 2;
    const LaxState s =
        LaxState::random_admissible(p, Complex(0.4, -0.3), 0.3, 100 + it);
    // Out-of-band mass is checked inside; BandLeak would throw.
    const LaurentLoop t1 = vector_field(s, FlowDirection::X1);
    const LaurentLoop t2 = vector_field(s, FlowDirection::X2);
    CHECK(t1.kmin() == -s.band());
    CHECK(t1.kmax() == s.band());
    CHECK(reality_residual(t1) < 1e-12);
    CHECK(twist_residual(t1) < 1e-12);
    // At p = 0 the su-projection fixes real loops, so X1 vanishes identically
    // and the dynamics live in X2; at p >= 1 both fields are nontrivial.
    if (p == 0) CHECK(t1.norm() < 1e-14);
    if (p == 1) CHECK(t1.norm() > 1e-3);
    CHECK(t2.norm() > 1e-3);
    // Norm preservation: <X(xi), xi> has zero real part.
    CHECK(std::abs(pair_real(t1, s.xi)) < 1e-12);
    CHECK(std::abs(pair_real(t2, s.xi)) < 1e-12);
  }
}

TEST_CASE("vector_field raises BandLeak on a corrupted state") {
  LaxState s = LaxState::random_admissible(0, Complex(0.5, 0.0), 0.2, 99);
  // Break the reality pairing of the top coefficient with a non-central
  // eigenspace-2 element; the degree-3 cancellation [xi_2, A_1] + [xi_1, A_2]
  // then picks up [delta, xi_1] != 0.
  CMat delta = CMat::Zero();
  delta(0, 0) = Complex(0, 0.3);
  delta(1, 1) = Complex(0, 0.3);
  delta(2, 2) = Complex(0, -0.5);
  s.xi.at(2) += delta;
  CHECK_THROWS_AS(vector_field(s, FlowDirection::X1), BandLeak);
}

TEST_CASE("connection_from_state: vacuum closed form") {
  const Complex a(0.6, -0.3);
  const Complex i(0, 1);
  const LaxState v = LaxState::vacuum(0, a);
  auto [ax, ay] = connection_from_state(v);
  CMat bottom = CMat::Zero();
  bottom(0, 0) = i * a;
  bottom(1, 1) = i * a;
  CHECK((ax.coeff(-2) - bottom).norm() < 1e-15);
  CHECK((ax.coeff(2) + bottom.adjoint()).norm() < 1e-15);
  CHECK(ax.coeff(-1).norm() + ax.coeff(0).norm() + ax.coeff(1).norm() < 1e-15);
  CHECK((ay.coeff(-2) - i * bottom).norm() < 1e-15);
  CHECK((ay.coeff(2) - i * bottom.adjoint()).norm() < 1e-15);
}

TEST_CASE("connection A(d/dx) loses a pure-b degree-0 coefficient") {
  // With xi_0 in b (su part zero) the degree-0 term of A(d/dx) vanishes.
  LaxState s = LaxState::vacuum(0, Complex(0.5, 0.0));
  CMat b = CMat::Zero();
  b(0, 0) = 0.4;
  b(1, 1) = -0.4;
  b(1, 0) = Complex(0.2, 0.6);
  s.xi.at(0) = b;
  auto [ax, ay] = connection_from_state(s);
  CHECK(ax.coeff(0).norm() < 1e-15);
  (void)ay;
}

TEST_CASE("connection loops are skew-Hermitian at unit-circle samples") {
  const LaxState s = LaxState::random_admissible(0, Complex(0.5, 0.2), 0.3, 7);
  auto [ax, ay] = connection_from_state(s);
  for (const Complex lambda :
       {Complex(1, 0), Complex(0, 1), std::polar(1.0, M_PI / 7)}) {
    CHECK(skew_hermitian_residual(ax.eval(lambda)) < 1e-12);
    CHECK(skew_hermitian_residual(ay.eval(lambda)) < 1e-12);
  }
}

TEST_CASE("integrate_flow: vacuum stays constant; 1x1 grid returns the input") {
  const LaxState v = LaxState::vacuum(0, Complex(0.8, 0.1));
  GridSpec spec{9, 7, 0.05, 0.05};
  const StateGrid grid = integrate_flow(v, spec);
  double worst = 0.0;
  for (const auto& xi : grid.states) worst = std::max(worst, (xi - v.xi).norm());
  CHECK(worst < 1e-14);

  GridSpec point{1, 1, 1.0, 1.0};
  const StateGrid single = integrate_flow(v, point);
  CHECK((single.at(0, 0) - v.xi).norm() == 0.0);
}

TEST_CASE("flow conservation on a random p=0 state") {
  const LaxState s = LaxState::random_admissible(0, Complex(0.4, 0.1), 0.05, 2024);
  GridSpec spec{65, 65, 1.0 / 64, 1.0 / 64};
  const StateGrid grid = integrate_flow(s, spec);
  const FlowDiagnostics d = conserved_diagnostics(grid);
  CHECK(d.reality.value < 1e-12);
  CHECK(d.twist.value < 1e-12);
  CHECK(d.band_leak.value < 1e-10);
  CHECK(d.norm_drift.value < 1e-10);
  CHECK(d.bottom_drift.value < 1e-10);
  CHECK(d.spectral_drift.value < 1e-8);
}

TEST_CASE("flow-order commutation: x-then-y equals y-then-x") {
  // p = 1 exercises both flows nontrivially (X1 vanishes at p = 0).
  const LaxState s = LaxState::random_admissible(1, Complex(0.5, -0.2), 0.2, 77);
  // Finite-difference commutator of the two flow maps at small step.
  GridSpec tiny{2, 2, 1e-3, 1e-3};
  const LaxState xy = integrate_corner(s, tiny, FlowOrder::XThenY);
  const LaxState yx = integrate_corner(s, tiny, FlowOrder::YThenX);
  CHECK((xy.xi - yx.xi).norm() < 1e-10);

  // And over a macroscopic region at moderate resolution.
  GridSpec region{33, 33, 1.0 / 32, 1.0 / 32};
  const LaxState xy2 = integrate_corner(s, region, FlowOrder::XThenY);
  const LaxState yx2 = integrate_corner(s, region, FlowOrder::YThenX);
  CHECK((xy2.xi - yx2.xi).norm() < 1e-7);
}

TEST_CASE("norm-drift Richardson ratio is 4th order") {
  // Larger amplitude so the drift sits well above roundoff. The column runs
  // along y, where the p = 0 dynamics actually happen.
  const LaxState s = LaxState::random_admissible(0, Complex(1.2, 0.4), 0.8, 4242);
  GridSpec coarse{1, 33, 1.0, 1.0 / 32};
  GridSpec fine{1, 65, 1.0, 1.0 / 64};
  const double d1 = conserved_diagnostics(integrate_flow(s, coarse)).norm_drift.value;
  const double d2 = conserved_diagnostics(integrate_flow(s, fine)).norm_drift.value;
  REQUIRE(d1 > 1e-13);  // measurable
  const double ratio = d1 / d2;
  CHECK(ratio > 8.0);
  CHECK(ratio < 32.0);
}

TEST_CASE("bottom coefficient is constant along the flow") {
  const LaxState s = LaxState::random_admissible(0, Complex(0.5, 0.3), 0.2, 31337);
  GridSpec spec{33, 33, 1.0 / 64, 1.0 / 64};
  const StateGrid grid = integrate_flow(s, spec);
  CHECK(conserved_diagnostics(grid).bottom_drift.value < 1e-10);
}

TEST_CASE("diagnostics pinpoint a hand-corrupted node") {
  const LaxState v = LaxState::vacuum(0, Complex(0.9, 0.0));
  GridSpec spec{5, 4, 0.1, 0.1};
  StateGrid grid = integrate_flow(v, spec);
  // Dagger-flip one coefficient at node (3, 2): reality breaks there.
  LaurentLoop& xi = grid.at(3, 2);
  const CMat flipped = xi.coeff(-2).adjoint();
  xi.at(-2) = flipped;
  const FlowDiagnostics d = conserved_diagnostics(grid);
  CHECK(d.reality.value > 1e-3);
  CHECK(d.reality.i == 3);
  CHECK(d.reality.j == 2);
}

TEST_CASE("vacuum grid of identical states reports zero residuals") {
  const LaxState v = LaxState::vacuum(1, Complex(0.4, 0.4));
  GridSpec spec{6, 6, 0.2, 0.2};
  const StateGrid grid = integrate_flow(v, spec);
  const FlowDiagnostics d = conserved_diagnostics(grid);
  CHECK(d.worst() < 1e-14);
}

TEST_CASE("integrate_flow validates nodes and reports the bad index") {
  LaxState s = LaxState::vacuum(0, Complex(0.5, 0.0));
  s.xi.at(1) = CMat::Identity();  // not admissible: breaks twist and reality
  GridSpec spec{4, 4, 0.1, 0.1};
  CHECK_THROWS_AS(integrate_flow(s, spec), InvariantDrift);
}
