#include "loopflow/lax.hpp"

#include <cmath>
#include <iostream>

#include "loopflow/errors.hpp"

namespace loopflow {

namespace {

CMat vacuum_bottom(Complex a) {
  CMat m = CMat::Zero();
  m(0, 0) = Complex(0, 1) * a;
  m(1, 1) = Complex(0, 1) * a;
  return m;
}

}  // namespace

LaxState LaxState::vacuum(int p, Complex a) {
  const int b = band_of(p);
  LaurentLoop xi(-b, b);
  const CMat bottom = vacuum_bottom(a);
  xi.at(-b) = bottom;
  xi.at(b) = -bottom.adjoint();
  xi.mark_real().mark_twisted();
  return LaxState{p, xi};
}

LaxState LaxState::random_admissible(int p, Complex a, double amplitude,
                                     std::uint64_t seed) {
  LaxState s = vacuum(p, a);
  Rng rng(seed);
  const int mid = 4 * p + 1;
  // Draw raw Gaussian coefficients for all middle degrees, then enforce the
  // twist (eigenspace projection) and reality (pairwise symmetrization).
  std::vector<CMat> raw(static_cast<std::size_t>(2 * mid + 1));
  for (auto& m : raw) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = rng.cgaussian();
    }
  }
  auto coeff_of = [&](int k) -> CMat& { return raw[static_cast<std::size_t>(k + mid)]; };
  for (int k = -mid; k <= mid; ++k) {
    coeff_of(k) = eigenspace_project(coeff_of(k), ((k % 4) + 4) % 4);
  }
  for (int k = 1; k <= mid; ++k) {
    const CMat sym = (coeff_of(k) - coeff_of(-k).adjoint()) / 2.0;
    coeff_of(k) = sym;
    coeff_of(-k) = -sym.adjoint();
  }
  const CMat skew0 = (coeff_of(0) - coeff_of(0).adjoint()) / 2.0;
  coeff_of(0) = skew0;
  for (int k = -mid; k <= mid; ++k) {
    s.xi.at(k) = amplitude * coeff_of(k);
  }
  s.validate(1e-10);
  return s;
}

LaxState LaxState::from_loop(int p, const LaurentLoop& xi, double tol) {
  const int b = band_of(p);
  if (xi.kmin() != -b || xi.kmax() != b) {
    throw InvariantDrift("LaxState: band must be exactly [-2-4p, 2+4p]");
  }
  LaxState s{p, xi};
  s.xi.mark_real().mark_twisted();
  s.validate(tol);
  return s;
}

double LaxState::bottom_form_res() const {
  const CMat m = bottom();
  CMat model = CMat::Zero();
  const Complex d = (m(0, 0) + m(1, 1)) / 2.0;
  model(0, 0) = d;
  model(1, 1) = d;
  return (m - model).norm();
}

void LaxState::validate(double tol) const {
  const int b = band();
  if (xi.kmin() != -b || xi.kmax() != b) {
    throw InvariantDrift("LaxState: wrong band");
  }
  const double r = reality_res();
  const double t = twist_res();
  const double f = bottom_form_res();
  if (r >= tol || t >= tol || f >= tol) {
    throw InvariantDrift("LaxState: invariant residuals reality=" + fmt_double(r) +
                         " twist=" + fmt_double(t) + " bottom=" + fmt_double(f));
  }
}

namespace {

// Tangent computation shared by the public vector_field and the integrator,
// which works on bare loops during RK4 stages.
LaurentLoop tangent(const LaurentLoop& xi, int p, FlowDirection dir,
                    double band_tol) {
  LaurentLoop shifted = xi.shifted(4 * p);
  if (dir == FlowDirection::X2) shifted *= Complex(0, 1);
  const LaurentLoop a = project_lambda_su(shifted);
  LaurentLoop t = bracket_loop(xi, a);
  const int b = LaxState::band_of(p);
  const double leak = t.out_of_band_mass(-b, b);
  if (leak > band_tol) {
    throw BandLeak("vector_field: out-of-band mass " + fmt_double(leak) +
                   " (corrupted state)");
  }
  LaurentLoop out = t.truncated(-b, b);
  out.mark_real().mark_twisted();
  return out;
}

LaurentLoop rk4_step(const LaurentLoop& xi, int p, FlowDirection dir, double h,
                     double band_tol) {
  const LaurentLoop k1 = tangent(xi, p, dir, band_tol);
  const LaurentLoop k2 = tangent(xi + Complex(h / 2, 0) * k1, p, dir, band_tol);
  const LaurentLoop k3 = tangent(xi + Complex(h / 2, 0) * k2, p, dir, band_tol);
  const LaurentLoop k4 = tangent(xi + Complex(h, 0) * k3, p, dir, band_tol);
  LaurentLoop out = xi;
  out += Complex(h / 6, 0) * k1;
  out += Complex(h / 3, 0) * k2;
  out += Complex(h / 3, 0) * k3;
  out += Complex(h / 6, 0) * k4;
  out.mark_real().mark_twisted();
  return out;
}

}  // namespace

LaurentLoop vector_field(const LaxState& state, FlowDirection dir, double band_tol) {
  return tangent(state.xi, state.p, dir, band_tol);
}

std::pair<LaurentLoop, LaurentLoop> connection_from_state(const LaxState& state) {
  LaurentLoop shifted_x = state.xi.shifted(4 * state.p);
  LaurentLoop shifted_y = shifted_x;
  shifted_y *= Complex(0, 1);
  LaurentLoop ax = project_lambda_su(shifted_x).truncated(-2, 2);
  LaurentLoop ay = project_lambda_su(shifted_y).truncated(-2, 2);
  ax.mark_real().mark_twisted();
  ay.mark_real().mark_twisted();
  return {ax, ay};
}

StateGrid integrate_flow(const LaxState& initial, const GridSpec& spec,
                         const FlowOptions& opt) {
  initial.validate(opt.invariant_tol);
  if (std::abs(initial.bottom_a()) < 1e-14 && !opt.quiet) {
    std::cerr << "loopflow: warning: a = 0 (minimal sector); downstream Killing "
                 "machinery requires a != 0\n";
  }
  StateGrid grid;
  grid.spec = spec;
  grid.p = initial.p;
  grid.states.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());

  auto check = [&](const LaurentLoop& xi, int i, int j) {
    if (!opt.validate_nodes) return;
    LaxState s{initial.p, xi};
    try {
      s.validate(opt.invariant_tol);
    } catch (const InvariantDrift& e) {
      throw InvariantDrift(std::string(e.what()) + " at node (" + std::to_string(i) +
                           "," + std::to_string(j) + ")");
    }
  };

  grid.at(0, 0) = initial.xi;
  for (int i = 1; i < spec.nx; ++i) {
    grid.at(i, 0) =
        rk4_step(grid.at(i - 1, 0), initial.p, FlowDirection::X1, spec.hx, opt.band_tol);
    check(grid.at(i, 0), i, 0);
  }
  parallel_for(spec.nx, [&](int i) {
    for (int j = 1; j < spec.ny; ++j) {
      grid.at(i, j) = rk4_step(grid.at(i, j - 1), initial.p, FlowDirection::X2,
                               spec.hy, opt.band_tol);
      check(grid.at(i, j), i, j);
    }
  });
  return grid;
}

LaxState integrate_corner(const LaxState& initial, const GridSpec& spec,
                          FlowOrder order, const FlowOptions& opt) {
  LaurentLoop xi = initial.xi;
  auto run = [&](FlowDirection dir, int steps, double h) {
    for (int s = 0; s < steps; ++s) xi = rk4_step(xi, initial.p, dir, h, opt.band_tol);
  };
  if (order == FlowOrder::XThenY) {
    run(FlowDirection::X1, spec.nx - 1, spec.hx);
    run(FlowDirection::X2, spec.ny - 1, spec.hy);
  } else {
    run(FlowDirection::X2, spec.ny - 1, spec.hy);
    run(FlowDirection::X1, spec.nx - 1, spec.hx);
  }
  return LaxState{initial.p, xi};
}

FlowDiagnostics conserved_diagnostics(const StateGrid& grid) {
  FlowDiagnostics d;
  const LaurentLoop& origin = grid.at(0, 0);
  const double norm0 = origin.norm2();
  const CMat bottom0 = origin.coeff(-LaxState::band_of(grid.p));

  constexpr int kSamples = 8;
  std::vector<Complex> lambdas(kSamples);
  for (int s = 0; s < kSamples; ++s) {
    lambdas[s] = std::polar(1.0, 2.0 * M_PI * s / kSamples);
  }
  std::vector<Complex> traces0(kSamples * 3);
  for (int s = 0; s < kSamples; ++s) {
    const CMat v = origin.eval(lambdas[s]);
    CMat pw = v;
    for (int j = 0; j < 3; ++j) {
      traces0[s * 3 + j] = pw.trace();
      pw = pw * v;
    }
  }

  const int b = LaxState::band_of(grid.p);
  std::vector<FlowDiagnostics> locals(static_cast<std::size_t>(grid.spec.ny));
  parallel_for(grid.spec.ny, [&](int j) {
    FlowDiagnostics& loc = locals[static_cast<std::size_t>(j)];
    for (int i = 0; i < grid.spec.nx; ++i) {
      const LaurentLoop& xi = grid.at(i, j);
      loc.reality.consider(reality_residual(xi), i, j);
      loc.twist.consider(twist_residual(xi), i, j);
      // Tangency (band-leak) of X1 at the node, without truncation.
      LaurentLoop shifted = xi.shifted(4 * grid.p);
      const LaurentLoop t = bracket_loop(xi, project_lambda_su(shifted));
      loc.band_leak.consider(t.out_of_band_mass(-b, b), i, j);
      loc.norm_drift.consider(std::abs(xi.norm2() - norm0), i, j);
      loc.bottom_drift.consider((xi.coeff(-b) - bottom0).norm(), i, j);
      double spectral = 0.0;
      for (int sample = 0; sample < kSamples; ++sample) {
        const CMat v = xi.eval(lambdas[sample]);
        CMat pw = v;
        for (int jj = 0; jj < 3; ++jj) {
          spectral = std::max(spectral,
                              std::abs(pw.trace() - traces0[sample * 3 + jj]));
          pw = pw * v;
        }
      }
      loc.spectral_drift.consider(spectral, i, j);
    }
  });
  for (const auto& loc : locals) {
    d.reality.consider(loc.reality.value, loc.reality.i, loc.reality.j);
    d.twist.consider(loc.twist.value, loc.twist.i, loc.twist.j);
    d.band_leak.consider(loc.band_leak.value, loc.band_leak.i, loc.band_leak.j);
    d.norm_drift.consider(loc.norm_drift.value, loc.norm_drift.i, loc.norm_drift.j);
    d.bottom_drift.consider(loc.bottom_drift.value, loc.bottom_drift.i,
                            loc.bottom_drift.j);
    d.spectral_drift.consider(loc.spectral_drift.value, loc.spectral_drift.i,
                              loc.spectral_drift.j);
  }
  return d;
}

double FlowDiagnostics::worst() const {
  double w = reality.value;
  w = std::max(w, twist.value);
  w = std::max(w, band_leak.value);
  w = std::max(w, norm_drift.value);
  w = std::max(w, bottom_drift.value);
  w = std::max(w, spectral_drift.value);
  return w;
}

}  // namespace loopflow
