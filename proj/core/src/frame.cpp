#include "loopflow/frame.hpp"

#include <algorithm>
#include <cmath>

#include "loopflow/errors.hpp"

namespace loopflow {

namespace {

CMat lincomb4(double w0, const CMat& m0, double w1, const CMat& m1, double w2,
              const CMat& m2, double w3, const CMat& m3) {
  return w0 * m0 + w1 * m1 + w2 * m2 + w3 * m3;
}

LaurentLoop lincomb4(double w0, const LaurentLoop& m0, double w1, const LaurentLoop& m1,
                     double w2, const LaurentLoop& m2, double w3,
                     const LaurentLoop& m3) {
  LaurentLoop r = Complex(w0, 0) * m0;
  r += Complex(w1, 0) * m1;
  r += Complex(w2, 0) * m2;
  r += Complex(w3, 0) * m3;
  return r;
}

// Value of a node-sampled field at step midpoint t + 1/2, 4-point cubic
// interpolation (one-sided at the line ends) so RK4 stays 4th order.
template <class M, class FieldF>
M interp_midpoint(const FieldF& f, int t, int n) {
  if (n >= 4) {
    if (t == 0) {
      return lincomb4(5.0 / 16, f(0), 15.0 / 16, f(1), -5.0 / 16, f(2), 1.0 / 16, f(3));
    }
    if (t == n - 2) {
      return lincomb4(1.0 / 16, f(n - 4), -5.0 / 16, f(n - 3), 15.0 / 16, f(n - 2),
                      5.0 / 16, f(n - 1));
    }
    return lincomb4(-1.0 / 16, f(t - 1), 9.0 / 16, f(t), 9.0 / 16, f(t + 1),
                    -1.0 / 16, f(t + 2));
  }
  return lincomb4(0.5, f(t), 0.5, f(t + 1), 0.0, f(t), 0.0, f(t));
}

// One RK4 step of dF = F * A along a sampled line.
template <class FieldF>
CMat rk4_frame_step(const CMat& f, const FieldF& field, int t, int n, double h) {
  const CMat a0 = field(t);
  const CMat am = interp_midpoint<CMat>(field, t, n);
  const CMat a1 = field(t + 1);
  const CMat k1 = f * a0;
  const CMat k2 = (f + (h / 2) * k1) * am;
  const CMat k3 = (f + (h / 2) * k2) * am;
  const CMat k4 = (f + h * k3) * a1;
  return f + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

AField connection_field(const StateGrid& grid) {
  AField a;
  a.spec = grid.spec;
  a.ax.assign(static_cast<std::size_t>(grid.spec.nodes()), LaurentLoop());
  a.ay.assign(static_cast<std::size_t>(grid.spec.nodes()), LaurentLoop());
  parallel_for(grid.spec.nodes(), [&](int n) {
    const LaxState s{grid.p, grid.states[static_cast<std::size_t>(n)]};
    auto [ax, ay] = connection_from_state(s);
    a.ax[static_cast<std::size_t>(n)] = std::move(ax);
    a.ay[static_cast<std::size_t>(n)] = std::move(ay);
  });
  return a;
}

int FrameFamily::find_lambda(Complex lambda, double tol) const {
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    if (std::abs(lambdas[s] - lambda) < tol) return static_cast<int>(s);
  }
  return -1;
}

int FrameFamily::lambda_one() const {
  const int s = find_lambda(Complex(1, 0));
  if (s < 0) throw Error("FrameFamily: lambda = 1 is not sampled");
  return s;
}

double FrameFamily::max_unitarity_residual() const {
  double worst = 0.0;
  for (const auto& sample : frames) {
    for (const auto& f : sample) worst = std::max(worst, unitarity_residual(f));
  }
  return worst;
}

double FrameFamily::twisting_residual() const {
  double worst = 0.0;
  const Complex i(0, 1);
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    const int t = find_lambda(i * lambdas[s]);
    if (t < 0) continue;
    for (int n = 0; n < spec.nodes(); ++n) {
      worst = std::max(
          worst, (tau_group(frames[s][static_cast<std::size_t>(n)]) -
                  frames[static_cast<std::size_t>(t)][static_cast<std::size_t>(n)])
                     .norm());
    }
  }
  return worst;
}

std::vector<Complex> default_lambda_samples(int count) {
  std::vector<Complex> out(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    out[static_cast<std::size_t>(s)] = std::polar(1.0, 2.0 * M_PI * s / count);
  }
  out[0] = Complex(1, 0);
  return out;
}

std::vector<double> flatness_residual(const AField& a, Complex lambda) {
  const GridSpec& spec = a.spec;
  std::vector<double> out(static_cast<std::size_t>(spec.nodes()), 0.0);
  std::vector<CMat> fx(out.size()), fy(out.size());
  parallel_for(spec.nodes(), [&](int n) {
    fx[static_cast<std::size_t>(n)] = a.ax[static_cast<std::size_t>(n)].eval(lambda);
    fy[static_cast<std::size_t>(n)] = a.ay[static_cast<std::size_t>(n)].eval(lambda);
  });
  parallel_for(spec.ny, [&](int j) {
    if (j == 0 || j == spec.ny - 1) return;
    for (int i = 1; i < spec.nx - 1; ++i) {
      const CMat dx_ay =
          (fy[spec.index(i + 1, j)] - fy[spec.index(i - 1, j)]) / (2.0 * spec.hx);
      const CMat dy_ax =
          (fx[spec.index(i, j + 1)] - fx[spec.index(i, j - 1)]) / (2.0 * spec.hy);
      const CMat comm = bracket(fx[spec.index(i, j)], fy[spec.index(i, j)]);
      out[static_cast<std::size_t>(spec.index(i, j))] = (dx_ay - dy_ax + comm).norm();
    }
  });
  return out;
}

double max_flatness_residual(const AField& a, Complex lambda) {
  double worst = 0.0;
  for (double v : flatness_residual(a, lambda)) worst = std::max(worst, v);
  return worst;
}

std::vector<CMat> integrate_frame(const AField& a, Complex lambda,
                                  const FrameOptions& opt) {
  const GridSpec& spec = a.spec;
  if (std::abs(std::abs(lambda) - 1.0) > 1e-9) {
    throw Error("integrate_frame: lambda must lie on the unit circle");
  }
  if (opt.check_flatness) {
    const double flat = max_flatness_residual(a, lambda);
    if (flat >= opt.flatness_gate) {
      throw CurvatureTooLarge("integrate_frame: flatness residual " +
                              fmt_double(flat) + " exceeds gate " +
                              fmt_double(opt.flatness_gate));
    }
  }
  std::vector<CMat> fx(static_cast<std::size_t>(spec.nodes()));
  std::vector<CMat> fy(static_cast<std::size_t>(spec.nodes()));
  parallel_for(spec.nodes(), [&](int n) {
    fx[static_cast<std::size_t>(n)] = a.ax[static_cast<std::size_t>(n)].eval(lambda);
    fy[static_cast<std::size_t>(n)] = a.ay[static_cast<std::size_t>(n)].eval(lambda);
  });

  std::vector<CMat> frames(static_cast<std::size_t>(spec.nodes()), CMat::Identity());
  // Base row.
  for (int i = 0; i + 1 < spec.nx; ++i) {
    auto field = [&](int t) -> const CMat& {
      return fx[static_cast<std::size_t>(spec.index(t, 0))];
    };
    CMat next = rk4_frame_step(frames[static_cast<std::size_t>(spec.index(i, 0))],
                               field, i, spec.nx, spec.hx);
    if ((i + 1) % opt.reunitarize_every == 0) next = polar_unitarize(next);
    frames[static_cast<std::size_t>(spec.index(i + 1, 0))] = next;
  }
  // Columns, independent of each other.
  parallel_for(spec.nx, [&](int i) {
    for (int j = 0; j + 1 < spec.ny; ++j) {
      auto field = [&](int t) -> const CMat& {
        return fy[static_cast<std::size_t>(spec.index(i, t))];
      };
      CMat next = rk4_frame_step(frames[static_cast<std::size_t>(spec.index(i, j))],
                                 field, j, spec.ny, spec.hy);
      if ((j + 1) % opt.reunitarize_every == 0) next = polar_unitarize(next);
      frames[static_cast<std::size_t>(spec.index(i, j + 1))] = next;
    }
  });

  double worst = 0.0;
  for (const auto& f : frames) worst = std::max(worst, unitarity_residual(f));
  if (worst >= opt.unitarity_tol) {
    throw UnitarityDrift("integrate_frame: unitarity residual " + fmt_double(worst));
  }
  return frames;
}

FrameFamily integrate_frame_family(const AField& a, const std::vector<Complex>& lambdas,
                                   const FrameOptions& opt) {
  FrameFamily fam;
  fam.spec = a.spec;
  fam.lambdas = lambdas;
  fam.frames.resize(lambdas.size());
  // Independent ODEs per sample; columns already run in parallel inside.
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    fam.frames[s] = integrate_frame(a, lambdas[s], opt);
  }
  return fam;
}

namespace {

// Second-order derivative of a node-sampled vector field along one axis.
CVec3 axis_derivative(const std::vector<CVec3>& u, const GridSpec& spec, int i, int j,
                      int axis) {
  const int n = axis == 0 ? spec.nx : spec.ny;
  const double h = axis == 0 ? spec.hx : spec.hy;
  const int t = axis == 0 ? i : j;
  auto value = [&](int s) -> const CVec3& {
    return u[static_cast<std::size_t>(axis == 0 ? spec.index(s, j) : spec.index(i, s))];
  };
  if (n < 2) return CVec3::Zero();
  if (n == 2) return (value(1) - value(0)) / h;
  if (t == 0) return (-3.0 * value(0) + 4.0 * value(1) - value(2)) / (2.0 * h);
  if (t == n - 1) {
    return (3.0 * value(n - 1) - 4.0 * value(n - 2) + value(n - 3)) / (2.0 * h);
  }
  return (value(t + 1) - value(t - 1)) / (2.0 * h);
}

}  // namespace

ImmersionData extract_immersion(const FrameFamily& frames) {
  const GridSpec& spec = frames.spec;
  const auto& grid = frames.frames[static_cast<std::size_t>(frames.lambda_one())];
  ImmersionData data;
  data.spec = spec;
  data.allocate();

  std::vector<double> raw(static_cast<std::size_t>(spec.nodes()));
  for (int n = 0; n < spec.nodes(); ++n) {
    data.u_hat[static_cast<std::size_t>(n)] = grid[static_cast<std::size_t>(n)].col(2);
    raw[static_cast<std::size_t>(n)] =
        std::arg(grid[static_cast<std::size_t>(n)].determinant());
  }

  // Unwrap beta row-major from the origin: along row 0, then up each column,
  // choosing the branch nearest the already-unwrapped neighbor.
  auto unwrap = [&](double prev, double value, int i, int j) {
    double d = value - prev;
    d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
    if (std::abs(d) >= M_PI * (1.0 - 1e-12)) {
      throw GridTooCoarse("extract_immersion: beta jump ~pi at node (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
    }
    return prev + d;
  };
  data.beta[0] = raw[0];
  for (int i = 1; i < spec.nx; ++i) {
    data.beta[static_cast<std::size_t>(spec.index(i, 0))] =
        unwrap(data.beta[static_cast<std::size_t>(spec.index(i - 1, 0))],
               raw[static_cast<std::size_t>(spec.index(i, 0))], i, 0);
  }
  for (int i = 0; i < spec.nx; ++i) {
    for (int j = 1; j < spec.ny; ++j) {
      data.beta[static_cast<std::size_t>(spec.index(i, j))] =
          unwrap(data.beta[static_cast<std::size_t>(spec.index(i, j - 1))],
                 raw[static_cast<std::size_t>(spec.index(i, j))], i, j);
    }
  }

  auto& scale = data.residuals["conformal_scale"];
  auto& angle = data.residuals["conformal_angle"];
  scale.assign(static_cast<std::size_t>(spec.nodes()), 0.0);
  angle.assign(static_cast<std::size_t>(spec.nodes()), 0.0);
  parallel_for(spec.ny, [&](int j) {
    for (int i = 0; i < spec.nx; ++i) {
      const int n = spec.index(i, j);
      const CVec3 ux = axis_derivative(data.u_hat, spec, i, j, 0);
      const CVec3 uy = axis_derivative(data.u_hat, spec, i, j, 1);
      const double nx = ux.norm();
      if (nx > 1e-8) {
        data.rho[static_cast<std::size_t>(n)] = std::log(nx);
      } else {
        data.rho[static_cast<std::size_t>(n)] = 0.0;
        data.degenerate[static_cast<std::size_t>(n)] = 1;
      }
      scale[static_cast<std::size_t>(n)] = std::abs(nx - uy.norm());
      angle[static_cast<std::size_t>(n)] = std::abs(ux.dot(uy).real());
    }
  });
  return data;
}

std::vector<double> legendrian_residual(const ImmersionData& data) {
  const GridSpec& spec = data.spec;
  std::vector<double> out(static_cast<std::size_t>(spec.nodes()), 0.0);
  parallel_for(spec.ny, [&](int j) {
    for (int i = 0; i < spec.nx; ++i) {
      const CVec3& u = data.u_hat[static_cast<std::size_t>(spec.index(i, j))];
      const CVec3 ux = axis_derivative(data.u_hat, spec, i, j, 0);
      const CVec3 uy = axis_derivative(data.u_hat, spec, i, j, 1);
      out[static_cast<std::size_t>(spec.index(i, j))] =
          std::abs(u.dot(ux)) + std::abs(u.dot(uy));
    }
  });
  return out;
}

double max_legendrian_residual(const ImmersionData& data) {
  double worst = 0.0;
  for (double v : legendrian_residual(data)) worst = std::max(worst, v);
  return worst;
}

double harmonicity_residual(const std::vector<double>& beta, const GridSpec& spec) {
  double worst = 0.0;
  for (int j = 1; j < spec.ny - 1; ++j) {
    for (int i = 1; i < spec.nx - 1; ++i) {
      const double lap =
          (beta[static_cast<std::size_t>(spec.index(i + 1, j))] -
           2.0 * beta[static_cast<std::size_t>(spec.index(i, j))] +
           beta[static_cast<std::size_t>(spec.index(i - 1, j))]) /
              (spec.hx * spec.hx) +
          (beta[static_cast<std::size_t>(spec.index(i, j + 1))] -
           2.0 * beta[static_cast<std::size_t>(spec.index(i, j))] +
           beta[static_cast<std::size_t>(spec.index(i, j - 1))]) /
              (spec.hy * spec.hy);
      worst = std::max(worst, std::abs(lap));
    }
  }
  return worst;
}

BasedLoopData based_loop_transform(const FrameFamily& frames, const AField& a) {
  const GridSpec& spec = frames.spec;
  const auto& base = frames.frames[static_cast<std::size_t>(frames.lambda_one())];
  BasedLoopData out;
  out.spec = spec;
  out.lambdas = frames.lambdas;
  out.e.assign(frames.lambdas.size(),
               std::vector<CMat>(static_cast<std::size_t>(spec.nodes())));
  out.gamma_x.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());
  out.gamma_y.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());
  out.big_gamma_x = out.gamma_x;
  out.big_gamma_y = out.gamma_y;
  out.pi_perp.assign(static_cast<std::size_t>(spec.nodes()), CMat::Zero());

  for (std::size_t s = 0; s < frames.lambdas.size(); ++s) {
    parallel_for(spec.nodes(), [&](int n) {
      out.e[s][static_cast<std::size_t>(n)] =
          frames.frames[s][static_cast<std::size_t>(n)] *
          base[static_cast<std::size_t>(n)].adjoint();
    });
  }

  parallel_for(spec.nodes(), [&](int n) {
    const CMat& f = base[static_cast<std::size_t>(n)];
    // gamma = F (A_lambda - A_0) F^{-1}: conjugate coefficientwise and zero
    // out degree 0; Gamma additionally subtracts the lambda = 1 value there.
    LaurentLoop gx = a.ax[static_cast<std::size_t>(n)].conjugated_by_frame(f);
    LaurentLoop gy = a.ay[static_cast<std::size_t>(n)].conjugated_by_frame(f);
    gx.at(0) = CMat::Zero();
    gy.at(0) = CMat::Zero();
    LaurentLoop bx = gx, by = gy;
    bx.at(0) = -gx.eval(Complex(1, 0));
    by.at(0) = -gy.eval(Complex(1, 0));
    out.gamma_x[static_cast<std::size_t>(n)] = std::move(gx);
    out.gamma_y[static_cast<std::size_t>(n)] = std::move(gy);
    out.big_gamma_x[static_cast<std::size_t>(n)] = std::move(bx);
    out.big_gamma_y[static_cast<std::size_t>(n)] = std::move(by);
    out.pi_perp[static_cast<std::size_t>(n)] =
        f * structural::pi0_perp() * f.adjoint();
  });
  return out;
}

double BasedLoopData::tau_u_residual(const FrameFamily& frames) const {
  const auto& base = frames.frames[static_cast<std::size_t>(frames.lambda_one())];
  const Complex i(0, 1);
  double worst = 0.0;
  for (int n = 0; n < spec.nodes(); ++n) {
    const CMat& f = base[static_cast<std::size_t>(n)];
    const CMat fi = f.adjoint();
    auto tau_u = [&](const CMat& m) { return f * tau_alg(fi * m * f) * fi; };
    for (const Complex& l : lambdas) {
      const CMat gx = gamma_x[static_cast<std::size_t>(n)].eval(l);
      const CMat gx_il = gamma_x[static_cast<std::size_t>(n)].eval(i * l);
      const CMat gy = gamma_y[static_cast<std::size_t>(n)].eval(l);
      const CMat gy_il = gamma_y[static_cast<std::size_t>(n)].eval(i * l);
      worst = std::max(worst, (tau_u(gx) - gx_il).norm());
      worst = std::max(worst, (tau_u(gy) - gy_il).norm());
    }
  }
  return worst;
}

std::pair<LaurentLoop, double> conserved_loop(const FrameFamily& frames,
                                              const StateGrid& grid) {
  const GridSpec& spec = frames.spec;
  const LaurentLoop origin = grid.at(0, 0);
  std::vector<double> worst_per_sample(frames.lambdas.size(), 0.0);
  parallel_for(static_cast<int>(frames.lambdas.size()), [&](int s) {
    const Complex lambda = frames.lambdas[static_cast<std::size_t>(s)];
    const CMat xi0 = origin.eval(lambda);
    double worst = 0.0;
    for (int n = 0; n < spec.nodes(); ++n) {
      // eta0 = E (F xi F^{-1}) E^{-1} collapses to F_lambda xi F_lambda^{-1}.
      const CMat& fl = frames.frames[static_cast<std::size_t>(s)][static_cast<std::size_t>(n)];
      const CMat eta0 =
          fl * grid.states[static_cast<std::size_t>(n)].eval(lambda) * fl.adjoint();
      worst = std::max(worst, (eta0 - xi0).norm());
    }
    worst_per_sample[static_cast<std::size_t>(s)] = worst;
  });
  double drift = 0.0;
  for (double v : worst_per_sample) drift = std::max(drift, v);
  return {origin, drift};
}

double periodicity_defect(const FrameFamily& frames, int sample, int shift) {
  const GridSpec& spec = frames.spec;
  if (shift <= 0 || shift >= spec.nx) throw Error("periodicity_defect: bad shift");
  const auto& grid = frames.frames[static_cast<std::size_t>(sample)];
  const CMat m = grid[static_cast<std::size_t>(spec.index(shift, 0))];
  double worst = 0.0;
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i + shift < spec.nx; ++i) {
      worst = std::max(
          worst, (grid[static_cast<std::size_t>(spec.index(i + shift, j))] -
                  grid[static_cast<std::size_t>(spec.index(i, j))] * m)
                     .norm());
    }
  }
  return worst;
}

GaugeResult gauge_to_finite_type(const FrameFamily& frames, const StateGrid& grid,
                                 const AField& a, const GaugeOptions& opt) {
  const GridSpec& spec = grid.spec;
  const int p = grid.p;
  const int theta_band = 2 + 8 * p;
  const int k_cut = opt.truncation > 0 ? opt.truncation : 8 * p + 4;
  const auto& base = frames.frames[static_cast<std::size_t>(frames.lambda_one())];

  GaugeResult out;

  // Gate: the defect B = (l^{4p} xi dz)_{su} - A must be a plain
  // u(3)^C_0-valued 1-form (degree 0 only, eigenspace 0).
  {
    double defect = 0.0, stray = 0.0;
    for (int n = 0; n < spec.nodes(); ++n) {
      const LaxState s{p, grid.states[static_cast<std::size_t>(n)]};
      auto [lx, ly] = connection_from_state(s);
      const LaurentLoop bx = lx - a.ax[static_cast<std::size_t>(n)];
      const LaurentLoop by = ly - a.ay[static_cast<std::size_t>(n)];
      defect = std::max(defect, std::max(bx.norm(), by.norm()));
      double sx = bx.out_of_band_mass(0, 0) + eigenspace_residual(bx.coeff(0), 0);
      double sy = by.out_of_band_mass(0, 0) + eigenspace_residual(by.coeff(0), 0);
      stray = std::max(stray, std::max(sx, sy));
    }
    out.defect_size = defect;
    if (stray >= opt.quasi_gate) {
      throw InvariantDrift("gauge_to_finite_type: defect is not u(3)^C_0-valued, " +
                           fmt_double(stray));
    }
  }

  // Theta = plus part (based splitting) of l^{4p} eta dz, eta = F xi F^{-1}.
  std::vector<LaurentLoop> theta_x(static_cast<std::size_t>(spec.nodes()));
  std::vector<LaurentLoop> theta_y(static_cast<std::size_t>(spec.nodes()));
  double tail = 0.0;
  parallel_for(spec.nodes(), [&](int n) {
    const CMat& f = base[static_cast<std::size_t>(n)];
    const LaurentLoop eta =
        grid.states[static_cast<std::size_t>(n)].conjugated_by_frame(f);
    LaurentLoop sx = eta.shifted(4 * p);
    LaurentLoop sy = sx;
    sy *= Complex(0, 1);
    theta_x[static_cast<std::size_t>(n)] = project_lambda_plus_based(sx);
    theta_y[static_cast<std::size_t>(n)] = project_lambda_plus_based(sy);
  });
  for (const auto& t : theta_x) tail = std::max(tail, t.out_of_band_mass(0, k_cut));
  for (const auto& t : theta_y) tail = std::max(tail, t.out_of_band_mass(0, k_cut));
  if (tail > opt.tail_tol) {
    throw TruncationError("gauge_to_finite_type: Theta tail above lambda^" +
                          std::to_string(k_cut) + " has mass " + fmt_double(tail) +
                          "; raise the truncation (band is " +
                          std::to_string(theta_band) + ")");
  }
  parallel_for(spec.nodes(), [&](int n) {
    theta_x[static_cast<std::size_t>(n)] =
        theta_x[static_cast<std::size_t>(n)].truncated(0, k_cut);
    theta_y[static_cast<std::size_t>(n)] =
        theta_y[static_cast<std::size_t>(n)].truncated(0, k_cut);
  });

  // Integrate dV = Theta V with V(origin) = Id, RK4 row-then-columns.
  std::vector<LaurentLoop> v(static_cast<std::size_t>(spec.nodes()));
  {
    LaurentLoop id(0, k_cut);
    id.at(0) = CMat::Identity();
    v[0] = id;
    auto rk4_loop_step = [&](const LaurentLoop& state, auto field, int t, int n,
                             double h) {
      const LaurentLoop t0 = field(t);
      const LaurentLoop tm = interp_midpoint<LaurentLoop>(field, t, n);
      const LaurentLoop t1 = field(t + 1);
      const LaurentLoop k1 = mul_clamped(t0, state, 0, k_cut);
      const LaurentLoop k2 =
          mul_clamped(tm, state + Complex(h / 2, 0) * k1, 0, k_cut);
      const LaurentLoop k3 =
          mul_clamped(tm, state + Complex(h / 2, 0) * k2, 0, k_cut);
      const LaurentLoop k4 = mul_clamped(t1, state + Complex(h, 0) * k3, 0, k_cut);
      LaurentLoop next = state;
      next += Complex(h / 6, 0) * k1;
      next += Complex(h / 3, 0) * k2;
      next += Complex(h / 3, 0) * k3;
      next += Complex(h / 6, 0) * k4;
      return next;
    };
    for (int i = 0; i + 1 < spec.nx; ++i) {
      auto field = [&](int t) -> const LaurentLoop& {
        return theta_x[static_cast<std::size_t>(spec.index(t, 0))];
      };
      v[static_cast<std::size_t>(spec.index(i + 1, 0))] = rk4_loop_step(
          v[static_cast<std::size_t>(spec.index(i, 0))], field, i, spec.nx, spec.hx);
    }
    parallel_for(spec.nx, [&](int i) {
      for (int j = 0; j + 1 < spec.ny; ++j) {
        auto field = [&](int t) -> const LaurentLoop& {
          return theta_y[static_cast<std::size_t>(spec.index(i, t))];
        };
        v[static_cast<std::size_t>(spec.index(i, j + 1))] =
            rk4_loop_step(v[static_cast<std::size_t>(spec.index(i, j))], field, j,
                          spec.ny, spec.hy);
      }
    });
  }

  // Pointwise Iwasawa of W0 = F^{-1} V0: W0 = G B0 with G in U(3)_0.
  out.gauge.assign(static_cast<std::size_t>(spec.nodes()), CMat::Identity());
  double offblock = 0.0;
  for (int n = 0; n < spec.nodes(); ++n) {
    const CMat w0 =
        base[static_cast<std::size_t>(n)].adjoint() * v[static_cast<std::size_t>(n)].coeff(0);
    // W0 must sit in U(3)^C_0: third row/column zero except a unit corner.
    const double off =
        std::sqrt(std::norm(w0(0, 2)) + std::norm(w0(1, 2)) + std::norm(w0(2, 0)) +
                  std::norm(w0(2, 1)) + std::norm(w0(2, 2) - Complex(1, 0)));
    offblock = std::max(offblock, off);
    CMat2 g = w0.topLeftCorner<2, 2>();
    const Complex det = g.determinant();
    if (std::abs(det - Complex(1, 0)) > opt.det_tol) {
      throw IwasawaFailure("gauge_to_finite_type: W0 block det drifted to " +
                           fmt_double(std::abs(det)));
    }
    g /= std::sqrt(det);
    const IwasawaSU2 iw = iwasawa_group_su2(g, 1e-9);
    out.gauge[static_cast<std::size_t>(n)] = embed2(iw.f, 1.0);
  }
  out.w0_offblock = offblock;

  // Gauge the frames, the states and the connection.
  out.frames.spec = spec;
  out.frames.lambdas = frames.lambdas;
  out.frames.frames.assign(frames.lambdas.size(),
                           std::vector<CMat>(static_cast<std::size_t>(spec.nodes())));
  for (std::size_t s = 0; s < frames.lambdas.size(); ++s) {
    parallel_for(spec.nodes(), [&](int n) {
      out.frames.frames[s][static_cast<std::size_t>(n)] =
          frames.frames[s][static_cast<std::size_t>(n)] *
          out.gauge[static_cast<std::size_t>(n)];
    });
  }
  out.states.spec = spec;
  out.states.p = p;
  out.states.states.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());
  parallel_for(spec.nodes(), [&](int n) {
    out.states.states[static_cast<std::size_t>(n)] =
        grid.states[static_cast<std::size_t>(n)].conjugated(
            out.gauge[static_cast<std::size_t>(n)]);
    out.states.states[static_cast<std::size_t>(n)].mark_real().mark_twisted();
  });

  // A^G = G^{-1} A G + G^{-1} dG, dG with 4th-order stencils (one-sided near
  // the boundary).
  auto dgauge = [&](int i, int j, int axis) -> CMat {
    const int n_axis = axis == 0 ? spec.nx : spec.ny;
    const double h = axis == 0 ? spec.hx : spec.hy;
    const int t = axis == 0 ? i : j;
    auto g = [&](int s) -> const CMat& {
      return out.gauge[static_cast<std::size_t>(axis == 0 ? spec.index(s, j)
                                                          : spec.index(i, s))];
    };
    if (n_axis < 5) {
      if (t == 0) return (g(std::min(1, n_axis - 1)) - g(0)) / h;
      return (g(t) - g(t - 1)) / h;
    }
    if (t >= 2 && t <= n_axis - 3) {
      return (-g(t + 2) + 8.0 * g(t + 1) - 8.0 * g(t - 1) + g(t - 2)) / (12.0 * h);
    }
    // 4th-order one-sided stencils at the two boundary layers.
    const int dir = t < 2 ? 1 : -1;
    const int o = t;
    const double s = dir * h;
    return (-25.0 * g(o) + 48.0 * g(o + dir) - 36.0 * g(o + 2 * dir) +
            16.0 * g(o + 3 * dir) - 3.0 * g(o + 4 * dir)) /
           (12.0 * s);
  };
  out.a.spec = spec;
  out.a.ax.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());
  out.a.ay.assign(static_cast<std::size_t>(spec.nodes()), LaurentLoop());
  parallel_for(spec.ny, [&](int j) {
    for (int i = 0; i < spec.nx; ++i) {
      const int n = spec.index(i, j);
      const CMat& g = out.gauge[static_cast<std::size_t>(n)];
      LaurentLoop ax = a.ax[static_cast<std::size_t>(n)].conjugated(g);
      LaurentLoop ay = a.ay[static_cast<std::size_t>(n)].conjugated(g);
      ax.at(0) += g.adjoint() * dgauge(i, j, 0);
      ay.at(0) += g.adjoint() * dgauge(i, j, 1);
      out.a.ax[static_cast<std::size_t>(n)] = std::move(ax);
      out.a.ay[static_cast<std::size_t>(n)] = std::move(ay);
    }
  });

  // Postcondition: (l^{4p} xi^G dz)_{su} = A^G on the interior.
  double post = 0.0;
  for (int j = 2; j < spec.ny - 2; ++j) {
    for (int i = 2; i < spec.nx - 2; ++i) {
      const int n = spec.index(i, j);
      const LaxState s{p, out.states.states[static_cast<std::size_t>(n)]};
      auto [lx, ly] = connection_from_state(s);
      post = std::max(post, (lx - out.a.ax[static_cast<std::size_t>(n)]).norm());
      post = std::max(post, (ly - out.a.ay[static_cast<std::size_t>(n)]).norm());
    }
  }
  out.postcondition_residual = post;
  return out;
}

}  // namespace loopflow
