#include "loopflow/killing.hpp"

#include <cmath>

#include "loopflow/errors.hpp"

namespace loopflow {

std::pair<CMat, CMat> v_decompose(const CMat& m) {
  CMat v = CMat::Zero(), vp = CMat::Zero();
  v.topLeftCorner<2, 2>() = m.topLeftCorner<2, 2>();
  v(2, 2) = m(2, 2);
  vp(0, 2) = m(0, 2);
  vp(1, 2) = m(1, 2);
  vp(2, 0) = m(2, 0);
  vp(2, 1) = m(2, 1);
  return {v, vp};
}

ConnectionData ConnectionData::constant(const CMat& x, const CMat& c, Complex a,
                                        const GridSpec& spec) {
  ConnectionData conn;
  conn.spec = spec;
  conn.a = a;
  conn.x.assign(static_cast<std::size_t>(spec.nodes()), x);
  conn.c.assign(static_cast<std::size_t>(spec.nodes()), c);
  return conn;
}

ConnectionData ConnectionData::from_states(const StateGrid& grid, double tol) {
  ConnectionData conn;
  conn.spec = grid.spec;
  conn.x.resize(static_cast<std::size_t>(grid.spec.nodes()));
  conn.c.resize(static_cast<std::size_t>(grid.spec.nodes()));
  const Complex i(0, 1);
  for (int n = 0; n < grid.spec.nodes(); ++n) {
    const LaxState s{grid.p, grid.states[static_cast<std::size_t>(n)]};
    auto [ax, ay] = connection_from_state(s);
    LaurentLoop adz = ax;
    adz -= i * ay;
    adz *= Complex(0.5, 0);
    conn.x[static_cast<std::size_t>(n)] = adz.coeff(-1);
    conn.c[static_cast<std::size_t>(n)] = adz.coeff(0);
    const Complex a_here = adz.coeff(-2)(0, 0) / i;
    if (n == 0) {
      conn.a = a_here;
    } else if (std::abs(a_here - conn.a) > tol) {
      throw InvariantDrift("ConnectionData: a is not constant over the grid");
    }
  }
  return conn;
}

std::pair<LaurentLoop, LaurentLoop> ConnectionData::connection_loops(int node) const {
  const Complex i(0, 1);
  const CMat top = i * a * structural::pi0_perp();
  const CMat& xx = x[static_cast<std::size_t>(node)];
  const CMat& cc = c[static_cast<std::size_t>(node)];
  LaurentLoop ax(-2, 2), ay(-2, 2);
  // A = l^{-2} ia pi0 dz + l^{-1} X dz + C dz - C^dag dzbar - l X^dag dzbar
  //     + l^2 i conj(a) pi0 dzbar, evaluated on d/dx (dz, dzbar -> 1) and
  //     d/dy (dz -> i, dzbar -> -i).
  ax.at(-2) = top;
  ax.at(-1) = xx;
  ax.at(0) = cc - cc.adjoint();
  ax.at(1) = -xx.adjoint();
  ax.at(2) = -top.adjoint();
  ay.at(-2) = i * top;
  ay.at(-1) = i * xx;
  ay.at(0) = i * (cc + cc.adjoint());
  ay.at(1) = i * xx.adjoint();
  ay.at(2) = i * top.adjoint();
  ax.mark_real().mark_twisted();
  ay.mark_real().mark_twisted();
  return {ax, ay};
}

double ConnectionData::eigenspace_res() const {
  double worst = 0.0;
  for (const auto& m : x) worst = std::max(worst, eigenspace_residual(m, -1));
  for (const auto& m : c) worst = std::max(worst, eigenspace_residual(m, 0));
  return worst;
}

namespace {

// Grid derivatives of matrix fields. Central: 2nd order with one-sided
// boundary stencils. CentralPeriodic: wraparound (grid excludes the repeated
// endpoint). Spectral: trigonometric-interpolation derivative, also periodic.
class GridDeriv {
 public:
  GridDeriv(const GridSpec& spec, DerivScheme scheme) : spec_(spec), scheme_(scheme) {
    if (scheme_ == DerivScheme::Spectral) {
      wx_ = spectral_weights(spec_.nx, spec_.hx);
      wy_ = spectral_weights(spec_.ny, spec_.hy);
    }
  }

  CMat axis(const std::vector<CMat>& f, int i, int j, int ax) const {
    const int n = ax == 0 ? spec_.nx : spec_.ny;
    const double h = ax == 0 ? spec_.hx : spec_.hy;
    const int t = ax == 0 ? i : j;
    auto value = [&](int s) -> const CMat& {
      return f[static_cast<std::size_t>(ax == 0 ? spec_.index(s, j)
                                                : spec_.index(i, s))];
    };
    if (n < 2) return CMat::Zero();
    switch (scheme_) {
      case DerivScheme::Central: {
        if (n == 2) return (value(1) - value(0)) / h;
        if (t == 0) return (-3.0 * value(0) + 4.0 * value(1) - value(2)) / (2.0 * h);
        if (t == n - 1) {
          return (3.0 * value(n - 1) - 4.0 * value(n - 2) + value(n - 3)) / (2.0 * h);
        }
        return (value(t + 1) - value(t - 1)) / (2.0 * h);
      }
      case DerivScheme::CentralPeriodic:
        return (value((t + 1) % n) - value((t - 1 + n) % n)) / (2.0 * h);
      case DerivScheme::Spectral: {
        const auto& w = ax == 0 ? wx_ : wy_;
        CMat acc = CMat::Zero();
        for (int d = 1; d < n; ++d) {
          acc += w[static_cast<std::size_t>(d)] * value((t + d) % n);
        }
        return acc;
      }
    }
    return CMat::Zero();
  }

  std::vector<CMat> apply_axis(const std::vector<CMat>& f, int ax) const {
    std::vector<CMat> out(f.size(), CMat::Zero());
    parallel_for(spec_.ny, [&](int j) {
      for (int i = 0; i < spec_.nx; ++i) {
        out[static_cast<std::size_t>(spec_.index(i, j))] = axis(f, i, j, ax);
      }
    });
    return out;
  }

  /// d/dz = (d/dx - i d/dy)/2.
  std::vector<CMat> apply_dz(const std::vector<CMat>& f) const {
    std::vector<CMat> out(f.size(), CMat::Zero());
    const Complex im(0, 1);
    parallel_for(spec_.ny, [&](int j) {
      for (int i = 0; i < spec_.nx; ++i) {
        out[static_cast<std::size_t>(spec_.index(i, j))] =
            (axis(f, i, j, 0) - im * axis(f, i, j, 1)) / 2.0;
      }
    });
    return out;
  }

 private:
  // Weight of the node d steps to the right (mod n) in the derivative at a
  // node; antisymmetric displacement weights of the trigonometric derivative.
  static std::vector<double> spectral_weights(int n, double h) {
    std::vector<double> w(static_cast<std::size_t>(std::max(n, 1)), 0.0);
    if (n < 2) return w;
    const double scale = 2.0 * M_PI / (n * h);
    for (int d = 1; d < n; ++d) {
      const double arg = M_PI * d / n;
      const double sign = (d % 2 == 0) ? -0.5 : 0.5;  // -1/2 (-1)^d
      const double v = (n % 2 == 0) ? sign / std::tan(arg) : sign / std::sin(arg);
      w[static_cast<std::size_t>(d)] = scale * v;
    }
    return w;
  }

  GridSpec spec_;
  DerivScheme scheme_;
  std::vector<double> wx_, wy_;
};

bool grids_constant(const ConnectionData& conn) {
  for (std::size_t n = 1; n < conn.x.size(); ++n) {
    if ((conn.x[n] - conn.x[0]).norm() != 0.0) return false;
    if ((conn.c[n] - conn.c[0]).norm() != 0.0) return false;
  }
  return true;
}

}  // namespace

std::vector<CMat> z_derivative(const std::vector<CMat>& field, const GridSpec& spec,
                               DerivScheme scheme) {
  return GridDeriv(spec, scheme).apply_dz(field);
}

KillingSeries killing_recursion(const ConnectionData& conn, int n,
                                const KillingOptions& opt) {
  if (std::abs(conn.a) < 1e-14) {
    throw ZeroAngleDerivative("killing_recursion: a = 0 (minimal sector)");
  }
  if (n < 1) throw Error("killing_recursion: order must be >= 1");
  const GridSpec& spec = conn.spec;
  const int nodes = spec.nodes();
  const int stored = n + 3;  // W_0 .. W_{n+2}

  KillingSeries series;
  series.spec = spec;
  series.a = conn.a;
  series.order = n;
  series.w.assign(static_cast<std::size_t>(stored),
                  std::vector<CMat>(static_cast<std::size_t>(nodes), CMat::Zero()));

  const Complex ia_inv = Complex(0, 1) / conn.a;
  const CMat& pi0 = structural::pi0_perp();

  parallel_for(nodes, [&](int node) {
    series.w[1][static_cast<std::size_t>(node)] =
        -ia_inv * bracket(pi0, conn.x[static_cast<std::size_t>(node)]);
  });

  const GridDeriv deriv(spec, conn.scheme);
  const bool constant = grids_constant(conn);
  for (int order = 2; order < stored; ++order) {
    std::vector<CMat> dz_prev;
    if (!constant) dz_prev = deriv.apply_dz(series.w[static_cast<std::size_t>(order - 2)]);
    parallel_for(nodes, [&](int node) {
      const std::size_t nn = static_cast<std::size_t>(node);
      CMat acc = CMat::Zero();
      for (int k = 1; k <= order - 2; ++k) {  // W_0 = 0 kills the k=0 and k=order-1 terms
        acc += series.w[static_cast<std::size_t>(k)][nn] * conn.x[nn] *
               series.w[static_cast<std::size_t>(order - 1 - k)][nn];
      }
      acc += bracket(conn.c[nn], series.w[static_cast<std::size_t>(order - 2)][nn]);
      if (!constant) acc += dz_prev[nn];
      series.w[static_cast<std::size_t>(order)][nn] = ia_inv * bracket(pi0, acc);
    });
  }

  if (opt.noise_probe && n >= 12) {
    KillingSeries shallow = series;
    shallow.order = n - 4;
    shallow.w.resize(static_cast<std::size_t>(n - 1));
    const int probe_deg = n - 10;
    const double deep = killing_residual_upto(series, conn, probe_deg);
    const double low = killing_residual_upto(shallow, conn, probe_deg);
    if (deep > 1e-12 && deep > 2.0 * low + 1e-13) {
      throw GridTooCoarse("killing_recursion: low-degree residual grows with the "
                          "truncation order (" + fmt_double(low) + " -> " +
                          fmt_double(deep) + "); refine the grid");
    }
  }
  return series;
}

LaurentLoop KillingSeries::y_loop(int node, int max_degree) const {
  const int avail = stored_orders() - 1;  // highest stored W index
  const int top = std::min(max_degree, avail - 2);
  const std::size_t nn = static_cast<std::size_t>(node);
  const int terms = top + 2;
  // Degreewise geometric-series inverse: T_0 = Id, T_m = -sum_j W_j T_{m-j}.
  std::vector<CMat> t(static_cast<std::size_t>(terms + 1), CMat::Zero());
  t[0] = CMat::Identity();
  for (int m = 1; m <= terms; ++m) {
    CMat acc = CMat::Zero();
    for (int j = 1; j <= std::min(m, avail); ++j) {
      acc += w[static_cast<std::size_t>(j)][nn] * t[static_cast<std::size_t>(m - j)];
    }
    t[static_cast<std::size_t>(m)] = -acc;
  }
  const CMat core = Complex(0, 1) * a * structural::pi0_perp();
  LaurentLoop y(-2, top);
  for (int m = 0; m <= terms; ++m) {
    CMat acc = CMat::Zero();
    for (int r = 0; r <= m; ++r) {
      const int s = m - r;
      if (s > avail) continue;
      const CMat right = s == 0 ? core : CMat(core * w[static_cast<std::size_t>(s)][nn]);
      acc += t[static_cast<std::size_t>(r)] * right;
    }
    if (m - 2 <= top) y.at(m - 2) = acc;
  }
  y.mark_twisted();
  return y;
}

double KillingSeries::twist_res() const {
  double worst = 0.0;
  for (int order = 0; order < stored_orders(); ++order) {
    for (const auto& m : w[static_cast<std::size_t>(order)]) {
      worst = std::max(worst, eigenspace_residual(m, ((order % 4) + 4) % 4));
    }
  }
  return worst;
}

double KillingSeries::vperp_res() const {
  double worst = 0.0;
  for (const auto& grid : w) {
    for (const auto& m : grid) worst = std::max(worst, v_decompose(m).first.norm());
  }
  return worst;
}

namespace {

double residual_impl(const KillingSeries& series, const ConnectionData& conn,
                     int max_degree) {
  const GridSpec& spec = series.spec;
  const int nodes = spec.nodes();
  // The bracket at degree k needs Y through k+2; clamp to what is stored.
  const int top = std::min(max_degree, series.stored_orders() - 5);
  const int lo = -2;

  std::vector<LaurentLoop> y(static_cast<std::size_t>(nodes));
  parallel_for(nodes, [&](int node) {
    y[static_cast<std::size_t>(node)] = series.y_loop(node, top + 2);
  });

  const bool constant = grids_constant(conn);
  const GridDeriv deriv(spec, conn.scheme);
  std::vector<std::vector<CMat>> dx_deg, dy_deg;
  if (!constant) {
    for (int k = lo; k <= top; ++k) {
      std::vector<CMat> grid(static_cast<std::size_t>(nodes));
      for (int node = 0; node < nodes; ++node) {
        grid[static_cast<std::size_t>(node)] =
            y[static_cast<std::size_t>(node)].coeff(k);
      }
      dx_deg.push_back(deriv.apply_axis(grid, 0));
      dy_deg.push_back(deriv.apply_axis(grid, 1));
    }
  }

  // Nested one-sided stencils lose an order per recursion level near the
  // boundary, so on non-periodic varying grids the max excludes a collar of
  // width order-2; this keeps the reported residual second order. Periodic
  // schemes and constant grids have no boundary layer.
  int margin = 0;
  if (!constant && conn.scheme == DerivScheme::Central) {
    margin = std::max(1, series.order - 2);
    margin = std::min({margin, (spec.nx - 1) / 2, (spec.ny - 1) / 2});
  }
  std::vector<double> worst_rows(static_cast<std::size_t>(spec.ny), 0.0);
  parallel_for(spec.ny, [&](int j) {
    if (j < margin || j >= spec.ny - margin) return;
    double worst = 0.0;
    for (int i = margin; i < spec.nx - margin; ++i) {
      const int node = spec.index(i, j);
      auto [ax, ay] = conn.connection_loops(node);
      const LaurentLoop bx = bracket_loop(y[static_cast<std::size_t>(node)], ax);
      const LaurentLoop by = bracket_loop(y[static_cast<std::size_t>(node)], ay);
      for (int k = -4; k <= top; ++k) {
        CMat rx = -bx.coeff(k);
        CMat ry = -by.coeff(k);
        if (!constant && k >= lo) {
          rx += dx_deg[static_cast<std::size_t>(k - lo)][static_cast<std::size_t>(node)];
          ry += dy_deg[static_cast<std::size_t>(k - lo)][static_cast<std::size_t>(node)];
        }
        worst = std::max(worst, std::max(rx.norm(), ry.norm()));
      }
    }
    worst_rows[static_cast<std::size_t>(j)] = worst;
  });
  double worst = 0.0;
  for (double v : worst_rows) worst = std::max(worst, v);
  return worst;
}

}  // namespace

double killing_residual(const KillingSeries& series, const ConnectionData& conn) {
  return residual_impl(series, conn, series.order - 2);
}

double killing_residual_upto(const KillingSeries& series, const ConnectionData& conn,
                             int max_degree) {
  return residual_impl(series, conn, max_degree);
}

PolynomialCandidate polynomial_candidate(const std::vector<Complex>& p,
                                         const KillingSeries& series,
                                         const ConnectionData& conn) {
  if (p.empty()) throw Error("polynomial_candidate: empty polynomial");
  const int deg_p = static_cast<int>(p.size()) - 1;
  if (4 * deg_p > series.order - 2) {
    throw TruncationTooShallow("polynomial_candidate: need deg P <= (N-2)/4");
  }
  const GridSpec& spec = series.spec;
  const int nodes = spec.nodes();

  PolynomialCandidate out;
  out.spec = spec;
  out.z_leq.assign(static_cast<std::size_t>(nodes), LaurentLoop());
  for (auto& grid : out.r_dz) grid.assign(static_cast<std::size_t>(nodes), CMat::Zero());
  for (auto& grid : out.r_dzbar) grid.assign(static_cast<std::size_t>(nodes), CMat::Zero());

  const int zlo = -2 - 4 * deg_p;
  std::vector<CMat> z_m1(static_cast<std::size_t>(nodes)), z_0(static_cast<std::size_t>(nodes));
  parallel_for(nodes, [&](int node) {
    const LaurentLoop y = series.y_loop(node, 4 * deg_p);
    LaurentLoop z(zlo, 0);
    for (int k = zlo; k <= 0; ++k) {
      CMat acc = CMat::Zero();
      for (int j = 0; j <= deg_p; ++j) {
        acc += p[static_cast<std::size_t>(j)] * y.coeff(k + 4 * j);
      }
      z.at(k) = acc;
    }
    out.z_leq[static_cast<std::size_t>(node)] = z;
    z_m1[static_cast<std::size_t>(node)] = z.coeff(-1);
    z_0[static_cast<std::size_t>(node)] = z.coeff(0);
  });

  // Closed route, using only Z_{-1} and Z_0:
  //   R(dz)    = l^{-1}( dz Z_{-1} + [X, Z_0] + [C, Z_{-1}] ) + ( dz Z_0 + [C, Z_0] )
  //   R(dzbar) = l( [-X^dag, Z_0] + [i conj(a) pi0, Z_{-1}] ) + l^2 [i conj(a) pi0, Z_0].
  const GridDeriv deriv(spec, conn.scheme);
  const bool constant = grids_constant(conn);
  std::vector<CMat> dz_zm1, dz_z0;
  if (!constant) {
    dz_zm1 = deriv.apply_dz(z_m1);
    dz_z0 = deriv.apply_dz(z_0);
  }
  const Complex i(0, 1);
  const CMat a2bar = i * std::conj(conn.a) * structural::pi0_perp();
  parallel_for(nodes, [&](int node) {
    const std::size_t nn = static_cast<std::size_t>(node);
    out.r_dz[0][nn] = bracket(conn.x[nn], z_0[nn]) + bracket(conn.c[nn], z_m1[nn]);
    out.r_dz[1][nn] = bracket(conn.c[nn], z_0[nn]);
    if (!constant) {
      out.r_dz[0][nn] += dz_zm1[nn];
      out.r_dz[1][nn] += dz_z0[nn];
    }
    out.r_dzbar[2][nn] = bracket(CMat(-conn.x[nn].adjoint()), z_0[nn]) +
                         bracket(a2bar, z_m1[nn]);
    out.r_dzbar[3][nn] = bracket(a2bar, z_0[nn]);
  });

  // Direct route: R = d(Z_<=) + [A, Z_<=], grid derivatives coefficientwise.
  std::vector<std::vector<CMat>> zcoef(static_cast<std::size_t>(1 - zlo));
  std::vector<std::vector<CMat>> dzx(zcoef.size()), dzy(zcoef.size());
  for (int k = zlo; k <= 0; ++k) {
    auto& grid = zcoef[static_cast<std::size_t>(k - zlo)];
    grid.resize(static_cast<std::size_t>(nodes));
    for (int node = 0; node < nodes; ++node) {
      grid[static_cast<std::size_t>(node)] =
          out.z_leq[static_cast<std::size_t>(node)].coeff(k);
    }
    if (!constant) {
      dzx[static_cast<std::size_t>(k - zlo)] = deriv.apply_axis(grid, 0);
      dzy[static_cast<std::size_t>(k - zlo)] = deriv.apply_axis(grid, 1);
    }
  }

  const bool periodic = conn.scheme != DerivScheme::Central;
  int margin = 1;
  if (!constant && !periodic) {
    margin = std::max(1, series.order - 2);
    margin = std::min({margin, (spec.nx - 1) / 2, (spec.ny - 1) / 2});
  }
  std::vector<double> agree_rows(static_cast<std::size_t>(spec.ny), 0.0);
  std::vector<double> stray_rows(static_cast<std::size_t>(spec.ny), 0.0);
  parallel_for(spec.ny, [&](int j) {
    double la = 0.0, ls = 0.0;
    for (int ii = 0; ii < spec.nx; ++ii) {
      const int node = spec.index(ii, j);
      const std::size_t nn = static_cast<std::size_t>(node);
      auto [ax, ay] = conn.connection_loops(node);
      LaurentLoop rx = bracket_loop(ax, out.z_leq[nn]);
      LaurentLoop ry = bracket_loop(ay, out.z_leq[nn]);
      if (!constant) {
        for (int k = zlo; k <= 0; ++k) {
          rx.at(k) += dzx[static_cast<std::size_t>(k - zlo)][nn];
          ry.at(k) += dzy[static_cast<std::size_t>(k - zlo)][nn];
        }
      }
      const LaurentLoop rdz = Complex(0.5, 0) * (rx - i * ry);
      const LaurentLoop rdzbar = Complex(0.5, 0) * (rx + i * ry);
      const bool inside = periodic || constant || spec.interior(ii, j, margin);
      if (inside) {
        la = std::max(la, (rdz.coeff(-1) - out.r_dz[0][nn]).norm());
        la = std::max(la, (rdz.coeff(0) - out.r_dz[1][nn]).norm());
        la = std::max(la, (rdzbar.coeff(1) - out.r_dzbar[2][nn]).norm());
        la = std::max(la, (rdzbar.coeff(2) - out.r_dzbar[3][nn]).norm());
        ls = std::max(ls, rx.out_of_band_mass(-1, 2));
        ls = std::max(ls, ry.out_of_band_mass(-1, 2));
      }
    }
    agree_rows[static_cast<std::size_t>(j)] = la;
    stray_rows[static_cast<std::size_t>(j)] = ls;
  });
  for (double v : agree_rows) out.two_route_agreement = std::max(out.two_route_agreement, v);
  for (double v : stray_rows) out.out_of_band_mass = std::max(out.out_of_band_mass, v);
  for (int d = 0; d < 4; ++d) {
    for (int node = 0; node < nodes; ++node) {
      out.max_r_norm = std::max(
          out.max_r_norm,
          out.r_dz[static_cast<std::size_t>(d)][static_cast<std::size_t>(node)].norm());
      out.max_r_norm = std::max(
          out.max_r_norm,
          out.r_dzbar[static_cast<std::size_t>(d)][static_cast<std::size_t>(node)].norm());
    }
  }
  return out;
}

}  // namespace loopflow
