#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "loopflow/loop.hpp"
#include "loopflow/util.hpp"

namespace loopflow {

/// A point of Lambda^{2+4p} u(3)_tau: a real, twisted Laurent loop with band
/// exactly [-2-4p, 2+4p] whose bottom coefficient is diag(ia, ia, 0).
struct LaxState {
  int p = 0;
  LaurentLoop xi;

  static int band_of(int p) { return 2 + 4 * p; }
  int band() const { return band_of(p); }

  /// Fixed point of both flows: only the +-(2+4p) coefficients, conjugate
  /// diagonal pair from the constant a.
  static LaxState vacuum(int p, Complex a);

  /// Vacuum plus Gaussian noise of the given amplitude in degrees
  /// |k| <= 4p+1, pushed through the eigenspace projections and reality
  /// symmetrization so the result is admissible.
  static LaxState random_admissible(int p, Complex a, double amplitude,
                                    std::uint64_t seed);

  static LaxState from_loop(int p, const LaurentLoop& xi, double tol = 1e-8);

  CMat bottom() const { return xi.coeff(-band()); }
  Complex bottom_a() const { return bottom()(0, 0) / Complex(0, 1); }

  double reality_res() const { return reality_residual(xi); }
  double twist_res() const { return twist_residual(xi); }
  /// Distance of the bottom coefficient from the diag(ia, ia, 0) shape.
  double bottom_form_res() const;

  /// Throws InvariantDrift when any residual exceeds tol.
  void validate(double tol = 1e-8) const;
};

enum class FlowDirection { X1, X2 };

/// X1(xi) = [xi, (lambda^{4p} xi)_{Lambda su}]  (X2: i inside the projection).
/// The bracket is computed on the full band; coefficients outside
/// [-2-4p, 2+4p] must carry mass below band_tol (they cancel for admissible
/// states) and are then dropped. Throws BandLeak otherwise.
LaurentLoop vector_field(const LaxState& state, FlowDirection dir,
                         double band_tol = 1e-10);

/// The connection A = (lambda^{4p} xi dz)_{Lambda su} evaluated on d/dx and
/// d/dy: two loops with band [-2, 2], skew-Hermitian for every |lambda| = 1.
std::pair<LaurentLoop, LaurentLoop> connection_from_state(const LaxState& state);

struct StateGrid {
  GridSpec spec;
  int p = 0;
  std::vector<LaurentLoop> states;  // spec.nodes() entries, row-major

  const LaurentLoop& at(int i, int j) const { return states[spec.index(i, j)]; }
  LaurentLoop& at(int i, int j) { return states[spec.index(i, j)]; }
  LaxState state(int i, int j) const { return LaxState{p, at(i, j)}; }
};

struct FlowOptions {
  double band_tol = 1e-10;
  double invariant_tol = 1e-8;
  bool validate_nodes = true;
  bool quiet = false;  // suppress the minimal-sector (a == 0) warning
};

/// Classical RK4 along the x-axis base row, then up each y-column (columns run
/// in parallel). Step size equals the grid spacing.
StateGrid integrate_flow(const LaxState& initial, const GridSpec& spec,
                         const FlowOptions& opt = {});

enum class FlowOrder { XThenY, YThenX };

/// March a single path to the far corner; used to measure the commutation
/// defect between the two integration orders.
LaxState integrate_corner(const LaxState& initial, const GridSpec& spec,
                          FlowOrder order, const FlowOptions& opt = {});

struct NodeMax {
  double value = 0.0;
  int i = 0;
  int j = 0;
  void consider(double v, int ii, int jj) {
    if (v > value) { value = v; i = ii; j = jj; }
  }
};

/// Per-grid maxima of the conserved quantities' drift. Deterministic; the
/// spectral drift samples tr(xi(l)^j), j = 1..3 at 8 unit-circle points.
struct FlowDiagnostics {
  NodeMax reality;
  NodeMax twist;
  NodeMax band_leak;       // tangency defect of X1 at the node
  NodeMax norm_drift;      // | sum_k ||c_k||^2 - initial |
  NodeMax bottom_drift;    // || bottom(node) - bottom(origin) ||
  NodeMax spectral_drift;
  double worst() const;
};

FlowDiagnostics conserved_diagnostics(const StateGrid& grid);

}  // namespace loopflow
