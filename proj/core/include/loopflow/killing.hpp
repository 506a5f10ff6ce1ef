#pragma once

#include <array>
#include <utility>
#include <vector>

#include "loopflow/lax.hpp"

namespace loopflow {

/// Split along V = Ker ad pi0_perp (block-diagonal part) and
/// V_perp = Im ad pi0_perp (off-diagonal-block part); ad pi0_perp is an
/// involution on V_perp.
std::pair<CMat, CMat> v_decompose(const CMat& m);

enum class DerivScheme {
  Central,          // 2nd order, one-sided at the boundary
  CentralPeriodic,  // 2nd order with wraparound (grid excludes the endpoint)
  Spectral,         // trigonometric interpolation derivative (periodic grids)
};

/// d/dz = (d/dx - i d/dy)/2 of a matrix field by the given scheme (the same
/// differentiation the recursion uses internally).
std::vector<CMat> z_derivative(const std::vector<CMat>& field, const GridSpec& spec,
                               DerivScheme scheme);

/// The inputs of the Killing recursion: X = A_{-1}(d/dz) and C = A_0(d/dz)
/// as grids, plus the constant a = (1/2) dbeta/dz.
struct ConnectionData {
  GridSpec spec;
  Complex a = 0.0;
  std::vector<CMat> x;  // eigenspace -1 values
  std::vector<CMat> c;  // eigenspace  0 values
  DerivScheme scheme = DerivScheme::Central;

  static ConnectionData constant(const CMat& x, const CMat& c, Complex a,
                                 const GridSpec& spec);
  /// Read X, C, a off the connection of a finite-type state grid; the bottom
  /// coefficient must be constant (it is, for flow solutions).
  static ConnectionData from_states(const StateGrid& grid, double tol = 1e-6);

  /// The loops A(d/dx), A(d/dy) (band [-2,2]) at a node.
  std::pair<LaurentLoop, LaurentLoop> connection_loops(int node) const;

  double eigenspace_res() const;  // worst off-eigenspace mass of X and C
};

/// Truncated formal Killing series: W coefficient grids and the constant a.
/// W carries two guard orders beyond N so that Y is exact through degree N
/// and the Killing residual is fully determined for degrees <= N-2.
struct KillingSeries {
  GridSpec spec;
  Complex a = 0.0;
  int order = 0;                       // the requested N
  std::vector<std::vector<CMat>> w;    // w[n][node], n = 0 .. N+2

  int stored_orders() const { return static_cast<int>(w.size()); }
  const CMat& w_at(int n, int node) const { return w[n][static_cast<std::size_t>(node)]; }

  /// Assemble Y = (1+W)^{-1} lambda^{-2} (ia pi0_perp) (1+W) at a node,
  /// degrees -2 .. max_degree (computed degreewise, never by evaluation).
  LaurentLoop y_loop(int node, int max_degree) const;

  double twist_res() const;   // worst off-eigenspace mass of all W_n
  double vperp_res() const;   // worst V-component of all W_n
};

struct KillingOptions {
  double band_tol = 1e-10;
  bool noise_probe = false;  // residual stability check, needs extra work
};

/// The recursion W0 = 0, W1 = -i a^{-1} [pi0_perp, X],
/// Wn = i a^{-1} [pi0_perp, sum_k Wk X W(n-1-k) + [C, W(n-2)] + dz W(n-2)].
/// Throws ZeroAngleDerivative when a == 0 and GridTooCoarse when the
/// noise probe detects finite-difference noise dominating the tail.
KillingSeries killing_recursion(const ConnectionData& conn, int n,
                                const KillingOptions& opt = {});

/// max over nodes, directions and Fourier degrees <= N-2 of
/// || dY - [Y, A] || (degreewise; derivative by the connection's scheme).
/// On non-periodic varying grids the max excludes a boundary collar of width
/// N-2: the recursion nests one-sided stencils there and loses an order per
/// level, which would otherwise swamp the second-order interior signal.
double killing_residual(const KillingSeries& series, const ConnectionData& conn);

/// Same, restricted to degrees <= max_degree (for stability probes).
double killing_residual_upto(const KillingSeries& series, const ConnectionData& conn,
                             int max_degree);

/// Z = P(lambda) Y for P = sum_k p[k] lambda^{-4k}, truncated to nonpositive
/// degrees, and the residual R = dZ_<= + [A, Z_<=] computed two ways: directly
/// and from the closed formulas that use only Z_{-1}, Z_0. R is supported on
/// degrees {-1, 0, 1, 2} up to truncation noise.
struct PolynomialCandidate {
  GridSpec spec;
  std::vector<LaurentLoop> z_leq;                 // per node
  std::array<std::vector<CMat>, 4> r_dz;          // degrees -1,0,1,2 along d/dz
  std::array<std::vector<CMat>, 4> r_dzbar;       // same along d/dzbar
  double two_route_agreement = 0.0;  // direct vs closed formulas, interior max
  double out_of_band_mass = 0.0;     // R mass outside degrees {-1,0,1,2}
  double max_r_norm = 0.0;           // largest ||R_hat|| over nodes and degrees
};

PolynomialCandidate polynomial_candidate(const std::vector<Complex>& p,
                                         const KillingSeries& series,
                                         const ConnectionData& conn);

}  // namespace loopflow
