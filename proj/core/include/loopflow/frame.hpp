#pragma once

#include <utility>
#include <vector>

#include "loopflow/immersion.hpp"
#include "loopflow/lax.hpp"

namespace loopflow {

/// Loop-valued connection 1-form sampled on a grid: per node the loops
/// A(d/dx) and A(d/dy), each with band [-2, 2].
struct AField {
  GridSpec spec;
  std::vector<LaurentLoop> ax;
  std::vector<LaurentLoop> ay;

  const LaurentLoop& x(int i, int j) const { return ax[spec.index(i, j)]; }
  const LaurentLoop& y(int i, int j) const { return ay[spec.index(i, j)]; }
};

/// Evaluate connection_from_state at every node.
AField connection_field(const StateGrid& grid);

/// Per-lambda grids of unitary frames with F_lambda(0,0) = Id. The sample set
/// must include lambda = 1 for anything immersion-related.
struct FrameFamily {
  GridSpec spec;
  std::vector<Complex> lambdas;
  std::vector<std::vector<CMat>> frames;  // [sample][node]

  const CMat& at(int sample, int i, int j) const {
    return frames[sample][spec.index(i, j)];
  }
  int find_lambda(Complex lambda, double tol = 1e-9) const;  // -1 when absent
  int lambda_one() const;  // throws when lambda = 1 is not sampled

  double max_unitarity_residual() const;
  /// max over sampled pairs (l, il) and nodes of ||tau_group(F_l) - F_{il}||.
  double twisting_residual() const;
};

/// 16th roots of unity (contains 1, and i*sample is again a sample).
std::vector<Complex> default_lambda_samples(int count = 16);

struct FrameOptions {
  double flatness_gate = 1e-6;   // refuse to integrate non-flat data
  double unitarity_tol = 1e-8;
  int reunitarize_every = 16;
  bool check_flatness = true;
};

/// Integrate dF = F A(lambda) over the grid (RK4 along the base row, then up
/// the columns in parallel; midpoint stages use 4-point interpolation of A).
/// Throws CurvatureTooLarge / UnitarityDrift.
std::vector<CMat> integrate_frame(const AField& a, Complex lambda,
                                  const FrameOptions& opt = {});

FrameFamily integrate_frame_family(const AField& a, const std::vector<Complex>& lambdas,
                                   const FrameOptions& opt = {});

/// || d_x A_y - d_y A_x + [A_x, A_y] ||_F at lambda, central differences;
/// zero on the boundary ring, second-order accurate inside.
std::vector<double> flatness_residual(const AField& a, Complex lambda);
double max_flatness_residual(const AField& a, Complex lambda);

/// Legendrian lift u_hat = third frame column at lambda = 1, beta = arg det F
/// unwrapped row-major from the origin, rho = log |d_x u_hat| (central
/// differences; nodes with |d_x u_hat| <= 1e-8 are flagged degenerate), plus
/// conformality residual grids "conformal_scale" and "conformal_angle".
ImmersionData extract_immersion(const FrameFamily& frames);

/// |<d_x u, u>| + |<d_y u, u>| per node (central differences inside,
/// one-sided second order on the boundary).
std::vector<double> legendrian_residual(const ImmersionData& data);
double max_legendrian_residual(const ImmersionData& data);

/// Max over interior nodes of the 5-point flat Laplacian of beta.
double harmonicity_residual(const std::vector<double>& beta, const GridSpec& spec);

/// Based-loop data: E_lambda = F_lambda F^{-1} per sample and node, the
/// Maurer-Cartan loops Gamma (algebraic, from A and F, not from differencing
/// E), gamma = Gamma + its lambda = 1 value, and the projector
/// pi_perp = F diag(1,1,0) F^{-1}.
struct BasedLoopData {
  GridSpec spec;
  std::vector<Complex> lambdas;
  std::vector<std::vector<CMat>> e;      // [sample][node]
  std::vector<LaurentLoop> gamma_x;      // per node, degree 0 absent
  std::vector<LaurentLoop> gamma_y;
  std::vector<LaurentLoop> big_gamma_x;  // per node, vanishes at lambda = 1
  std::vector<LaurentLoop> big_gamma_y;
  std::vector<CMat> pi_perp;

  /// max over nodes/pairs of ||tau_u(gamma_l) - gamma_{il}||, tau_u the
  /// frame-conjugated automorphism.
  double tau_u_residual(const FrameFamily& frames) const;
};

BasedLoopData based_loop_transform(const FrameFamily& frames, const AField& a);

/// eta0 = E eta E^{-1} with eta = F xi F^{-1} is constant over the grid and
/// equals xi(origin). Returns (xi at origin, max drift over nodes/samples).
std::pair<LaurentLoop, double> conserved_loop(const FrameFamily& frames,
                                              const StateGrid& grid);

/// Monodromy probe for x-translation by shift nodes: the defect
/// max_node || F(i+shift, j) - F(i, j) M ||, M = F(shift, 0).
double periodicity_defect(const FrameFamily& frames, int sample, int shift);

// ---------------------------------------------------------------------------
// Quasi-finite type -> finite type gauge transformation.
// ---------------------------------------------------------------------------

struct GaugeOptions {
  int truncation = -1;           // Fourier cutoff K for Lambda^+ data; -1 = 8p+4
  double quasi_gate = 1e-6;      // admissible size of the u(3)^C_0 defect B
  double tail_tol = 1e-8;        // dropped Theta tail (TruncationError)
  double det_tol = 1e-4;         // Iwasawa block det drift (IwasawaFailure)
};

struct GaugeResult {
  FrameFamily frames;            // F_lambda G
  StateGrid states;              // G^{-1} xi G
  AField a;                      // A^G = G^{-1} A G + G^{-1} dG
  std::vector<CMat> gauge;       // G per node, U(3)_0-valued
  double defect_size = 0.0;           // size of B on input
  double w0_offblock = 0.0;           // distance of W0 from U(3)^C_0 shape
  double postcondition_residual = 0.0;  // ||(l^{4p} xi^G dz)_{su} - A^G||, interior
};

/// Constructive pipeline: eta = F xi F^{-1}; Theta = plus-part of
/// (l^{4p} eta dz) in the based splitting; integrate dV = Theta V; Iwasawa of
/// the degree-0 block of W = F^{-1} V gives G pointwise; gauge everything by
/// G and verify the finite-type identity.
GaugeResult gauge_to_finite_type(const FrameFamily& frames, const StateGrid& grid,
                                 const AField& a, const GaugeOptions& opt = {});

}  // namespace loopflow
