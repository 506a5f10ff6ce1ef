#pragma once

#include <utility>
#include <vector>

#include "loopflow/cmat.hpp"

namespace loopflow {

/// Finite band of Fourier coefficients k -> 3x3 complex matrix, representing
/// a Laurent-polynomial loop  xi_lambda = sum_{k=kmin}^{kmax} c_k lambda^k
/// on the unit circle. Degrees outside the band are implicitly zero.
///
/// Two advisory flags travel with a loop and are maintained conservatively by
/// the arithmetic here:
///   twisted : c_k lies in the tau-eigenspace of eigenvalue i^k (mod 4),
///   real    : c_{-k} = -(c_k)^dag, i.e. the loop is u(3)-valued on S^1.
/// The flags assert intent; twist_residual / reality_residual measure truth.
class LaurentLoop {
 public:
  LaurentLoop() : LaurentLoop(0, 0) {}
  LaurentLoop(int kmin, int kmax);
  static LaurentLoop single(int k, const CMat& m);

  int kmin() const { return kmin_; }
  int kmax() const { return kmax_; }
  bool in_band(int k) const { return k >= kmin_ && k <= kmax_; }

  /// Coefficient at degree k; zero outside the band.
  const CMat& coeff(int k) const;
  CMat& at(int k);  // k must be in band
  void set(int k, const CMat& m) { at(k) = m; }

  bool twisted() const { return twisted_; }
  bool real() const { return real_; }
  LaurentLoop& mark_twisted(bool v = true) { twisted_ = v; return *this; }
  LaurentLoop& mark_real(bool v = true) { real_ = v; return *this; }

  CMat eval(Complex lambda) const;
  double norm2() const;  // sum_k ||c_k||_F^2  (the L^2 norm on S^1 by Parseval)
  double norm() const;

  LaurentLoop shifted(int s) const;       // lambda^s * loop
  LaurentLoop dagger() const;             // pointwise adjoint on S^1
  LaurentLoop conjugated(const CMat& g) const;        // g^{-1} c_k g, unitary g
  LaurentLoop conjugated_by_frame(const CMat& f) const;  // f c_k f^{-1}

  /// Mass (Frobenius, root-sum-square) of coefficients outside [lo, hi].
  double out_of_band_mass(int lo, int hi) const;
  LaurentLoop truncated(int lo, int hi) const;

  LaurentLoop& operator+=(const LaurentLoop& o);
  LaurentLoop& operator-=(const LaurentLoop& o);
  LaurentLoop& operator*=(Complex s);

 private:
  int kmin_, kmax_;
  std::vector<CMat> c_;
  bool twisted_ = false;
  bool real_ = false;
};

LaurentLoop operator+(LaurentLoop a, const LaurentLoop& b);
LaurentLoop operator-(LaurentLoop a, const LaurentLoop& b);
LaurentLoop operator*(Complex s, LaurentLoop a);

/// Loop product (Cauchy convolution of coefficients). When clamp is set the
/// result band is intersected with [clamp_lo, clamp_hi]; dropped mass is the
/// caller's business (see mul_clamped_mass).
LaurentLoop mul(const LaurentLoop& a, const LaurentLoop& b);
LaurentLoop mul_clamped(const LaurentLoop& a, const LaurentLoop& b, int lo, int hi);

/// Coefficientwise Lie bracket [a, b] as loops.
LaurentLoop bracket_loop(const LaurentLoop& a, const LaurentLoop& b);

// ---------------------------------------------------------------------------
// The order-4 automorphism tau and its eigenspace calculus.
// ---------------------------------------------------------------------------

/// tau(M) = -diag(-J,1) M^T diag(J,1); order 4, preserves u(3).
CMat tau_alg(const CMat& m);

/// Group-level extension: tau(G) = diag(-J,1) (G^T)^{-1} diag(J,1).
CMat tau_group(const CMat& g);

/// Projection onto the tau-eigenspace of eigenvalue i^a:
/// P_a(M) = (1/4) sum_j i^{-aj} tau^j(M). The four projectors resolve the
/// identity and annihilate each other.
CMat eigenspace_project(const CMat& m, int a);
double eigenspace_residual(const CMat& m, int a);  // ||M - P_a M||_F

/// tau applied to a loop argumentwise: (tau xi)_lambda = tau(xi_lambda),
/// reindexed so that twistedness reads tau_loop(xi) == xi composed with
/// lambda -> i lambda, i.e. coefficientwise tau(c_k) vs i^k c_k.
double twist_residual(const LaurentLoop& xi);    // max_k ||tau(c_k) - i^k c_k|| / (scale)
double reality_residual(const LaurentLoop& xi);  // max_k ||c_{-k} + (c_k)^dag||

// ---------------------------------------------------------------------------
// Iwasawa structure of the degree-0 block: su(2)^C = su(2) + b.
// ---------------------------------------------------------------------------

/// Split an element of u(3)^C_0 (traceless 2x2 block, zero third row/column)
/// into su-part (skew-Hermitian) + b-part (lower triangular, real diagonal).
/// The decomposition is unique. Throws NotInU3C0.
std::pair<CMat, CMat> split_su_b(const CMat& xi, double tol = 1e-10);

/// Lower-triangular Borel factor: positive real diagonal, unit determinant,
/// embedded into 3x3 with lower-right entry 1.
struct BorelElement {
  double t11 = 1.0;
  double t22 = 1.0;
  Complex t21 = 0.0;
  CMat2 matrix() const;
  CMat embedded() const;
};

struct IwasawaSU2 {
  CMat2 f;        // SU(2) factor
  BorelElement b;
};

/// Unique factorization g = f b for det-1 g, via the closed-form
/// reverse-Cholesky of g^dag g (solve b^dag b = g^dag g with lower-triangular
/// positive-diagonal b, then f = g b^{-1}). Throws DetNotOne / Singular.
IwasawaSU2 iwasawa_group_su2(const CMat2& g, double det_tol = 1e-10);

// ---------------------------------------------------------------------------
// The two loop splittings.
// ---------------------------------------------------------------------------

/// Twisted splitting  Lambda u(3)^C_tau = Lambda u(3)_tau + Lambda^+_b:
///   sum c_k l^k = ( sum_{k<0} c_k l^k + (c_0)_su - sum_{k>0} (c_{-k})^dag l^k )
///               + ( (c_0)_b + sum_{k>0} (c_k + (c_{-k})^dag) l^k ).
/// First factor is real+twisted; second has only degrees >= 0 with degree 0
/// in b. The sum recomposes the input exactly. Throws NotTwisted.
std::pair<LaurentLoop, LaurentLoop> loop_split_twisted(const LaurentLoop& xi,
                                                       double tol = 1e-10);

/// Based splitting  Lambda u(3)^C = Omega u(3) + Lambda^+ u(3)^C: each
/// negative coefficient N at degree -m contributes N(l^{-m}-1) - N^dag(l^m-1)
/// to the Omega factor and N + N^dag(l^m-1) to the plus factor.
std::pair<LaurentLoop, LaurentLoop> loop_split_based(const LaurentLoop& xi);

/// Convenience: the twisted-su projection (first factor of loop_split_twisted).
LaurentLoop project_lambda_su(const LaurentLoop& xi, double tol = 1e-10);

/// Convenience: the plus projection of the based splitting (second factor).
LaurentLoop project_lambda_plus_based(const LaurentLoop& xi);

}  // namespace loopflow
