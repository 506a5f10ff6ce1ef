#pragma once

#include <Eigen/Dense>
#include <complex>

#include "loopflow/util.hpp"

namespace loopflow {

// Dense 3x3 complex matrices carry everything: u(3), its complexification,
// and U(3) frame values. 2x2 objects (su(2), the Borel group) live in the
// upper-left block, with lower-right entry 0 (algebra) or 1 (group).
using CMat = Eigen::Matrix3cd;
using CMat2 = Eigen::Matrix2cd;
using CVec3 = Eigen::Vector3cd;
using CVec2 = Eigen::Vector2cd;

// Norm convention: Frobenius everywhere (Eigen's .norm()), so every residual
// threshold in this library is a Frobenius-norm bound.

inline CMat dagger(const CMat& m) { return m.adjoint(); }

/// MN - NM.
inline CMat bracket(const CMat& m, const CMat& n) { return m * n - n * m; }

double skew_hermitian_residual(const CMat& m);   // ||M + M^dag||_F
double unitarity_residual(const CMat& m);        // ||M^dag M - Id||_F

bool is_skew_hermitian(const CMat& m, double tol = 1e-10);
bool is_unitary(const CMat& m, double tol = 1e-10);
bool is_traceless(const CMat& m, double tol = 1e-10);
bool is_finite(const CMat& m);

/// exp(M) for skew-Hermitian M, via unitary diagonalization of the Hermitian
/// matrix iM; the result is unitary to roundoff. Throws NotSkewHermitian.
CMat mexp_skew(const CMat& m, double tol = 1e-10);

/// Nearest unitary in Frobenius norm: U = M (M^dag M)^{-1/2}.
/// Throws Singular when M is not invertible.
CMat polar_unitarize(const CMat& m);

/// Embed a 2x2 block into 3x3 with the given lower-right entry.
CMat embed2(const CMat2& g, Complex corner);
CMat2 block2(const CMat& m);

/// Residual of the third row/column against zero (algebra embedding check).
double off_block_residual(const CMat& m);

namespace structural {

/// J = [[0,-1],[1,0]];  J^2 = -Id, J eps = i eps, J eps_bar = -i eps_bar.
const CMat2& J();
const CVec2& epsilon();       // (1, -i)/2
const CVec2& epsilon_bar();   // (1,  i)/2
const CMat& pi0_perp();       // diag(1,1,0)

/// Checks the identities above plus the projector identity for pi0_perp.
/// Returns the worst residual; throws Error if it exceeds 1e-15.
double verify();

}  // namespace structural

}  // namespace loopflow
