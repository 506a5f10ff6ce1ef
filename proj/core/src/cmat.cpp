#include "loopflow/cmat.hpp"

#include <cmath>

#include "loopflow/errors.hpp"

namespace loopflow {

double skew_hermitian_residual(const CMat& m) { return (m + m.adjoint()).norm(); }

double unitarity_residual(const CMat& m) {
  return (m.adjoint() * m - CMat::Identity()).norm();
}

bool is_skew_hermitian(const CMat& m, double tol) {
  return is_finite(m) && skew_hermitian_residual(m) < tol;
}

bool is_unitary(const CMat& m, double tol) {
  return is_finite(m) && unitarity_residual(m) < tol;
}

bool is_traceless(const CMat& m, double tol) {
  return is_finite(m) && std::abs(m.trace()) < tol;
}

bool is_finite(const CMat& m) { return m.allFinite(); }

CMat mexp_skew(const CMat& m, double tol) {
  if (!is_finite(m)) throw NotSkewHermitian("mexp_skew: non-finite input");
  if (skew_hermitian_residual(m) >= tol) {
    throw NotSkewHermitian("mexp_skew: input is not skew-Hermitian, residual " +
                           fmt_double(skew_hermitian_residual(m)));
  }
  // iM is Hermitian: iM = Q D Q^dag with real D, hence exp(M) = Q e^{-iD} Q^dag.
  const CMat herm = Complex(0, 1) * m;
  Eigen::SelfAdjointEigenSolver<CMat> es((herm + herm.adjoint()) / 2.0);
  CVec3 phases;
  for (int k = 0; k < 3; ++k) {
    phases(k) = std::polar(1.0, -es.eigenvalues()(k));
  }
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

CMat polar_unitarize(const CMat& m) {
  const CMat h = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<CMat> es((h + h.adjoint()) / 2.0);
  CVec3 inv_sqrt;
  for (int k = 0; k < 3; ++k) {
    const double ev = es.eigenvalues()(k);
    if (!(ev > 0.0) || !std::isfinite(ev)) {
      throw Singular("polar_unitarize: singular input");
    }
    inv_sqrt(k) = 1.0 / std::sqrt(ev);
  }
  return m * es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
}

CMat embed2(const CMat2& g, Complex corner) {
  CMat m = CMat::Zero();
  m.topLeftCorner<2, 2>() = g;
  m(2, 2) = corner;
  return m;
}

CMat2 block2(const CMat& m) { return m.topLeftCorner<2, 2>(); }

double off_block_residual(const CMat& m) {
  double s = std::norm(m(0, 2)) + std::norm(m(1, 2)) + std::norm(m(2, 0)) +
             std::norm(m(2, 1)) + std::norm(m(2, 2));
  return std::sqrt(s);
}

namespace structural {

const CMat2& J() {
  static const CMat2 j = (CMat2() << 0, -1, 1, 0).finished();
  return j;
}

const CVec2& epsilon() {
  static const CVec2 e = (CVec2() << Complex(0.5, 0), Complex(0, -0.5)).finished();
  return e;
}

const CVec2& epsilon_bar() {
  static const CVec2 e = (CVec2() << Complex(0.5, 0), Complex(0, 0.5)).finished();
  return e;
}

const CMat& pi0_perp() {
  static const CMat p = (CMat() << 1, 0, 0, 0, 1, 0, 0, 0, 0).finished();
  return p;
}

double verify() {
  const Complex i(0, 1);
  double worst = 0.0;
  worst = std::max(worst, (J() * J() + CMat2::Identity()).norm());
  worst = std::max(worst, (J() * epsilon() - i * epsilon()).norm());
  worst = std::max(worst, (J() * epsilon_bar() + i * epsilon_bar()).norm());
  const CMat& p = pi0_perp();
  worst = std::max(worst, (p * p - p).norm());
  worst = std::max(worst, (p - p.adjoint()).norm());
  if (worst > 1e-15) {
    throw Error("structural constants violated, residual " + fmt_double(worst));
  }
  return worst;
}

}  // namespace structural

}  // namespace loopflow
