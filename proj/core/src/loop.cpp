#include "loopflow/loop.hpp"

#include <algorithm>
#include <cmath>

#include "loopflow/errors.hpp"

namespace loopflow {

namespace {

const CMat& zero_mat() {
  static const CMat z = CMat::Zero();
  return z;
}

// diag(J, 1) and diag(-J, 1)
const CMat& k_plus() {
  static const CMat m = [] {
    CMat k = CMat::Zero();
    k.topLeftCorner<2, 2>() = structural::J();
    k(2, 2) = 1;
    return k;
  }();
  return m;
}

const CMat& k_minus() {
  static const CMat m = [] {
    CMat k = CMat::Zero();
    k.topLeftCorner<2, 2>() = -structural::J();
    k(2, 2) = 1;
    return k;
  }();
  return m;
}

Complex ipow(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}

}  // namespace

LaurentLoop::LaurentLoop(int kmin, int kmax) : kmin_(kmin), kmax_(kmax) {
  if (kmax_ < kmin_) throw Error("LaurentLoop: empty band");
  c_.assign(static_cast<std::size_t>(kmax_ - kmin_ + 1), CMat::Zero());
}

LaurentLoop LaurentLoop::single(int k, const CMat& m) {
  LaurentLoop l(k, k);
  l.at(k) = m;
  return l;
}

const CMat& LaurentLoop::coeff(int k) const {
  if (!in_band(k)) return zero_mat();
  return c_[static_cast<std::size_t>(k - kmin_)];
}

CMat& LaurentLoop::at(int k) {
  if (!in_band(k)) throw Error("LaurentLoop: degree outside band");
  return c_[static_cast<std::size_t>(k - kmin_)];
}

CMat LaurentLoop::eval(Complex lambda) const {
  // Horner over the shifted polynomial: lambda^{kmin} * sum c_{kmin+j} l^j.
  CMat acc = CMat::Zero();
  for (int k = kmax_; k >= kmin_; --k) {
    acc = acc * lambda + coeff(k);
  }
  return std::pow(lambda, kmin_) * acc;
}

double LaurentLoop::norm2() const {
  double s = 0.0;
  for (const auto& m : c_) s += m.squaredNorm();
  return s;
}

double LaurentLoop::norm() const { return std::sqrt(norm2()); }

LaurentLoop LaurentLoop::shifted(int s) const {
  LaurentLoop out(kmin_ + s, kmax_ + s);
  out.c_ = c_;
  out.twisted_ = twisted_ && (s % 4 == 0);
  out.real_ = real_ && (s == 0);
  return out;
}

LaurentLoop LaurentLoop::dagger() const {
  // On |lambda| = 1: (sum c_k l^k)^dag = sum (c_k)^dag l^{-k}.
  LaurentLoop out(-kmax_, -kmin_);
  for (int k = kmin_; k <= kmax_; ++k) out.at(-k) = coeff(k).adjoint();
  out.twisted_ = twisted_;
  out.real_ = real_;
  return out;
}

LaurentLoop LaurentLoop::conjugated(const CMat& g) const {
  LaurentLoop out(kmin_, kmax_);
  const CMat gi = g.inverse();
  for (int k = kmin_; k <= kmax_; ++k) out.at(k) = gi * coeff(k) * g;
  out.real_ = real_ && is_unitary(g, 1e-8);
  return out;
}

LaurentLoop LaurentLoop::conjugated_by_frame(const CMat& f) const {
  LaurentLoop out(kmin_, kmax_);
  const CMat fi = f.inverse();
  for (int k = kmin_; k <= kmax_; ++k) out.at(k) = f * coeff(k) * fi;
  out.real_ = real_ && is_unitary(f, 1e-8);
  return out;
}

double LaurentLoop::out_of_band_mass(int lo, int hi) const {
  double s = 0.0;
  for (int k = kmin_; k <= kmax_; ++k) {
    if (k < lo || k > hi) s += coeff(k).squaredNorm();
  }
  return std::sqrt(s);
}

LaurentLoop LaurentLoop::truncated(int lo, int hi) const {
  LaurentLoop out(lo, hi);
  for (int k = std::max(lo, kmin_); k <= std::min(hi, kmax_); ++k) out.at(k) = coeff(k);
  out.twisted_ = twisted_;
  out.real_ = real_ && (lo == -hi);
  return out;
}

LaurentLoop& LaurentLoop::operator+=(const LaurentLoop& o) {
  if (o.kmin_ < kmin_ || o.kmax_ > kmax_) {
    LaurentLoop widened(std::min(kmin_, o.kmin_), std::max(kmax_, o.kmax_));
    for (int k = kmin_; k <= kmax_; ++k) widened.at(k) = coeff(k);
    widened.twisted_ = twisted_;
    widened.real_ = real_;
    *this = widened;
  }
  for (int k = o.kmin_; k <= o.kmax_; ++k) at(k) += o.coeff(k);
  twisted_ = twisted_ && o.twisted_;
  real_ = real_ && o.real_;
  return *this;
}

LaurentLoop& LaurentLoop::operator-=(const LaurentLoop& o) {
  LaurentLoop neg = o;
  neg *= Complex(-1, 0);
  neg.mark_real(o.real_);
  neg.mark_twisted(o.twisted_);
  return (*this += neg);
}

LaurentLoop& LaurentLoop::operator*=(Complex s) {
  for (auto& m : c_) m *= s;
  real_ = real_ && (s.imag() == 0.0);
  return *this;
}

LaurentLoop operator+(LaurentLoop a, const LaurentLoop& b) { return a += b; }
LaurentLoop operator-(LaurentLoop a, const LaurentLoop& b) { return a -= b; }
LaurentLoop operator*(Complex s, LaurentLoop a) { return a *= s; }

LaurentLoop mul(const LaurentLoop& a, const LaurentLoop& b) {
  LaurentLoop out(a.kmin() + b.kmin(), a.kmax() + b.kmax());
  for (int i = a.kmin(); i <= a.kmax(); ++i) {
    for (int j = b.kmin(); j <= b.kmax(); ++j) {
      out.at(i + j) += a.coeff(i) * b.coeff(j);
    }
  }
  out.mark_twisted(a.twisted() && b.twisted());
  return out;
}

LaurentLoop mul_clamped(const LaurentLoop& a, const LaurentLoop& b, int lo, int hi) {
  LaurentLoop out(lo, hi);
  for (int i = a.kmin(); i <= a.kmax(); ++i) {
    for (int j = b.kmin(); j <= b.kmax(); ++j) {
      const int k = i + j;
      if (k >= lo && k <= hi) out.at(k) += a.coeff(i) * b.coeff(j);
    }
  }
  out.mark_twisted(a.twisted() && b.twisted());
  return out;
}

LaurentLoop bracket_loop(const LaurentLoop& a, const LaurentLoop& b) {
  LaurentLoop out(a.kmin() + b.kmin(), a.kmax() + b.kmax());
  for (int i = a.kmin(); i <= a.kmax(); ++i) {
    for (int j = b.kmin(); j <= b.kmax(); ++j) {
      out.at(i + j) += bracket(a.coeff(i), b.coeff(j));
    }
  }
  out.mark_twisted(a.twisted() && b.twisted());
  out.mark_real(a.real() && b.real());
  return out;
}

CMat tau_alg(const CMat& m) { return -(k_minus() * m.transpose() * k_plus()); }

CMat tau_group(const CMat& g) {
  Eigen::FullPivLU<CMat> lu(g.transpose());
  if (!lu.isInvertible()) throw Singular("tau_group: singular input");
  return k_minus() * lu.inverse() * k_plus();
}

CMat eigenspace_project(const CMat& m, int a) {
  CMat t = m;
  CMat acc = m;  // j = 0 term
  for (int j = 1; j <= 3; ++j) {
    t = tau_alg(t);
    acc += ipow(-a * j) * t;
  }
  return acc / 4.0;
}

double eigenspace_residual(const CMat& m, int a) {
  return (m - eigenspace_project(m, a)).norm();
}

double twist_residual(const LaurentLoop& xi) {
  double worst = 0.0;
  for (int k = xi.kmin(); k <= xi.kmax(); ++k) {
    worst = std::max(worst, (tau_alg(xi.coeff(k)) - ipow(k) * xi.coeff(k)).norm());
  }
  return worst;
}

double reality_residual(const LaurentLoop& xi) {
  double worst = 0.0;
  for (int k = 0; k <= std::max(std::abs(xi.kmin()), std::abs(xi.kmax())); ++k) {
    worst = std::max(worst, (xi.coeff(-k) + xi.coeff(k).adjoint()).norm());
  }
  return worst;
}

std::pair<CMat, CMat> split_su_b(const CMat& xi, double tol) {
  const double off = off_block_residual(xi);
  const Complex block_trace = xi(0, 0) + xi(1, 1);
  if (off >= tol || std::abs(block_trace) >= tol) {
    throw NotInU3C0("split_su_b: input not in the traceless 2x2 block, off " +
                    fmt_double(off) + ", trace " + fmt_double(std::abs(block_trace)));
  }
  // xi = [[alpha, beta],[gamma, -alpha]]:
  //   su = [[i Im alpha, beta],[-conj(beta), -i Im alpha]],
  //   b  = [[Re alpha, 0],[gamma + conj(beta), -Re alpha]].
  const Complex alpha = xi(0, 0);
  const Complex beta = xi(0, 1);
  CMat su = CMat::Zero();
  su(0, 0) = Complex(0, alpha.imag());
  su(0, 1) = beta;
  su(1, 0) = -std::conj(beta);
  su(1, 1) = Complex(0, -alpha.imag());
  // The complement lands in b = {lower triangular, real diagonal, traceless}
  // exactly; subtracting keeps su + b == xi to the last bit.
  CMat b = CMat::Zero();
  b.topLeftCorner<2, 2>() = xi.topLeftCorner<2, 2>() - su.topLeftCorner<2, 2>();
  return {su, b};
}

CMat2 BorelElement::matrix() const {
  CMat2 m;
  m << t11, 0, t21, t22;
  return m;
}

CMat BorelElement::embedded() const { return embed2(matrix(), 1.0); }

IwasawaSU2 iwasawa_group_su2(const CMat2& g, double det_tol) {
  const Complex det = g.determinant();
  if (!std::isfinite(det.real()) || !std::isfinite(det.imag()) ||
      std::abs(det) < 1e-14) {
    throw Singular("iwasawa_group_su2: singular input");
  }
  if (std::abs(det - Complex(1, 0)) >= det_tol) {
    throw DetNotOne("iwasawa_group_su2: det = " + fmt_double(det.real()) + " + " +
                    fmt_double(det.imag()) + "i");
  }
  // H = g^dag g is Hermitian positive with det 1. Solve b^dag b = H for
  // lower-triangular b with positive diagonal:
  //   t22 = sqrt(H22), t21 = H21 / t22, t11 = 1/t22 (t11 t22 = 1 since det H = 1).
  const CMat2 h = g.adjoint() * g;
  const double h22 = h(1, 1).real();
  if (!(h22 > 0.0)) throw Singular("iwasawa_group_su2: degenerate column");
  BorelElement b;
  b.t22 = std::sqrt(h22);
  b.t21 = h(1, 0) / b.t22;
  b.t11 = 1.0 / b.t22;
  // b^{-1} = [[t22, 0], [-t21, t11]] because t11 t22 = 1.
  CMat2 binv;
  binv << b.t22, 0, -b.t21, b.t11;
  IwasawaSU2 out;
  out.f = g * binv;
  out.b = b;
  return out;
}

std::pair<LaurentLoop, LaurentLoop> loop_split_twisted(const LaurentLoop& xi,
                                                       double tol) {
  if (!xi.twisted()) throw NotTwisted("loop_split_twisted: input not marked twisted");
  const int bound = std::max({std::abs(xi.kmin()), std::abs(xi.kmax()), 0});
  LaurentLoop su(-bound, bound);
  LaurentLoop plus(0, bound);
  for (int k = 1; k <= bound; ++k) {
    su.at(-k) = xi.coeff(-k);
    su.at(k) = -xi.coeff(-k).adjoint();
    plus.at(k) = xi.coeff(k) + xi.coeff(-k).adjoint();
  }
  const auto [s0, b0] = split_su_b(xi.coeff(0), tol);
  su.at(0) = s0;
  plus.at(0) = b0;
  su.mark_real().mark_twisted();
  plus.mark_twisted();
  return {su, plus};
}

std::pair<LaurentLoop, LaurentLoop> loop_split_based(const LaurentLoop& xi) {
  const int neg = std::max(0, -xi.kmin());
  const int pos = std::max({0, xi.kmax(), neg});
  LaurentLoop omega(-neg, neg);
  LaurentLoop plus(0, pos);
  for (int k = 0; k <= xi.kmax(); ++k) plus.at(k) += xi.coeff(k);
  for (int m = 1; m <= neg; ++m) {
    const CMat& n = xi.coeff(-m);
    const CMat nd = n.adjoint();
    // Omega part: n (l^{-m} - 1) - n^dag (l^m - 1); vanishes at lambda = 1 and
    // is skew-Hermitian pointwise on S^1.
    omega.at(-m) += n;
    omega.at(0) += nd - n;
    omega.at(m) += -nd;
    // Plus part: n + n^dag (l^m - 1).
    plus.at(0) += n - nd;
    plus.at(m) += nd;
  }
  omega.mark_twisted(xi.twisted());
  plus.mark_twisted(xi.twisted());
  return {omega, plus};
}

LaurentLoop project_lambda_su(const LaurentLoop& xi, double tol) {
  return loop_split_twisted(xi, tol).first;
}

LaurentLoop project_lambda_plus_based(const LaurentLoop& xi) {
  return loop_split_based(xi).second;
}

}  // namespace loopflow
