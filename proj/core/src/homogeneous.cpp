#include "loopflow/homogeneous.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "loopflow/errors.hpp"

namespace loopflow {

void ImmersionData::allocate() {
  u_hat.assign(static_cast<std::size_t>(nodes()), CVec3::Zero());
  beta.assign(static_cast<std::size_t>(nodes()), 0.0);
  rho.assign(static_cast<std::size_t>(nodes()), 0.0);
  degenerate.assign(static_cast<std::size_t>(nodes()), 0);
}

double ImmersionData::max_residual(const std::string& name) const {
  auto it = residuals.find(name);
  if (it == residuals.end()) throw Error("ImmersionData: no residual named " + name);
  double worst = 0.0;
  for (double v : it->second) worst = std::max(worst, std::abs(v));
  return worst;
}

double ImmersionData::unit_norm_residual() const {
  double worst = 0.0;
  for (const auto& u : u_hat) worst = std::max(worst, std::abs(u.norm() - 1.0));
  return worst;
}

Rational::Rational(long long n, long long d) : num(n), den(d) {
  if (d == 0) throw IrrationalInput("Rational: zero denominator");
}

Rational Rational::reduced() const {
  long long n = num, d = den;
  if (d < 0) { n = -n; d = -d; }
  const long long g = std::gcd(n < 0 ? -n : n, d);
  if (g > 1) { n /= g; d /= g; }
  return Rational{n, d};
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational{a.num * b.den + b.num * a.den, a.den * b.den}.reduced();
}
Rational operator-(const Rational& a, const Rational& b) {
  return Rational{a.num * b.den - b.num * a.den, a.den * b.den}.reduced();
}
Rational operator*(const Rational& a, const Rational& b) {
  return Rational{a.num * b.num, a.den * b.den}.reduced();
}
bool operator==(const Rational& a, const Rational& b) {
  const Rational ra = a.reduced(), rb = b.reduced();
  return ra.num == rb.num && ra.den == rb.den;
}

double HomogeneousParams::r1() const { return std::sqrt(r1sq); }
double HomogeneousParams::r2() const { return std::sqrt(r2sq); }
double HomogeneousParams::r3() const { return std::sqrt(r3sq()); }

HomogeneousParams HomogeneousParams::from_r_squared(double r1sq, double r2sq) {
  if (!(r1sq > 0.0) || !(r2sq > 0.0) || !(r1sq + r2sq < 1.0)) {
    throw UsageError("homogeneous params need r1^2, r2^2 > 0 and r1^2 + r2^2 < 1");
  }
  HomogeneousParams p;
  p.r1sq = r1sq;
  p.r2sq = r2sq;
  return p;
}

HomogeneousParams HomogeneousParams::from_fractions(const Rational& r1sq,
                                                    const Rational& r2sq) {
  HomogeneousParams p = from_r_squared(r1sq.value(), r2sq.value());
  p.exact = std::make_pair(r1sq.reduced(), r2sq.reduced());
  return p;
}

CVec3 homogeneous_point(const HomogeneousParams& params, double x, double y) {
  const double r1s = params.r1sq, r2s = params.r2sq;
  CVec3 f;
  f(0) = params.r1() * std::polar(1.0, (1.0 - r1s) * x - r2s * y);
  f(1) = params.r2() * std::polar(1.0, -r1s * x + (1.0 - r2s) * y);
  f(2) = params.r3() * std::polar(1.0, -r1s * x - r2s * y);
  return f;
}

ImmersionData homogeneous_immersion(const HomogeneousParams& params,
                                    const GridSpec& spec) {
  ImmersionData data;
  data.spec = spec;
  data.allocate();
  const AngleCoefficients ang = lagrangian_angle_homogeneous(params);
  auto& legendrian = data.residuals["legendrian"];
  legendrian.assign(static_cast<std::size_t>(spec.nodes()), 0.0);
  // df/dx = Ahat f, df/dy = Bhat f with the diagonal phase generators; the
  // Legendrian residual below uses these exact derivatives, so it measures
  // the analytic identity <df, f> = 0, not a difference quotient.
  const Complex i1(0, 1);
  CMat ahat = CMat::Zero(), bhat = CMat::Zero();
  ahat(0, 0) = i1 * (1.0 - params.r1sq);
  ahat(1, 1) = -i1 * params.r1sq;
  ahat(2, 2) = -i1 * params.r1sq;
  bhat(0, 0) = -i1 * params.r2sq;
  bhat(1, 1) = i1 * (1.0 - params.r2sq);
  bhat(2, 2) = -i1 * params.r2sq;
  parallel_for(spec.ny, [&](int j) {
    for (int i = 0; i < spec.nx; ++i) {
      const double x = spec.x(i), y = spec.y(j);
      const int n = spec.index(i, j);
      data.u_hat[n] = homogeneous_point(params, x, y);
      data.beta[n] = ang.cx * x + ang.cy * y + ang.c0;
      // Flat translation-invariant metric: |df/dx| is the same constant at
      // every node.
      data.rho[n] = 0.5 * std::log(params.r1sq * (1.0 - params.r1sq));
      const CVec3& u = data.u_hat[n];
      legendrian[static_cast<std::size_t>(n)] =
          std::abs(u.dot(ahat * u)) + std::abs(u.dot(bhat * u));
    }
  });
  return data;
}

AngleCoefficients lagrangian_angle_homogeneous(const HomogeneousParams& params) {
  AngleCoefficients ang;
  ang.cx = 1.0 - 3.0 * params.r1sq;
  ang.cy = 1.0 - 3.0 * params.r2sq;
  ang.c0 = M_PI;
  return ang;
}

std::pair<double, double> maslov_class(const HomogeneousParams& params) {
  const AngleCoefficients ang = lagrangian_angle_homogeneous(params);
  return {ang.cx, ang.cy};
}

namespace {

long long closure_multiplicity(const Rational& rsq) {
  // m = 1 - 3 rsq; smallest k > 0 with k m integer is the reduced denominator.
  const Rational m = Rational{1, 1} - Rational{3, 1} * rsq;
  return m.reduced().den;
}

}  // namespace

std::pair<long long, long long> legendrian_closure(const HomogeneousParams& params) {
  if (!params.exact) {
    throw IrrationalInput("legendrian_closure: r1^2, r2^2 must be given as fractions");
  }
  return {closure_multiplicity(params.exact->first),
          closure_multiplicity(params.exact->second)};
}

double closure_holonomy_defect(const HomogeneousParams& params, int axis, long long k,
                               int steps_per_loop) {
  // March around the k-fold loop accumulating the unwrapped phase winding of
  // each component, then compare the reconstructed endpoint with the start
  // inside the cube-root fiber (the quotient where the Lagrangian angle is
  // single valued). Zero iff the lift closes over k covers.
  const double total = 2.0 * M_PI * static_cast<double>(k);
  const long long steps = static_cast<long long>(steps_per_loop) * k;
  const double dt = total / static_cast<double>(steps);
  const CVec3 start = homogeneous_point(params, 0.0, 0.0);
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  CVec3 prev = start;
  for (long long s = 1; s <= steps; ++s) {
    const double t = dt * static_cast<double>(s);
    const CVec3 cur = axis == 0 ? homogeneous_point(params, t, 0.0)
                                : homogeneous_point(params, 0.0, t);
    for (int c = 0; c < 3; ++c) theta(c) += std::arg(cur(c) / prev(c));
    prev = cur;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m < 3; ++m) {
    const Complex root = std::polar(1.0, 2.0 * M_PI * m / 3.0);
    CVec3 rec;
    for (int c = 0; c < 3; ++c) rec(c) = start(c) * std::polar(1.0, theta(c));
    best = std::min(best, (rec - root * start).norm());
  }
  return best;
}

HomogeneousFrameData homogeneous_frame_connection(const HomogeneousParams& params) {
  const double r1s = params.r1sq, r2s = params.r2sq;
  HomogeneousFrameData out;

  // Induced metric of f in the (x, y) chart; constant by homogeneity.
  out.metric << r1s * (1.0 - r1s), -r1s * r2s, -r1s * r2s, r2s * (1.0 - r2s);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(out.metric);
  Eigen::Vector2d inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  out.L = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

  // f(x,y) = exp(x Ahat + y Bhat) p with commuting diagonal generators.
  const Complex i(0, 1);
  CMat ahat = CMat::Zero(), bhat = CMat::Zero();
  ahat(0, 0) = i * (1.0 - r1s); ahat(1, 1) = -i * r1s; ahat(2, 2) = -i * r1s;
  bhat(0, 0) = -i * r2s; bhat(1, 1) = i * (1.0 - r2s); bhat(2, 2) = -i * r2s;
  CVec3 p;
  p << params.r1(), params.r2(), params.r3();

  // Isometric coordinates (x~, y~): (x, y) = L (x~, y~), so the generators
  // become At = L(0,0) Ahat + L(1,0) Bhat and Bt = L(0,1) Ahat + L(1,1) Bhat,
  // and F(x~, y~) = exp(x~ At + y~ Bt) F0 with F0 = [At p, Bt p, p].
  const CMat at = out.L(0, 0) * ahat + out.L(1, 0) * bhat;
  const CMat bt = out.L(0, 1) * ahat + out.L(1, 1) * bhat;
  out.F0.col(0) = at * p;
  out.F0.col(1) = bt * p;
  out.F0.col(2) = p;

  // Constant connection: A(d/dx~) = F0^{-1} At F0 (the exponential factors
  // commute with their own generators), likewise for y~.
  const CMat f0inv = out.F0.adjoint();  // F0 is unitary
  out.A1 = f0inv * at * out.F0;
  out.A2 = f0inv * bt * out.F0;

  const CMat adz = (out.A1 - i * out.A2) / 2.0;
  out.X = eigenspace_project(adz, -1);
  out.C = eigenspace_project(adz, 0);
  // The eigenvalue-2 part of A(d/dz~) is (i a) pi0_perp; read a off its (0,0)
  // entry.
  out.a = eigenspace_project(adz, 2)(0, 0) / i;

  const AngleCoefficients ang = lagrangian_angle_homogeneous(params);
  out.beta_iso.cx = ang.cx * out.L(0, 0) + ang.cy * out.L(1, 0);
  out.beta_iso.cy = ang.cx * out.L(0, 1) + ang.cy * out.L(1, 1);
  out.beta_iso.c0 = ang.c0;
  return out;
}

}  // namespace loopflow
