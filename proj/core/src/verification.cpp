#include "loopflow/verification.hpp"

#include <cmath>
#include <ostream>

#include "loopflow/errors.hpp"

namespace loopflow {

void VerificationReport::add(const std::string& name, double value, double threshold,
                             const std::string& provenance) {
  checks.push_back({name, value, threshold, value < threshold, provenance});
}

void VerificationReport::add_flag(const std::string& name, bool pass,
                                  const std::string& provenance) {
  checks.push_back({name, pass ? 0.0 : 1.0, 0.5, pass, provenance});
}

void VerificationReport::merge(const VerificationReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

bool VerificationReport::all_pass() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"pass", c.pass},
                   {"provenance", c.provenance}});
  }
  return nlohmann::json{{"checks", arr}, {"pass", all_pass()}};
}

void VerificationReport::print(std::ostream& os) const {
  for (const auto& c : checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  value=" << fmt_double(c.value)
       << " threshold=" << fmt_double(c.threshold) << "  (" << c.provenance << ")\n";
  }
}

namespace {

CMat random_cmat(Rng& rng) {
  CMat m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = rng.cgaussian();
  }
  return m;
}

CMat random_skew(Rng& rng) {
  const CMat m = random_cmat(rng);
  return (m - m.adjoint()) / 2.0;
}

LaurentLoop random_twisted_loop(Rng& rng, int band) {
  LaurentLoop l(-band, band);
  for (int k = -band; k <= band; ++k) {
    l.at(k) = eigenspace_project(random_cmat(rng), ((k % 4) + 4) % 4);
  }
  l.mark_twisted();
  return l;
}

}  // namespace

VerificationReport verify_algebra(std::uint64_t seed, int iterations) {
  VerificationReport rep;
  Rng rng(seed);
  const Complex i(0, 1);

  rep.add("structural_constants", structural::verify(), 1e-15,
          "matrix_core.structural");

  double tau4 = 0, tau_auto = 0, grading = 0, proj_resolve = 0, proj_annihilate = 0,
         jacobi = 0, mexp_inv = 0, mexp_det = 0, polar_fix = 0, split_exact = 0,
         split_based_exact = 0, split_twisted_exact = 0, iw_group = 0, iw_alg = 0,
         tau_group_order = 0;
  for (int it = 0; it < iterations; ++it) {
    const CMat m = random_cmat(rng);
    const CMat n = random_cmat(rng);

    // tau^4 = Id and the automorphism property; group version on a unitary.
    CMat t = m;
    for (int k = 0; k < 4; ++k) t = tau_alg(t);
    tau4 = std::max(tau4, (t - m).norm());
    tau_auto = std::max(tau_auto,
                        (tau_alg(bracket(m, n)) - bracket(tau_alg(m), tau_alg(n))).norm());
    const CMat u = mexp_skew(random_skew(rng));
    CMat tg = u;
    for (int k = 0; k < 4; ++k) tg = tau_group(tg);
    tau_group_order = std::max(tau_group_order, (tg - u).norm());

    // Grading [E_a, E_b] in E_{a+b mod 4}; projectors resolve and annihilate.
    const int a = static_cast<int>(rng.bits() % 4);
    const int b = static_cast<int>(rng.bits() % 4);
    const CMat ma = eigenspace_project(m, a);
    const CMat mb = eigenspace_project(n, b);
    grading = std::max(grading, eigenspace_residual(bracket(ma, mb), (a + b) % 4));
    CMat sum = CMat::Zero();
    for (int c = -1; c <= 2; ++c) sum += eigenspace_project(m, c);
    proj_resolve = std::max(proj_resolve, (sum - m).norm());
    proj_annihilate = std::max(
        proj_annihilate,
        eigenspace_project(eigenspace_project(m, a), (a + 1) % 4).norm());
    proj_annihilate = std::max(
        proj_annihilate,
        (eigenspace_project(ma, a) - ma).norm());

    // Jacobi identity on random triples.
    const CMat q = random_cmat(rng);
    jacobi = std::max(jacobi, (bracket(m, bracket(n, q)) + bracket(n, bracket(q, m)) +
                               bracket(q, bracket(m, n)))
                                  .norm());

    // mexp: inverse pairing and determinant identity.
    const CMat s = random_skew(rng);
    mexp_inv = std::max(mexp_inv,
                        (mexp_skew(s) * mexp_skew(CMat(-s)) - CMat::Identity()).norm());
    mexp_det = std::max(mexp_det, std::abs(mexp_skew(s).determinant() -
                                           std::exp(s.trace())));

    // polar: unitary fixed point.
    polar_fix = std::max(polar_fix, (polar_unitarize(u) - u).norm());

    // split_su_b: recompose + factor shapes, on a random sl(2) block.
    CMat sl = CMat::Zero();
    sl(0, 0) = rng.cgaussian();
    sl(0, 1) = rng.cgaussian();
    sl(1, 0) = rng.cgaussian();
    sl(1, 1) = -sl(0, 0);
    const auto [su_part, b_part] = split_su_b(sl);
    split_exact = std::max(split_exact, (su_part + b_part - sl).norm());
    split_exact = std::max(split_exact, skew_hermitian_residual(su_part));
    split_exact = std::max(split_exact, std::abs(b_part(0, 1)));
    split_exact = std::max(split_exact, std::abs(b_part(0, 0).imag()));

    // Both loop splits recompose exactly.
    const LaurentLoop xi = random_twisted_loop(rng, 3);
    const auto [su_loop, plus_loop] = loop_split_twisted(xi);
    split_twisted_exact =
        std::max(split_twisted_exact, (su_loop + plus_loop - xi).norm());
    split_twisted_exact = std::max(split_twisted_exact, reality_residual(su_loop));
    const auto [omega, plus] = loop_split_based(xi);
    split_based_exact = std::max(split_based_exact, (omega + plus - xi).norm());
    split_based_exact =
        std::max(split_based_exact, omega.eval(Complex(1, 0)).norm());
    for (int kk = plus.kmin(); kk < 0; ++kk) {
      split_based_exact = std::max(split_based_exact, plus.coeff(kk).norm());
    }

    // Group Iwasawa round trip on a conditioned det-1 matrix.
    CMat2 g;
    for (;;) {
      g << rng.cgaussian(), rng.cgaussian(), rng.cgaussian(), rng.cgaussian();
      const Complex det = g.determinant();
      if (std::abs(det) < 1e-3) continue;
      g /= std::sqrt(det);
      Eigen::JacobiSVD<CMat2> svd(g);
      if (svd.singularValues()(0) / svd.singularValues()(1) <= 1e3) break;
    }
    const IwasawaSU2 iw = iwasawa_group_su2(g);
    iw_group = std::max(iw_group, (iw.f * iw.b.matrix() - g).norm());
    iw_group = std::max(iw_group, (iw.f.adjoint() * iw.f - CMat2::Identity()).norm());
    iw_group = std::max(iw_group, std::abs(iw.b.t11 * iw.b.t22 - 1.0));
    iw_alg = std::max(iw_alg, (su_part + b_part - sl).norm());
  }

  rep.add("tau_alg_order_4", tau4, 1e-13, "loop_algebra.tau_alg");
  rep.add("tau_group_order_4", tau_group_order, 1e-12, "loop_algebra.tau_group");
  rep.add("tau_automorphism", tau_auto, 1e-12, "loop_algebra.tau_alg");
  rep.add("eigenspace_grading", grading, 1e-12, "loop_algebra.eigenspace_project");
  rep.add("projector_resolution", proj_resolve, 1e-13,
          "loop_algebra.eigenspace_project");
  rep.add("projector_annihilation", proj_annihilate, 1e-13,
          "loop_algebra.eigenspace_project");
  rep.add("bracket_jacobi", jacobi, 1e-12, "matrix_core.bracket");
  rep.add("mexp_inverse_pair", mexp_inv, 1e-12, "matrix_core.mexp_skew");
  rep.add("mexp_det_trace", mexp_det, 1e-12, "matrix_core.mexp_skew");
  rep.add("polar_fixed_point", polar_fix, 1e-13, "matrix_core.polar_unitarize");
  rep.add("split_su_b_round_trip", split_exact, 1e-12, "loop_algebra.split_su_b");
  rep.add("loop_split_twisted_round_trip", split_twisted_exact, 1e-13,
          "loop_algebra.loop_split_twisted");
  rep.add("loop_split_based_round_trip", split_based_exact, 1e-13,
          "loop_algebra.loop_split_based");
  rep.add("iwasawa_group_round_trip", iw_group, 1e-12,
          "loop_algebra.iwasawa_group_su2");
  rep.add("iwasawa_algebra_round_trip", iw_alg, 1e-12, "loop_algebra.split_su_b");
  return rep;
}

VerificationReport verify_immersion(const ImmersionData& data, bool analytic,
                                    double tol) {
  VerificationReport rep;
  const double strict = analytic ? 1e-12 : tol;
  rep.add("unit_norm", data.unit_norm_residual(), analytic ? 1e-12 : 1e-8,
          "frame_geometry.extract_immersion");
  if (analytic && data.residuals.count("legendrian")) {
    // Analytic-derivative residual carried by the fixture itself.
    rep.add("legendrian", data.max_residual("legendrian"), strict,
            "homogeneous_tori.homogeneous_immersion");
  } else {
    rep.add("legendrian", max_legendrian_residual(data), strict,
            "frame_geometry.legendrian_residual");
  }
  rep.add("harmonicity", harmonicity_residual(data.beta, data.spec), strict,
          "frame_geometry.harmonicity_residual");
  if (data.residuals.count("conformal_scale")) {
    rep.add("conformal_scale", data.max_residual("conformal_scale"), tol,
            "frame_geometry.extract_immersion");
    rep.add("conformal_angle", data.max_residual("conformal_angle"), tol,
            "frame_geometry.extract_immersion");
  }
  return rep;
}

VerificationReport verify_state_grid(const StateGrid& grid, double tol) {
  VerificationReport rep;
  const FlowDiagnostics d = conserved_diagnostics(grid);
  rep.add("reality", d.reality.value, tol, "lax_flow.conserved_diagnostics");
  rep.add("twist", d.twist.value, tol, "lax_flow.conserved_diagnostics");
  rep.add("band_leak", d.band_leak.value, 1e-10, "lax_flow.vector_field");
  rep.add("norm_drift", d.norm_drift.value, tol, "lax_flow.integrate_flow");
  rep.add("bottom_constancy", d.bottom_drift.value, tol, "lax_flow.integrate_flow");
  rep.add("spectral_drift", d.spectral_drift.value, std::max(tol, 1e-8),
          "lax_flow.conserved_diagnostics");
  return rep;
}

VerificationReport verify_frames(const FrameFamily& frames, double unitarity_tol,
                                 double twist_tol) {
  VerificationReport rep;
  rep.add("frame_unitarity", frames.max_unitarity_residual(), unitarity_tol,
          "frame_geometry.integrate_frame");
  rep.add("frame_twisting", frames.twisting_residual(), twist_tol,
          "frame_geometry.integrate_frame");
  double base_off = 0.0;
  for (const auto& sample : frames.frames) {
    base_off = std::max(base_off,
                        (sample[0] - CMat::Identity()).norm());
  }
  rep.add("base_point_identity", base_off, 1e-14, "frame_geometry.integrate_frame");
  return rep;
}

}  // namespace loopflow
