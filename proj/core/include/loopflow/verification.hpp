#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "loopflow/frame.hpp"
#include "loopflow/homogeneous.hpp"
#include "loopflow/killing.hpp"

namespace loopflow {

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string provenance;  // module.operation that owns the invariant
};

/// Named checks with measured value vs threshold; deterministic given config
/// and seed. Any failure flips the overall status (nonzero exit downstream).
struct VerificationReport {
  std::vector<Check> checks;

  void add(const std::string& name, double value, double threshold,
           const std::string& provenance);
  /// For pass/fail facts that are not residuals (exact integers etc.).
  void add_flag(const std::string& name, bool pass, const std::string& provenance);
  void merge(const VerificationReport& other);
  bool all_pass() const;
  nlohmann::json to_json() const;
  void print(std::ostream& os) const;  // one line per check
};

/// Random-input invariants of the matrix and loop algebra: structural
/// constants, tau (automorphism, order 4, grading), projector resolution und
/// annihilation, both loop splits recomposing, split_su_b, Iwasawa round
/// trips, bracket Jacobi, mexp/polar properties.
VerificationReport verify_algebra(std::uint64_t seed, int iterations = 1000);

/// Immersion-level invariants; thresholds depend on provenance (analytic
/// homogeneous fixtures are held to 1e-12, flow-generated data to tol).
VerificationReport verify_immersion(const ImmersionData& data, bool analytic,
                                    double tol = 1e-6);

VerificationReport verify_state_grid(const StateGrid& grid, double tol = 1e-8);

VerificationReport verify_frames(const FrameFamily& frames, double unitarity_tol = 1e-8,
                                 double twist_tol = 1e-6);

}  // namespace loopflow
