#pragma once

#include <map>
#include <string>
#include <vector>

#include "loopflow/cmat.hpp"
#include "loopflow/util.hpp"

namespace loopflow {

/// Grids of the S^5 lift u_hat, the (unwrapped) Lagrangian angle beta, the
/// conformal factor rho = log |d u_hat / dx| where defined, a degeneracy flag
/// per node, and named residual grids.
struct ImmersionData {
  GridSpec spec;
  std::vector<CVec3> u_hat;
  std::vector<double> beta;
  std::vector<double> rho;
  std::vector<std::uint8_t> degenerate;
  std::map<std::string, std::vector<double>> residuals;

  int nodes() const { return spec.nodes(); }
  void allocate();
  double max_residual(const std::string& name) const;
  /// Max over nodes of | |u_hat| - 1 |.
  double unit_norm_residual() const;
};

}  // namespace loopflow
