#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace loopflow {

using Complex = std::complex<double>;

/// Rectangular grid over [0, (nx-1)hx] x [0, (ny-1)hy] with the base point at
/// node (0,0). Node (i,j) sits at (i*hx, j*hy); storage is row-major in i.
struct GridSpec {
  int nx = 1;
  int ny = 1;
  double hx = 1.0;
  double hy = 1.0;

  int nodes() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  double x(int i) const { return i * hx; }
  double y(int j) const { return j * hy; }
  bool interior(int i, int j, int margin = 1) const {
    return i >= margin && i < nx - margin && j >= margin && j < ny - margin;
  }
};

/// Deterministic RNG: mt19937_64 (bit-exact sequence fixed by the standard)
/// with explicit 53-bit uniforms and Box-Muller normals, so results depend on
/// the seed only, not on library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform();            // [0, 1)
  double gaussian();           // standard normal
  Complex cgaussian();         // complex normal, E|z|^2 = 1
  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Run fn(i) for i in [0, n). Worker count is capped by LOOPFLOW_THREADS.
/// Each index must write only its own outputs.
void parallel_for(int n, const std::function<void(int)>& fn);

int worker_count();

/// Shortest round-trip decimal for a double (std::to_chars).
std::string fmt_double(double v);

/// Parse "a/b" or a plain decimal; sets *exact when the input was a fraction.
double parse_fraction(const std::string& text, long long* num = nullptr,
                      long long* den = nullptr);

}  // namespace loopflow
