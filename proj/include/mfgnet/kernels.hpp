#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2 version selected at runtime from CPUID. The environment
// variable MFGNET_KERNELS=scalar|avx2 overrides the choice.

#include <cstddef>
#include <string_view>

namespace mfgnet::kernels {

/// One edge of the discrete HJB operator for the quadratic Hamiltonian family
/// H(x,p) = kappa p^2 + c(x) p + f0(x).
struct EdgeHjbArgs {
  const double* nodes = nullptr;      ///< u_0 .. u_N, endpoints are vertex values
  int interior = 0;                   ///< N - 1
  double h = 1.0;
  double nu = 1.0;
  double kappa = 0.5;
  const double* drift = nullptr;      ///< c at interior nodes, or null for c = 0
  const double* potential = nullptr;  ///< f0 at interior nodes, or null for f0 = 0
  double* residual = nullptr;         ///< -nu u'' + H_num
  double* d_minus = nullptr;          ///< dH_num / dp^-
  double* d_plus = nullptr;           ///< dH_num / dp^+
};

using EdgeHjbKernel = void (*)(const EdgeHjbArgs&);
using DotKernel = double (*)(const double*, const double*, std::size_t);

struct KernelTable {
  std::string_view name;
  EdgeHjbKernel edge_hjb;
  DotKernel dot;
};

const KernelTable& scalar_table() noexcept;
/// Null when the CPU (or the build target) lacks AVX2.
const KernelTable* avx2_table() noexcept;

/// Table used by the library; resolved once.
const KernelTable& active() noexcept;

inline void edge_hjb(const EdgeHjbArgs& args) { active().edge_hjb(args); }
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }

/// Monotone two-slope value of kappa p^2 + c p + f0 together with its slope
/// sensitivities; shared by the scalar kernel and pointwise callers.
struct QuadraticGodunov {
  double value;
  double d_minus;
  double d_plus;
};

inline QuadraticGodunov quadratic_godunov(double kappa, double c, double f0, double p_minus,
                                          double p_plus) noexcept {
  const double pm = p_minus > 0.0 ? p_minus : 0.0;
  const double pp = p_plus < 0.0 ? p_plus : 0.0;
  const double cp = c > 0.0 ? c : 0.0;
  const double cm = c < 0.0 ? c : 0.0;
  QuadraticGodunov out;
  out.value = kappa * (pm * pm + pp * pp) + (cp * p_minus + cm * p_plus) + f0;
  out.d_minus = 2.0 * kappa * pm + cp;
  out.d_plus = 2.0 * kappa * pp + cm;
  return out;
}

}  // namespace mfgnet::kernels
