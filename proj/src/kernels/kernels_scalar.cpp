#include "kernels_impl.hpp"

namespace mfgnet::kernels::detail {

void edge_hjb_scalar(const EdgeHjbArgs& a) {
  const double inv_h = 1.0 / a.h;
  const double inv_h2 = inv_h * inv_h;
  const double* u = a.nodes;
  for (int i = 0; i < a.interior; ++i) {
    const double left = u[i];
    const double mid = u[i + 1];
    const double right = u[i + 2];
    const double pm = (mid - left) * inv_h;
    const double pp = (right - mid) * inv_h;
    const double lap = ((right - 2.0 * mid) + left) * inv_h2;
    const double c = a.drift ? a.drift[i] : 0.0;
    const double f0 = a.potential ? a.potential[i] : 0.0;
    const auto g = quadratic_godunov(a.kappa, c, f0, pm, pp);
    a.residual[i] = g.value - a.nu * lap;
    a.d_minus[i] = g.d_minus;
    a.d_plus[i] = g.d_plus;
  }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace mfgnet::kernels::detail
