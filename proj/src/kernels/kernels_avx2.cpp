// Compiled with -mavx2 only; callers must check avx2_table() first.
#include <immintrin.h>

#include "kernels_impl.hpp"

namespace mfgnet::kernels::detail {

void edge_hjb_avx2(const EdgeHjbArgs& a) {
  const double inv_h = 1.0 / a.h;
  const double inv_h2 = inv_h * inv_h;
  const double* u = a.nodes;
  const __m256d v_inv_h = _mm256_set1_pd(inv_h);
  const __m256d v_inv_h2 = _mm256_set1_pd(inv_h2);
  const __m256d v_two = _mm256_set1_pd(2.0);
  const __m256d v_kappa = _mm256_set1_pd(a.kappa);
  const __m256d v_two_kappa = _mm256_set1_pd(2.0 * a.kappa);
  const __m256d v_nu = _mm256_set1_pd(a.nu);
  const __m256d zero = _mm256_setzero_pd();

  int i = 0;
  for (; i + 4 <= a.interior; i += 4) {
    const __m256d left = _mm256_loadu_pd(u + i);
    const __m256d mid = _mm256_loadu_pd(u + i + 1);
    const __m256d right = _mm256_loadu_pd(u + i + 2);
    const __m256d p_minus = _mm256_mul_pd(_mm256_sub_pd(mid, left), v_inv_h);
    const __m256d p_plus = _mm256_mul_pd(_mm256_sub_pd(right, mid), v_inv_h);
    const __m256d lap = _mm256_mul_pd(
        _mm256_add_pd(_mm256_sub_pd(right, _mm256_mul_pd(v_two, mid)), left), v_inv_h2);
    const __m256d c = a.drift ? _mm256_loadu_pd(a.drift + i) : zero;
    const __m256d f0 = a.potential ? _mm256_loadu_pd(a.potential + i) : zero;

    const __m256d pm = _mm256_max_pd(p_minus, zero);
    const __m256d pp = _mm256_min_pd(p_plus, zero);
    const __m256d cp = _mm256_max_pd(c, zero);
    const __m256d cm = _mm256_min_pd(c, zero);

    const __m256d quad = _mm256_mul_pd(v_kappa, _mm256_add_pd(_mm256_mul_pd(pm, pm), _mm256_mul_pd(pp, pp)));
    const __m256d lin = _mm256_add_pd(_mm256_mul_pd(cp, p_minus), _mm256_mul_pd(cm, p_plus));
    const __m256d value = _mm256_add_pd(_mm256_add_pd(quad, lin), f0);

    _mm256_storeu_pd(a.residual + i, _mm256_sub_pd(value, _mm256_mul_pd(v_nu, lap)));
    _mm256_storeu_pd(a.d_minus + i, _mm256_add_pd(_mm256_mul_pd(v_two_kappa, pm), cp));
    _mm256_storeu_pd(a.d_plus + i, _mm256_add_pd(_mm256_mul_pd(v_two_kappa, pp), cm));
  }

  if (i < a.interior) {
    EdgeHjbArgs tail = a;
    tail.nodes = a.nodes + i;
    tail.interior = a.interior - i;
    tail.drift = a.drift ? a.drift + i : nullptr;
    tail.potential = a.potential ? a.potential + i : nullptr;
    tail.residual = a.residual + i;
    tail.d_minus = a.d_minus + i;
    tail.d_plus = a.d_plus + i;
    edge_hjb_scalar(tail);
  }
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace mfgnet::kernels::detail
