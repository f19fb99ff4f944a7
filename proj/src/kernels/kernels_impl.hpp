#pragma once

#include "mfgnet/kernels.hpp"

namespace mfgnet::kernels::detail {

void edge_hjb_scalar(const EdgeHjbArgs& a);
double dot_scalar(const double* x, const double* y, std::size_t n);

#if defined(MFGNET_HAVE_AVX2)
void edge_hjb_avx2(const EdgeHjbArgs& a);
double dot_avx2(const double* x, const double* y, std::size_t n);
#endif

}  // namespace mfgnet::kernels::detail
