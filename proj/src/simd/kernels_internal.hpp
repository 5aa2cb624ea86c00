#pragma once

#include "gcp/simd/kernels.hpp"

namespace gcp::simd::detail {

const KernelTable& scalar_table();

#if defined(GCP_HAVE_AVX2_KERNELS)
const KernelTable& avx2_table();
#endif

}  // namespace gcp::simd::detail
