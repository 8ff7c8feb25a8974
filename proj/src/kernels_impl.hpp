#pragma once
#include "fedsim/kernels.hpp"

namespace fedsim::kernels::detail {
extern const KernelTable kScalarTable;
#if FEDSIM_HAVE_AVX2_TU
extern const KernelTable kAvx2Table;
#endif
}  // namespace fedsim::kernels::detail
