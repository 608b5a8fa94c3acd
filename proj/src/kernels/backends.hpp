#pragma once

#include "tractokit/kernels/kernels.hpp"

namespace tractokit::kernels {

#ifdef TRACTOKIT_HAVE_AVX2
const Kernels& avx2();
#endif

}  // namespace tractokit::kernels
