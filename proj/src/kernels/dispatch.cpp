#include "backends.hpp"

#include <cstdlib>
#include <cstring>

namespace tractokit::kernels {

const Kernels* by_name(const char* name) {
    if (name == nullptr) return nullptr;
    if (std::strcmp(name, "scalar") == 0) return &scalar();
#ifdef TRACTOKIT_HAVE_AVX2
    if (std::strcmp(name, "avx2") == 0 &&
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return &avx2();
#endif
    return nullptr;
}

namespace {

const Kernels& select() {
    if (const char* env = std::getenv("TRACTOKIT_KERNELS"))
        if (const Kernels* forced = by_name(env)) return *forced;
#ifdef TRACTOKIT_HAVE_AVX2
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return avx2();
#endif
    return scalar();
}

}  // namespace

const Kernels& active() {
    static const Kernels& chosen = select();
    return chosen;
}

}  // namespace tractokit::kernels
