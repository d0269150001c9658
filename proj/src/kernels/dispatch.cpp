// SPDX-License-Identifier: Apache-2.0
#include "lens/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "lens/error.hpp"

namespace lens::kernels {

#ifndef LENS_HAVE_AVX2
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const KernelTable* detect() noexcept {
    if (const char* env = std::getenv("LENS_SIMD"); env && std::string(env) == "scalar") {
        return &scalar_table();
    }
    if (avx2_table() != nullptr && cpu_has_avx2()) return avx2_table();
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

}  // namespace

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            current().store(&scalar_table());
            return;
        case Isa::avx2:
            if (avx2_table() == nullptr || !cpu_has_avx2()) {
                throw UsageError("avx2 kernels are not available on this build or CPU");
            }
            current().store(avx2_table());
            return;
    }
}

}  // namespace lens::kernels
