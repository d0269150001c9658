// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lens/kernels.hpp"
#include "lens/parallel.hpp"
#include "lens/rng.hpp"
#include "support.hpp"

using namespace lens;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-10.0, 10.0);
    return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

}  // namespace

TEST_CASE("scalar dot matches a long-double reference") {
    Rng rng(1);
    const auto& t = kernels::scalar_table();
    for (std::size_t n : {0u, 1u, 3u, 7u, 64u, 257u}) {
        const auto a = random_vector(rng, n), b = random_vector(rng, n);
        CHECK(t.dot(a.data(), b.data(), n) == doctest::Approx(naive_dot(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("avx2 kernels agree with scalar kernels") {
    const auto* simd = kernels::avx2_table();
    if (simd == nullptr || !kernels::cpu_has_avx2()) {
        MESSAGE("AVX2 variant not available on this build or CPU");
        return;
    }
    const auto& ref = kernels::scalar_table();
    Rng rng(2);
    for (std::size_t n = 0; n <= 67; ++n) {
        const auto a = random_vector(rng, n), b = random_vector(rng, n);
        double scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        CHECK(std::abs(simd->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * scale);

        double dist_scale = 1.0;
        for (std::size_t i = 0; i < n; ++i) dist_scale += (a[i] - b[i]) * (a[i] - b[i]);
        CHECK(std::abs(simd->squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
              1e-13 * dist_scale);

        auto y1 = b, y2 = b;
        ref.axpy(0.37, a.data(), y1.data(), n);
        simd->axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-14));
    }
}

TEST_CASE("select switches the active table") {
    const auto before = kernels::active().isa;
    kernels::select(kernels::Isa::scalar);
    CHECK(kernels::active().isa == kernels::Isa::scalar);
    if (kernels::avx2_table() && kernels::cpu_has_avx2()) {
        kernels::select(kernels::Isa::avx2);
        CHECK(kernels::active().isa == kernels::Isa::avx2);
    }
    kernels::select(before);
}

TEST_CASE("parallel_for covers every index exactly once") {
    for (std::size_t n : {0u, 1u, 63u, 64u, 1000u, 4097u}) {
        std::vector<int> hits(n, 0);
        parallel_for(n, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) ++hits[i];
        });
        for (int h : hits) CHECK(h == 1);
    }
    CHECK(thread_count() >= 1);
}
