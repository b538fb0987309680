#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "miovs/kernels.hpp"
#include "miovs/random.hpp"

using namespace miovs;

namespace {

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 31, 64, 100, 517};

std::vector<double> random_vec(RandomStream& rng, std::size_t n, double lo = -1.0,
                               double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Reductions may be reassociated by the SIMD variants; bound the gap by the
// absolute-sum scale of the reduction.
void check_dot_close(double a, double b, double scale) {
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, scale));
}

void check_elementwise_close(const std::vector<double>& a,
                             const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
    }
}

}  // namespace

TEST_CASE("scalar and simd kernels agree") {
    const kernels::Kernels& scalar = kernels::scalar_kernels();
    const kernels::Kernels* simd = kernels::avx2_kernels();
    if (!simd) {
        MESSAGE("AVX2 not available; scalar-only run");
        return;
    }
    RandomStream rng(1234);

    for (std::size_t n : kSizes) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);

        SUBCASE("") {}  // keep loop body flat; doctest subcases not needed here

        // dot
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i]);
        check_dot_close(scalar.dot(a.data(), b.data(), n),
                        simd->dot(a.data(), b.data(), n), scale);

        // dot4
        if (n > 0) {
            const auto r0 = random_vec(rng, n);
            const auto r1 = random_vec(rng, n);
            const auto r2 = random_vec(rng, n);
            const auto r3 = random_vec(rng, n);
            double out_s[4], out_v[4];
            scalar.dot4(a.data(), r0.data(), r1.data(), r2.data(), r3.data(), n,
                        out_s);
            simd->dot4(a.data(), r0.data(), r1.data(), r2.data(), r3.data(), n,
                       out_v);
            for (int j = 0; j < 4; ++j) {
                check_dot_close(out_s[j], out_v[j], static_cast<double>(n));
            }
        }

        // axpy
        {
            auto ys = b;
            auto yv = b;
            scalar.axpy(0.37, a.data(), ys.data(), n);
            simd->axpy(0.37, a.data(), yv.data(), n);
            check_elementwise_close(ys, yv);
        }

        // mul
        {
            auto ys = b;
            auto yv = b;
            scalar.mul(a.data(), ys.data(), n);
            simd->mul(a.data(), yv.data(), n);
            CHECK(ys == yv);  // plain products, no reassociation
        }

        // mul3
        {
            const auto c = random_vec(rng, n);
            std::vector<double> os(n), ov(n);
            scalar.mul3(a.data(), b.data(), c.data(), os.data(), n);
            simd->mul3(a.data(), b.data(), c.data(), ov.data(), n);
            CHECK(os == ov);
        }

        // relu / relu_grad: pure selects, must match exactly
        {
            std::vector<double> os(n), ov(n);
            scalar.relu(a.data(), os.data(), n);
            simd->relu(a.data(), ov.data(), n);
            CHECK(os == ov);

            scalar.relu_grad(a.data(), b.data(), os.data(), n);
            simd->relu_grad(a.data(), b.data(), ov.data(), n);
            CHECK(os == ov);

            scalar.relu_grad(a.data(), nullptr, os.data(), n);
            simd->relu_grad(a.data(), nullptr, ov.data(), n);
            CHECK(os == ov);
        }

        // adam_update
        {
            std::vector<double> ps = a, pv = a;
            std::vector<double> ms(n, 0.01), mv(n, 0.01);
            std::vector<double> vs(n, 0.02), vv(n, 0.02);
            const auto g = random_vec(rng, n);
            scalar.adam_update(ps.data(), ms.data(), vs.data(), g.data(), n,
                               1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001);
            simd->adam_update(pv.data(), mv.data(), vv.data(), g.data(), n, 1e-3,
                              0.9, 0.999, 1e-8, 0.1, 0.001);
            check_elementwise_close(ps, pv);
            check_elementwise_close(ms, mv);
            check_elementwise_close(vs, vv);
        }
    }
}

TEST_CASE("all_finite catches nan and inf at any position") {
    const kernels::Kernels& scalar = kernels::scalar_kernels();
    const kernels::Kernels* simd = kernels::avx2_kernels();
    RandomStream rng(99);

    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 9u, 33u}) {
        auto v = random_vec(rng, n);
        CHECK(scalar.all_finite(v.data(), n));
        if (simd) CHECK(simd->all_finite(v.data(), n));
        for (std::size_t bad = 0; bad < n; ++bad) {
            for (double poison : {std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::infinity(),
                                  -std::numeric_limits<double>::infinity()}) {
                auto w = v;
                w[bad] = poison;
                CHECK_FALSE(scalar.all_finite(w.data(), n));
                if (simd) CHECK_FALSE(simd->all_finite(w.data(), n));
            }
        }
    }
}

TEST_CASE("kernel backend can be forced") {
    kernels::force_backend("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::force_backend("auto");
    if (kernels::avx2_kernels()) {
        CHECK(std::string(kernels::active().name) == "avx2");
        kernels::force_backend("avx2");
        CHECK(std::string(kernels::active().name) == "avx2");
        kernels::force_backend("auto");
    }
    CHECK_THROWS(kernels::force_backend("neon"));
}
