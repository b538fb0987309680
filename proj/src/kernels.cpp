#include "miovs/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define MIOVS_X86 1
#else
#define MIOVS_X86 0
#endif

namespace miovs::kernels {

// ---------------------------------------------------------------------------
// scalar reference kernels
// ---------------------------------------------------------------------------

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void dot4_scalar(const double* x, const double* r0, const double* r1,
                 const double* r2, const double* r3, std::size_t n,
                 double out[4]) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        s0 += xi * r0[i];
        s1 += xi * r1[i];
        s2 += xi * r2[i];
        s3 += xi * r3[i];
    }
    out[0] = s0;
    out[1] = s1;
    out[2] = s2;
    out[3] = s3;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void mul_scalar(const double* a, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= a[i];
}

void mul3_scalar(const double* a, const double* b, const double* c,
                 double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(const double* pre, const double* upstream, double* out,
                      std::size_t n) {
    if (upstream) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = pre[i] > 0.0 ? upstream[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? 1.0 : 0.0;
    }
}

bool all_finite_scalar(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

void adam_update_scalar(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar",          dot_scalar,  dot4_scalar,      axpy_scalar,
        mul_scalar,        mul3_scalar, relu_scalar,      relu_grad_scalar,
        all_finite_scalar, adam_update_scalar,
    };
    return k;
}

// ---------------------------------------------------------------------------
// AVX2 + FMA kernels (runtime-dispatched; compiled per-function so the rest
// of the binary stays baseline x86-64)
// ---------------------------------------------------------------------------

#if MIOVS_X86

namespace {

__attribute__((target("avx2,fma"))) double hsum4(__m256d v) {
    // fixed lane order: (v0+v2) + (v1+v3)
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(s, s);
    return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

__attribute__((target("avx2,fma"))) double dot_avx2(const double* a,
                                                    const double* b,
                                                    std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                               _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                               acc0);
    }
    double s = hsum4(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

__attribute__((target("avx2,fma"))) void dot4_avx2(const double* x,
                                                   const double* r0,
                                                   const double* r1,
                                                   const double* r2,
                                                   const double* r3,
                                                   std::size_t n,
                                                   double out[4]) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x + i);
        a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(r0 + i), a0);
        a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(r1 + i), a1);
        a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(r2 + i), a2);
        a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(r3 + i), a3);
    }
    double s0 = hsum4(a0), s1 = hsum4(a1), s2 = hsum4(a2), s3 = hsum4(a3);
    for (; i < n; ++i) {
        const double xi = x[i];
        s0 += xi * r0[i];
        s1 += xi * r1[i];
        s2 += xi * r2[i];
        s3 += xi * r3[i];
    }
    out[0] = s0;
    out[1] = s1;
    out[2] = s2;
    out[3] = s3;
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double a, const double* x,
                                                   double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2,fma"))) void mul_avx2(const double* a, double* y,
                                                  std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(
            y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] *= a[i];
}

__attribute__((target("avx2,fma"))) void mul3_avx2(const double* a,
                                                   const double* b,
                                                   const double* c, double* out,
                                                   std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(out + i, _mm256_mul_pd(v, _mm256_loadu_pd(c + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i] * c[i];
}

__attribute__((target("avx2,fma"))) void relu_avx2(const double* x, double* y,
                                                   std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

__attribute__((target("avx2,fma"))) void relu_grad_avx2(const double* pre,
                                                        const double* upstream,
                                                        double* out,
                                                        std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    if (upstream) {
        for (; i + 4 <= n; i += 4) {
            const __m256d mask =
                _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
            _mm256_storeu_pd(out + i,
                             _mm256_and_pd(mask, _mm256_loadu_pd(upstream + i)));
        }
        for (; i < n; ++i) out[i] = pre[i] > 0.0 ? upstream[i] : 0.0;
    } else {
        const __m256d one = _mm256_set1_pd(1.0);
        for (; i + 4 <= n; i += 4) {
            const __m256d mask =
                _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
            _mm256_storeu_pd(out + i, _mm256_and_pd(mask, one));
        }
        for (; i < n; ++i) out[i] = pre[i] > 0.0 ? 1.0 : 0.0;
    }
}

__attribute__((target("avx2,fma"))) bool all_finite_avx2(const double* x,
                                                         std::size_t n) {
    // |x| < inf for finite values; NaN compares false as well
    const __m256d inf = _mm256_set1_pd(HUGE_VAL);
    const __m256d absmask = _mm256_castsi256_pd(
        _mm256_set1_epi64x(0x7fffffffffffffffLL));
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ax = _mm256_and_pd(_mm256_loadu_pd(x + i), absmask);
        const __m256d ok = _mm256_cmp_pd(ax, inf, _CMP_LT_OQ);
        if (_mm256_movemask_pd(ok) != 0xf) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

__attribute__((target("avx2,fma"))) void adam_update_avx2(
    double* p, double* m, double* v, const double* g, std::size_t n, double lr,
    double beta1, double beta2, double eps, double bc1, double bc2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d rbc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d rbc2v = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_fmadd_pd(ob1, gv, _mm256_mul_pd(b1, mv));
        vv = _mm256_fmadd_pd(ob2, _mm256_mul_pd(gv, gv), _mm256_mul_pd(b2, vv));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(mv, rbc1);
        const __m256d vhat = _mm256_div_pd(vv, rbc2v);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        __m256d pv = _mm256_loadu_pd(p + i);
        pv = _mm256_sub_pd(pv,
                           _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom));
        _mm256_storeu_pd(p + i, pv);
    }
    for (; i < n; ++i) {
        const double gi = g[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] * (1.0 / bc1);
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels* avx2_kernels() {
    static const bool supported =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (!supported) return nullptr;
    static const Kernels k = {
        "avx2",          dot_avx2,  dot4_avx2,      axpy_avx2,
        mul_avx2,        mul3_avx2, relu_avx2,      relu_grad_avx2,
        all_finite_avx2, adam_update_avx2,
    };
    return &k;
}

#else

const Kernels* avx2_kernels() { return nullptr; }

#endif  // MIOVS_X86

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

namespace {

const Kernels* g_forced = nullptr;

const Kernels* pick_auto() {
    if (const Kernels* k = avx2_kernels()) return k;
    return &scalar_kernels();
}

const Kernels* pick_from_env() {
    if (const char* env = std::getenv("MIOVS_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2") {
            if (const Kernels* k = avx2_kernels()) return k;
            throw std::runtime_error(
                "MIOVS_KERNELS=avx2 requested but AVX2+FMA is not available");
        }
        // "auto" or anything else falls through to detection
    }
    return pick_auto();
}

}  // namespace

const Kernels& active() {
    if (g_forced) return *g_forced;
    static const Kernels* selected = pick_from_env();
    return *selected;
}

void force_backend(const char* name) {
    const std::string want(name ? name : "auto");
    if (want == "auto") {
        g_forced = nullptr;
        return;
    }
    if (want == "scalar") {
        g_forced = &scalar_kernels();
        return;
    }
    if (want == "avx2") {
        if (const Kernels* k = avx2_kernels()) {
            g_forced = k;
            return;
        }
        throw std::runtime_error("kernel backend avx2 not available on this CPU");
    }
    throw std::runtime_error("unknown kernel backend: " + want);
}

}  // namespace miovs::kernels
