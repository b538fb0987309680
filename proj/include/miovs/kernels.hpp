#pragma once

#include <cstddef>

namespace miovs::kernels {

/// Table of the hot inner loops. Every entry has a scalar reference
/// implementation and, on x86-64 with AVX2+FMA, a vectorized variant chosen
/// at runtime. SIMD variants may reassociate reductions, so results can
/// differ from the scalar reference in the last few ulps; the equivalence
/// tests pin the allowed gap. Within one process the selected backend is
/// fixed, which keeps repeated runs bit-identical.
struct Kernels {
    const char* name;

    /// sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);

    /// Four dot products sharing one left operand: out[r] = sum_i x[i]*rows[r][i].
    /// Used by the matrix kernels to block rows and reuse x loads.
    void (*dot4)(const double* x, const double* r0, const double* r1,
                 const double* r2, const double* r3, std::size_t n,
                 double out[4]);

    /// y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    /// y[i] *= a[i]
    void (*mul)(const double* a, double* y, std::size_t n);

    /// out[i] = a[i] * b[i] * c[i]
    void (*mul3)(const double* a, const double* b, const double* c,
                 double* out, std::size_t n);

    /// y[i] = max(0, x[i]); in-place allowed (y == x)
    void (*relu)(const double* x, double* y, std::size_t n);

    /// out[i] = (pre[i] > 0) ? upstream[i] : 0. With upstream == nullptr the
    /// indicator itself is written. The derivative at pre == 0 is 0.
    void (*relu_grad)(const double* pre, const double* upstream, double* out,
                      std::size_t n);

    bool (*all_finite)(const double* x, std::size_t n);

    /// One Adam update over a contiguous span. bc1 = 1-beta1^t, bc2 = 1-beta2^t
    /// are precomputed by the caller.
    /// m <- beta1*m + (1-beta1)*g ; v <- beta2*v + (1-beta2)*g^2
    /// p <- p - lr * (m/bc1) / (sqrt(v/bc2) + eps)
    void (*adam_update)(double* p, double* m, double* v, const double* g,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2);
};

const Kernels& scalar_kernels();

/// nullptr when the CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

/// Backend in use: AVX2 when supported, else scalar. Overridable with
/// force_backend() or the MIOVS_KERNELS environment variable
/// ("scalar" | "avx2" | "auto"), read once on first use.
const Kernels& active();

/// "scalar", "avx2" or "auto". Throws if the requested backend is unavailable.
void force_backend(const char* name);

}  // namespace miovs::kernels
