#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace miovs {

/// Row-major dense matrix of 64-bit floats. Immutable by convention once
/// built; the free functions below never modify their inputs.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c)
        : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    std::string shape_str() const;
};

/// y = m * x. Throws on dimension mismatch, naming both shapes.
std::vector<double> matvec(const DenseMatrix& m, const std::vector<double>& x);

/// y = m * x into a caller buffer; optionally row-parallel for tall
/// matrices. x and y must not alias.
void matvec_into(const DenseMatrix& m, const double* x, double* y,
                 bool parallel);

/// y = m^T * x (x has length m.rows). Throws on mismatch.
std::vector<double> matvec_t(const DenseMatrix& m, const std::vector<double>& x);

// Raw-pointer forms used by the model's batched layers. All matrices
// row-major; rows of the output are independent, so these parallelize over
// rows without changing results.

/// c[m x n] = a[m x k] * b[n x k]^T, i.e. c[i][j] = dot(a_i, b_j).
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k, bool parallel = false);

/// c[m x n] += a[m x k] * b[k x n], accumulated row by row via axpy.
void gemm_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k, bool parallel = false);

/// c[k x n] += a[m x k]^T * b[m x n]; the weight-gradient product.
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k, bool parallel = false);

}  // namespace miovs
