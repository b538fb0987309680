#include "miovs/dense.hpp"

#include <algorithm>
#include <stdexcept>

#include "miovs/kernels.hpp"
#include "miovs/parallel.hpp"

namespace miovs {

std::string DenseMatrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void matvec_into(const DenseMatrix& m, const double* x, double* y,
                 bool parallel) {
    // Quartets are indexed on the absolute row number, so the result does not
    // depend on how the rows are partitioned across workers.
    const std::size_t quartets = (m.rows + 3) / 4;
    auto body = [&m, x, y](std::size_t qb, std::size_t qe) {
        const auto& ops = kernels::active();
        for (std::size_t q = qb; q < qe; ++q) {
            const std::size_t i = 4 * q;
            if (i + 4 <= m.rows) {
                ops.dot4(x, m.row(i), m.row(i + 1), m.row(i + 2), m.row(i + 3),
                         m.cols, y + i);
            } else {
                for (std::size_t r = i; r < m.rows; ++r) {
                    y[r] = ops.dot(x, m.row(r), m.cols);
                }
            }
        }
    };
    if (parallel && m.rows >= 256) {
        parallel_rows(quartets, body);
    } else {
        body(0, quartets);
    }
}

std::vector<double> matvec(const DenseMatrix& m, const std::vector<double>& x) {
    if (x.size() != m.cols) {
        throw std::runtime_error("matvec dimension mismatch: matrix " +
                                 m.shape_str() + ", vector length " +
                                 std::to_string(x.size()));
    }
    std::vector<double> y(m.rows);
    matvec_into(m, x.data(), y.data(), false);
    return y;
}

std::vector<double> matvec_t(const DenseMatrix& m, const std::vector<double>& x) {
    if (x.size() != m.rows) {
        throw std::runtime_error("matvec_t dimension mismatch: matrix " +
                                 m.shape_str() + ", vector length " +
                                 std::to_string(x.size()));
    }
    const auto& k = kernels::active();
    std::vector<double> y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        k.axpy(x[i], m.row(i), y.data(), m.cols);
    }
    return y;
}

namespace {

// Row-blocked so a 4-row strip of b stays in L1 while it is reused across
// the block of a rows.
void gemm_nt_rows(const double* a, const double* b, double* c, std::size_t rb,
                  std::size_t re, std::size_t n, std::size_t k) {
    const auto& ops = kernels::active();
    constexpr std::size_t kRowBlock = 24;
    for (std::size_t i0 = rb; i0 < re; i0 += kRowBlock) {
        const std::size_t i1 = std::min(re, i0 + kRowBlock);
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + j * k;
            const double* b1 = b + (j + 1) * k;
            const double* b2 = b + (j + 2) * k;
            const double* b3 = b + (j + 3) * k;
            for (std::size_t i = i0; i < i1; ++i) {
                ops.dot4(a + i * k, b0, b1, b2, b3, k, c + i * n + j);
            }
        }
        for (; j < n; ++j) {
            const double* bj = b + j * k;
            for (std::size_t i = i0; i < i1; ++i) {
                c[i * n + j] = ops.dot(a + i * k, bj, k);
            }
        }
    }
}

}  // namespace

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t n, std::size_t k, bool parallel) {
    if (parallel && m >= 64) {
        parallel_rows(m, [=](std::size_t rb, std::size_t re) {
            gemm_nt_rows(a, b, c, rb, re, n, k);
        });
    } else {
        gemm_nt_rows(a, b, c, 0, m, n, k);
    }
}

void gemm_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k, bool parallel) {
    auto body = [=](std::size_t rb, std::size_t re) {
        const auto& ops = kernels::active();
        for (std::size_t i = rb; i < re; ++i) {
            const double* ai = a + i * k;
            double* ci = c + i * n;
            for (std::size_t l = 0; l < k; ++l) {
                ops.axpy(ai[l], b + l * n, ci, n);
            }
        }
    };
    if (parallel && m >= 64) {
        parallel_rows(m, body);
    } else {
        body(0, m);
    }
}

void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k, bool parallel) {
    // c[l][j] += sum_i a[i][l] * b[i][j]; parallel over output rows l so each
    // row accumulates in a fixed order regardless of thread count.
    auto body = [=](std::size_t lb, std::size_t le) {
        const auto& ops = kernels::active();
        for (std::size_t l = lb; l < le; ++l) {
            double* cl = c + l * n;
            for (std::size_t i = 0; i < m; ++i) {
                ops.axpy(a[i * k + l], b + i * n, cl, n);
            }
        }
    };
    if (parallel && k >= 64) {
        parallel_rows(k, body);
    } else {
        body(0, k);
    }
}

}  // namespace miovs
