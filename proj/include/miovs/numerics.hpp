#pragma once

#include <vector>

#include "miovs/dense.hpp"
#include "miovs/random.hpp"

namespace miovs {

/// Elementwise max(0, x).
std::vector<double> relu(const std::vector<double>& x);

/// Elementwise subgradient of relu: 1 where x > 0, else 0 (0 at x == 0).
std::vector<double> relu_grad(const std::vector<double>& x);

/// Inverted dropout mask: each entry is 0 with probability rate, otherwise
/// 1/(1-rate), so the expected value is 1. Consumes exactly len draws from
/// the stream. Requires 0 <= rate < 1.
std::vector<double> dropout_mask(RandomStream& stream, std::size_t len,
                                 double rate);

/// dropout_mask into a caller buffer (the training loop reuses the trace
/// storage across steps).
void fill_dropout_mask(RandomStream& stream, double* mask, std::size_t len,
                       double rate);

/// Weight initialization: entries uniform in +-sqrt(6/(cols+rows)), drawn
/// row-major from the stream. Bias vectors are zero-initialized separately
/// by the model builder, not through this function.
DenseMatrix init_dense(RandomStream& stream, std::size_t rows,
                       std::size_t cols);

}  // namespace miovs
