#include "miovs/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "miovs/kernels.hpp"

namespace miovs {

std::vector<double> relu(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    kernels::active().relu(x.data(), y.data(), x.size());
    return y;
}

std::vector<double> relu_grad(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    kernels::active().relu_grad(x.data(), nullptr, y.data(), x.size());
    return y;
}

void fill_dropout_mask(RandomStream& stream, double* mask, std::size_t len,
                       double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::runtime_error("dropout rate must be in [0, 1), got " +
                                 std::to_string(rate));
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < len; ++i) {
        mask[i] = stream.uniform() < rate ? 0.0 : keep_scale;
    }
}

std::vector<double> dropout_mask(RandomStream& stream, std::size_t len,
                                 double rate) {
    std::vector<double> mask(len);
    fill_dropout_mask(stream, mask.data(), len, rate);
    return mask;
}

DenseMatrix init_dense(RandomStream& stream, std::size_t rows,
                       std::size_t cols) {
    DenseMatrix m(rows, cols);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(cols + rows));
    for (double& v : m.data) v = stream.uniform(-bound, bound);
    return m;
}

}  // namespace miovs
