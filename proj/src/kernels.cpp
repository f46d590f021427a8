#include "fedfuse/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fedfuse::numkit {

namespace {

void require_2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected a 2-D tensor, got " +
                                    shape_str(t.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                    " . " + shape_str(b.shape()));
    }
    Tensor c({m, n});
    std::vector<double> acc(n);
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            const float* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
        }
        float* crow = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[j]);
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_nt");
    require_2d(b, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw std::invalid_argument("matmul_nt: inner dimensions disagree, " +
                                    shape_str(a.shape()) + " . " + shape_str(b.shape()) + "^T");
    }
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b.data() + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
            c.at(i, j) = static_cast<float>(acc);
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_tn");
    require_2d(b, "matmul_tn");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw std::invalid_argument("matmul_tn: inner dimensions disagree, " +
                                    shape_str(a.shape()) + "^T . " + shape_str(b.shape()));
    }
    Tensor c({m, n});
    std::vector<double> acc(m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const float* arow = a.data() + p * m;
        const float* brow = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* accrow = acc.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) accrow[j] += av * brow[j];
        }
    }
    for (std::size_t i = 0; i < m * n; ++i) c[i] = static_cast<float>(acc[i]);
    return c;
}

Tensor softmax_rows(const Tensor& x) {
    require_2d(x, "softmax_rows");
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (std::isnan(x[i])) throw std::invalid_argument("softmax_rows: NaN input");
    }
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor y({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const float* row = x.data() + i * n;
        float mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        std::vector<double> e(n);
        for (std::size_t j = 0; j < n; ++j) {
            e[j] = std::exp(static_cast<double>(row[j]) - mx);
            sum += e[j];
        }
        float* out = y.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<float>(e[j] / sum);
    }
    return y;
}

Tensor transpose2d(const Tensor& x) {
    require_2d(x, "transpose2d");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor y({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y.at(j, i) = x.at(i, j);
    return y;
}

}  // namespace fedfuse::numkit
