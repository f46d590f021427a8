#include "fedfuse/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedfuse::numkit {

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kSineTol = 1e-10;

// One-sided Jacobi on the columns of a (P x Q, P >= Q), accumulating the
// right rotations into v (Q x Q). Columns are stored contiguously
// (column-major) so the rotation inner loops stream.
void jacobi_sweeps(std::vector<double>& a, std::vector<double>& v, std::size_t p_rows,
                   std::size_t q_cols) {
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_sine = 0.0;
        for (std::size_t p = 0; p + 1 < q_cols; ++p) {
            for (std::size_t q = p + 1; q < q_cols; ++q) {
                double* ap = a.data() + p * p_rows;
                double* aq = a.data() + q * p_rows;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < p_rows; ++i) {
                    alpha += ap[i] * ap[i];
                    beta += aq[i] * aq[i];
                    gamma += ap[i] * aq[i];
                }
                if (gamma == 0.0) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t =
                    (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                max_sine = std::max(max_sine, std::abs(s));
                for (std::size_t i = 0; i < p_rows; ++i) {
                    const double x = ap[i], y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                double* vp = v.data() + p * q_cols;
                double* vq = v.data() + q * q_cols;
                for (std::size_t i = 0; i < q_cols; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if (max_sine < kSineTol) return;
    }
    throw std::runtime_error("svd: Jacobi rotations still active after " +
                             std::to_string(kMaxSweeps) + " sweeps");
}

// Replace a numerically dead column of u with a unit vector orthogonal to
// every column before it, chosen from the canonical basis for determinism.
void gram_schmidt_fill(std::vector<double>& u, std::size_t p_rows, std::size_t col) {
    for (std::size_t cand = 0; cand < p_rows; ++cand) {
        std::vector<double> w(p_rows, 0.0);
        w[cand] = 1.0;
        for (std::size_t j = 0; j < col; ++j) {
            const double* uj = u.data() + j * p_rows;
            double dot = 0.0;
            for (std::size_t i = 0; i < p_rows; ++i) dot += uj[i] * w[i];
            for (std::size_t i = 0; i < p_rows; ++i) w[i] -= dot * uj[i];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < p_rows; ++i) norm += w[i] * w[i];
        norm = std::sqrt(norm);
        if (norm > 0.5) {
            double* uc = u.data() + col * p_rows;
            for (std::size_t i = 0; i < p_rows; ++i) uc[i] = w[i] / norm;
            return;
        }
    }
    throw std::runtime_error("svd: could not complete an orthonormal basis");
}

SvdResult svd_tall(const Tensor& mat) {
    const std::size_t p_rows = mat.dim(0);
    const std::size_t q_cols = mat.dim(1);
    // Column-major working copies in double.
    std::vector<double> a(p_rows * q_cols);
    for (std::size_t i = 0; i < p_rows; ++i) {
        for (std::size_t j = 0; j < q_cols; ++j) a[j * p_rows + i] = mat.at(i, j);
    }
    std::vector<double> v(q_cols * q_cols, 0.0);
    for (std::size_t j = 0; j < q_cols; ++j) v[j * q_cols + j] = 1.0;

    jacobi_sweeps(a, v, p_rows, q_cols);

    std::vector<double> sigma(q_cols);
    for (std::size_t j = 0; j < q_cols; ++j) {
        double dot = 0.0;
        const double* aj = a.data() + j * p_rows;
        for (std::size_t i = 0; i < p_rows; ++i) dot += aj[i] * aj[i];
        sigma[j] = std::sqrt(dot);
    }
    // Stable descending order keeps equal singular values in sweep order.
    std::vector<std::size_t> order(q_cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double s_max = sigma[order[0]];
    std::vector<double> u(p_rows * q_cols, 0.0);
    std::vector<double> v_sorted(q_cols * q_cols);
    std::vector<double> s_sorted(q_cols);
    for (std::size_t j = 0; j < q_cols; ++j) {
        const std::size_t src = order[j];
        s_sorted[j] = sigma[src];
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(src * q_cols),
                  v.begin() + static_cast<std::ptrdiff_t>((src + 1) * q_cols),
                  v_sorted.begin() + static_cast<std::ptrdiff_t>(j * q_cols));
        if (sigma[src] > s_max * 1e-13 && sigma[src] > 0.0) {
            const double inv = 1.0 / sigma[src];
            const double* aj = a.data() + src * p_rows;
            double* uj = u.data() + j * p_rows;
            for (std::size_t i = 0; i < p_rows; ++i) uj[i] = aj[i] * inv;
        } else {
            gram_schmidt_fill(u, p_rows, j);
        }
    }

    SvdResult out;
    out.u = Tensor({p_rows, q_cols});
    out.s = Tensor({q_cols});
    out.v = Tensor({q_cols, q_cols});
    for (std::size_t i = 0; i < p_rows; ++i) {
        for (std::size_t j = 0; j < q_cols; ++j) {
            out.u.at(i, j) = static_cast<float>(u[j * p_rows + i]);
        }
    }
    for (std::size_t j = 0; j < q_cols; ++j) out.s[j] = static_cast<float>(s_sorted[j]);
    for (std::size_t i = 0; i < q_cols; ++i) {
        for (std::size_t j = 0; j < q_cols; ++j) {
            out.v.at(i, j) = static_cast<float>(v_sorted[j * q_cols + i]);
        }
    }
    return out;
}

}  // namespace

SvdResult svd(const Tensor& a) {
    if (a.rank() != 2 || a.numel() == 0) {
        throw std::invalid_argument("svd: expected a non-empty 2-D matrix, got " +
                                    shape_str(a.shape()));
    }
    if (!a.all_finite()) {
        throw std::invalid_argument("svd: input contains NaN or Inf");
    }
    if (a.dim(0) >= a.dim(1)) return svd_tall(a);
    // Wide matrix: factor the transpose and swap the side factors back.
    Tensor at({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i) {
        for (std::size_t j = 0; j < a.dim(1); ++j) at.at(j, i) = a.at(i, j);
    }
    SvdResult r = svd_tall(at);
    return SvdResult{std::move(r.v), std::move(r.s), std::move(r.u)};
}

}  // namespace fedfuse::numkit
