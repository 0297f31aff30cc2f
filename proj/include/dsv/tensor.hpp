#ifndef DSV_TENSOR_HPP
#define DSV_TENSOR_HPP

#include <cstdint>
#include <numeric>
#include <vector>

#include "dsv/error.hpp"

namespace dsv {

// Dense row-major double tensor. Shapes stay small (<= 4 dims in practice);
// hot loops index the flat buffer directly.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel()), 0.0);
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    double& at2(int64_t i, int64_t j) { return data[i * shape[1] + j]; }
    double at2(int64_t i, int64_t j) const { return data[i * shape[1] + j]; }
};

// y[rows_out] = W[rows_out x cols] * x[cols] + b
inline void matvec(const Tensor& w, const double* x, const double* b, double* y) {
    const int64_t rows = w.shape[0], cols = w.shape[1];
    for (int64_t r = 0; r < rows; ++r) {
        const double* wr = w.ptr() + r * cols;
        double acc = b ? b[r] : 0.0;
        for (int64_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

// C[m x n] += or = A[m x k] * B[k x n]; plain ikj order so the inner loop
// streams both B and C.
inline void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k,
                   int64_t n, bool accumulate = false) {
    if (!accumulate) {
        std::fill(c, c + m * n, 0.0);
    }
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
inline void matmul_bt(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n, bool accumulate = false) {
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = accumulate ? ci[j] : 0.0;
            for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

// C[k x n] (+)= A[m x k]^T * B[m x n]
inline void matmul_at(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n, bool accumulate = false) {
    if (!accumulate) {
        std::fill(c, c + k * n, 0.0);
    }
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double* cp = c + p * n;
            for (int64_t j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

}  // namespace dsv

#endif
