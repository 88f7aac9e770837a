#pragma once

// Dense float kernels with double accumulation. Internal to the library.

#include <cstddef>
#include <vector>

namespace cainet::kernels {

/// C (M x N) = A (M x K) * B (K x N), or C += when `accumulate`.
inline void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                 bool accumulate, const float* row_bias = nullptr) {
    std::vector<double> row(n);
    for (std::size_t i = 0; i < m; ++i) {
        double* acc = row.data();
        float* crow = c + i * n;
        const double init = row_bias ? row_bias[i] : 0.0;
        if (accumulate) {
            for (std::size_t j = 0; j < n; ++j) acc[j] = crow[j] + init;
        } else {
            for (std::size_t j = 0; j < n; ++j) acc[j] = init;
        }
        const float* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const float* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
        }
        for (std::size_t j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[j]);
    }
}

/// out (cols x rows) = transpose of in (rows x cols).
inline void transpose(std::size_t rows, std::size_t cols, const float* in, float* out) {
    constexpr std::size_t kBlock = 32;
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
        for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
            const std::size_t r1 = r0 + kBlock < rows ? r0 + kBlock : rows;
            const std::size_t c1 = c0 + kBlock < cols ? c0 + kBlock : cols;
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t col = c0; col < c1; ++col) out[col * rows + r] = in[r * cols + col];
        }
    }
}

/// C (M x N) (+)= A (M x K) * B^T where B is (N x K).
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
    std::vector<float> bt(k * n);
    transpose(n, k, b, bt.data());
    gemm(m, n, k, a, bt.data(), c, accumulate);
}

/// C (M x N) (+)= A^T * B where A is (K x M) and B is (K x N).
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
    std::vector<float> at(m * k);
    transpose(k, m, a, at.data());
    gemm(m, n, k, at.data(), b, c, accumulate);
}

}  // namespace cainet::kernels
