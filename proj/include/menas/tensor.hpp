#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace menas {

/// Dense [channels][height][width] feature map.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w) {}

    double* row(int c, int y) {
        return data.data() + (static_cast<std::size_t>(c) * height + y) * width;
    }
    const double* row(int c, int y) const {
        return data.data() + (static_cast<std::size_t>(c) * height + y) * width;
    }
    std::size_t size() const { return data.size(); }
};

/// Dense row-major [rows][cols] token matrix.
struct TokenMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    TokenMatrix() = default;
    TokenMatrix(int r, int c)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return data.size(); }
};

/// 2D convolution with circular (wraparound) padding. Weights are laid out
/// [out_channel][in_channel][ky][kx]. Circular padding keeps the random-matrix
/// variance recursion exact at every output position; zero padding would
/// under-count summands near borders. Kernel size must be odd; height and
/// width must be divisible by the stride.
FeatureMap conv2d_circular(const FeatureMap& x, std::span<const double> weights,
                           int kernel, int out_channels, int stride);

/// 2x2 max pooling with stride 2.
FeatureMap max_pool_2x2(const FeatureMap& x);

void add_inplace(FeatureMap& x, const FeatureMap& y);

/// Reshapes [C,H,W] into [H*W, C] token rows.
TokenMatrix flatten_tokens(const FeatureMap& x);

/// x[r, c] * w[c, out] with w row-major [cols][out_cols].
TokenMatrix matmul(const TokenMatrix& x, std::span<const double> w, int out_cols);

/// a * b^T scaled: out[i, j] = scale * sum_k a[i,k] b[j,k].
TokenMatrix matmul_transposed(const TokenMatrix& a, const TokenMatrix& b, double scale);

/// Plain a * b.
TokenMatrix matmul_mm(const TokenMatrix& a, const TokenMatrix& b);

/// Numerically stable in-place row softmax.
void softmax_rows(TokenMatrix& m);

double sample_mean(std::span<const double> values);

/// Population variance (divides by N), two-pass.
double sample_variance(std::span<const double> values);

}  // namespace menas
