#include "menas/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace menas {

namespace {

// out_row[ox] += w * in_row[(ox + offset) mod width] for ox in [0, width),
// split into the (at most three) contiguous segments so the loops vectorize.
inline void axpy_circular_row(double* out_row, const double* in_row, double w,
                              int width, int offset) {
    int head = 0;
    if (offset < 0) {
        head = -offset;
        for (int ox = 0; ox < head; ++ox) out_row[ox] += w * in_row[ox + offset + width];
    }
    const int tail = std::max(head, width - std::max(offset, 0));
    for (int ox = head; ox < tail; ++ox) out_row[ox] += w * in_row[ox + offset];
    for (int ox = tail; ox < width; ++ox) out_row[ox] += w * in_row[ox + offset - width];
}

}  // namespace

FeatureMap conv2d_circular(const FeatureMap& x, std::span<const double> weights,
                           int kernel, int out_channels, int stride) {
    assert(kernel % 2 == 1);
    assert(x.height % stride == 0 && x.width % stride == 0);
    const int out_h = x.height / stride;
    const int out_w = x.width / stride;
    const int pad = kernel / 2;
    assert(pad <= x.height && pad <= x.width);
    assert(weights.size() == static_cast<std::size_t>(out_channels) * x.channels * kernel * kernel);

    FeatureMap out(out_channels, out_h, out_w);
    std::size_t wi = 0;
    for (int oc = 0; oc < out_channels; ++oc) {
        for (int ic = 0; ic < x.channels; ++ic) {
            for (int ky = 0; ky < kernel; ++ky) {
                for (int kx = 0; kx < kernel; ++kx, ++wi) {
                    const double w = weights[wi];
                    const int dx = kx - pad;
                    for (int oy = 0; oy < out_h; ++oy) {
                        int iy = oy * stride + ky - pad;
                        if (iy < 0) iy += x.height;
                        if (iy >= x.height) iy -= x.height;
                        const double* in_row = x.row(ic, iy);
                        double* out_row = out.row(oc, oy);
                        if (stride == 1) {
                            axpy_circular_row(out_row, in_row, w, out_w, dx);
                        } else {
                            for (int ox = 0; ox < out_w; ++ox) {
                                int ix = ox * stride + dx;
                                if (ix < 0) ix += x.width;
                                if (ix >= x.width) ix -= x.width;
                                out_row[ox] += w * in_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

FeatureMap max_pool_2x2(const FeatureMap& x) {
    assert(x.height % 2 == 0 && x.width % 2 == 0);
    FeatureMap out(x.channels, x.height / 2, x.width / 2);
    for (int c = 0; c < x.channels; ++c) {
        for (int oy = 0; oy < out.height; ++oy) {
            const double* r0 = x.row(c, 2 * oy);
            const double* r1 = x.row(c, 2 * oy + 1);
            double* o = out.row(c, oy);
            for (int ox = 0; ox < out.width; ++ox) {
                o[ox] = std::max(std::max(r0[2 * ox], r0[2 * ox + 1]),
                                 std::max(r1[2 * ox], r1[2 * ox + 1]));
            }
        }
    }
    return out;
}

void add_inplace(FeatureMap& x, const FeatureMap& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += y.data[i];
}

TokenMatrix flatten_tokens(const FeatureMap& x) {
    TokenMatrix out(x.height * x.width, x.channels);
    for (int c = 0; c < x.channels; ++c) {
        for (int y = 0; y < x.height; ++y) {
            const double* in_row = x.row(c, y);
            for (int xx = 0; xx < x.width; ++xx) {
                out.data[static_cast<std::size_t>(y * x.width + xx) * x.channels + c] = in_row[xx];
            }
        }
    }
    return out;
}

TokenMatrix matmul(const TokenMatrix& x, std::span<const double> w, int out_cols) {
    assert(w.size() == static_cast<std::size_t>(x.cols) * out_cols);
    TokenMatrix out(x.rows, out_cols);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* orow = out.row(r);
        for (int k = 0; k < x.cols; ++k) {
            const double xv = xr[k];
            const double* wrow = w.data() + static_cast<std::size_t>(k) * out_cols;
            for (int j = 0; j < out_cols; ++j) orow[j] += xv * wrow[j];
        }
    }
    return out;
}

TokenMatrix matmul_transposed(const TokenMatrix& a, const TokenMatrix& b, double scale) {
    assert(a.cols == b.cols);
    TokenMatrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
            orow[j] = acc * scale;
        }
    }
    return out;
}

TokenMatrix matmul_mm(const TokenMatrix& a, const TokenMatrix& b) {
    assert(a.cols == b.rows);
    TokenMatrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = ar[k];
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

void softmax_rows(TokenMatrix& m) {
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        double mx = row[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < m.cols; ++j) row[j] *= inv;
    }
}

double sample_mean(std::span<const double> values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const double m = sample_mean(values);
    double s = 0.0;
    for (double v : values) {
        const double d = v - m;
        s += d * d;
    }
    return s / static_cast<double>(values.size());
}

}  // namespace menas
