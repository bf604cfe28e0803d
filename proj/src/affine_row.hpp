#pragma once

#include <cstddef>

namespace patcls::kernels::detail {

// y[o] = sum_k x[k] * w[o, k] + b[o] for one input row. Four outputs are
// accumulated side by side to break the add dependency chain; each output is
// still summed over k in ascending order, so the result matches the plain loop
// bit for bit.
inline void affine_row(const double* x, const double* w, const double* b, double* y,
                       std::size_t in, std::size_t out) {
    std::size_t o = 0;
    for (; o + 4 <= out; o += 4) {
        const double* w0 = w + o * in;
        const double* w1 = w0 + in;
        const double* w2 = w1 + in;
        const double* w3 = w2 + in;
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        for (std::size_t k = 0; k < in; ++k) {
            const double xk = x[k];
            a0 += xk * w0[k];
            a1 += xk * w1[k];
            a2 += xk * w2[k];
            a3 += xk * w3[k];
        }
        y[o] = a0 + b[o];
        y[o + 1] = a1 + b[o + 1];
        y[o + 2] = a2 + b[o + 2];
        y[o + 3] = a3 + b[o + 3];
    }
    for (; o < out; ++o) {
        const double* wo = w + o * in;
        double acc = 0.0;
        for (std::size_t k = 0; k < in; ++k) acc += x[k] * wo[k];
        y[o] = acc + b[o];
    }
}

} // namespace patcls::kernels::detail
