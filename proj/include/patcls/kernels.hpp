#pragma once

#include "patcls/matrix.hpp"

#include <span>

// Dense-layer kernels. Two implementations share one contract: `serial` is the
// reference, `omp` parallelizes the outer loop. Each output element is reduced
// by a single thread in the same index order as the reference, so both produce
// bit-identical results for any thread count.

namespace patcls::kernels {

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double epsilon;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

#define PATCLS_KERNEL_DECLS                                                                    \
    /* y = x * w^T + b;  x: n x in, w: out x in, y: n x out */                                 \
    void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y); \
    /* a = max(z, 0) */                                                                        \
    void relu_forward(const Matrix& z, Matrix& a);                                             \
    /* grad *= (z > 0) */                                                                      \
    void relu_backward(const Matrix& z, Matrix& grad);                                         \
    /* dw = dy^T * x, db = column sums of dy */                                                \
    void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw,                 \
                                std::span<double> db);                                         \
    /* dx = dy * w */                                                                          \
    void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);                 \
    /* One bias-corrected Adam update over a flat tensor. */                                   \
    void adam_update(std::span<double> theta, std::span<const double> grad,                    \
                     std::span<double> m, std::span<double> v, const AdamCoefficients& c);

namespace serial {
PATCLS_KERNEL_DECLS
} // namespace serial

namespace omp {
PATCLS_KERNEL_DECLS
} // namespace omp

// Dispatching entry points used by the network code.
PATCLS_KERNEL_DECLS

#undef PATCLS_KERNEL_DECLS

/// True when the library was built with OpenMP support.
bool parallel_available();
/// Routes the dispatching entry points to `omp` (default when available) or
/// `serial`. Results are identical either way.
void set_parallel(bool enabled);
bool parallel_enabled();
int max_threads();

} // namespace patcls::kernels
