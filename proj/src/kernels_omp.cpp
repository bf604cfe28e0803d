#include "patcls/kernels.hpp"

#include "affine_row.hpp"

#include <cmath>
#include <cstdint>

#ifdef PATCLS_HAVE_OPENMP
#include <omp.h>
#endif

// Loop bodies mirror kernels_serial.cpp exactly; only the outer loop is split
// across threads. Keep the two files in sync.

namespace patcls::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

bool g_parallel = parallel_available();

} // namespace

namespace omp {

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
    assert(x.cols == w.cols && b.size() == w.rows);
    y.rows = x.rows;
    y.cols = w.rows;
    y.data.resize(y.rows * y.cols);
    const auto n = static_cast<std::int64_t>(x.rows);
    [[maybe_unused]] const bool big = x.rows * w.rows * x.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        detail::affine_row(x.data.data() + i * x.cols, w.data.data(), b.data(),
                           y.data.data() + i * y.cols, x.cols, w.rows);
    }
}

void relu_forward(const Matrix& z, Matrix& a) {
    a.rows = z.rows;
    a.cols = z.cols;
    a.data.resize(z.data.size());
    const auto n = static_cast<std::int64_t>(z.data.size());
    [[maybe_unused]] const bool big = z.data.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < n; ++i) a.data[i] = z.data[i] > 0.0 ? z.data[i] : 0.0;
}

void relu_backward(const Matrix& z, Matrix& grad) {
    assert(z.data.size() == grad.data.size());
    const auto n = static_cast<std::int64_t>(z.data.size());
    [[maybe_unused]] const bool big = z.data.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < n; ++i) {
        if (!(z.data[i] > 0.0)) grad.data[i] = 0.0;
    }
}

void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
    assert(dy.rows == x.rows && db.size() == dy.cols);
    dw.rows = dy.cols;
    dw.cols = x.cols;
    dw.data.assign(dw.rows * dw.cols, 0.0);
    const auto outs = static_cast<std::int64_t>(dy.cols);
    [[maybe_unused]] const bool big = dy.rows * dy.cols * x.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t oo = 0; oo < outs; ++oo) {
        const auto o = static_cast<std::size_t>(oo);
        double* dwo = dw.data.data() + o * dw.cols;
        double bias = 0.0;
        for (std::size_t i = 0; i < dy.rows; ++i) {
            const double g = dy.data[i * dy.cols + o];
            const double* xi = x.data.data() + i * x.cols;
            for (std::size_t k = 0; k < x.cols; ++k) dwo[k] += g * xi[k];
            bias += g;
        }
        db[o] = bias;
    }
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
    assert(dy.cols == w.rows);
    dx.rows = dy.rows;
    dx.cols = w.cols;
    dx.data.assign(dx.rows * dx.cols, 0.0);
    const auto n = static_cast<std::int64_t>(dy.rows);
    [[maybe_unused]] const bool big = dy.rows * w.rows * w.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* dxi = dx.data.data() + i * dx.cols;
        for (std::size_t o = 0; o < w.rows; ++o) {
            const double g = dy.data[i * dy.cols + o];
            const double* wo = w.data.data() + o * w.cols;
            for (std::size_t k = 0; k < w.cols; ++k) dxi[k] += g * wo[k];
        }
    }
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c) {
    const auto n = static_cast<std::int64_t>(theta.size());
    [[maybe_unused]] const bool big = theta.size() >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t jj = 0; jj < n; ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        const double g = grad[j];
        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * (g * g);
        const double m_hat = m[j] / c.bias_correction1;
        const double v_hat = v[j] / c.bias_correction2;
        theta[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

} // namespace omp

bool parallel_available() {
#ifdef PATCLS_HAVE_OPENMP
    return true;
#else
    return false;
#endif
}

void set_parallel(bool enabled) { g_parallel = enabled && parallel_available(); }

bool parallel_enabled() { return g_parallel; }

int max_threads() {
#ifdef PATCLS_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
    g_parallel ? omp::affine_forward(x, w, b, y) : serial::affine_forward(x, w, b, y);
}

void relu_forward(const Matrix& z, Matrix& a) {
    g_parallel ? omp::relu_forward(z, a) : serial::relu_forward(z, a);
}

void relu_backward(const Matrix& z, Matrix& grad) {
    g_parallel ? omp::relu_backward(z, grad) : serial::relu_backward(z, grad);
}

void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
    g_parallel ? omp::affine_backward_params(dy, x, dw, db)
               : serial::affine_backward_params(dy, x, dw, db);
}

void affine_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
    g_parallel ? omp::affine_backward_input(dy, w, dx) : serial::affine_backward_input(dy, w, dx);
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c) {
    g_parallel ? omp::adam_update(theta, grad, m, v, c) : serial::adam_update(theta, grad, m, v, c);
}

} // namespace patcls::kernels
