#include "patcls/kernels.hpp"

#include "affine_row.hpp"

#include <cmath>

namespace patcls::kernels::serial {

void affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
    assert(x.cols == w.cols && b.size() == w.rows);
    y.rows = x.rows;
    y.cols = w.rows;
    y.data.resize(y.rows * y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        detail::affine_row(x.data.data() + i * x.cols, w.data.data(), b.data(),
                           y.data.data() + i * y.cols, x.cols, w.rows);
    }
}

void relu_forward(const Matrix& z, Matrix& a) {
    a.rows = z.rows;
    a.cols = z.cols;
    a.data.resize(z.data.size());
    for (std::size_t i = 0; i < z.data.size(); ++i) a.data[i] = z.data[i] > 0.0 ? z.data[i] : 0.0;
}

void relu_backward(const Matrix& z, Matrix& grad) {
    assert(z.data.size() == grad.data.size());
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        if (!(z.data[i] > 0.0)) grad.data[i] = 0.0;
    }
}

void affine_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
    assert(dy.rows == x.rows && db.size() == dy.cols);
    dw.rows = dy.cols;
    dw.cols = x.cols;
    dw.data.assign(dw.rows * dw.cols, 0.0);
    for (std::size_t o = 0; o < dy.cols; ++o) {
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
    for (std::size_t i = 0; i < dy.rows; ++i) {
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
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double g = grad[j];
        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * (g * g);
        const double m_hat = m[j] / c.bias_correction1;
        const double v_hat = v[j] / c.bias_correction2;
        theta[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

} // namespace patcls::kernels::serial
