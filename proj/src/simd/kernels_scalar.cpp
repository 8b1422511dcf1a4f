#include "ltc/simd.hpp"

namespace ltc::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols,
                 const double* x, const double* bias, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double v = dot_scalar(w + r * cols, x, cols);
        y[r] = bias ? v + bias[r] : v;
    }
}

void gemv_t_acc_scalar(const double* w, std::size_t rows, std::size_t cols,
                       const double* g, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0) axpy_scalar(g[r], w + r * cols, y, cols);
    }
}

void outer_acc_scalar(const double* g, std::size_t rows, const double* x,
                      std::size_t cols, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0) axpy_scalar(g[r], x, out + r * cols, cols);
    }
}

constexpr KernelTable kScalarTable{
    dot_scalar, squared_distance_scalar, axpy_scalar,
    gemv_scalar, gemv_t_acc_scalar, outer_acc_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalarTable; }

}  // namespace ltc::simd
