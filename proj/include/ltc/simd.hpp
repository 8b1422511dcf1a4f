#pragma once
// Dense inner-loop kernels with a scalar reference implementation and
// vectorized variants chosen once at runtime.
//
// Every variant uses a fixed reduction order, so results are reproducible
// for a given level. Levels may differ from one another in the last few ulps
// (FMA contraction, lane-wise partial sums); tests pin that gap.

#include <cstddef>
#include <span>
#include <string_view>

namespace ltc::simd {

enum class Level { kScalar, kAvx2 };

std::string_view level_name(Level level);

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = W x + bias, W row-major rows x cols; bias may be null.
    void (*gemv)(const double* w, std::size_t rows, std::size_t cols,
                 const double* x, const double* bias, double* y);
    // y += W^T g
    void (*gemv_t_acc)(const double* w, std::size_t rows, std::size_t cols,
                       const double* g, double* y);
    // G += g x^T
    void (*outer_acc)(const double* g, std::size_t rows, const double* x,
                      std::size_t cols, double* out);
};

const KernelTable& scalar_kernels();
// Null when the level was not compiled in.
const KernelTable* kernels_for(Level level);

bool level_supported(Level level);
Level best_supported_level();

// The process-wide active level. Initialized from LTC_SIMD ("scalar" or
// "avx2") when set, else the best level the CPU supports.
Level active_level();
void set_active_level(Level level);
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    return active().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace ltc::simd
