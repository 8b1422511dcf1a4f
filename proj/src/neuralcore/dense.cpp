#include <cmath>
#include <string>

#include "ltc/dense.hpp"
#include "ltc/error.hpp"
#include "ltc/simd.hpp"

namespace ltc {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

DenseMatrix DenseMatrix::from_rows(const std::vector<Vector>& rows) {
    DenseMatrix m;
    for (const auto& r : rows) m.append_row(r);
    return m;
}

void DenseMatrix::fill(double v) {
    for (auto& x : data_) x = v;
}

bool DenseMatrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void DenseMatrix::append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = values.size();
    } else if (values.size() != cols_) {
        throw DimensionError("DenseMatrix::append_row: width " + std::to_string(values.size()) +
                             " != " + std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

double l2_norm(std::span<const double> v) { return std::sqrt(simd::dot(v, v)); }

Vector normalized(std::span<const double> v, double min_norm) {
    const double n = l2_norm(v);
    if (!(n >= min_norm)) throw DegenerateError("cannot normalize a vector of norm " + std::to_string(n));
    Vector out(v.begin(), v.end());
    for (auto& x : out) x /= n;
    return out;
}

}  // namespace ltc
