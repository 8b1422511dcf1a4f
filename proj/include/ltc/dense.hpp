#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ltc {

using Vector = std::vector<double>;

// Row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(const std::vector<Vector>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    void fill(double v);
    bool all_finite() const;
    void append_row(std::span<const double> values);

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double l2_norm(std::span<const double> v);
// Returns v / ||v||; throws DegenerateError when ||v|| < min_norm.
Vector normalized(std::span<const double> v, double min_norm = 1e-12);

}  // namespace ltc
