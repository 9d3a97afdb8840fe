#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace ottrpo {

/**
 * Minimal dense row-major matrix. Everything in this library is small
 * (state/action counts in the hundreds at most), so a flat vector with
 * bounds-checked access in debug builds is all we need.
 */
template <typename T>
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    T& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    T operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    /// Row i as a contiguous pointer range.
    const T* row(std::size_t i) const { return data_.data() + i * cols_; }
    T* row(std::size_t i) { return data_.data() + i * cols_; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    bool operator==(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = Mat<double>;
using IndexMatrix = Mat<int>;

}  // namespace ottrpo
