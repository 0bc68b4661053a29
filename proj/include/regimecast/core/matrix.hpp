#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace regimecast {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        const std::size_t cols = rows.empty() ? 0 : rows.front().size();
        Matrix m(rows.size(), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != cols) {
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            }
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * cols));
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    [[nodiscard]] std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out[r] = (*this)(r, c);
        }
        return out;
    }

    /// Copy keeping only the given columns, in the given order.
    [[nodiscard]] Matrix select_columns(const std::vector<std::size_t>& keep) const {
        Matrix out(rows_, keep.size());
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t k = 0; k < keep.size(); ++k) {
                out(r, k) = (*this)(r, keep[k]);
            }
        }
        return out;
    }

    /// Copy keeping only the given rows, in the given order.
    [[nodiscard]] Matrix select_rows(const std::vector<std::size_t>& keep) const {
        Matrix out(keep.size(), cols_);
        for (std::size_t k = 0; k < keep.size(); ++k) {
            const auto src = row(keep[k]);
            std::copy(src.begin(), src.end(), out.row(k).begin());
        }
        return out;
    }

    [[nodiscard]] const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace regimecast
