#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace smyrf {

// Dense row-major matrix of doubles. Q, K, V, product matrices and attention
// maps all use this one type; 64-bit floats throughout for verification
// headroom.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);  // zero-filled
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;
    // Throws DomainError naming `what` if any entry is NaN or infinite.
    void require_finite(const char* what) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// Row-wise softmax with per-row max subtraction. -inf entries get weight 0;
// a row of only -inf is a DomainError.
Matrix softmax_rows(const Matrix& m);

double frobenius_norm(const Matrix& m);

// Singular values in non-increasing order, length min(rows, cols).
// One-sided Jacobi on the orientation with the smaller column count.
std::vector<double> singular_values(const Matrix& m);

}  // namespace smyrf
