// Dense row-major matrix of doubles and the value-level kernels built on it.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tatt {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double v);
    bool all_finite() const noexcept;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    /// "r×c", used in error messages.
    std::string shape() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// Row-wise softmax with the row maximum subtracted before exponentiation.
Matrix softmax_rows(const Matrix& m);

double frobenius_norm(const Matrix& m);

/// Per-row normalization to zero mean / unit variance (biased variance,
/// eps added inside the square root), then gain * x + bias.
Matrix layer_norm(const Matrix& x, std::span<const double> gain, std::span<const double> bias, double eps);

/// GELU, tanh approximation.
Matrix gelu(const Matrix& x);

double max_abs_diff(const Matrix& a, const Matrix& b);

namespace kernel {

/// out (+)= op(a) * op(b) where op transposes when the flag is set.
void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& out, bool accumulate);

}  // namespace kernel

}  // namespace tatt
