#include "tatt/matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "tatt/error.hpp"

namespace tatt {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) {
    return ConstMap(m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

MutMap view(Matrix& m) {
    return MutMap(m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " + shape());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("ragged initializer list");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        throw ShapeError("cannot add " + other.shape() + " to " + shape());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (double& v : data_) {
        v *= s;
    }
    return *this;
}

std::string Matrix::shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

namespace kernel {

void gemm(const Matrix& a, bool trans_a, const Matrix& b, bool trans_b, Matrix& out, bool accumulate) {
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t k = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    if (k != kb) {
        throw ShapeError("matmul shape mismatch: " + a.shape() + (trans_a ? "^T" : "") + " x " + b.shape() +
                         (trans_b ? "^T" : ""));
    }
    if (out.rows() != m || out.cols() != n) {
        if (accumulate) {
            throw ShapeError("gemm accumulator is " + out.shape() + ", expected " + std::to_string(m) + "x" +
                             std::to_string(n));
        }
        out = Matrix(m, n);
    }
    if (m == 0 || n == 0) {
        return;
    }
    auto o = view(out);
    if (!accumulate) {
        o.setZero();
    }
    if (k == 0) {
        return;
    }
    const auto va = view(a);
    const auto vb = view(b);
    if (!trans_a && !trans_b) {
        o.noalias() += va * vb;
    } else if (trans_a && !trans_b) {
        o.noalias() += va.transpose() * vb;
    } else if (!trans_a && trans_b) {
        o.noalias() += va * vb.transpose();
    } else {
        o.noalias() += va.transpose() * vb.transpose();
    }
}

}  // namespace kernel

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    kernel::gemm(a, false, b, false, out, false);
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(c, r) = m(r, c);
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.empty()) {
        throw ContractError("softmax_rows on an empty matrix");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto in = m.row(r);
        auto dst = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = std::exp(in[c] - mx);
            sum += dst[c];
        }
        for (double& v : dst) {
            v /= sum;
        }
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) {
        s += v * v;
    }
    return std::sqrt(s);
}

Matrix layer_norm(const Matrix& x, std::span<const double> gain, std::span<const double> bias, double eps) {
    if (gain.size() != x.cols() || bias.size() != x.cols()) {
        throw ShapeError("layer_norm: input " + x.shape() + " with gain length " + std::to_string(gain.size()) +
                         " and bias length " + std::to_string(bias.size()));
    }
    if (!(eps > 0.0)) {
        throw ContractError("layer_norm: eps must be positive");
    }
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        double mean = 0.0;
        for (double v : in) {
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (double v : in) {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = gain[c] * (in[c] - mean) * inv + bias[c];
        }
    }
    return out;
}

Matrix gelu(const Matrix& x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    Matrix out(x.rows(), x.cols());
    auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = src[i];
        dst[i] = 0.5 * v * (1.0 + std::tanh(k * (v + 0.044715 * v * v * v)));
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("max_abs_diff: " + a.shape() + " vs " + b.shape());
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    }
    return d;
}

}  // namespace tatt
