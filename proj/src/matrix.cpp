#include "smyrf/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                         " != rows*cols " + std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double x) { return std::isfinite(x); });
}

void Matrix::require_finite(const char* what) const {
    if (!all_finite()) {
        throw DomainError(std::string(what) + ": non-finite entry");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    // i-k-j order keeps the inner loop contiguous over b and out rows.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out_row = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            const double* b_row = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw ShapeError("softmax_rows: empty matrix");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto in = m.row(i);
        auto o = out.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (double x : in) mx = std::max(mx, x);
        if (!(mx > -std::numeric_limits<double>::infinity())) {
            throw DomainError("softmax_rows: row has no finite entry");
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < o.size(); ++j) o[j] /= sum;
    }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
}

std::vector<double> singular_values(const Matrix& m) {
    m.require_finite("singular_values");
    if (m.rows() == 0 || m.cols() == 0) return {};

    // Orient so we orthogonalize the smaller set of columns.
    const Matrix a = m.rows() >= m.cols() ? m : transpose(m);
    const std::size_t n = a.cols();
    const std::size_t rows = a.rows();

    // Column-major working copy.
    std::vector<std::vector<double>> col(n, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < n; ++j) col[j][i] = a(i, j);

    std::vector<double> sq(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) sq[j] = dot(col[j], col[j]);

    constexpr double kTol = 1e-15;
    constexpr int kMaxSweeps = 60;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = sq[p];
                double aqq = sq[q];
                if (app == 0.0 || aqq == 0.0) continue;
                double apq = dot(col[p], col[q]);
                if (std::abs(apq) <= kTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                double* cp = col[p].data();
                double* cq = col[q].data();
                for (std::size_t i = 0; i < rows; ++i) {
                    double x = cp[i];
                    double y = cq[i];
                    cp[i] = c * x - s * y;
                    cq[i] = s * x + c * y;
                }
                sq[p] = c * c * app - 2.0 * c * s * apq + s * s * aqq;
                sq[q] = s * s * app + 2.0 * c * s * apq + c * c * aqq;
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j) sv[j] = l2_norm(col[j]);
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

}  // namespace smyrf
