#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "contilora/errors.hpp"

namespace contilora {

// Dense row-major matrix of 64-bit floats. Immutable by convention once it
// leaves a public operation; every public operation checks that its result is
// finite.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diag(const std::vector<double>& values);
    // Convenience for literals: {{1,2},{3,4}}.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;

    // Throws NumericError naming `what` if any entry is NaN/Inf.
    void check_finite(const std::string& what) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

bool operator==(const Matrix& a, const Matrix& b);

// --- dense ops -------------------------------------------------------------

Matrix product(const Matrix& a, const Matrix& b);
// C = A * B^T without materializing the transpose.
Matrix product_bt(const Matrix& a, const Matrix& b);
// C = A^T * B without materializing the transpose.
Matrix product_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix sum(const Matrix& a, const Matrix& b);
Matrix difference(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double factor);
Matrix mapped(const Matrix& m, const std::function<double(double)>& fn);
void add_in_place(Matrix& target, const Matrix& addend);
void add_scaled_in_place(Matrix& target, const Matrix& addend, double factor);

double frobenius_inner(const Matrix& x, const Matrix& y);
double frobenius_norm(const Matrix& m);
double cosine_similarity_flat(const Matrix& x, const Matrix& y);
double max_abs(const Matrix& m);

// --- serialization ---------------------------------------------------------
// Layout: uint64 LE rows, uint64 LE cols, then rows*cols doubles LE row-major.

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

}  // namespace contilora
