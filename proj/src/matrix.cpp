#include "contilora/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "contilora/kernels.hpp"

namespace contilora {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be positive");
    if (data_.size() != rows * cols) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::diag(const std::vector<double>& values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m.at(i, i) = values[i];
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw DimensionError("from_rows requires a non-empty rectangular initializer");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw DimensionError("ragged initializer row " + std::to_string(r));
        }
        std::memcpy(m.row_ptr(r), rows[r].data(), m.cols() * sizeof(double));
    }
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::check_finite(const std::string& what) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw NumericError(what + ": non-finite entry in " + shape_str() + " matrix");
        }
    }
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.values() == b.values();
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
    }
}

}  // namespace

Matrix product(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("product: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Matrix c(a.rows(), b.cols());
    const auto& k = kernels();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row_ptr(i);
        for (std::size_t l = 0; l < a.cols(); ++l) {
            const double aval = a.at(i, l);
            if (aval != 0.0) k.axpy(aval, b.row_ptr(l), crow, b.cols());
        }
    }
    return c;
}

Matrix product_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("product_bt: shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str() + "^T");
    }
    Matrix c(a.rows(), b.rows());
    const auto& k = kernels();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c.at(i, j) = k.dot(a.row_ptr(i), b.row_ptr(j), a.cols());
        }
    }
    return c;
}

Matrix product_at(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("product_at: shape mismatch " + a.shape_str() + "^T vs " +
                             b.shape_str());
    }
    Matrix c(a.cols(), b.cols());
    const auto& k = kernels();
    for (std::size_t l = 0; l < a.rows(); ++l) {
        const double* arow = a.row_ptr(l);
        const double* brow = b.row_ptr(l);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            if (arow[i] != 0.0) k.axpy(arow[i], brow, c.row_ptr(i), b.cols());
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) t.at(c, r) = m.at(r, c);
    }
    return t;
}

Matrix sum(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sum");
    Matrix c = a;
    kernels().add(b.data(), c.data(), c.size());
    return c;
}

Matrix difference(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "difference");
    Matrix c = a;
    kernels().axpy(-1.0, b.data(), c.data(), c.size());
    return c;
}

Matrix scaled(const Matrix& m, double factor) {
    Matrix c = m;
    kernels().scale(factor, c.data(), c.size());
    return c;
}

Matrix mapped(const Matrix& m, const std::function<double(double)>& fn) {
    Matrix c = m;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = fn(c.data()[i]);
    return c;
}

void add_in_place(Matrix& target, const Matrix& addend) {
    require_same_shape(target, addend, "add_in_place");
    kernels().add(addend.data(), target.data(), target.size());
}

void add_scaled_in_place(Matrix& target, const Matrix& addend, double factor) {
    require_same_shape(target, addend, "add_scaled_in_place");
    kernels().axpy(factor, addend.data(), target.data(), target.size());
}

double frobenius_inner(const Matrix& x, const Matrix& y) {
    require_same_shape(x, y, "frobenius_inner");
    return kernels().dot(x.data(), y.data(), x.size());
}

double frobenius_norm(const Matrix& m) {
    return std::sqrt(kernels().dot(m.data(), m.data(), m.size()));
}

double cosine_similarity_flat(const Matrix& x, const Matrix& y) {
    require_same_shape(x, y, "cosine_similarity_flat");
    const double nx = frobenius_norm(x);
    const double ny = frobenius_norm(y);
    if (nx == 0.0 || ny == 0.0) {
        throw NumericError("cosine_similarity_flat: zero-norm input");
    }
    return frobenius_inner(x, y) / (nx * ny);
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.values()) best = std::max(best, std::abs(v));
    return best;
}

// --- serialization ---------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "matrix binary format assumes a little-endian host");

void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void write_matrix(std::ostream& os, const Matrix& m) {
    write_u64(os, m.rows());
    write_u64(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& is) {
    const uint64_t rows = read_u64(is);
    const uint64_t cols = read_u64(is);
    if (!is || rows == 0 || cols == 0 || rows * cols > (1ULL << 32)) {
        throw NumericError("read_matrix: corrupt header");
    }
    std::vector<double> data(rows * cols);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw NumericError("read_matrix: truncated payload");
    return Matrix(rows, cols, std::move(data));
}

void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw NumericError("save_matrix: cannot open " + path);
    write_matrix(os, m);
    if (!os) throw NumericError("save_matrix: write failed for " + path);
}

Matrix load_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NumericError("load_matrix: cannot open " + path);
    return read_matrix(is);
}

}  // namespace contilora
