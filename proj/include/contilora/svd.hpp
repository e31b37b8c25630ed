#pragma once

#include <utility>
#include <vector>

#include "contilora/matrix.hpp"

namespace contilora {

// Thin SVD: m = u * diag(singular_values) * vt with k = min(rows, cols).
// u has orthonormal columns, vt orthonormal rows, singular values sorted
// non-increasing. Sign convention: the first nonzero entry of every left
// singular vector is non-negative.
struct SvdResult {
    Matrix u;                             // m x k
    std::vector<double> singular_values;  // length k, non-increasing, >= 0
    Matrix vt;                            // k x n
};

// One-sided Jacobi on 64-bit floats. Deterministic; throws NumericError if the
// sweep cap is reached before the off-diagonal mass falls under threshold.
SvdResult svd(const Matrix& m);

// Best rank-r approximation split as b = U * sqrt(S_r), a = sqrt(S_r) * V^T.
std::pair<Matrix, Matrix> truncated_factorize(const Matrix& m, std::size_t r);

// Fraction of squared-singular-value mass carried by the top r values.
double energy_proportion(const std::vector<double>& singular_values, std::size_t r);

}  // namespace contilora
