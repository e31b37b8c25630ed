#include "contilora/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "contilora/kernels.hpp"

namespace contilora {

namespace {

constexpr int kMaxSweeps = 200;
constexpr double kPairTolerance = 1e-13;  // relative |a_pq| / sqrt(a_pp a_qq)

// One-sided Jacobi for rows >= cols. Works on the transpose so that the
// rotated columns are contiguous rows: w = m^T (n x rows), vt starts as I.
SvdResult jacobi_tall(const Matrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t n = m.cols();
    Matrix w = transpose(m);          // n x rows; row j holds column j of m
    Matrix vt = Matrix::identity(n);  // rows are right singular vectors
    const auto& k = kernels();

    double worst = 0.0;
    int sweep = 0;
    for (; sweep < kMaxSweeps; ++sweep) {
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* wp = w.row_ptr(p);
                double* wq = w.row_ptr(q);
                const double app = k.dot(wp, wp, rows);
                const double aqq = k.dot(wq, wq, rows);
                const double apq = k.dot(wp, wq, rows);
                if (app == 0.0 || aqq == 0.0) continue;
                const double rel = std::abs(apq) / std::sqrt(app * aqq);
                worst = std::max(worst, rel);
                if (rel <= kPairTolerance) continue;

                const double tau = (aqq - app) / (2.0 * apq);
                const double t =
                    (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double a = wp[i];
                    const double b = wq[i];
                    wp[i] = c * a - s * b;
                    wq[i] = s * a + c * b;
                }
                double* vp = vt.row_ptr(p);
                double* vq = vt.row_ptr(q);
                for (std::size_t i = 0; i < n; ++i) {
                    const double a = vp[i];
                    const double b = vq[i];
                    vp[i] = c * a - s * b;
                    vq[i] = s * a + c * b;
                }
            }
        }
        if (worst <= kPairTolerance) break;
    }
    if (sweep == kMaxSweeps && worst > kPairTolerance) {
        throw NumericError("svd: no convergence after " + std::to_string(kMaxSweeps) +
                           " sweeps, residual " + std::to_string(worst));
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        sigma[j] = std::sqrt(k.dot(w.row_ptr(j), w.row_ptr(j), rows));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    const double sigma_max = sigma[order[0]];
    const double zero_cut = sigma_max > 0.0 ? sigma_max * 1e-14 : 0.0;

    SvdResult out;
    out.u = Matrix(rows, n);
    out.vt = Matrix(n, n);
    out.singular_values.resize(n);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        const double s = sigma[src];
        out.singular_values[j] = s;
        std::copy(vt.row_ptr(src), vt.row_ptr(src) + n, out.vt.row_ptr(j));
        if (s > zero_cut) {
            const double inv = 1.0 / s;
            for (std::size_t i = 0; i < rows; ++i) out.u.at(i, j) = w.at(src, i) * inv;
            ++rank;
        } else {
            out.singular_values[j] = 0.0;
        }
    }

    // Null-space columns of u: complete to an orthonormal basis. For each
    // missing column take the coordinate vector with the largest residual
    // after projecting out the columns built so far (two Gram-Schmidt passes
    // for accuracy); a trace argument guarantees one with residual^2 >=
    // (rows - j) / rows exists.
    for (std::size_t j = rank; j < n; ++j) {
        std::vector<double> best(rows);
        double best_norm = -1.0;
        std::vector<double> cand(rows);
        for (std::size_t probe = 0; probe < rows; ++probe) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[probe] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t prev = 0; prev < j; ++prev) {
                    double proj = 0.0;
                    for (std::size_t i = 0; i < rows; ++i) proj += cand[i] * out.u.at(i, prev);
                    for (std::size_t i = 0; i < rows; ++i) cand[i] -= proj * out.u.at(i, prev);
                }
            }
            const double norm =
                std::sqrt(std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
            if (norm > best_norm) {
                best_norm = norm;
                best = cand;
            }
        }
        if (best_norm <= 0.0) throw NumericError("svd: failed to complete orthonormal basis");
        for (std::size_t i = 0; i < rows; ++i) out.u.at(i, j) = best[i] / best_norm;
    }

    // Deterministic sign: first entry of each left singular vector that is
    // nonzero (relative to the column's largest entry) made non-negative.
    for (std::size_t j = 0; j < n; ++j) {
        double colmax = 0.0;
        for (std::size_t i = 0; i < rows; ++i) colmax = std::max(colmax, std::abs(out.u.at(i, j)));
        double lead = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (std::abs(out.u.at(i, j)) > 1e-12 * colmax) {
                lead = out.u.at(i, j);
                break;
            }
        }
        if (lead < 0.0) {
            for (std::size_t i = 0; i < rows; ++i) out.u.at(i, j) = -out.u.at(i, j);
            if (j < rank) {
                for (std::size_t i = 0; i < n; ++i) out.vt.at(j, i) = -out.vt.at(j, i);
            }
        }
    }
    return out;
}

}  // namespace

SvdResult svd(const Matrix& m) {
    if (m.empty()) throw DimensionError("svd: empty matrix");
    m.check_finite("svd input");
    if (m.rows() >= m.cols()) return jacobi_tall(m);
    // Wide case via the transpose: m^T = u s vt  =>  m = vt^T s u^T.
    SvdResult t = jacobi_tall(transpose(m));
    SvdResult out;
    out.u = transpose(t.vt);
    out.singular_values = std::move(t.singular_values);
    out.vt = transpose(t.u);
    // Re-apply the sign convention to the new left side.
    const std::size_t k = out.singular_values.size();
    for (std::size_t j = 0; j < k; ++j) {
        double colmax = 0.0;
        for (std::size_t i = 0; i < out.u.rows(); ++i) {
            colmax = std::max(colmax, std::abs(out.u.at(i, j)));
        }
        double lead = 0.0;
        for (std::size_t i = 0; i < out.u.rows(); ++i) {
            if (std::abs(out.u.at(i, j)) > 1e-12 * colmax) {
                lead = out.u.at(i, j);
                break;
            }
        }
        if (lead < 0.0) {
            for (std::size_t i = 0; i < out.u.rows(); ++i) out.u.at(i, j) = -out.u.at(i, j);
            if (out.singular_values[j] > 0.0) {
                for (std::size_t i = 0; i < out.vt.cols(); ++i) {
                    out.vt.at(j, i) = -out.vt.at(j, i);
                }
            }
        }
    }
    return out;
}

std::pair<Matrix, Matrix> truncated_factorize(const Matrix& m, std::size_t r) {
    const std::size_t k = std::min(m.rows(), m.cols());
    if (r == 0 || r > k) {
        throw DimensionError("truncated_factorize: rank " + std::to_string(r) +
                             " out of range for " + m.shape_str());
    }
    SvdResult s = svd(m);
    Matrix b(m.rows(), r);
    Matrix a(r, m.cols());
    for (std::size_t j = 0; j < r; ++j) {
        const double root = std::sqrt(s.singular_values[j]);
        for (std::size_t i = 0; i < m.rows(); ++i) b.at(i, j) = s.u.at(i, j) * root;
        for (std::size_t i = 0; i < m.cols(); ++i) a.at(j, i) = s.vt.at(j, i) * root;
    }
    return {std::move(b), std::move(a)};
}

double energy_proportion(const std::vector<double>& singular_values, std::size_t r) {
    if (singular_values.empty()) throw DimensionError("energy_proportion: empty spectrum");
    if (r == 0) throw DimensionError("energy_proportion: r must be positive");
    double total = 0.0;
    double head = 0.0;
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        const double v = singular_values[i];
        if (v < 0.0 || (i > 0 && v > singular_values[i - 1])) {
            throw NumericError("energy_proportion: spectrum not non-increasing and non-negative");
        }
        const double e = v * v;
        total += e;
        if (i < r) head += e;
    }
    if (total == 0.0) throw NumericError("energy_proportion: all-zero spectrum");
    return head / total;
}

}  // namespace contilora
