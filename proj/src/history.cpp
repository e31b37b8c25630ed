#include "contilora/history.hpp"

#include "contilora/svd.hpp"

namespace contilora {

Matrix merge_sum(std::span<const LoraAdapter> adapters) {
    if (adapters.empty()) throw UsageError("merge_sum: no adapters");
    Matrix acc = product(adapters[0].b, adapters[0].a);
    for (std::size_t i = 1; i < adapters.size(); ++i) {
        add_in_place(acc, product(adapters[i].b, adapters[i].a));
    }
    return acc;
}

CompressedHistory compress_svd(std::span<const LoraAdapter> adapters, std::size_t r) {
    Matrix merged = merge_sum(adapters);
    SvdResult dec = svd(merged);
    if (r == 0 || r > dec.singular_values.size()) {
        throw DimensionError("compress_svd: rank " + std::to_string(r) + " out of range for " +
                             merged.shape_str());
    }
    CompressedHistory out;
    out.b_his = Matrix(merged.rows(), r);
    out.a_his = Matrix(r, merged.cols());
    for (std::size_t j = 0; j < r; ++j) {
        const double root = std::sqrt(dec.singular_values[j]);
        for (std::size_t i = 0; i < merged.rows(); ++i) out.b_his.at(i, j) = dec.u.at(i, j) * root;
        for (std::size_t i = 0; i < merged.cols(); ++i) out.a_his.at(j, i) = dec.vt.at(j, i) * root;
    }
    out.retained_energy = energy_proportion(dec.singular_values, r);
    out.source_task_count = static_cast<int>(adapters.size());
    return out;
}

const LoraAdapter& strategy_random(std::span<const LoraAdapter> adapters, SeededRng& rng) {
    if (adapters.empty()) throw UsageError("strategy_random: no adapters");
    return adapters[rng.uniform_int(adapters.size())];
}

CompressedHistory strategy_summation(std::span<const LoraAdapter> adapters) {
    if (adapters.empty()) throw UsageError("strategy_summation: no adapters");
    const std::size_t rank = adapters[0].rank;
    CompressedHistory out;
    out.b_his = adapters[0].b;
    out.a_his = adapters[0].a;
    for (std::size_t i = 1; i < adapters.size(); ++i) {
        if (adapters[i].rank != rank) {
            throw DimensionError("strategy_summation: rank mismatch across adapters");
        }
        add_in_place(out.b_his, adapters[i].b);
        add_in_place(out.a_his, adapters[i].a);
    }
    // The summed pair is not an SVD truncation; report the relative Frobenius
    // energy its product captures of the true merge instead.
    Matrix merged = merge_sum(adapters);
    const double denom = frobenius_norm(merged);
    out.retained_energy = 1.0;
    if (denom > 0.0) {
        const double err =
            frobenius_norm(difference(merged, product(out.b_his, out.a_his))) / denom;
        out.retained_energy = std::max(0.0, 1.0 - err * err);
    }
    out.source_task_count = static_cast<int>(adapters.size());
    return out;
}

double reconstruction_similarity(std::span<const LoraAdapter> adapters, std::size_t r) {
    Matrix merged = merge_sum(adapters);
    CompressedHistory ch = compress_svd(adapters, r);
    return cosine_similarity_flat(merged, product(ch.b_his, ch.a_his));
}

}  // namespace contilora
