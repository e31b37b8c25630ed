#include "contilora/aod.hpp"

#include <cmath>

namespace contilora {

InterferenceVector interference_vector(const NetworkSpec& spec, const Params& params,
                                       const Matrix& input, const Matrix& target, IvScope scope,
                                       long batch_id) {
    if (input.rows() == 0) throw UsageError("interference_vector: empty batch");
    for (const auto& lp : params) {
        if (!lp.adapters.compressed.has_value()) {
            throw UsageError("interference_vector: compressed history missing on a layer");
        }
    }
    InterferenceVector iv;
    iv.batch_id = batch_id;
    if (scope == IvScope::lora_b_only) {
        iv.per_layer = backward_history_b(spec, params, input, target);
        return iv;
    }
    auto [loss, grads] = backward_mse(spec, params, input, target, AdapterMode::history_only,
                                      HistorySource::compressed);
    (void)loss;
    iv.per_layer.reserve(params.size());
    for (std::size_t l = 0; l < params.size(); ++l) {
        iv.per_layer.push_back(std::move(grads.at({l, ParamRole::effective_weight})));
    }
    return iv;
}

namespace {

void require_matching(const InterferenceVector& iv, const std::vector<Matrix>& current_b) {
    if (iv.per_layer.size() != current_b.size()) {
        throw DimensionError("orth_loss: layer count mismatch");
    }
    for (std::size_t l = 0; l < current_b.size(); ++l) {
        if (!iv.per_layer[l].same_shape(current_b[l])) {
            throw DimensionError("orth_loss: layer " + std::to_string(l) + " shape mismatch " +
                                 iv.per_layer[l].shape_str() + " vs " + current_b[l].shape_str());
        }
    }
}

}  // namespace

double orth_loss(const InterferenceVector& iv, const std::vector<Matrix>& current_b,
                 bool squared) {
    require_matching(iv, current_b);
    double total = 0.0;
    for (std::size_t l = 0; l < current_b.size(); ++l) {
        const double inner = frobenius_inner(iv.per_layer[l], current_b[l]);
        total += squared ? inner * inner : std::abs(inner);
    }
    return total;
}

std::vector<Matrix> orth_loss_grad(const InterferenceVector& iv,
                                   const std::vector<Matrix>& current_b, bool squared) {
    require_matching(iv, current_b);
    std::vector<Matrix> out;
    out.reserve(current_b.size());
    for (std::size_t l = 0; l < current_b.size(); ++l) {
        const double inner = frobenius_inner(iv.per_layer[l], current_b[l]);
        double factor;
        if (squared) {
            factor = 2.0 * inner;
        } else {
            factor = inner > 0.0 ? 1.0 : (inner < 0.0 ? -1.0 : 0.0);
        }
        out.push_back(scaled(iv.per_layer[l], factor));
    }
    return out;
}

double param_orth_loss(const std::vector<Matrix>& history_a,
                       const std::vector<Matrix>& current_a) {
    if (history_a.size() != current_a.size()) {
        throw DimensionError("param_orth_loss: layer count mismatch");
    }
    double total = 0.0;
    for (std::size_t l = 0; l < history_a.size(); ++l) {
        const Matrix overlap = product_bt(history_a[l], current_a[l]);
        total += frobenius_inner(overlap, overlap);
    }
    return total;
}

std::vector<Matrix> param_orth_grad(const std::vector<Matrix>& history_a,
                                    const std::vector<Matrix>& current_a) {
    if (history_a.size() != current_a.size()) {
        throw DimensionError("param_orth_grad: layer count mismatch");
    }
    std::vector<Matrix> out;
    out.reserve(history_a.size());
    for (std::size_t l = 0; l < history_a.size(); ++l) {
        const Matrix overlap = product_bt(history_a[l], current_a[l]);  // r_his x r_t
        out.push_back(scaled(product_at(overlap, history_a[l]), 2.0));
    }
    return out;
}

}  // namespace contilora
