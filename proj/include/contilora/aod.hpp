#pragma once

#include "contilora/network.hpp"

namespace contilora {

// Per-batch gradient of the historical model's parameters under the current
// task's loss. With scope lora_b_only each entry has the shape of that layer's
// b_his; with scope full it has the shape of the full layer weight.
struct InterferenceVector {
    std::vector<Matrix> per_layer;
    long batch_id = -1;
};

enum class IvScope { lora_b_only, full };

// Forward/backward through the history-only model (current adapter excluded,
// compressed history active) on the given MSE batch. The result is treated as
// a constant by the orthogonality loss; it carries no dependence on the
// current adapter.
InterferenceVector interference_vector(const NetworkSpec& spec, const Params& params,
                                       const Matrix& input, const Matrix& target, IvScope scope,
                                       long batch_id = -1);

// L_orth = sum over layers of |<IV_l, B_l>| (squared variant: the same inner
// products squared).
double orth_loss(const InterferenceVector& iv, const std::vector<Matrix>& current_b,
                 bool squared = false);

// d L_orth / d B_l with the IV held constant: sign(<IV,B>) * IV per layer
// (subgradient 0 at the kink), or 2<IV,B> * IV for the squared variant.
std::vector<Matrix> orth_loss_grad(const InterferenceVector& iv,
                                   const std::vector<Matrix>& current_b, bool squared = false);

// Static subspace-overlap baseline: sum over layers of ||A_his * A_t^T||_F^2.
double param_orth_loss(const std::vector<Matrix>& history_a,
                       const std::vector<Matrix>& current_a);

// d/dA_t of param_orth_loss: 2 * (A_his A_t^T)^T A_his per layer.
std::vector<Matrix> param_orth_grad(const std::vector<Matrix>& history_a,
                                    const std::vector<Matrix>& current_a);

}  // namespace contilora
