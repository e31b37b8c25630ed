#pragma once

#include <map>
#include <utility>
#include <vector>

#include "contilora/lora.hpp"
#include "contilora/matrix.hpp"

namespace contilora {

enum class Activation { tanh_fn, relu_fn };

// Stacked affine layers with the activation applied after every non-final
// layer. layer_dims = {input, hidden..., output}.
struct NetworkSpec {
    std::vector<std::size_t> layer_dims;
    Activation activation = Activation::tanh_fn;

    std::size_t num_layers() const { return layer_dims.size() - 1; }
    void validate() const;
};

// base_weight and base_bias are frozen during continual training; adapters
// carry all trainable state.
struct LayerParams {
    Matrix base_weight;  // d_out x d_in
    Matrix base_bias;    // 1 x d_out
    AdapterStack adapters;
};

using Params = std::vector<LayerParams>;

enum class ParamRole { effective_weight, bias, adapter_b, adapter_a, history_b };

// (layer index, role) -> gradient of the batch loss, exact for the batch.
using GradientBundle = std::map<std::pair<std::size_t, ParamRole>, Matrix>;

// Fresh parameters with base weights ~ N(0, 1/d_in) and zero biases.
Params init_params(const NetworkSpec& spec, SeededRng& rng);

Matrix forward(const NetworkSpec& spec, const Params& params, const Matrix& input,
               AdapterMode mode, HistorySource source = HistorySource::frozen_sum);

double mse_loss(const Matrix& pred, const Matrix& target);

/// MSE loss plus exact reverse-mode gradients for every applicable role:
// effective_weight and bias always; adapter_b/adapter_a when the mode includes
// the current adapter; history_b when the historical term is realized through
// a compressed (b_his, a_his) pair.
std::pair<double, GradientBundle> backward_mse(const NetworkSpec& spec, const Params& params,
                                               const Matrix& input, const Matrix& target,
                                               AdapterMode mode,
                                               HistorySource source = HistorySource::frozen_sum);

// Per-layer gradient of the history-only MSE loss with respect to b_his.
// Equivalent to the history_b entries of backward_mse(history_only,
// compressed) but skips every other gradient, so it is cheap enough to run
// once per training step.
std::vector<Matrix> backward_history_b(const NetworkSpec& spec, const Params& params,
                                       const Matrix& input, const Matrix& target);

}  // namespace contilora
