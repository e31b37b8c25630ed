#include "contilora/network.hpp"

#include <cmath>

namespace contilora {

void NetworkSpec::validate() const {
    if (layer_dims.size() < 2) {
        throw UsageError("NetworkSpec: need at least input and output dims");
    }
    for (std::size_t d : layer_dims) {
        if (d == 0) throw UsageError("NetworkSpec: zero layer dimension");
    }
}

Params init_params(const NetworkSpec& spec, SeededRng& rng) {
    spec.validate();
    Params params;
    params.reserve(spec.num_layers());
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t d_in = spec.layer_dims[l];
        const std::size_t d_out = spec.layer_dims[l + 1];
        LayerParams lp;
        lp.base_weight = Matrix(d_out, d_in);
        const double stddev = 1.0 / std::sqrt(static_cast<double>(d_in));
        for (std::size_t i = 0; i < lp.base_weight.size(); ++i) {
            lp.base_weight.data()[i] = stddev * rng.normal();
        }
        lp.base_bias = Matrix(1, d_out);
        params.push_back(std::move(lp));
    }
    return params;
}

namespace {

double activate(Activation act, double z) {
    return act == Activation::tanh_fn ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the activation output (valid for tanh and relu).
double activate_deriv_from_output(Activation act, double y) {
    return act == Activation::tanh_fn ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

struct ForwardTrace {
    std::vector<Matrix> inputs;   // per layer: incoming batch
    std::vector<Matrix> weights;  // per layer: effective weight used
    Matrix output;
};

ForwardTrace run_forward(const NetworkSpec& spec, const Params& params, const Matrix& input,
                         AdapterMode mode, HistorySource source) {
    spec.validate();
    if (params.size() != spec.num_layers()) {
        throw DimensionError("forward: params/spec layer count mismatch");
    }
    if (input.cols() != spec.layer_dims.front()) {
        throw DimensionError("forward: input cols " + std::to_string(input.cols()) +
                             " vs expected " + std::to_string(spec.layer_dims.front()));
    }
    ForwardTrace trace;
    Matrix x = input;
    for (std::size_t l = 0; l < params.size(); ++l) {
        Matrix w = effective_weight(params[l].base_weight, params[l].adapters, mode, source);
        Matrix z = product_bt(x, w);  // batch x d_out
        for (std::size_t r = 0; r < z.rows(); ++r) {
            for (std::size_t c = 0; c < z.cols(); ++c) z.at(r, c) += params[l].base_bias.at(0, c);
        }
        trace.inputs.push_back(std::move(x));
        if (l + 1 < params.size()) {
            for (std::size_t i = 0; i < z.size(); ++i) {
                z.data()[i] = activate(spec.activation, z.data()[i]);
            }
        }
        trace.weights.push_back(std::move(w));
        x = std::move(z);
    }
    x.check_finite("forward output");
    trace.output = std::move(x);
    return trace;
}

}  // namespace

Matrix forward(const NetworkSpec& spec, const Params& params, const Matrix& input,
               AdapterMode mode, HistorySource source) {
    return run_forward(spec, params, input, mode, source).output;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw DimensionError("mse_loss: shape mismatch " + pred.shape_str() + " vs " +
                             target.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

std::pair<double, GradientBundle> backward_mse(const NetworkSpec& spec, const Params& params,
                                               const Matrix& input, const Matrix& target,
                                               AdapterMode mode, HistorySource source) {
    if (input.rows() == 0) throw UsageError("backward_mse: empty batch");
    ForwardTrace trace = run_forward(spec, params, input, mode, source);
    const double loss = mse_loss(trace.output, target);

    GradientBundle grads;
    // d loss / d output
    Matrix delta =
        scaled(difference(trace.output, target), 2.0 / static_cast<double>(trace.output.size()));

    const bool with_current =
        mode == AdapterMode::history_plus_current || mode == AdapterMode::current_only;
    const bool with_history =
        mode == AdapterMode::history_only || mode == AdapterMode::history_plus_current;

    for (std::size_t l = params.size(); l-- > 0;) {
        // delta currently holds d loss / d (layer output after activation).
        if (l + 1 < params.size()) {
            // Back through the activation using the stored activated output,
            // which is the input of the next layer.
            const Matrix& activated = trace.inputs[l + 1];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                delta.data()[i] *=
                    activate_deriv_from_output(spec.activation, activated.data()[i]);
            }
        }
        Matrix grad_w = product_at(delta, trace.inputs[l]);  // d_out x d_in
        Matrix grad_b(1, delta.cols());
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            for (std::size_t c = 0; c < delta.cols(); ++c) grad_b.at(0, c) += delta.at(r, c);
        }

        const AdapterStack& stack = params[l].adapters;
        if (with_current && stack.current.has_value()) {
            grads.emplace(std::make_pair(l, ParamRole::adapter_b),
                          product_bt(grad_w, stack.current->a));
            grads.emplace(std::make_pair(l, ParamRole::adapter_a),
                          product_at(stack.current->b, grad_w));
        }
        if (with_history && source == HistorySource::compressed && stack.compressed.has_value()) {
            grads.emplace(std::make_pair(l, ParamRole::history_b),
                          product_bt(grad_w, stack.compressed->a_his));
        }
        if (l > 0) delta = product(delta, trace.weights[l]);  // batch x d_in
        grads.emplace(std::make_pair(l, ParamRole::effective_weight), std::move(grad_w));
        grads.emplace(std::make_pair(l, ParamRole::bias), std::move(grad_b));
    }
    return {loss, std::move(grads)};
}

std::vector<Matrix> backward_history_b(const NetworkSpec& spec, const Params& params,
                                       const Matrix& input, const Matrix& target) {
    if (input.rows() == 0) throw UsageError("backward_history_b: empty batch");
    for (const auto& lp : params) {
        if (!lp.adapters.compressed.has_value()) {
            throw UsageError("backward_history_b: compressed history missing on a layer");
        }
    }
    ForwardTrace trace =
        run_forward(spec, params, input, AdapterMode::history_only, HistorySource::compressed);
    Matrix delta =
        scaled(difference(trace.output, target), 2.0 / static_cast<double>(trace.output.size()));

    std::vector<Matrix> out(params.size());
    for (std::size_t l = params.size(); l-- > 0;) {
        if (l + 1 < params.size()) {
            const Matrix& activated = trace.inputs[l + 1];
            for (std::size_t i = 0; i < delta.size(); ++i) {
                delta.data()[i] *=
                    activate_deriv_from_output(spec.activation, activated.data()[i]);
            }
        }
        // d loss / d b_his = (delta^T X) A_his^T, associated as
        // delta^T (X A_his^T) to keep the intermediate at batch x r.
        const Matrix proj = product_bt(trace.inputs[l], params[l].adapters.compressed->a_his);
        out[l] = product_at(delta, proj);
        if (l > 0) delta = product(delta, trace.weights[l]);
    }
    return out;
}

}  // namespace contilora
