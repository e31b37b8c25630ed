#include "contilora/lora.hpp"

#include <cmath>

namespace contilora {

LoraAdapter init_adapter(std::size_t d_out, std::size_t d_in, std::size_t r, int task_id,
                         SeededRng& rng) {
    if (d_out == 0 || d_in == 0 || r == 0) {
        throw DimensionError("init_adapter: dimensions and rank must be positive");
    }
    LoraAdapter ad;
    ad.b = Matrix(d_out, r);
    ad.a = Matrix(r, d_in);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(r));
    for (std::size_t i = 0; i < ad.a.size(); ++i) ad.a.data()[i] = stddev * rng.normal();
    ad.rank = r;
    ad.task_id = task_id;
    ad.trainable = true;
    return ad;
}

namespace {

void add_history(Matrix& w, const AdapterStack& stack, HistorySource source) {
    if (source == HistorySource::compressed && stack.compressed.has_value()) {
        add_in_place(w, product(stack.compressed->b_his, stack.compressed->a_his));
        return;
    }
    for (const auto& ad : stack.frozen) {
        add_in_place(w, product(ad.b, ad.a));
    }
}

}  // namespace

Matrix effective_weight(const Matrix& base, const AdapterStack& stack, AdapterMode mode,
                        HistorySource source) {
    Matrix w = base;
    switch (mode) {
        case AdapterMode::base_only:
            break;
        case AdapterMode::history_only:
            add_history(w, stack, source);
            break;
        case AdapterMode::history_plus_current:
            if (!stack.current.has_value()) {
                throw UsageError(
                    "effective_weight: history_plus_current mode without a current adapter");
            }
            add_history(w, stack, source);
            add_in_place(w, product(stack.current->b, stack.current->a));
            break;
        case AdapterMode::current_only:
            if (!stack.current.has_value()) {
                throw UsageError("effective_weight: current_only mode without a current adapter");
            }
            add_in_place(w, product(stack.current->b, stack.current->a));
            break;
    }
    return w;
}

void freeze_current(AdapterStack& stack) {
    if (!stack.current.has_value()) {
        throw UsageError("freeze_current: no current adapter");
    }
    stack.current->trainable = false;
    stack.frozen.push_back(std::move(*stack.current));
    stack.current.reset();
}

}  // namespace contilora
