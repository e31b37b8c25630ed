#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "contilora/matrix.hpp"
#include "contilora/rng.hpp"

namespace contilora {

// One task's low-rank update: contribution to the layer weight is b * a.
struct LoraAdapter {
    Matrix b;  // d_out x rank, zero-initialized
    Matrix a;  // rank x d_in, Gaussian-initialized
    std::size_t rank = 0;
    int task_id = -1;
    bool trainable = true;
};

// Fixed-rank surrogate of all frozen adapters of one layer (see history.hpp
// for the operations that build it).
struct CompressedHistory {
    Matrix b_his;  // d_out x r
    Matrix a_his;  // r x d_in
    double retained_energy = 1.0;
    int source_task_count = 0;
};

enum class AdapterMode { base_only, history_only, history_plus_current, current_only };

// Which realization of the historical term enters the effective weight.
enum class HistorySource { frozen_sum, compressed };

// Per-layer adapter state across a continual run. Frozen adapters are ordered
// by task and never mutated again; at most one current adapter is trainable.
struct AdapterStack {
    std::vector<LoraAdapter> frozen;
    std::optional<LoraAdapter> current;
    std::optional<CompressedHistory> compressed;
};

// b = 0 (so a fresh adapter leaves the network output untouched),
// a ~ N(0, 1/r).
LoraAdapter init_adapter(std::size_t d_out, std::size_t d_in, std::size_t r, int task_id,
                         SeededRng& rng);

// W0 plus the mode-selected adapter contributions. With source == compressed
// the frozen sum is replaced by b_his * a_his; a missing compression falls
// back to the frozen sum.
Matrix effective_weight(const Matrix& base, const AdapterStack& stack, AdapterMode mode,
                        HistorySource source = HistorySource::frozen_sum);

// Moves the current adapter to the frozen list (trainable = false).
void freeze_current(AdapterStack& stack);

}  // namespace contilora
