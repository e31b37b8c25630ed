#pragma once

#include "contilora/trainer.hpp"

namespace contilora {

// Continual-learning summary of a T x T performance matrix r, where r(t, i)
// is the score on task i after finishing task t:
//   last = mean_i r(T-1, i)
//   avg  = mean_t mean_{i<=t} r(t, i)         (seen region only)
//   imm  = diag                                (score right after learning)
//   bwt  = mean_{i<T-1} (r(T-1, i) - r(i, i))  (backward transfer)
struct MetricsReport {
    double last = 0.0;
    double avg = 0.0;
    double bwt = 0.0;
    std::vector<double> imm;
    std::vector<double> per_task_last;
};

MetricsReport compute_metrics(const Matrix& perf);

enum class AdapterSide { a, b };

// Pairwise cosine similarity of per-task adapter matrices, averaged over
// layers. Symmetric with unit diagonal.
Matrix lora_similarity_analysis(const std::vector<TaskCheckpoint>& checkpoints, AdapterSide side);

// k-th entry: layer-averaged top-r energy proportion of the merged first
// k+1 adapters.
std::vector<double> energy_curve(const std::vector<TaskCheckpoint>& checkpoints, std::size_t r);

// k-th entry: layer-averaged cosine similarity between the merged first k+1
// adapters and their rank-r reconstruction.
std::vector<double> reconstruction_curve(const std::vector<TaskCheckpoint>& checkpoints,
                                         std::size_t r);

}  // namespace contilora
