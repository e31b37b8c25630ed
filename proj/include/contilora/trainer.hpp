#pragma once

#include <string>

#include "contilora/aod.hpp"
#include "contilora/history.hpp"
#include "contilora/tasks.hpp"

namespace contilora {

enum class Strategy {
    aod_svd,
    aod_random,
    aod_summation,
    param_orth,
    sequential_ft,
    individual,
    multitask,
    rehearsal,
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct TrainConfig {
    std::size_t epochs_per_task = 10;
    double learning_rate = 1e-4;
    std::size_t lora_rank = 4;
    double stage2_fraction = 0.5;
    double lambda_orth = 1.0;
    Strategy strategy = Strategy::sequential_ft;
    double rehearsal_fraction = 0.0;
    uint64_t seed = 0;
    std::size_t batch_size = 64;
    bool squared_orth = false;  // squared variant of the orthogonality loss

    void validate() const;
    std::size_t stage2_epochs() const;
};

// Adapter snapshot taken at a task boundary.
struct TaskCheckpoint {
    int task_id = -1;
    std::string task_name;
    std::vector<LoraAdapter> adapters;          // per layer
    std::vector<CompressedHistory> compressed;  // per layer, state after this task
    double final_loss = 0.0;
    // Mean |<IV,B>| / (||IV|| ||B||) over the last epoch's batches; negative
    // when no constrained epoch ran.
    double mean_final_alignment = -1.0;
};

struct SequenceResult {
    Matrix perf;  // perf(t, i): score on task at position i after finishing position t
    std::vector<TaskCheckpoint> checkpoints;
    NetworkSpec spec;
    Params final_params;
    double avg_step_seconds = 0.0;
    std::vector<std::string> events;
};

// Mutable state threaded through one continual run.
struct RunState {
    NetworkSpec spec;
    Params params;
    SeededRng rng_data;
    SeededRng rng_noise;
    SeededRng rng_strategy;
    SeededRng rng_rehearsal;
    std::vector<std::string> events;
    double step_seconds_total = 0.0;
    std::size_t step_count = 0;
};

// Base parameters shared by every strategy at a given seed: random init for
// regression, random init plus a short denoising pretrain on N(0, I) for
// diffusion.
Params make_base_params(const TaskSuite& suite, uint64_t seed);

RunState make_run_state(const TaskSuite& suite, const TrainConfig& config);

// One task: fresh adapter, stage-1 unconstrained epochs, stage-2 epochs with
// the strategy's orthogonality penalty, freeze, recompress history.
TaskCheckpoint train_task(RunState& state, const TaskSuite& suite, std::size_t task_index,
                          const TrainConfig& config);

// Full protocol over an explicit task order (indices into suite.tasks).
SequenceResult run_sequence(const TaskSuite& suite, const TrainConfig& config,
                            const std::vector<std::size_t>& order);

// Adam on a single tensor; state is (m, v) with shared step count.
struct AdamSlot {
    Matrix m;
    Matrix v;
};
void adam_step(Matrix& param, const Matrix& grad, AdamSlot& slot, double lr, long t,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace contilora
