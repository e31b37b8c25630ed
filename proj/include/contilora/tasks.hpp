#pragma once

#include <optional>
#include <string>

#include "contilora/diffusion.hpp"
#include "contilora/network.hpp"

namespace contilora {

enum class SuiteKind { regression, diffusion };

// One synthetic continual task. Regression tasks carry a frozen teacher
// (shared backbone, task-specific head) and precomputed train/eval pairs;
// diffusion tasks carry standardized 2-D clean samples and a fixed seed for
// the deterministic eval noise grid.
struct TaskSpec {
    int task_id = 0;
    SuiteKind kind = SuiteKind::regression;
    std::string name;

    Matrix train_x;  // regression inputs / diffusion clean samples
    Matrix train_y;  // regression targets (unused for diffusion)
    Matrix eval_x;
    Matrix eval_y;

    uint64_t eval_noise_seed = 0;

    // Regression only; absent after a disk round trip.
    std::optional<NetworkSpec> teacher_spec;
    std::optional<Params> teacher_params;
};

struct TaskSuite {
    SuiteKind kind = SuiteKind::regression;
    uint64_t seed = 0;
    std::vector<TaskSpec> tasks;
    NetworkSpec student_spec;  // architecture continual runs train on
    NoiseSchedule schedule;    // diffusion only
};

// Teachers share a random backbone (transfer) and differ in a random head
// (interference); inputs are uniform on [-1,1]^4. Eval sets are disjoint
// fresh draws.
TaskSuite make_regression_suite(uint64_t seed, std::size_t n_tasks, std::size_t train_size = 2048,
                                std::size_t eval_size = 512);

// 2-D shape menu (ring, two-cluster, 3x3 grid, spiral, line segment,
// checker), each standardized to zero mean and unit root-mean-square norm.
TaskSuite make_toy_diffusion_suite(uint64_t seed, std::size_t n_tasks,
                                   std::size_t train_size = 2048, std::size_t eval_size = 512);

// n rows drawn uniformly (with replacement) from the task's training set.
Matrix sample_batch(const TaskSpec& task, std::size_t n, SeededRng& rng);

// Higher is better: -(held-out MSE) for regression; for diffusion,
// -(epsilon-prediction MSE over a fixed seeded grid of 16 (t, eps) draws per
// eval point). Deterministic given the checkpoint.
double eval_performance(const NetworkSpec& spec, const Params& params, const TaskSuite& suite,
                        std::size_t task_index,
                        AdapterMode mode = AdapterMode::history_only,
                        HistorySource source = HistorySource::frozen_sum);

inline constexpr int kEvalNoiseDraws = 16;

// Replayable on-disk form: manifest.json plus one binary per matrix.
void export_suite(const TaskSuite& suite, const std::string& dir);
TaskSuite import_suite(const std::string& dir);

}  // namespace contilora
