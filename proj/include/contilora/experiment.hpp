#pragma once

#include <optional>
#include <string>

#include "contilora/checkpoint.hpp"
#include "contilora/metrics.hpp"

namespace contilora {

// One experiment grid: every (order x strategy x seed) cell gets its own
// subdirectory under output_dir and its own task suite built from the cell
// seed, so cells are independent and safe to run concurrently.
struct ExperimentConfig {
    int schema_version = 1;
    SuiteKind suite = SuiteKind::regression;
    std::size_t n_tasks = 2;
    std::vector<std::string> orders = {"default"};
    std::vector<Strategy> strategies;
    std::vector<uint64_t> seeds = {0};
    TrainConfig train;
    std::string output_dir = "contilora_out";
    std::size_t train_size = 2048;
    std::size_t eval_size = 512;
    std::size_t jobs = 1;
    bool force = false;
    std::optional<std::string> from_dataset;

    void validate() const;
};

// JSON config file; missing fields keep defaults. CONTILORA_SEED, when set,
// replaces the seed list.
ExperimentConfig load_config(const std::string& path);
void apply_env_overrides(ExperimentConfig& config);

// "default", "reversed", "shuffled:<seed>", or an explicit comma-separated
// permutation like "2,0,1".
std::vector<std::size_t> resolve_order(const std::string& order_spec, std::size_t n_tasks);
std::string order_tag(const std::string& order_spec);

// Executes the grid; persists perf_matrix.csv and checkpoints per cell plus a
// consolidated metrics.json at the root. Returns 0, or 1 if any cell failed
// (partial results are kept).
int cmd_run(const ExperimentConfig& config);

// Writes similarity matrices and energy/reconstruction curves under
// analysis/ for every cell directory below run_dir that holds checkpoints.
int cmd_analyze(const std::string& run_dir, std::size_t curve_rank = 4);

// Aggregates metrics.json across run dirs into report.csv (in the first dir)
// and an aligned table on stdout; seeds collapse to mean and sample std.
int cmd_report(const std::vector<std::string>& run_dirs);

void write_perf_csv(const std::string& path, const Matrix& perf,
                    const std::vector<std::string>& names);
Matrix read_perf_csv(const std::string& path);

}  // namespace contilora
