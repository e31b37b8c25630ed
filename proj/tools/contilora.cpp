#include <iostream>

#include <CLI11.hpp>

#include "contilora/experiment.hpp"

using namespace contilora;

int main(int argc, char** argv) {
    CLI::App app{"continual LoRA experiment runner"};
    app.require_subcommand(1);

    // run
    std::string config_path;
    std::string suite_flag, output_dir_flag, orders_flag;
    std::vector<std::string> strategies_flag;
    std::vector<uint64_t> seeds_flag;
    std::size_t n_tasks_flag = 0, jobs_flag = 0;
    double lr_flag = -1.0, lambda_flag = -1.0, stage2_flag = -1.0;
    long epochs_flag = -1, rank_flag = -1, batch_flag = -1;
    bool force_flag = false;
    CLI::App* run = app.add_subcommand("run", "execute a strategy x seed x order grid");
    run->add_option("config", config_path, "JSON config file (optional if flags given)");
    run->add_option("--suite", suite_flag, "regression|diffusion");
    run->add_option("--n-tasks", n_tasks_flag, "number of tasks");
    run->add_option("--strategies", strategies_flag, "strategy names")->delimiter(',');
    run->add_option("--seeds", seeds_flag, "seed list")->delimiter(',');
    run->add_option("--orders", orders_flag,
                    "semicolon-separated order specs (default|reversed|shuffled:<s>|perm)");
    run->add_option("--output-dir", output_dir_flag, "run directory");
    run->add_option("--jobs", jobs_flag, "concurrent cells");
    run->add_option("--epochs", epochs_flag, "epochs per task");
    run->add_option("--lr", lr_flag, "learning rate");
    run->add_option("--rank", rank_flag, "adapter rank");
    run->add_option("--batch-size", batch_flag, "batch size");
    run->add_option("--lambda-orth", lambda_flag, "orthogonality penalty weight");
    run->add_option("--stage2-fraction", stage2_flag, "constrained epoch fraction");
    run->add_flag("--force", force_flag, "allow writing into a non-empty output dir");

    // analyze
    std::string analyze_dir;
    std::size_t curve_rank = 4;
    CLI::App* analyze = app.add_subcommand("analyze", "adapter similarity and curve CSVs");
    analyze->add_option("run_dir", analyze_dir, "directory holding checkpoints")->required();
    analyze->add_option("--rank", curve_rank, "rank for energy/reconstruction curves");

    // report
    std::vector<std::string> report_dirs;
    CLI::App* report = app.add_subcommand("report", "aggregate metrics across run dirs");
    report->add_option("run_dirs", report_dirs, "one or more run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = load_config(config_path);
            if (!suite_flag.empty()) {
                if (suite_flag == "regression") cfg.suite = SuiteKind::regression;
                else if (suite_flag == "diffusion") cfg.suite = SuiteKind::diffusion;
                else throw UsageError("unknown suite '" + suite_flag + "'");
            }
            if (n_tasks_flag > 0) cfg.n_tasks = n_tasks_flag;
            if (!strategies_flag.empty()) {
                cfg.strategies.clear();
                for (const auto& s : strategies_flag) cfg.strategies.push_back(strategy_from_name(s));
            }
            if (!seeds_flag.empty()) cfg.seeds = seeds_flag;
            if (!orders_flag.empty()) {
                cfg.orders.clear();
                std::stringstream ss(orders_flag);
                std::string item;
                while (std::getline(ss, item, ';')) cfg.orders.push_back(item);
            }
            if (!output_dir_flag.empty()) cfg.output_dir = output_dir_flag;
            if (jobs_flag > 0) cfg.jobs = jobs_flag;
            if (epochs_flag >= 0) cfg.train.epochs_per_task = static_cast<std::size_t>(epochs_flag);
            if (lr_flag >= 0) cfg.train.learning_rate = lr_flag;
            if (rank_flag > 0) cfg.train.lora_rank = static_cast<std::size_t>(rank_flag);
            if (batch_flag > 0) cfg.train.batch_size = static_cast<std::size_t>(batch_flag);
            if (lambda_flag >= 0) cfg.train.lambda_orth = lambda_flag;
            if (stage2_flag >= 0) cfg.train.stage2_fraction = stage2_flag;
            if (force_flag) cfg.force = true;
            apply_env_overrides(cfg);
            return cmd_run(cfg);
        }
        if (analyze->parsed()) return cmd_analyze(analyze_dir, curve_rank);
        if (report->parsed()) return cmd_report(report_dirs);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
