#include "contilora/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace contilora {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SuiteKind suite_from_name(const std::string& name) {
    if (name == "regression") return SuiteKind::regression;
    if (name == "diffusion") return SuiteKind::diffusion;
    throw UsageError("unknown suite '" + name + "'");
}

const char* suite_name(SuiteKind kind) {
    return kind == SuiteKind::regression ? "regression" : "diffusion";
}

}  // namespace

void ExperimentConfig::validate() const {
    if (strategies.empty()) throw UsageError("config: strategies must be non-empty");
    if (seeds.empty()) throw UsageError("config: seeds must be non-empty");
    if (orders.empty()) throw UsageError("config: orders must be non-empty");
    if (n_tasks == 0) throw UsageError("config: n_tasks must be positive");
    if (jobs == 0) throw UsageError("config: jobs must be positive");
    if (output_dir.empty()) throw UsageError("config: output_dir must be set");
    train.validate();
    for (const auto& o : orders) resolve_order(o, n_tasks);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("missing config file " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw UsageError("config parse error in " + path + ": " + e.what());
    }
    ExperimentConfig cfg;
    try {
        if (j.contains("schema_version")) cfg.schema_version = j["schema_version"].get<int>();
        if (cfg.schema_version != 1) throw UsageError("config: unsupported schema_version");
        if (j.contains("suite")) cfg.suite = suite_from_name(j["suite"].get<std::string>());
        if (j.contains("n_tasks")) cfg.n_tasks = j["n_tasks"].get<std::size_t>();
        if (j.contains("task_order")) cfg.orders = {j["task_order"].get<std::string>()};
        if (j.contains("task_orders"))
            cfg.orders = j["task_orders"].get<std::vector<std::string>>();
        if (j.contains("strategies")) {
            cfg.strategies.clear();
            for (const auto& s : j["strategies"])
                cfg.strategies.push_back(strategy_from_name(s.get<std::string>()));
        }
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("train_size")) cfg.train_size = j["train_size"].get<std::size_t>();
        if (j.contains("eval_size")) cfg.eval_size = j["eval_size"].get<std::size_t>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<std::size_t>();
        if (j.contains("from_dataset")) cfg.from_dataset = j["from_dataset"].get<std::string>();
        if (j.contains("train")) {
            const json& t = j["train"];
            if (t.contains("epochs_per_task"))
                cfg.train.epochs_per_task = t["epochs_per_task"].get<std::size_t>();
            if (t.contains("learning_rate"))
                cfg.train.learning_rate = t["learning_rate"].get<double>();
            if (t.contains("lora_rank")) cfg.train.lora_rank = t["lora_rank"].get<std::size_t>();
            if (t.contains("stage2_fraction"))
                cfg.train.stage2_fraction = t["stage2_fraction"].get<double>();
            if (t.contains("lambda_orth")) cfg.train.lambda_orth = t["lambda_orth"].get<double>();
            if (t.contains("rehearsal_fraction"))
                cfg.train.rehearsal_fraction = t["rehearsal_fraction"].get<double>();
            if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
            if (t.contains("squared_orth")) cfg.train.squared_orth = t["squared_orth"].get<bool>();
        }
    } catch (const json::exception& e) {
        throw UsageError("config field error in " + path + ": " + e.what());
    }
    return cfg;
}

void apply_env_overrides(ExperimentConfig& config) {
    if (const char* env = std::getenv("CONTILORA_SEED")) {
        config.seeds = {std::strtoull(env, nullptr, 10)};
    }
}

std::vector<std::size_t> resolve_order(const std::string& order_spec, std::size_t n_tasks) {
    std::vector<std::size_t> order(n_tasks);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (order_spec == "default") return order;
    if (order_spec == "reversed") {
        std::reverse(order.begin(), order.end());
        return order;
    }
    if (order_spec.rfind("shuffled:", 0) == 0) {
        const uint64_t s = std::strtoull(order_spec.c_str() + 9, nullptr, 10);
        SeededRng rng = SeededRng::derive(s, rng_stream::kSuite);
        // Fisher-Yates with our own rng keeps orders platform-stable.
        for (std::size_t i = n_tasks; i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        return order;
    }
    // Explicit comma-separated permutation.
    order.clear();
    std::stringstream ss(order_spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            order.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw UsageError("bad task order '" + order_spec + "'");
        }
    }
    std::vector<bool> seen(n_tasks, false);
    if (order.size() != n_tasks) throw UsageError("order '" + order_spec + "' wrong length");
    for (std::size_t v : order) {
        if (v >= n_tasks || seen[v]) throw UsageError("order '" + order_spec + "' not a permutation");
        seen[v] = true;
    }
    return order;
}

std::string order_tag(const std::string& order_spec) {
    std::string tag = "order_";
    for (char c : order_spec) tag += (c == ',' || c == ':') ? '_' : c;
    return tag;
}

void write_perf_csv(const std::string& path, const Matrix& perf,
                    const std::vector<std::string>& names) {
    std::ofstream os(path);
    if (!os) throw NumericError("cannot write " + path);
    for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
    os << "\n";
    for (std::size_t t = 0; t < perf.rows(); ++t) {
        for (std::size_t i = 0; i < perf.cols(); ++i) {
            os << (i ? "," : "") << fmt_double(perf.at(t, i));
        }
        os << "\n";
    }
}

Matrix read_perf_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("missing file " + path);
    std::string line;
    if (!std::getline(is, line)) throw UsageError("empty perf csv " + path);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return Matrix::from_rows(rows);
}

namespace {

struct Cell {
    std::string order_spec;
    Strategy strategy;
    uint64_t seed;
};

struct CellOutcome {
    bool ok = false;
    std::string error;
    MetricsReport metrics;
    std::vector<std::string> task_names;
};

CellOutcome run_cell(const ExperimentConfig& config, const Cell& cell, const std::string& dir) {
    CellOutcome out;
    try {
        TaskSuite suite;
        if (config.from_dataset.has_value()) {
            suite = import_suite(*config.from_dataset);
        } else if (config.suite == SuiteKind::regression) {
            suite = make_regression_suite(cell.seed, config.n_tasks, config.train_size,
                                          config.eval_size);
        } else {
            suite = make_toy_diffusion_suite(cell.seed, config.n_tasks, config.train_size,
                                             config.eval_size);
        }
        if (suite.tasks.size() != config.n_tasks) {
            throw UsageError("dataset task count does not match n_tasks");
        }
        TrainConfig tc = config.train;
        tc.strategy = cell.strategy;
        tc.seed = cell.seed;
        const std::vector<std::size_t> order = resolve_order(cell.order_spec, config.n_tasks);
        const SequenceResult result = run_sequence(suite, tc, order);

        fs::create_directories(dir);
        for (std::size_t pos : order) out.task_names.push_back(suite.tasks[pos].name);
        write_perf_csv(dir + "/perf_matrix.csv", result.perf, out.task_names);
        for (std::size_t k = 0; k < result.checkpoints.size(); ++k) {
            save_task_checkpoint(dir + "/task_" + std::to_string(k), result.spec,
                                 result.checkpoints[k]);
        }
        save_network(dir + "/network", result.spec, result.final_params);
        if (!result.events.empty()) {
            std::ofstream ev(dir + "/events.log");
            for (const auto& e : result.events) ev << e << "\n";
        }
        out.metrics = compute_metrics(result.perf);
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

}  // namespace

int cmd_run(const ExperimentConfig& config) {
    config.validate();
    if (fs::exists(config.output_dir) && !fs::is_empty(config.output_dir) && !config.force) {
        throw UsageError("output dir " + config.output_dir +
                         " is not empty; pass --force to add runs to it");
    }
    fs::create_directories(config.output_dir);

    std::vector<Cell> cells;
    std::vector<std::string> dirs;
    for (const auto& order : config.orders) {
        for (Strategy s : config.strategies) {
            for (uint64_t seed : config.seeds) {
                cells.push_back({order, s, seed});
                dirs.push_back(config.output_dir + "/" + order_tag(order) + "/" +
                               strategy_name(s) + "/seed_" + std::to_string(seed));
            }
        }
    }

    std::vector<CellOutcome> outcomes(cells.size());
    if (config.jobs <= 1 || cells.size() <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            outcomes[i] = run_cell(config, cells[i], dirs[i]);
        }
    } else {
        std::mutex mu;
        std::size_t next = 0;
        auto worker = [&] {
            for (;;) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= cells.size()) return;
                    i = next++;
                }
                outcomes[i] = run_cell(config, cells[i], dirs[i]);
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(config.jobs, cells.size()); ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) t.join();
    }

    json metrics;
    metrics["schema_version"] = 1;
    metrics["suite"] = suite_name(config.suite);
    metrics["n_tasks"] = config.n_tasks;
    metrics["cells"] = json::array();
    bool any_failed = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        json c;
        c["order"] = cells[i].order_spec;
        c["strategy"] = strategy_name(cells[i].strategy);
        c["seed"] = cells[i].seed;
        if (outcomes[i].ok) {
            c["last"] = outcomes[i].metrics.last;
            c["avg"] = outcomes[i].metrics.avg;
            c["bwt"] = outcomes[i].metrics.bwt;
            c["imm"] = outcomes[i].metrics.imm;
            c["per_task_last"] = outcomes[i].metrics.per_task_last;
            c["task_names"] = outcomes[i].task_names;
        } else {
            any_failed = true;
            c["error"] = outcomes[i].error;
            std::cerr << "cell " << dirs[i] << " failed: " << outcomes[i].error << "\n";
        }
        metrics["cells"].push_back(std::move(c));
    }
    std::ofstream os(config.output_dir + "/metrics.json");
    os << metrics.dump(2) << "\n";
    return any_failed ? 1 : 0;
}

int cmd_analyze(const std::string& run_dir, std::size_t curve_rank) {
    if (!fs::exists(run_dir)) throw UsageError("missing run dir " + run_dir);
    std::vector<fs::path> cell_dirs;
    for (auto it = fs::recursive_directory_iterator(run_dir);
         it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && fs::exists(it->path() / "task_0" / "manifest.json")) {
            cell_dirs.push_back(it->path());
        }
    }
    if (fs::exists(fs::path(run_dir) / "task_0" / "manifest.json")) {
        cell_dirs.push_back(run_dir);
    }
    if (cell_dirs.empty()) throw UsageError("no checkpoints under " + run_dir);
    std::sort(cell_dirs.begin(), cell_dirs.end());

    auto write_square = [](const std::string& path, const Matrix& m) {
        std::ofstream os(path);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt_double(m.at(i, j));
            os << "\n";
        }
    };
    auto write_curve = [](const std::string& path, const std::vector<double>& c) {
        std::ofstream os(path);
        os << "tasks,value\n";
        for (std::size_t k = 0; k < c.size(); ++k) os << k + 1 << "," << fmt_double(c[k]) << "\n";
    };

    for (const fs::path& cell : cell_dirs) {
        std::vector<TaskCheckpoint> cps;
        for (std::size_t k = 0;; ++k) {
            const fs::path d = cell / ("task_" + std::to_string(k));
            if (!fs::exists(d / "manifest.json")) break;
            cps.push_back(load_task_checkpoint(d.string()));
        }
        const fs::path out = cell / "analysis";
        fs::create_directories(out);
        write_square((out / "similarity_A.csv").string(),
                     lora_similarity_analysis(cps, AdapterSide::a));
        write_square((out / "similarity_B.csv").string(),
                     lora_similarity_analysis(cps, AdapterSide::b));
        write_curve((out / "energy_curve.csv").string(), energy_curve(cps, curve_rank));
        write_curve((out / "reconstruction_curve.csv").string(),
                    reconstruction_curve(cps, curve_rank));
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw UsageError("report: need at least one run dir");
    struct Acc {
        std::vector<double> last, avg, bwt;
    };
    // Keyed by (order, strategy); insertion order preserved for output.
    std::vector<std::pair<std::pair<std::string, std::string>, Acc>> groups;
    int schema = -1;
    for (const auto& dir : run_dirs) {
        std::ifstream is(dir + "/metrics.json");
        if (!is) throw UsageError("missing metrics.json in " + dir);
        const json j = json::parse(is);
        const int s = j.at("schema_version").get<int>();
        if (schema == -1) schema = s;
        if (s != schema) throw UsageError("schema mismatch in " + dir);
        for (const auto& c : j.at("cells")) {
            if (c.contains("error")) continue;
            const std::pair<std::string, std::string> key{c.at("order").get<std::string>(),
                                                          c.at("strategy").get<std::string>()};
            auto it = std::find_if(groups.begin(), groups.end(),
                                   [&](const auto& g) { return g.first == key; });
            if (it == groups.end()) {
                groups.push_back({key, {}});
                it = std::prev(groups.end());
            }
            it->second.last.push_back(c.at("last").get<double>());
            it->second.avg.push_back(c.at("avg").get<double>());
            it->second.bwt.push_back(c.at("bwt").get<double>());
        }
    }
    if (groups.empty()) throw UsageError("report: no successful cells found");

    auto mean_std = [](const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double std_dev = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        return std::pair{mean, std_dev};
    };

    std::ofstream csv(run_dirs.front() + "/report.csv");
    csv << "order,strategy,n,last_mean,last_std,avg_mean,avg_std,bwt_mean,bwt_std\n";
    std::printf("%-18s %-14s %3s %22s %22s %22s\n", "order", "strategy", "n", "last", "avg",
                "bwt");
    for (const auto& [key, acc] : groups) {
        const auto [lm, ls] = mean_std(acc.last);
        const auto [am, as] = mean_std(acc.avg);
        const auto [bm, bs] = mean_std(acc.bwt);
        csv << key.first << "," << key.second << "," << acc.last.size() << "," << fmt_double(lm)
            << "," << fmt_double(ls) << "," << fmt_double(am) << "," << fmt_double(as) << ","
            << fmt_double(bm) << "," << fmt_double(bs) << "\n";
        char lastb[40], avgb[40], bwtb[40];
        std::snprintf(lastb, sizeof(lastb), "%.6f ± %.6f", lm, ls);
        std::snprintf(avgb, sizeof(avgb), "%.6f ± %.6f", am, as);
        std::snprintf(bwtb, sizeof(bwtb), "%.6f ± %.6f", bm, bs);
        std::printf("%-18s %-14s %3zu %22s %22s %22s\n", key.first.c_str(), key.second.c_str(),
                    acc.last.size(), lastb, avgb, bwtb);
    }
    return 0;
}

}  // namespace contilora
