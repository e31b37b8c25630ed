#include "contilora/tasks.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace contilora {

namespace {

constexpr std::size_t kRegressionInputDim = 4;
constexpr std::size_t kRegressionOutputDim = 2;
constexpr std::size_t kDiffusionDim = 2;

Matrix uniform_inputs(SeededRng& rng, std::size_t n, std::size_t d) {
    Matrix x(n, d);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    return x;
}

// --- diffusion shape menu ---------------------------------------------------

struct ShapeDef {
    const char* name;
    void (*sample)(SeededRng& rng, double* out);
};

void sample_ring(SeededRng& rng, double* out) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double r = 1.0 + 0.05 * rng.normal();
    out[0] = r * std::cos(theta);
    out[1] = r * std::sin(theta);
}

void sample_two_cluster(SeededRng& rng, double* out) {
    const double cx = rng.uniform() < 0.5 ? -0.8 : 0.8;
    out[0] = cx + 0.2 * rng.normal();
    out[1] = 0.2 * rng.normal();
}

void sample_grid9(SeededRng& rng, double* out) {
    const uint64_t cell = rng.uniform_int(9);
    const double cx = (static_cast<double>(cell % 3) - 1.0) * 0.8;
    const double cy = (static_cast<double>(cell / 3) - 1.0) * 0.8;
    out[0] = cx + 0.1 * rng.normal();
    out[1] = cy + 0.1 * rng.normal();
}

void sample_spiral(SeededRng& rng, double* out) {
    const double t = rng.uniform();
    const double r = 0.2 + 0.8 * t;
    const double theta = 3.0 * M_PI * t;
    out[0] = r * std::cos(theta) + 0.03 * rng.normal();
    out[1] = r * std::sin(theta) + 0.03 * rng.normal();
}

void sample_line(SeededRng& rng, double* out) {
    const double t = rng.uniform(-1.0, 1.0);
    out[0] = t + 0.05 * rng.normal();
    out[1] = -t + 0.05 * rng.normal();
}

void sample_checker(SeededRng& rng, double* out) {
    // Two opposite squares of a 2x2 board.
    if (rng.uniform() < 0.5) {
        out[0] = rng.uniform(0.0, 1.0);
        out[1] = rng.uniform(0.0, 1.0);
    } else {
        out[0] = rng.uniform(-1.0, 0.0);
        out[1] = rng.uniform(-1.0, 0.0);
    }
}

constexpr ShapeDef kShapeMenu[] = {
    {"ring", sample_ring},         {"two_cluster", sample_two_cluster},
    {"grid9", sample_grid9},       {"spiral", sample_spiral},
    {"line", sample_line},         {"checker", sample_checker},
};
constexpr std::size_t kMenuSize = sizeof(kShapeMenu) / sizeof(kShapeMenu[0]);

Matrix draw_shape(const ShapeDef& shape, SeededRng& rng, std::size_t n) {
    Matrix x(n, kDiffusionDim);
    for (std::size_t i = 0; i < n; ++i) shape.sample(rng, x.row_ptr(i));
    return x;
}

// Shifts a sample set to its empirical mean and scales it to unit RMS norm
// (sqrt of the mean squared row norm), so moments hold exactly per set.
void standardize_in_place(Matrix& x) {
    if (x.rows() == 0) return;
    double mean[kDiffusionDim] = {0.0, 0.0};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < kDiffusionDim; ++j) mean[j] += x.at(i, j);
    }
    for (double& m : mean) m /= static_cast<double>(x.rows());
    double msq = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < kDiffusionDim; ++j) {
            const double d = x.at(i, j) - mean[j];
            msq += d * d;
        }
    }
    const double scale = std::sqrt(msq / static_cast<double>(x.rows()));
    if (scale == 0.0) return;  // degenerate set, leave centered values alone
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < kDiffusionDim; ++j) {
            x.at(i, j) = (x.at(i, j) - mean[j]) / scale;
        }
    }
}

}  // namespace

TaskSuite make_regression_suite(uint64_t seed, std::size_t n_tasks, std::size_t train_size,
                                std::size_t eval_size) {
    if (n_tasks < 2) throw UsageError("make_regression_suite: need at least 2 tasks");
    TaskSuite suite;
    suite.kind = SuiteKind::regression;
    suite.seed = seed;
    suite.student_spec =
        NetworkSpec{{kRegressionInputDim, 16, kRegressionOutputDim}, Activation::tanh_fn};

    const NetworkSpec teacher_spec = suite.student_spec;
    SeededRng backbone_rng = SeededRng::derive(seed, rng_stream::kSuite);
    const Params shared = init_params(teacher_spec, backbone_rng);

    for (std::size_t t = 0; t < n_tasks; ++t) {
        TaskSpec task;
        task.task_id = static_cast<int>(t);
        task.kind = SuiteKind::regression;
        task.name = "reg" + std::to_string(t);

        // Shared backbone, task-specific head.
        Params teacher = shared;
        SeededRng head_rng = SeededRng::derive(seed ^ (0xabcdULL + t), rng_stream::kSuite);
        LayerParams& head = teacher.back();
        const double stddev = 1.0 / std::sqrt(static_cast<double>(head.base_weight.cols()));
        for (std::size_t i = 0; i < head.base_weight.size(); ++i) {
            head.base_weight.data()[i] = stddev * head_rng.normal();
        }

        SeededRng data_rng = SeededRng::derive(seed ^ (0x51ULL * (t + 1)), rng_stream::kSuite);
        task.train_x = uniform_inputs(data_rng, train_size, kRegressionInputDim);
        task.train_y = forward(teacher_spec, teacher, task.train_x, AdapterMode::base_only);
        task.eval_x = uniform_inputs(data_rng, eval_size, kRegressionInputDim);
        task.eval_y = forward(teacher_spec, teacher, task.eval_x, AdapterMode::base_only);

        task.teacher_spec = teacher_spec;
        task.teacher_params = std::move(teacher);
        suite.tasks.push_back(std::move(task));
    }
    return suite;
}

TaskSuite make_toy_diffusion_suite(uint64_t seed, std::size_t n_tasks, std::size_t train_size,
                                   std::size_t eval_size) {
    if (n_tasks < 2) throw UsageError("make_toy_diffusion_suite: need at least 2 tasks");
    if (n_tasks > kMenuSize) {
        throw UsageError("make_toy_diffusion_suite: only " + std::to_string(kMenuSize) +
                         " shapes available, requested " + std::to_string(n_tasks));
    }
    TaskSuite suite;
    suite.kind = SuiteKind::diffusion;
    suite.seed = seed;
    suite.student_spec =
        NetworkSpec{{kDiffusionDim + 3, 32, 32, kDiffusionDim}, Activation::tanh_fn};
    suite.schedule = linear_schedule();

    for (std::size_t t = 0; t < n_tasks; ++t) {
        const ShapeDef& shape = kShapeMenu[t];
        const uint64_t task_seed = seed ^ (0x9e37ULL * (t + 1));

        TaskSpec task;
        task.task_id = static_cast<int>(t);
        task.kind = SuiteKind::diffusion;
        task.name = shape.name;
        SeededRng data_rng = SeededRng::derive(task_seed, rng_stream::kSuite);
        task.train_x = draw_shape(shape, data_rng, train_size);
        task.eval_x = draw_shape(shape, data_rng, eval_size);
        standardize_in_place(task.train_x);
        standardize_in_place(task.eval_x);
        task.train_y = Matrix(train_size, 1);  // unused
        task.eval_y = Matrix(eval_size, 1);    // unused
        task.eval_noise_seed = task_seed ^ 0xfeedULL;
        suite.tasks.push_back(std::move(task));
    }
    return suite;
}

Matrix sample_batch(const TaskSpec& task, std::size_t n, SeededRng& rng) {
    if (n == 0) throw UsageError("sample_batch: empty batch requested");
    Matrix out(n, task.train_x.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = rng.uniform_int(task.train_x.rows());
        std::copy(task.train_x.row_ptr(row), task.train_x.row_ptr(row) + task.train_x.cols(),
                  out.row_ptr(i));
    }
    return out;
}

double eval_performance(const NetworkSpec& spec, const Params& params, const TaskSuite& suite,
                        std::size_t task_index, AdapterMode mode, HistorySource source) {
    const TaskSpec& task = suite.tasks.at(task_index);
    if (task.kind == SuiteKind::regression) {
        const Matrix pred = forward(spec, params, task.eval_x, mode, source);
        return -mse_loss(pred, task.eval_y);
    }
    // Fixed eval noise grid: replicate each eval point kEvalNoiseDraws times
    // and draw (t, eps) from a task-fixed seed.
    const std::size_t n = task.eval_x.rows();
    Matrix replicated(n * kEvalNoiseDraws, task.eval_x.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kEvalNoiseDraws; ++k) {
            std::copy(task.eval_x.row_ptr(i), task.eval_x.row_ptr(i) + task.eval_x.cols(),
                      replicated.row_ptr(i * kEvalNoiseDraws + k));
        }
    }
    SeededRng noise_rng = SeededRng::derive(task.eval_noise_seed, rng_stream::kEvalNoise);
    const DenoisingBatch batch = make_denoising_batch(replicated, noise_rng, suite.schedule);
    const Matrix pred = forward(spec, params, batch.input, mode, source);
    return -mse_loss(pred, batch.target);
}

// --- disk form --------------------------------------------------------------

void export_suite(const TaskSuite& suite, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["kind"] = suite.kind == SuiteKind::regression ? "regression" : "diffusion";
    manifest["seed"] = suite.seed;
    manifest["student_dims"] = suite.student_spec.layer_dims;
    manifest["activation"] = suite.student_spec.activation == Activation::tanh_fn ? "tanh" : "relu";
    if (suite.kind == SuiteKind::diffusion) {
        manifest["schedule_steps"] = suite.schedule.steps;
        manifest["betas"] = suite.schedule.betas;
    }
    for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
        const TaskSpec& task = suite.tasks[t];
        nlohmann::json jt;
        jt["task_id"] = task.task_id;
        jt["name"] = task.name;
        jt["eval_noise_seed"] = task.eval_noise_seed;
        manifest["tasks"].push_back(jt);
        const std::string prefix = dir + "/task_" + std::to_string(t) + "_";
        save_matrix(prefix + "train_x.bin", task.train_x);
        save_matrix(prefix + "train_y.bin", task.train_y);
        save_matrix(prefix + "eval_x.bin", task.eval_x);
        save_matrix(prefix + "eval_y.bin", task.eval_y);
    }
    std::ofstream os(dir + "/manifest.json");
    os << manifest.dump(2) << "\n";
}

TaskSuite import_suite(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw UsageError("import_suite: missing manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(is);
    TaskSuite suite;
    suite.kind =
        manifest.at("kind") == "regression" ? SuiteKind::regression : SuiteKind::diffusion;
    suite.seed = manifest.at("seed").get<uint64_t>();
    suite.student_spec.layer_dims = manifest.at("student_dims").get<std::vector<std::size_t>>();
    suite.student_spec.activation =
        manifest.at("activation") == "tanh" ? Activation::tanh_fn : Activation::relu_fn;
    if (suite.kind == SuiteKind::diffusion) {
        suite.schedule.steps = manifest.at("schedule_steps").get<std::size_t>();
        suite.schedule.betas = manifest.at("betas").get<std::vector<double>>();
        suite.schedule.alpha_bars.resize(suite.schedule.steps);
        double prod = 1.0;
        for (std::size_t t = 0; t < suite.schedule.steps; ++t) {
            prod *= 1.0 - suite.schedule.betas[t];
            suite.schedule.alpha_bars[t] = prod;
        }
        suite.schedule.validate();
    }
    for (std::size_t t = 0; t < manifest.at("tasks").size(); ++t) {
        const auto& jt = manifest.at("tasks")[t];
        TaskSpec task;
        task.task_id = jt.at("task_id").get<int>();
        task.name = jt.at("name").get<std::string>();
        task.kind = suite.kind;
        task.eval_noise_seed = jt.at("eval_noise_seed").get<uint64_t>();
        const std::string prefix = dir + "/task_" + std::to_string(t) + "_";
        task.train_x = load_matrix(prefix + "train_x.bin");
        task.train_y = load_matrix(prefix + "train_y.bin");
        task.eval_x = load_matrix(prefix + "eval_x.bin");
        task.eval_y = load_matrix(prefix + "eval_y.bin");
        suite.tasks.push_back(std::move(task));
    }
    return suite;
}

}  // namespace contilora
