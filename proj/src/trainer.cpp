#include "contilora/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace contilora {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::aod_svd: return "aod_svd";
        case Strategy::aod_random: return "aod_random";
        case Strategy::aod_summation: return "aod_summation";
        case Strategy::param_orth: return "param_orth";
        case Strategy::sequential_ft: return "sequential_ft";
        case Strategy::individual: return "individual";
        case Strategy::multitask: return "multitask";
        case Strategy::rehearsal: return "rehearsal";
    }
    return "?";
}

Strategy strategy_from_name(const std::string& name) {
    for (Strategy s : {Strategy::aod_svd, Strategy::aod_random, Strategy::aod_summation,
                       Strategy::param_orth, Strategy::sequential_ft, Strategy::individual,
                       Strategy::multitask, Strategy::rehearsal}) {
        if (name == strategy_name(s)) return s;
    }
    throw UsageError("unknown strategy: " + name);
}

void TrainConfig::validate() const {
    if (epochs_per_task == 0) throw UsageError("TrainConfig: epochs_per_task must be positive");
    if (learning_rate <= 0.0) throw UsageError("TrainConfig: learning_rate must be positive");
    if (lora_rank == 0) throw UsageError("TrainConfig: lora_rank must be positive");
    if (stage2_fraction < 0.0 || stage2_fraction > 1.0) {
        throw UsageError("TrainConfig: stage2_fraction out of [0,1]");
    }
    if (rehearsal_fraction < 0.0 || rehearsal_fraction > 1.0) {
        throw UsageError("TrainConfig: rehearsal_fraction out of [0,1]");
    }
    if (batch_size == 0) throw UsageError("TrainConfig: batch_size must be positive");
    if (lambda_orth < 0.0) throw UsageError("TrainConfig: lambda_orth must be non-negative");
}

std::size_t TrainConfig::stage2_epochs() const {
    return static_cast<std::size_t>(
        std::llround(stage2_fraction * static_cast<double>(epochs_per_task)));
}

void adam_step(Matrix& param, const Matrix& grad, AdamSlot& slot, double lr, long t, double beta1,
               double beta2, double eps) {
    if (slot.m.empty()) {
        slot.m = Matrix(param.rows(), param.cols());
        slot.v = Matrix(param.rows(), param.cols());
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data()[i];
        const double m = slot.m.data()[i] = beta1 * slot.m.data()[i] + (1.0 - beta1) * g;
        const double v = slot.v.data()[i] = beta2 * slot.v.data()[i] + (1.0 - beta2) * g * g;
        param.data()[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
    }
}

namespace {

bool is_constrained_strategy(Strategy s) {
    return s == Strategy::aod_svd || s == Strategy::aod_random || s == Strategy::aod_summation ||
           s == Strategy::param_orth;
}

bool is_aod_strategy(Strategy s) {
    return s == Strategy::aod_svd || s == Strategy::aod_random || s == Strategy::aod_summation;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, SeededRng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    }
    return idx;
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t i = begin; i < end; ++i) {
        std::copy(src.row_ptr(idx[i]), src.row_ptr(idx[i]) + src.cols(), out.row_ptr(i - begin));
    }
    return out;
}

// Temporarily installs a per-layer (b_his, a_his) surrogate as the compressed
// history so the interference pass sees it; restores on destruction.
class ScopedSurrogate {
public:
    ScopedSurrogate(Params& params, const std::vector<Matrix>& b, const std::vector<Matrix>& a)
        : params_(params) {
        saved_.reserve(params.size());
        for (std::size_t l = 0; l < params.size(); ++l) {
            saved_.push_back(params[l].adapters.compressed);
            CompressedHistory ch;
            ch.b_his = b[l];
            ch.a_his = a[l];
            params[l].adapters.compressed = std::move(ch);
        }
    }
    ~ScopedSurrogate() {
        for (std::size_t l = 0; l < params_.size(); ++l) {
            params_[l].adapters.compressed = std::move(saved_[l]);
        }
    }

private:
    Params& params_;
    std::vector<std::optional<CompressedHistory>> saved_;
};

SeededRng adapter_init_rng(uint64_t seed, std::size_t layer) {
    return SeededRng::derive(seed ^ (0x10001ULL * (layer + 1)), rng_stream::kAdapterInit);
}

}  // namespace

Params make_base_params(const TaskSuite& suite, uint64_t seed) {
    SeededRng init_rng = SeededRng::derive(seed, rng_stream::kPretrain);
    Params params = init_params(suite.student_spec, init_rng);
    if (suite.kind != SuiteKind::diffusion) return params;

    // Short denoising pretrain on an isotropic Gaussian so that the continual
    // sequence starts from a meaningful base.
    const std::size_t n = 2048;
    const std::size_t data_dim = suite.student_spec.layer_dims.back();
    SeededRng data_rng = SeededRng::derive(seed + 1, rng_stream::kPretrain);
    Matrix clean(n, data_dim);
    for (std::size_t i = 0; i < clean.size(); ++i) clean.data()[i] = data_rng.normal();

    SeededRng noise_rng = SeededRng::derive(seed + 2, rng_stream::kPretrain);
    SeededRng order_rng = SeededRng::derive(seed + 3, rng_stream::kPretrain);
    const std::size_t batch = 128;
    const std::size_t epochs = 30;
    std::vector<AdamSlot> w_slots(params.size());
    std::vector<AdamSlot> b_slots(params.size());
    long t = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        const auto idx = shuffled_indices(n, order_rng);
        for (std::size_t start = 0; start + batch <= n; start += batch) {
            const Matrix xb = gather_rows(clean, idx, start, start + batch);
            const DenoisingBatch db = make_denoising_batch(xb, noise_rng, suite.schedule);
            auto [loss, grads] = backward_mse(suite.student_spec, params, db.input, db.target,
                                              AdapterMode::base_only);
            if (!std::isfinite(loss)) throw NumericError("pretrain: loss diverged");
            ++t;
            for (std::size_t l = 0; l < params.size(); ++l) {
                adam_step(params[l].base_weight, grads.at({l, ParamRole::effective_weight}),
                          w_slots[l], 1e-3, t);
                adam_step(params[l].base_bias, grads.at({l, ParamRole::bias}), b_slots[l], 1e-3,
                          t);
            }
        }
    }
    return params;
}

RunState make_run_state(const TaskSuite& suite, const TrainConfig& config) {
    config.validate();
    RunState st{
        suite.student_spec,
        make_base_params(suite, config.seed),
        SeededRng::derive(config.seed, rng_stream::kDataOrder),
        SeededRng::derive(config.seed, rng_stream::kDiffusionNoise),
        SeededRng::derive(config.seed, rng_stream::kStrategy),
        SeededRng::derive(config.seed, rng_stream::kRehearsal),
        {},
        0.0,
        0,
    };
    return st;
}

TaskCheckpoint train_task(RunState& state, const TaskSuite& suite, std::size_t task_index,
                          const TrainConfig& config) {
    config.validate();
    const TaskSpec& task = suite.tasks.at(task_index);
    const bool diffusion = suite.kind == SuiteKind::diffusion;
    const NetworkSpec& spec = state.spec;
    Params& params = state.params;

    for (std::size_t l = 0; l < params.size(); ++l) {
        if (params[l].adapters.current.has_value()) {
            throw UsageError("train_task: current adapter already attached");
        }
        SeededRng init = adapter_init_rng(config.seed, l);
        // Rank is capped by the layer's smaller dimension.
        const std::size_t r = std::min(
            config.lora_rank,
            std::min(params[l].base_weight.rows(), params[l].base_weight.cols()));
        params[l].adapters.current = init_adapter(
            params[l].base_weight.rows(), params[l].base_weight.cols(), r, task.task_id, init);
    }

    // Training pool; rehearsal appends a seeded subsample of every past task.
    Matrix pool_x = task.train_x;
    Matrix pool_y = task.train_y;
    if (config.strategy == Strategy::rehearsal && config.rehearsal_fraction > 0.0) {
        for (const TaskSpec& past : suite.tasks) {
            const bool seen = past.task_id != task.task_id &&
                              std::any_of(params[0].adapters.frozen.begin(),
                                          params[0].adapters.frozen.end(),
                                          [&](const LoraAdapter& ad) {
                                              return ad.task_id == past.task_id;
                                          });
            if (!seen) continue;
            const std::size_t k = static_cast<std::size_t>(
                std::llround(config.rehearsal_fraction * past.train_x.rows()));
            if (k == 0) continue;
            auto idx = shuffled_indices(past.train_x.rows(), state.rng_rehearsal);
            idx.resize(k);
            Matrix xs = gather_rows(past.train_x, idx, 0, k);
            Matrix ys = gather_rows(past.train_y, idx, 0, k);
            Matrix merged_x(pool_x.rows() + k, pool_x.cols());
            std::copy(pool_x.data(), pool_x.data() + pool_x.size(), merged_x.data());
            std::copy(xs.data(), xs.data() + xs.size(), merged_x.data() + pool_x.size());
            Matrix merged_y(pool_y.rows() + k, pool_y.cols());
            std::copy(pool_y.data(), pool_y.data() + pool_y.size(), merged_y.data());
            std::copy(ys.data(), ys.data() + ys.size(), merged_y.data() + pool_y.size());
            pool_x = std::move(merged_x);
            pool_y = std::move(merged_y);
        }
    }

    const bool has_history = !params[0].adapters.frozen.empty();
    const std::size_t stage2 =
        is_constrained_strategy(config.strategy) ? config.stage2_epochs() : 0;
    const std::size_t stage1 = config.epochs_per_task - std::min(stage2, config.epochs_per_task);

    // Static surrogate for the summation baseline, built once per task.
    std::vector<Matrix> summ_b, summ_a;
    if (config.strategy == Strategy::aod_summation && has_history && stage2 > 0) {
        for (auto& lp : params) {
            CompressedHistory ch = strategy_summation(lp.adapters.frozen);
            summ_b.push_back(std::move(ch.b_his));
            summ_a.push_back(std::move(ch.a_his));
        }
    }

    std::vector<AdamSlot> b_slots(params.size());
    std::vector<AdamSlot> a_slots(params.size());
    long step = 0;
    double last_loss = 0.0;
    double align_sum = 0.0;
    std::size_t align_count = 0;

    const std::size_t n = pool_x.rows();
    const std::size_t batch = std::min<std::size_t>(config.batch_size, n);
    for (std::size_t epoch = 0; epoch < config.epochs_per_task; ++epoch) {
        const bool constrained = epoch >= stage1 && stage2 > 0 && has_history;
        const bool final_epoch = epoch + 1 == config.epochs_per_task;
        const auto idx = shuffled_indices(n, state.rng_data);
        for (std::size_t start = 0; start + batch <= n; start += batch) {
            const auto t0 = std::chrono::steady_clock::now();
            Matrix in = gather_rows(pool_x, idx, start, start + batch);
            Matrix tgt;
            if (diffusion) {
                DenoisingBatch db = make_denoising_batch(in, state.rng_noise, suite.schedule);
                in = std::move(db.input);
                tgt = std::move(db.target);
            } else {
                tgt = gather_rows(pool_y, idx, start, start + batch);
            }

            auto [loss, grads] =
                backward_mse(spec, params, in, tgt, AdapterMode::history_plus_current);
            if (!std::isfinite(loss)) {
                throw NumericError("train_task: loss diverged at task " + task.name + " epoch " +
                                   std::to_string(epoch) + " step " + std::to_string(step));
            }
            last_loss = loss;

            std::vector<Matrix> grad_b, grad_a;
            grad_b.reserve(params.size());
            grad_a.reserve(params.size());
            for (std::size_t l = 0; l < params.size(); ++l) {
                grad_b.push_back(std::move(grads.at({l, ParamRole::adapter_b})));
                grad_a.push_back(std::move(grads.at({l, ParamRole::adapter_a})));
            }

            if (constrained) {
                std::vector<Matrix> current_b;
                for (auto& lp : params) current_b.push_back(lp.adapters.current->b);
                if (is_aod_strategy(config.strategy)) {
                    InterferenceVector iv;
                    if (config.strategy == Strategy::aod_svd) {
                        iv = interference_vector(spec, params, in, tgt, IvScope::lora_b_only,
                                                 step);
                    } else if (config.strategy == Strategy::aod_random) {
                        const std::size_t pick =
                            state.rng_strategy.uniform_int(params[0].adapters.frozen.size());
                        std::vector<Matrix> sb, sa;
                        for (auto& lp : params) {
                            sb.push_back(lp.adapters.frozen[pick].b);
                            sa.push_back(lp.adapters.frozen[pick].a);
                        }
                        ScopedSurrogate guard(params, sb, sa);
                        iv = interference_vector(spec, params, in, tgt, IvScope::lora_b_only,
                                                 step);
                    } else {
                        ScopedSurrogate guard(params, summ_b, summ_a);
                        iv = interference_vector(spec, params, in, tgt, IvScope::lora_b_only,
                                                 step);
                    }
                    const auto orth_grads = orth_loss_grad(iv, current_b, config.squared_orth);
                    for (std::size_t l = 0; l < params.size(); ++l) {
                        add_scaled_in_place(grad_b[l], orth_grads[l], config.lambda_orth);
                    }
                    if (final_epoch) {
                        for (std::size_t l = 0; l < params.size(); ++l) {
                            const double niv = frobenius_norm(iv.per_layer[l]);
                            const double nb = frobenius_norm(current_b[l]);
                            if (niv > 0.0 && nb > 0.0) {
                                align_sum += std::abs(frobenius_inner(iv.per_layer[l],
                                                                      current_b[l])) /
                                             (niv * nb);
                                ++align_count;
                            }
                        }
                    }
                } else {  // param_orth
                    std::vector<Matrix> hist_a, cur_a;
                    for (auto& lp : params) {
                        hist_a.push_back(lp.adapters.compressed->a_his);
                        cur_a.push_back(lp.adapters.current->a);
                    }
                    const auto pg = param_orth_grad(hist_a, cur_a);
                    for (std::size_t l = 0; l < params.size(); ++l) {
                        add_scaled_in_place(grad_a[l], pg[l], config.lambda_orth);
                    }
                }
            }

            ++step;
            for (std::size_t l = 0; l < params.size(); ++l) {
                adam_step(params[l].adapters.current->b, grad_b[l], b_slots[l],
                          config.learning_rate, step);
                adam_step(params[l].adapters.current->a, grad_a[l], a_slots[l],
                          config.learning_rate, step);
            }
            state.step_seconds_total +=
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            ++state.step_count;
        }
    }

    TaskCheckpoint cp;
    cp.task_id = task.task_id;
    cp.task_name = task.name;
    cp.final_loss = last_loss;
    if (align_count > 0) cp.mean_final_alignment = align_sum / static_cast<double>(align_count);
    for (auto& lp : params) {
        freeze_current(lp.adapters);
        cp.adapters.push_back(lp.adapters.frozen.back());
        const std::size_t r = std::min(
            config.lora_rank, std::min(lp.base_weight.rows(), lp.base_weight.cols()));
        CompressedHistory ch = compress_svd(lp.adapters.frozen, r);
        lp.adapters.compressed = ch;
        cp.compressed.push_back(std::move(ch));
    }
    state.events.push_back("task " + task.name + " done, final loss " +
                           std::to_string(last_loss));
    return cp;
}

SequenceResult run_sequence(const TaskSuite& suite, const TrainConfig& config,
                            const std::vector<std::size_t>& order) {
    config.validate();
    if (order.empty()) throw UsageError("run_sequence: empty order");
    {
        std::vector<bool> seen(suite.tasks.size(), false);
        for (std::size_t i : order) {
            if (i >= suite.tasks.size() || seen[i]) {
                throw UsageError("run_sequence: order is not a valid permutation");
            }
            seen[i] = true;
        }
    }
    const std::size_t T = order.size();
    SequenceResult res;
    res.spec = suite.student_spec;
    res.perf = Matrix(T, T);

    if (config.strategy == Strategy::individual) {
        double secs = 0.0;
        std::size_t steps = 0;
        for (std::size_t k = 0; k < T; ++k) {
            RunState st = make_run_state(suite, config);
            res.checkpoints.push_back(train_task(st, suite, order[k], config));
            for (std::size_t i = 0; i < T; ++i) {
                res.perf.at(k, i) =
                    eval_performance(st.spec, st.params, suite, order[i]);
            }
            secs += st.step_seconds_total;
            steps += st.step_count;
            for (auto& e : st.events) res.events.push_back(std::move(e));
            if (k + 1 == T) res.final_params = std::move(st.params);
        }
        res.avg_step_seconds = steps ? secs / static_cast<double>(steps) : 0.0;
        return res;
    }

    if (config.strategy == Strategy::multitask) {
        TaskSuite pooled = suite;
        TaskSpec joint;
        joint.task_id = 0;
        joint.kind = suite.kind;
        joint.name = "multitask_pool";
        std::size_t rows = 0;
        for (std::size_t i : order) rows += suite.tasks[i].train_x.rows();
        joint.train_x = Matrix(rows, suite.tasks[order[0]].train_x.cols());
        joint.train_y = Matrix(rows, suite.tasks[order[0]].train_y.cols());
        std::size_t at = 0;
        for (std::size_t i : order) {
            const TaskSpec& t = suite.tasks[i];
            std::copy(t.train_x.data(), t.train_x.data() + t.train_x.size(),
                      joint.train_x.row_ptr(at));
            std::copy(t.train_y.data(), t.train_y.data() + t.train_y.size(),
                      joint.train_y.row_ptr(at));
            at += t.train_x.rows();
        }
        joint.eval_x = suite.tasks[order[0]].eval_x;
        joint.eval_y = suite.tasks[order[0]].eval_y;
        joint.eval_noise_seed = suite.tasks[order[0]].eval_noise_seed;
        pooled.tasks = {std::move(joint)};

        RunState st = make_run_state(suite, config);
        res.checkpoints.push_back(train_task(st, pooled, 0, config));
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < T; ++i) {
                res.perf.at(t, i) = eval_performance(st.spec, st.params, suite, order[i]);
            }
        }
        res.avg_step_seconds =
            st.step_count ? st.step_seconds_total / static_cast<double>(st.step_count) : 0.0;
        res.final_params = std::move(st.params);
        res.events = std::move(st.events);
        return res;
    }

    RunState st = make_run_state(suite, config);
    for (std::size_t t = 0; t < T; ++t) {
        res.checkpoints.push_back(train_task(st, suite, order[t], config));
        for (std::size_t i = 0; i < T; ++i) {
            res.perf.at(t, i) = eval_performance(st.spec, st.params, suite, order[i]);
        }
    }
    res.avg_step_seconds =
        st.step_count ? st.step_seconds_total / static_cast<double>(st.step_count) : 0.0;
    res.final_params = std::move(st.params);
    res.events = std::move(st.events);
    return res;
}

}  // namespace contilora
