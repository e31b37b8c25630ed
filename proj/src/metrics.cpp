#include "contilora/metrics.hpp"

#include <algorithm>

#include "contilora/svd.hpp"

namespace contilora {

MetricsReport compute_metrics(const Matrix& perf) {
    if (perf.rows() != perf.cols()) {
        throw DimensionError("compute_metrics: performance matrix must be square, got " +
                             perf.shape_str());
    }
    perf.check_finite("compute_metrics");
    const std::size_t T = perf.rows();
    MetricsReport rep;
    rep.imm.resize(T);
    rep.per_task_last.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        rep.imm[i] = perf.at(i, i);
        rep.per_task_last[i] = perf.at(T - 1, i);
        rep.last += perf.at(T - 1, i);
    }
    rep.last /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) {
        double row = 0.0;
        for (std::size_t i = 0; i <= t; ++i) row += perf.at(t, i);
        rep.avg += row / static_cast<double>(t + 1);
    }
    rep.avg /= static_cast<double>(T);
    if (T > 1) {
        for (std::size_t i = 0; i + 1 < T; ++i) rep.bwt += perf.at(T - 1, i) - perf.at(i, i);
        rep.bwt /= static_cast<double>(T - 1);
    }
    return rep;
}

Matrix lora_similarity_analysis(const std::vector<TaskCheckpoint>& checkpoints,
                                AdapterSide side) {
    if (checkpoints.empty()) throw UsageError("lora_similarity_analysis: no checkpoints");
    const std::size_t T = checkpoints.size();
    const std::size_t layers = checkpoints.front().adapters.size();
    for (const auto& cp : checkpoints) {
        if (cp.adapters.size() != layers) {
            throw DimensionError("lora_similarity_analysis: architecture mismatch");
        }
    }
    Matrix out(T, T);
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = i; j < T; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < layers; ++l) {
                const Matrix& mi = side == AdapterSide::a ? checkpoints[i].adapters[l].a
                                                          : checkpoints[i].adapters[l].b;
                const Matrix& mj = side == AdapterSide::a ? checkpoints[j].adapters[l].a
                                                          : checkpoints[j].adapters[l].b;
                acc += cosine_similarity_flat(mi, mj);
            }
            out.at(i, j) = out.at(j, i) = acc / static_cast<double>(layers);
        }
    }
    return out;
}

namespace {

template <typename Fn>
std::vector<double> prefix_curve(const std::vector<TaskCheckpoint>& checkpoints, Fn per_layer) {
    if (checkpoints.empty()) throw UsageError("curve: no checkpoints");
    const std::size_t layers = checkpoints.front().adapters.size();
    std::vector<double> out;
    std::vector<std::vector<LoraAdapter>> stacks(layers);
    for (const auto& cp : checkpoints) {
        double acc = 0.0;
        for (std::size_t l = 0; l < layers; ++l) {
            stacks[l].push_back(cp.adapters[l]);
            acc += per_layer(stacks[l]);
        }
        out.push_back(acc / static_cast<double>(layers));
    }
    return out;
}

}  // namespace

std::vector<double> energy_curve(const std::vector<TaskCheckpoint>& checkpoints, std::size_t r) {
    return prefix_curve(checkpoints, [r](const std::vector<LoraAdapter>& stack) {
        const SvdResult s = svd(merge_sum(stack));
        return energy_proportion(s.singular_values, r);
    });
}

std::vector<double> reconstruction_curve(const std::vector<TaskCheckpoint>& checkpoints,
                                         std::size_t r) {
    return prefix_curve(checkpoints, [r](const std::vector<LoraAdapter>& stack) {
        const std::size_t cap =
            std::min(stack.front().b.rows(), stack.front().a.cols());
        return reconstruction_similarity(stack, std::min(r, cap));
    });
}

}  // namespace contilora
