#include "contilora/diffusion.hpp"

#include <cmath>

namespace contilora {

void NoiseSchedule::validate() const {
    if (steps == 0 || betas.size() != steps || alpha_bars.size() != steps) {
        throw UsageError("NoiseSchedule: inconsistent sizes");
    }
    double expected = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        if (betas[t] <= 0.0 || betas[t] >= 1.0) throw UsageError("NoiseSchedule: beta out of (0,1)");
        expected *= 1.0 - betas[t];
        if (std::abs(alpha_bars[t] - expected) > 1e-12 || alpha_bars[t] <= 0.0 ||
            alpha_bars[t] >= 1.0 || (t > 0 && alpha_bars[t] >= alpha_bars[t - 1])) {
            throw UsageError("NoiseSchedule: alpha_bars inconsistent with betas");
        }
    }
}

NoiseSchedule linear_schedule(std::size_t steps, double beta_start, double beta_end) {
    NoiseSchedule s;
    s.steps = steps;
    s.betas.resize(steps);
    s.alpha_bars.resize(steps);
    double prod = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
        s.betas[t] = beta_start + (beta_end - beta_start) * frac;
        prod *= 1.0 - s.betas[t];
        s.alpha_bars[t] = prod;
    }
    s.validate();
    return s;
}

DenoisingBatch make_denoising_batch(const Matrix& clean_batch, SeededRng& rng,
                                    const NoiseSchedule& schedule) {
    schedule.validate();
    if (clean_batch.rows() == 0) throw UsageError("make_denoising_batch: empty batch");
    const std::size_t n = clean_batch.rows();
    const std::size_t d = clean_batch.cols();
    const double T = static_cast<double>(schedule.steps);

    DenoisingBatch out{Matrix(n, d + 3), Matrix(n, d)};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = 1 + rng.uniform_int(schedule.steps);
        const double abar = schedule.alpha_bars[t - 1];
        const double sig = std::sqrt(1.0 - abar);
        const double amp = std::sqrt(abar);
        for (std::size_t j = 0; j < d; ++j) {
            const double eps = rng.normal();
            out.target.at(i, j) = eps;
            out.input.at(i, j) = amp * clean_batch.at(i, j) + sig * eps;
        }
        const double tf = static_cast<double>(t) / T;
        out.input.at(i, d) = tf;
        out.input.at(i, d + 1) = std::sin(2.0 * M_PI * tf);
        out.input.at(i, d + 2) = std::cos(2.0 * M_PI * tf);
    }
    return out;
}

std::pair<double, GradientBundle> diffusion_loss(const NetworkSpec& spec, const Params& params,
                                                 const Matrix& clean_batch, SeededRng& rng,
                                                 const NoiseSchedule& schedule, AdapterMode mode,
                                                 HistorySource source) {
    const DenoisingBatch batch = make_denoising_batch(clean_batch, rng, schedule);
    return backward_mse(spec, params, batch.input, batch.target, mode, source);
}

}  // namespace contilora
