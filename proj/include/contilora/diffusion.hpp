#pragma once

#include "contilora/network.hpp"
#include "contilora/rng.hpp"

namespace contilora {

// DDPM-style variance schedule; alpha_bars[t-1] = prod_{i<=t} (1 - beta_i).
struct NoiseSchedule {
    std::size_t steps = 0;
    std::vector<double> betas;
    std::vector<double> alpha_bars;

    void validate() const;
};

// Linear betas from 1e-4 to 0.05 over T steps.
NoiseSchedule linear_schedule(std::size_t steps = 50, double beta_start = 1e-4,
                              double beta_end = 0.05);

// Epsilon-prediction training pair for one clean batch: per sample draw
// t ~ U{1..T} and eps ~ N(0, I), noise the sample, and append the timestep
// features (t/T, sin(2*pi*t/T), cos(2*pi*t/T)). Target is the drawn eps.
struct DenoisingBatch {
    Matrix input;   // n x (d + 3)
    Matrix target;  // n x d
};
DenoisingBatch make_denoising_batch(const Matrix& clean_batch, SeededRng& rng,
                                    const NoiseSchedule& schedule);

// Same draw, then MSE backward through the network. Identical rng state gives
// identical (loss, grads).
std::pair<double, GradientBundle> diffusion_loss(const NetworkSpec& spec, const Params& params,
                                                 const Matrix& clean_batch, SeededRng& rng,
                                                 const NoiseSchedule& schedule, AdapterMode mode,
                                                 HistorySource source = HistorySource::frozen_sum);

}  // namespace contilora
