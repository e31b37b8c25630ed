#pragma once

#include <span>

#include "contilora/lora.hpp"
#include "contilora/rng.hpp"

namespace contilora {

// Exact sum of the adapters' b*a products (one layer's accumulated update).
Matrix merge_sum(std::span<const LoraAdapter> adapters);

// Rank-r truncated-SVD surrogate of the merged update. b_his * a_his is the
// best rank-r Frobenius approximation of merge_sum(adapters).
CompressedHistory compress_svd(std::span<const LoraAdapter> adapters, std::size_t r);

// Ablation baseline: a uniformly drawn single historical adapter, re-drawn by
// the trainer at every step.
const LoraAdapter& strategy_random(std::span<const LoraAdapter> adapters, SeededRng& rng);

// Ablation baseline: elementwise sums b = sum B_i, a = sum A_i. The product
// (sum B_i)(sum A_i) carries cross terms and generally differs from
// sum B_i A_i.
CompressedHistory strategy_summation(std::span<const LoraAdapter> adapters);

// Cosine similarity between the merged update and its rank-r reconstruction.
double reconstruction_similarity(std::span<const LoraAdapter> adapters, std::size_t r);

}  // namespace contilora
