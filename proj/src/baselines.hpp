#pragma once

#include <span>

#include "gfn_env.hpp"
#include "reward.hpp"
#include "rng.hpp"

namespace batchgfn {

// Uniform batch without replacement. B <= N.
BatchState random_batch(int pool_size, int b, Rng& rng);

// Indices of the B largest scores; ties go to the smaller index.
BatchState bald_topB(std::span<const double> scores, int b);

// Softmax-without-replacement over score/temp: each of the B draws picks
// from the remaining indices with probability proportional to
// exp(score/temp). One member of the stochastic-acquisition family; the
// paper does not pin the variant.
BatchState stochastic_bald(std::span<const double> scores, int b, double temp,
                           Rng& rng);

enum class GreedyMode {
  kRankOne,  // incremental Cholesky of I + cov/noise, O(B N (B^2 + B M))
  kNaive,    // recompute the full log-det per candidate (cross-check path)
};

// Greedy JMI maximization (BatchBALD with the exact GP joint MI): repeatedly
// add the candidate with the largest log-det gain.
BatchState batchbald_greedy(const GpContext& ctx, int b,
                            GreedyMode mode = GreedyMode::kRankOne);

}  // namespace batchgfn
