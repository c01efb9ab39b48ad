#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "gfn_env.hpp"
#include "policy.hpp"
#include "reward.hpp"

namespace batchgfn {

// Per-trajectory log quantities entering the Subtrajectory Balance loss with
// forward-looking flows. For a trajectory s_0..s_B:
//   log_pf[k]     = log P_F(s_{k+1} | s_k)
//   log_pb[k]     = log P_B(s_k | s_{k+1})
//   log_flow[k]   = log F~(s_k), k < B (the terminal flow is pinned: F~ = 1)
//   log_reward[k] = l(s_k), k <= B
// The effective log-flow is log F(s_k) = log F~(s_k) + l(s_k), with
// log F(s_B) = l(s_B), so the terminal flow equals the reward exactly.
struct SubTbTerms {
  std::vector<double> log_pf;
  std::vector<double> log_pb;
  std::vector<double> log_flow;
  std::vector<double> log_reward;
};

// Sum over all 0 <= i < j <= B of lambda^(j-i) A_ij^2, normalized by the sum
// of the weights, where A_ij is the subtrajectory balance residual.
double subtb_fl_loss(const SubTbTerms& terms, double lambda);

struct SubTbTermGrads {
  std::vector<double> d_log_pf;
  std::vector<double> d_log_pb;
  std::vector<double> d_log_flow;
};
SubTbTermGrads subtb_fl_loss_grad(const SubTbTerms& terms, double lambda);

// Assemble the terms from policy outputs along a trajectory (outputs at
// s_0..s_B) and the per-state log rewards.
SubTbTerms build_terms(const Trajectory& traj,
                       std::span<const PolicyOutput> outputs,
                       std::span<const double> state_log_rewards);

// Loss of a fixed trajectory batch at the given parameters (used by the
// finite-difference oracle and the trainer's internals).
double subtb_batch_loss(const PolicyParams& params, const GpContext& ctx,
                        const RewardSpec& spec,
                        std::span<const Trajectory> trajs, double lambda);
// Exact reverse-accumulated gradient of subtb_batch_loss wrt params.theta.
Eigen::VectorXd subtb_batch_grad(const PolicyParams& params,
                                 const GpContext& ctx, const RewardSpec& spec,
                                 std::span<const Trajectory> trajs,
                                 double lambda, double* loss_out = nullptr);

struct TrainerConfig {
  double lambda = 0.9;
  double epsilon = 0.1;
  double lr = 0.001;
  int traj_batch_size = 8;
  int iterations = 5000;
  RewardSpec reward;
  int threads = 1;              // trajectory-level parallelism per iteration
  uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0 = only implicit start/end checkpoints off
};

struct TraceRecord {
  int iter = 0;
  double mean_loss = 0.0;
  double mean_sampled_log_reward = 0.0;
};

struct TrainResult {
  PolicyParams params;
  AdamState opt;
  std::vector<TraceRecord> trace;
  uint64_t policy_evals = 0;  // evaluations spent during training
};

// Called with (iterations completed, current params); when
// checkpoint_interval > 0 it fires at 0, every interval, and at the end.
using CheckpointFn = std::function<void(int, const PolicyParams&)>;

// SubTB training: each iteration samples traj_batch_size trajectories under
// epsilon-exploration, averages the per-trajectory normalized losses (the
// loss always uses the unmixed P_F), and applies one Adam step. Trajectory
// RNG substreams are keyed by (seed, iteration, trajectory), so results do
// not depend on the thread count given a fixed chunking.
TrainResult train_subtb(const BatchEnv& env, const GpContext& ctx,
                        const TrainerConfig& cfg, PolicyParams init,
                        AdamState opt = {}, const CheckpointFn& checkpoint = {});

struct SampledBatch {
  BatchState state;
  double log_reward = 0.0;
};

// k independent trajectories at epsilon = 0, each scored by state_log_reward.
// Costs exactly k * B policy evaluations (reported via eval_count).
std::vector<SampledBatch> sample_batches(const PolicyParams& params,
                                         const BatchEnv& env,
                                         const GpContext& ctx,
                                         const RewardSpec& spec, int k,
                                         Rng& rng,
                                         uint64_t* eval_count = nullptr);

// Argmax by log reward; ties broken by lexicographic order of the sorted
// index lists. Throws on empty input.
BatchState select_query(std::span<const SampledBatch> samples);

}  // namespace batchgfn
