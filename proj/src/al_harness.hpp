#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data_synth.hpp"
#include "gp.hpp"
#include "oracle.hpp"
#include "subtb.hpp"

namespace batchgfn {

enum class TransferMode { kReinit, kContinue, kLookahead };

TransferMode transfer_mode_from_string(const std::string& name);
std::string to_string(TransferMode mode);

struct ALConfig {
  int seed_size = 10;       // B0
  int query_size = 10;      // B
  int al_steps = 5;
  std::string strategy = "gfn";  // random|bald|stochastic-bald|batchbald|gfn
  int inference_samples = 20;    // k
  int lookahead_samples = 0;     // L
  TransferMode transfer_mode = TransferMode::kReinit;
  uint64_t seed = 0;

  GpFitOptions gp;
  bool gp_refit_lookahead = true;  // refit hyperparameters on hallucinated data
  RewardSpec reward;
  bool reward_posterior_cov = true;
  PolicyConfig policy;
  TrainerConfig trainer;          // full budget (reinit / first step)
  int warm_iterations = -1;       // continue/lookahead per-step budget; -1 = full
  double stochastic_temp = 1.0;
  int lookahead_iterations = 200; // trainer budget per lookahead inner loop
  bool record_loss_traces = false;
};

struct StepRecord {
  int step = 0;
  int train_size = 0;
  double test_mse = 0.0;
  double test_nlpd = 0.0;
  std::vector<int> selected_batch;  // original pool ids; empty at step 0
  double batch_log_reward = 0.0;
  double wall_time_s = 0.0;
  uint64_t policy_eval_count = 0;        // inference evals this step
  uint64_t policy_train_eval_count = 0;  // training evals this step
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<std::vector<TraceRecord>> gfn_traces;  // per step when enabled
};

// MSE of the posterior mean over the test set ("test loss").
double evaluate(const TrainSet& train, const KernelParams& params,
                const TrainSet& test);

// Lookahead priming (the inner loop of the AL algorithm): L times, sample a
// batch from the policy under training exploration, hallucinate its labels
// from the current GP predictive, refit the GP on the hallucinated training
// set, and continue policy training against that hypothetical reward. The
// real train/pool are never touched; each inner iteration restarts from them.
PolicyParams lookahead_update(PolicyParams policy, AdamState& opt, int big_l,
                              const TrainSet& train,
                              const std::vector<double>& pool_xs,
                              const KernelParams& fitted, const ALConfig& cfg,
                              uint64_t stream_seed);

// The full active-learning loop: draw a seed set, then per step fit the GP,
// build the strategy's batch (training the sampler for "gfn"), reveal labels,
// move the batch from pool to train, and evaluate test loss.
// `data.pool` must be full (no points drawn) and `data.train` empty.
RunLog run_al(const ALConfig& cfg, Dataset data);

struct TransferConfig {
  uint64_t seed = 0;
  int replicas = 3;
  int pool_size = 50;
  int seed_size = 17;
  int query_size = 3;
  int lookahead_samples = 10;
  double noise_std = 0.1;
  GpFitOptions gp;
  bool gp_refit_lookahead = true;
  RewardSpec reward;
  bool reward_posterior_cov = true;
  PolicyConfig policy;
  TrainerConfig trainer;          // base (pre-acquisition) training budget
  int transfer_iterations = 2000; // post-acquisition adaptation budget
  int checkpoint_interval = 50;
  int lookahead_iterations = 200;
  uint64_t oracle_cap = 1000000;
};

struct TransferCurve {
  std::string mode;
  uint64_t replica = 0;
  std::vector<std::pair<int, double>> jsd_at;  // (iterations done, JSD)
};

// After one real acquisition, record jsd(new true distribution, exact policy
// marginal) at every trainer checkpoint for each transfer mode.
std::vector<TransferCurve> transfer_experiment(const TransferConfig& cfg);

}  // namespace batchgfn
