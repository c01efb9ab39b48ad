#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data_synth.hpp"
#include "gfn_env.hpp"
#include "rng.hpp"

namespace batchgfn {

// Set-invariant conditional policy: per-point feed-forward encoders, summed
// state (and optional train-pair) context, a shared trunk over each pool
// point, and three linear heads (forward logits, backward logits, log flow).
//
// The nonlinearity is squareplus, f(x) = (x + sqrt(x^2 + 1)) / 2 -- a smooth
// rectifier with an exact, transcendental-free derivative.
struct PolicyConfig {
  int hidden_dim = 256;
  int encoder_layers = 2;    // hidden layers per point encoder
  int trunk_layers = 1;      // hidden layers in the shared trunk
  bool train_context = false;

  bool operator==(const PolicyConfig&) const = default;
};

int policy_param_count(const PolicyConfig& cfg);

// All trainable parameters as one flat vector with a fixed partition:
// pool encoder, state encoder, [train encoder], trunk, forward head,
// backward head, flow head (weights row-major, bias after each weight).
struct PolicyParams {
  PolicyConfig cfg;
  Eigen::VectorXd theta;
};

// Fan-in-scaled uniform init for hidden layers; output heads start at zero
// so the untrained policy is exactly uniform and log-flow is exactly zero.
PolicyParams init_policy(const PolicyConfig& cfg, Rng& rng);

struct PolicyOutput {
  Eigen::VectorXd forward_logits;   // length N; already-selected (or all, at
                                    // terminal states) entries are -inf
  Eigen::VectorXd backward_logits;  // length |s|, aligned with s.indices
  double log_flow = 0.0;
};

// Gradient of a scalar loss with respect to one state's policy outputs.
struct PolicyOutputGrad {
  Eigen::VectorXd d_forward_logits;   // length N (zeros where masked)
  Eigen::VectorXd d_backward_logits;  // length |s|
  double d_log_flow = 0.0;
};

class PolicyEval;

// Accumulates parameter gradients across states/trajectories. Encoder
// gradients are deferred: per-state backward touches only dA/dS/dct, and
// finalize() back-propagates them through the cached encoder activations.
class GradAccum {
 public:
  GradAccum(const PolicyEval& eval);
  void reset();
  // Merge another accumulator (same eval) into this one.
  void add(const GradAccum& other);
  // Finish the deferred encoder backward and return the flat gradient,
  // aligned with PolicyParams::theta.
  Eigen::VectorXd flatten() const;

 private:
  friend class PolicyEval;
  const PolicyEval* eval_;
  Eigen::VectorXd g_;       // flat, same layout as theta (encoder part empty
                            // until flatten())
  Eigen::MatrixXd d_a_;     // N x h, d loss / d (pool-side trunk input)
  Eigen::MatrixXd d_s_;     // N x h, d loss / d (state embedding rows)
  Eigen::VectorXd d_ct_;    // h, d loss / d (train context)
};

// A parameter/pool/context snapshot. Construction runs the encoders over the
// whole pool (and train pairs) once; encode() then costs one trunk pass.
// Forward evaluation is pure and const; the eval counter is the only mutable
// state (used to audit the O(B)-samples claim).
class PolicyEval {
 public:
  PolicyEval(const PolicyParams& params, std::vector<double> pool_xs,
             const TrainSet* train_ctx);

  int pool_size() const { return static_cast<int>(pool_xs_.size()); }
  const PolicyParams& params() const { return params_; }

  // Full forward pass for one state. Counts one policy evaluation.
  PolicyOutput encode(const BatchState& s) const;

  // Forward + reverse pass for one state, accumulating parameter gradients.
  // Returns the same outputs as encode() (not counted as an inference eval).
  PolicyOutput backward(const BatchState& s, const PolicyOutputGrad& grad,
                        GradAccum& acc) const;

  uint64_t eval_count() const { return evals_.load(); }
  void reset_eval_count() const { evals_.store(0); }

 private:
  friend class GradAccum;
  struct MlpCache {  // per-layer pre/post activations for deferred backward
    std::vector<Eigen::MatrixXd> z, h;
  };

  void trunk_forward(const BatchState& s, Eigen::VectorXd& c_s,
                     std::vector<Eigen::MatrixXd>& z,
                     std::vector<Eigen::MatrixXd>& h) const;
  Eigen::VectorXd state_context(const BatchState& s) const;

  PolicyParams params_;
  std::vector<double> pool_xs_;
  bool has_train_ctx_ = false;

  // Unpacked weights (views would do, but copies keep the hot loops simple).
  std::vector<Eigen::MatrixXd> enc_pool_w_, enc_state_w_, enc_train_w_;
  std::vector<Eigen::VectorXd> enc_pool_b_, enc_state_b_, enc_train_b_;
  Eigen::MatrixXd trunk_w1_pool_, trunk_w1_state_, trunk_w1_train_;
  Eigen::VectorXd trunk_b1_;
  std::vector<Eigen::MatrixXd> trunk_w_rest_;
  std::vector<Eigen::VectorXd> trunk_b_rest_;
  Eigen::VectorXd head_f_w_, head_b_w_, head_flow_w_;
  double head_f_b_ = 0, head_b_b_ = 0, head_flow_b_ = 0;

  MlpCache pool_cache_, state_cache_, train_cache_;
  Eigen::MatrixXd train_input_; // M x 2, cached for the deferred backward
  Eigen::MatrixXd pool_emb_;    // N x h
  Eigen::MatrixXd state_emb_;   // N x h (state encoder over pool points)
  Eigen::MatrixXd a_;           // N x h, pool block of the first trunk layer
  Eigen::VectorXd c_t_;         // train context (zero when disabled/empty)
  Eigen::VectorXd u_base_;      // trunk_b1 + W1_train * c_t

  mutable std::atomic<uint64_t> evals_{0};
};

// Masked log-softmax over the forward logits; -inf entries stay -inf.
Eigen::VectorXd masked_log_softmax(const Eigen::VectorXd& logits);

// log P_F(s + a | s); the action must be unmasked.
double log_pf(const PolicyOutput& out, int action);
// log P_B(s | s'), where removed_index identifies the dropped element of s'.
double log_pb(const PolicyOutput& out, const BatchState& s, int removed_index);

// epsilon-mixed action draw: uniform over allowed actions with probability
// epsilon, softmax on the masked logits otherwise. Throws at terminal states.
int sample_action(const PolicyOutput& out, double epsilon, Rng& rng);

// Standard Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
struct AdamState {
  Eigen::VectorXd m, v;
  int64_t t = 0;
};
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               AdamState& state, double lr);

// Versioned binary checkpoint: architecture descriptor + parameters +
// optimizer moments (header documented in the README).
void save_policy(const std::string& path, const PolicyParams& params,
                 const AdamState* opt);
PolicyParams load_policy(const std::string& path, AdamState* opt);

}  // namespace batchgfn
