#include "subtb.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "linalg.hpp"

namespace batchgfn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Effective log-flows f_0..f_B and step terms D_k = log_pf[k] - log_pb[k].
struct Unrolled {
  std::vector<double> f;       // B+1
  std::vector<double> prefix;  // prefix[j] = sum_{k<j} D_k, size B+1
  int b = 0;
};

Unrolled unroll(const SubTbTerms& t) {
  const int b = static_cast<int>(t.log_pf.size());
  if (t.log_pb.size() != static_cast<size_t>(b) ||
      t.log_flow.size() != static_cast<size_t>(b) ||
      t.log_reward.size() != static_cast<size_t>(b + 1))
    throw InvalidArgument("subtb_fl_loss: inconsistent term sizes");
  Unrolled u;
  u.b = b;
  u.f.resize(b + 1);
  for (int k = 0; k < b; ++k) u.f[k] = t.log_flow[k] + t.log_reward[k];
  u.f[b] = t.log_reward[b];  // terminal F~ pinned to 1
  u.prefix.assign(b + 1, 0.0);
  for (int k = 0; k < b; ++k)
    u.prefix[k + 1] = u.prefix[k] + (t.log_pf[k] - t.log_pb[k]);
  return u;
}

}  // namespace

double subtb_fl_loss(const SubTbTerms& terms, double lambda) {
  const Unrolled u = unroll(terms);
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= u.b; ++i) {
    double w = 1.0;
    for (int j = i + 1; j <= u.b; ++j) {
      w *= lambda;
      const double a = u.f[i] - u.f[j] + u.prefix[j] - u.prefix[i];
      num += w * a * a;
      den += w;
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

SubTbTermGrads subtb_fl_loss_grad(const SubTbTerms& terms, double lambda) {
  const Unrolled u = unroll(terms);
  const int b = u.b;
  double den = 0.0;
  for (int i = 0; i <= b; ++i) {
    double w = 1.0;
    for (int j = i + 1; j <= b; ++j) den += (w *= lambda);
  }
  SubTbTermGrads g;
  g.d_log_pf.assign(b, 0.0);
  g.d_log_pb.assign(b, 0.0);
  g.d_log_flow.assign(b, 0.0);
  if (den <= 0.0) return g;
  std::vector<double> df(b + 1, 0.0);
  for (int i = 0; i <= b; ++i) {
    double w = 1.0;
    for (int j = i + 1; j <= b; ++j) {
      w *= lambda;
      const double a = u.f[i] - u.f[j] + u.prefix[j] - u.prefix[i];
      const double c = 2.0 * w * a / den;
      df[i] += c;
      df[j] -= c;
      // d prefix difference: every step i <= k < j enters with +1.
      for (int k = i; k < j; ++k) {
        g.d_log_pf[k] += c;
        g.d_log_pb[k] -= c;
      }
    }
  }
  for (int k = 0; k < b; ++k) g.d_log_flow[k] = df[k];
  return g;
}

SubTbTerms build_terms(const Trajectory& traj,
                       std::span<const PolicyOutput> outputs,
                       std::span<const double> state_log_rewards) {
  const int b = static_cast<int>(traj.actions.size());
  if (outputs.size() != static_cast<size_t>(b + 1) ||
      state_log_rewards.size() != static_cast<size_t>(b + 1))
    throw InvalidArgument("build_terms: size mismatch");
  SubTbTerms t;
  t.log_pf.resize(b);
  t.log_pb.resize(b);
  t.log_flow.resize(b);
  t.log_reward.assign(state_log_rewards.begin(), state_log_rewards.end());
  for (int k = 0; k < b; ++k) {
    t.log_pf[k] = log_pf(outputs[k], traj.actions[k]);
    t.log_pb[k] = log_pb(outputs[k + 1], traj.states[k + 1], traj.actions[k]);
    t.log_flow[k] = outputs[k].log_flow;
  }
  return t;
}

namespace {

std::vector<double> state_rewards_along(const Trajectory& traj,
                                        const GpContext& ctx,
                                        const RewardSpec& spec) {
  std::vector<double> r(traj.states.size());
  for (size_t k = 0; k < traj.states.size(); ++k)
    r[k] = state_log_reward(traj.states[k], ctx, spec);
  return r;
}

// Output-side gradients for one state from the term gradients.
PolicyOutputGrad output_grad_for_state(const Trajectory& traj,
                                       std::span<const PolicyOutput> outs,
                                       const SubTbTermGrads& tg, int k,
                                       double scale) {
  const int b = static_cast<int>(traj.actions.size());
  const PolicyOutput& out = outs[k];
  PolicyOutputGrad g;
  g.d_forward_logits = Eigen::VectorXd::Zero(out.forward_logits.size());
  g.d_backward_logits = Eigen::VectorXd::Zero(out.backward_logits.size());
  if (k < b && tg.d_log_pf[k] != 0.0) {
    // d log softmax: e_a - p on the unmasked support.
    const Eigen::VectorXd ls = masked_log_softmax(out.forward_logits);
    const double c = scale * tg.d_log_pf[k];
    for (Eigen::Index i = 0; i < ls.size(); ++i)
      if (ls[i] != kNegInf) g.d_forward_logits[i] = -c * std::exp(ls[i]);
    g.d_forward_logits[traj.actions[k]] += c;
  }
  if (k > 0 && tg.d_log_pb[k - 1] != 0.0) {
    const BatchState& s = traj.states[k];
    const auto it = std::lower_bound(s.indices.begin(), s.indices.end(),
                                     traj.actions[k - 1]);
    const int pos = static_cast<int>(it - s.indices.begin());
    const Eigen::VectorXd ls = masked_log_softmax(out.backward_logits);
    const double c = scale * tg.d_log_pb[k - 1];
    for (Eigen::Index j = 0; j < ls.size(); ++j)
      g.d_backward_logits[j] = -c * std::exp(ls[j]);
    g.d_backward_logits[pos] += c;
  }
  if (k < b) g.d_log_flow = scale * tg.d_log_flow[k];
  return g;
}

// Loss (and optionally gradient contributions, scaled) of one trajectory.
double trajectory_loss(const PolicyEval& eval, const Trajectory& traj,
                       const GpContext& ctx, const RewardSpec& spec,
                       double lambda, double scale, GradAccum* acc) {
  const int b = static_cast<int>(traj.actions.size());
  std::vector<PolicyOutput> outs(b + 1);
  for (int k = 0; k <= b; ++k) outs[k] = eval.encode(traj.states[k]);
  const auto rewards = state_rewards_along(traj, ctx, spec);
  const SubTbTerms terms = build_terms(traj, outs, rewards);
  const double loss = subtb_fl_loss(terms, lambda);
  if (acc) {
    const SubTbTermGrads tg = subtb_fl_loss_grad(terms, lambda);
    for (int k = 0; k <= b; ++k) {
      const PolicyOutputGrad g = output_grad_for_state(traj, outs, tg, k, scale);
      eval.backward(traj.states[k], g, *acc);
    }
  }
  return loss;
}

Trajectory rollout(const PolicyEval& eval, const BatchEnv& env, double epsilon,
                   Rng& rng, std::vector<PolicyOutput>* outs) {
  Trajectory traj;
  BatchState s = initial_state(env);
  traj.states.push_back(s);
  for (int step = 0; step < env.batch_size; ++step) {
    PolicyOutput out = eval.encode(s);
    const int action = sample_action(out, epsilon, rng);
    if (outs) outs->push_back(std::move(out));
    s = apply(s, action);
    traj.actions.push_back(action);
    traj.states.push_back(s);
  }
  return traj;
}

}  // namespace

double subtb_batch_loss(const PolicyParams& params, const GpContext& ctx,
                        const RewardSpec& spec,
                        std::span<const Trajectory> trajs, double lambda) {
  const TrainSet* tc = params.cfg.train_context ? &ctx.train() : nullptr;
  PolicyEval eval(params, ctx.pool_xs(), tc);
  double total = 0.0;
  for (const Trajectory& t : trajs)
    total += trajectory_loss(eval, t, ctx, spec, lambda, 0.0, nullptr);
  return total / static_cast<double>(trajs.size());
}

Eigen::VectorXd subtb_batch_grad(const PolicyParams& params,
                                 const GpContext& ctx, const RewardSpec& spec,
                                 std::span<const Trajectory> trajs,
                                 double lambda, double* loss_out) {
  const TrainSet* tc = params.cfg.train_context ? &ctx.train() : nullptr;
  PolicyEval eval(params, ctx.pool_xs(), tc);
  GradAccum acc(eval);
  const double scale = 1.0 / static_cast<double>(trajs.size());
  double total = 0.0;
  for (const Trajectory& t : trajs)
    total += trajectory_loss(eval, t, ctx, spec, lambda, scale, &acc);
  if (loss_out) *loss_out = total * scale;
  return acc.flatten();
}

TrainResult train_subtb(const BatchEnv& env, const GpContext& ctx,
                        const TrainerConfig& cfg, PolicyParams init,
                        AdamState opt, const CheckpointFn& checkpoint) {
  if (cfg.traj_batch_size < 1)
    throw InvalidArgument("train_subtb: traj_batch_size must be >= 1");
  if (env.pool_size != ctx.pool_size())
    throw InvalidArgument("train_subtb: env/context pool size mismatch");
  TrainResult result;
  result.params = std::move(init);
  result.opt = std::move(opt);
  result.trace.reserve(cfg.iterations);

  const TrainSet* tc =
      result.params.cfg.train_context ? &ctx.train() : nullptr;
  const int batch = cfg.traj_batch_size;
  const int threads =
      std::max(1, std::min(cfg.threads, batch));

  if (checkpoint && cfg.checkpoint_interval > 0) checkpoint(0, result.params);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    PolicyEval eval(result.params, ctx.pool_xs(), tc);
    std::vector<double> losses(batch, 0.0);
    std::vector<double> terminal_rewards(batch, 0.0);
    std::vector<GradAccum> accs;
    accs.reserve(threads);
    for (int t = 0; t < threads; ++t) accs.emplace_back(eval);

    const double scale = 1.0 / static_cast<double>(batch);
    auto work = [&](int thread_idx) {
      const int chunk = (batch + threads - 1) / threads;
      const int lo = thread_idx * chunk;
      const int hi = std::min(batch, lo + chunk);
      for (int t = lo; t < hi; ++t) {
        Rng rng(mix_seed(cfg.seed, "subtb/traj",
                         static_cast<uint64_t>(iter) * batch + t));
        const Trajectory traj = rollout(eval, env, cfg.epsilon, rng, nullptr);
        terminal_rewards[t] =
            state_log_reward(traj.states.back(), ctx, cfg.reward);
        losses[t] = trajectory_loss(eval, traj, ctx, cfg.reward, cfg.lambda,
                                    scale, &accs[thread_idx]);
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (int t = 1; t < threads; ++t) accs[0].add(accs[t]);
    const Eigen::VectorXd grad = accs[0].flatten();
    if (!grad.allFinite())
      throw NumericalError("train_subtb: non-finite gradient at iteration " +
                           std::to_string(iter));
    adam_step(result.params.theta, grad, result.opt, cfg.lr);

    TraceRecord rec;
    rec.iter = iter;
    for (int t = 0; t < batch; ++t) {
      rec.mean_loss += losses[t] * scale;
      rec.mean_sampled_log_reward += terminal_rewards[t] * scale;
    }
    result.trace.push_back(rec);
    result.policy_evals += eval.eval_count();

    if (checkpoint && cfg.checkpoint_interval > 0) {
      const int done = iter + 1;
      if (done % cfg.checkpoint_interval == 0 || done == cfg.iterations)
        checkpoint(done, result.params);
    }
  }
  return result;
}

std::vector<SampledBatch> sample_batches(const PolicyParams& params,
                                         const BatchEnv& env,
                                         const GpContext& ctx,
                                         const RewardSpec& spec, int k,
                                         Rng& rng, uint64_t* eval_count) {
  const TrainSet* tc = params.cfg.train_context ? &ctx.train() : nullptr;
  PolicyEval eval(params, ctx.pool_xs(), tc);
  std::vector<SampledBatch> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const Trajectory traj = rollout(eval, env, 0.0, rng, nullptr);
    SampledBatch sb;
    sb.state = traj.states.back();
    sb.log_reward = state_log_reward(sb.state, ctx, spec);
    out.push_back(std::move(sb));
  }
  if (eval_count) *eval_count = eval.eval_count();
  return out;
}

BatchState select_query(std::span<const SampledBatch> samples) {
  if (samples.empty()) throw InvalidArgument("select_query: empty input");
  const SampledBatch* best = &samples[0];
  for (const SampledBatch& s : samples.subspan(1)) {
    if (s.log_reward > best->log_reward ||
        (s.log_reward == best->log_reward &&
         s.state.indices < best->state.indices))
      best = &s;
  }
  return best->state;
}

}  // namespace batchgfn
