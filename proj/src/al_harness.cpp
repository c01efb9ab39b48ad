#include "al_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "baselines.hpp"
#include "linalg.hpp"

namespace batchgfn {

TransferMode transfer_mode_from_string(const std::string& name) {
  if (name == "reinit") return TransferMode::kReinit;
  if (name == "continue") return TransferMode::kContinue;
  if (name == "lookahead") return TransferMode::kLookahead;
  throw InvalidArgument("unknown transfer mode '" + name + "'");
}

std::string to_string(TransferMode mode) {
  switch (mode) {
    case TransferMode::kReinit: return "reinit";
    case TransferMode::kContinue: return "continue";
    case TransferMode::kLookahead: return "lookahead";
  }
  return "?";
}

double evaluate(const TrainSet& train, const KernelParams& params,
                const TrainSet& test) {
  return mse_of_posterior_mean(train, params, test);
}

PolicyParams lookahead_update(PolicyParams policy, AdamState& opt, int big_l,
                              const TrainSet& train,
                              const std::vector<double>& pool_xs,
                              const KernelParams& fitted, const ALConfig& cfg,
                              uint64_t stream_seed) {
  if (big_l <= 0) return policy;
  const int b = cfg.query_size;
  const int n = static_cast<int>(pool_xs.size());
  for (int i = 0; i < big_l; ++i) {
    // Sample a hypothetical future query batch under training exploration.
    GpContext ctx(train, fitted, pool_xs, cfg.reward_posterior_cov);
    PolicyEval eval(policy, pool_xs,
                    policy.cfg.train_context ? &train : nullptr);
    Rng sample_rng(mix_seed(stream_seed, "lookahead/sample", i));
    BatchState s{{}, b};
    for (int step = 0; step < b; ++step)
      s = apply(s, sample_action(eval.encode(s), cfg.trainer.epsilon, sample_rng));

    // Hallucinate labels from the current predictive (noise included).
    std::vector<double> batch_xs(b);
    for (int j = 0; j < b; ++j) batch_xs[j] = pool_xs[s.indices[j]];
    const GPPosterior post = posterior(train, fitted, batch_xs);
    Rng label_rng(mix_seed(stream_seed, "lookahead/labels", i));
    const Eigen::VectorXd ys = sample_labels(post, label_rng);

    TrainSet fantasy = train;
    for (int j = 0; j < b; ++j) fantasy.points.push_back({batch_xs[j], ys[j]});
    std::vector<double> fantasy_pool;
    fantasy_pool.reserve(n - b);
    for (int j = 0; j < n; ++j)
      if (!s.contains(j)) fantasy_pool.push_back(pool_xs[j]);

    KernelParams fantasy_params = fitted;
    if (cfg.gp_refit_lookahead) {
      GpFitOptions fit = cfg.gp;
      fantasy_params = fit_hyperparams(fantasy, fit).params;
    }
    GpContext fantasy_ctx(fantasy, fantasy_params, fantasy_pool,
                          cfg.reward_posterior_cov);
    TrainerConfig tcfg = cfg.trainer;
    tcfg.iterations = cfg.lookahead_iterations;
    tcfg.seed = mix_seed(stream_seed, "lookahead/train", i);
    BatchEnv env{static_cast<int>(fantasy_pool.size()), b};
    TrainResult res =
        train_subtb(env, fantasy_ctx, tcfg, std::move(policy), std::move(opt));
    policy = std::move(res.params);
    opt = std::move(res.opt);
  }
  return policy;
}

RunLog run_al(const ALConfig& cfg, Dataset data) {
  if (data.train.size() != 0)
    throw InvalidArgument("run_al: expected an undrawn dataset");
  const int n = data.pool.size();
  if (cfg.seed_size + cfg.al_steps * cfg.query_size > n)
    throw InvalidArgument("run_al: label budget exceeds the pool size");
  if (cfg.lookahead_samples > 0 && cfg.strategy != "gfn")
    throw InvalidArgument("run_al: lookahead requires strategy \"gfn\"");

  Rng root(cfg.seed);
  RunLog log;

  Rng seed_rng = root.split("seedset");
  auto [train, pool] = draw_seed_set(data.pool, cfg.seed_size, seed_rng);

  GpFitOptions gp_opts = cfg.gp;
  KernelParams fitted = fit_hyperparams(train, gp_opts).params;
  {
    StepRecord rec;
    rec.step = 0;
    rec.train_size = train.size();
    rec.test_mse = evaluate(train, fitted, data.test);
    rec.test_nlpd = mean_nlpd(train, fitted, data.test);
    log.steps.push_back(std::move(rec));
  }

  PolicyParams policy;
  AdamState opt;
  bool policy_ready = false;

  for (int step = 1; step <= cfg.al_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.step = step;

    GpContext ctx(train, fitted, pool.active_xs(), cfg.reward_posterior_cov);
    BatchState batch;
    if (cfg.strategy == "random") {
      Rng rng = root.split("strategy/random", step);
      batch = random_batch(pool.size(), cfg.query_size, rng);
    } else if (cfg.strategy == "bald") {
      const auto scores = bald_scores(ctx);
      batch = bald_topB(scores, cfg.query_size);
    } else if (cfg.strategy == "stochastic-bald") {
      Rng rng = root.split("strategy/stochastic", step);
      const auto scores = bald_scores(ctx);
      batch = stochastic_bald(scores, cfg.query_size, cfg.stochastic_temp, rng);
    } else if (cfg.strategy == "batchbald") {
      batch = batchbald_greedy(ctx, cfg.query_size);
    } else if (cfg.strategy == "gfn") {
      const bool reinit =
          cfg.transfer_mode == TransferMode::kReinit || !policy_ready;
      if (reinit) {
        Rng init_rng = root.split("gfn/init", step);
        policy = init_policy(cfg.policy, init_rng);
        opt = AdamState{};
      }
      TrainerConfig tcfg = cfg.trainer;
      if (!reinit && cfg.warm_iterations >= 0)
        tcfg.iterations = cfg.warm_iterations;
      tcfg.seed = mix_seed(cfg.seed, "gfn/train", step);
      BatchEnv env{pool.size(), cfg.query_size};
      TrainResult res =
          train_subtb(env, ctx, tcfg, std::move(policy), std::move(opt));
      policy = std::move(res.params);
      opt = std::move(res.opt);
      policy_ready = true;
      rec.policy_train_eval_count = res.policy_evals;
      if (cfg.record_loss_traces) log.gfn_traces.push_back(res.trace);

      Rng inf_rng = root.split("gfn/inference", step);
      uint64_t inf_evals = 0;
      const auto samples =
          sample_batches(policy, env, ctx, cfg.reward, cfg.inference_samples,
                         inf_rng, &inf_evals);
      rec.policy_eval_count = inf_evals;
      batch = select_query(samples);

      if (cfg.transfer_mode == TransferMode::kLookahead &&
          cfg.lookahead_samples > 0) {
        policy = lookahead_update(std::move(policy), opt, cfg.lookahead_samples,
                                  train, pool.active_xs(), fitted, cfg,
                                  mix_seed(cfg.seed, "gfn/lookahead", step));
      }
    } else {
      throw InvalidArgument("run_al: unknown strategy '" + cfg.strategy + "'");
    }

    rec.batch_log_reward = state_log_reward(batch, ctx, cfg.reward);
    for (int pos : batch.indices)
      rec.selected_batch.push_back(pool.original_index(pos));
    const auto revealed = pool.reveal_and_remove(batch.indices);
    train.points.insert(train.points.end(), revealed.begin(), revealed.end());

    fitted = fit_hyperparams(train, gp_opts).params;
    rec.train_size = train.size();
    rec.test_mse = evaluate(train, fitted, data.test);
    rec.test_nlpd = mean_nlpd(train, fitted, data.test);
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    log.steps.push_back(std::move(rec));
  }
  return log;
}

std::vector<TransferCurve> transfer_experiment(const TransferConfig& cfg) {
  std::vector<TransferCurve> curves;
  for (int r = 0; r < cfg.replicas; ++r) {
    const uint64_t rseed = mix_seed(cfg.seed, "transfer/replica", r);
    PoolSet pool0 = sample_pool(cfg.pool_size, cfg.noise_std,
                                mix_seed(rseed, "data"));
    Rng seed_rng(mix_seed(rseed, "seedset"));
    auto [train, pool] = draw_seed_set(pool0, cfg.seed_size, seed_rng);
    GpFitOptions gp_opts = cfg.gp;
    KernelParams fitted = fit_hyperparams(train, gp_opts).params;
    GpContext ctx(train, fitted, pool.active_xs(), cfg.reward_posterior_cov);
    BatchEnv env{pool.size(), cfg.query_size};

    // Base policy, trained to convergence on the pre-acquisition reward.
    Rng init_rng(mix_seed(rseed, "gfn/init"));
    PolicyParams base = init_policy(cfg.policy, init_rng);
    AdamState base_opt;
    {
      TrainerConfig tcfg = cfg.trainer;
      tcfg.seed = mix_seed(rseed, "gfn/train");
      TrainResult res =
          train_subtb(env, ctx, tcfg, std::move(base), std::move(base_opt));
      base = std::move(res.params);
      base_opt = std::move(res.opt);
    }

    // Lookahead priming happens before any label is revealed.
    ALConfig alcfg;
    alcfg.query_size = cfg.query_size;
    alcfg.reward = cfg.reward;
    alcfg.reward_posterior_cov = cfg.reward_posterior_cov;
    alcfg.gp = cfg.gp;
    alcfg.gp_refit_lookahead = cfg.gp_refit_lookahead;
    alcfg.trainer = cfg.trainer;
    alcfg.lookahead_iterations = cfg.lookahead_iterations;
    PolicyParams primed = base;
    AdamState primed_opt = base_opt;
    primed = lookahead_update(std::move(primed), primed_opt,
                              cfg.lookahead_samples, train, pool.active_xs(),
                              fitted, alcfg, mix_seed(rseed, "gfn/lookahead"));

    // One real acquisition (best of the inference samples).
    Rng inf_rng(mix_seed(rseed, "gfn/inference"));
    const auto samples = sample_batches(base, env, ctx, cfg.reward, 20, inf_rng);
    const BatchState chosen = select_query(samples);
    const auto revealed = pool.reveal_and_remove(chosen.indices);
    train.points.insert(train.points.end(), revealed.begin(), revealed.end());
    fitted = fit_hyperparams(train, gp_opts).params;

    GpContext new_ctx(train, fitted, pool.active_xs(), cfg.reward_posterior_cov);
    BatchEnv new_env{pool.size(), cfg.query_size};
    const RewardDistribution truth =
        enumerate_rewards(new_ctx, cfg.query_size, cfg.reward, cfg.oracle_cap);

    struct ModeStart {
      std::string name;
      PolicyParams params;
      AdamState opt;
    };
    Rng reinit_rng(mix_seed(rseed, "gfn/reinit"));
    std::vector<ModeStart> modes;
    modes.push_back({"reinit", init_policy(cfg.policy, reinit_rng), {}});
    modes.push_back({"continue", base, base_opt});
    modes.push_back({"lookahead", primed, primed_opt});

    for (auto& mode : modes) {
      TransferCurve curve;
      curve.mode = mode.name;
      curve.replica = static_cast<uint64_t>(r);
      TrainerConfig tcfg = cfg.trainer;
      tcfg.iterations = cfg.transfer_iterations;
      tcfg.checkpoint_interval = cfg.checkpoint_interval;
      tcfg.seed = mix_seed(rseed, "gfn/adapt/" + mode.name);
      auto checkpoint = [&](int done, const PolicyParams& params) {
        const TrainSet* tc = params.cfg.train_context ? &new_ctx.train() : nullptr;
        PolicyEval eval(params, new_ctx.pool_xs(), tc);
        const Eigen::VectorXd marginal =
            exact_policy_marginal(eval, new_env, cfg.oracle_cap);
        curve.jsd_at.emplace_back(done, jsd(truth.p, marginal));
      };
      train_subtb(new_env, new_ctx, tcfg, std::move(mode.params),
                  std::move(mode.opt), checkpoint);
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

}  // namespace batchgfn
