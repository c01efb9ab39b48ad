#include "experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "al_harness.hpp"
#include "baselines.hpp"
#include "linalg.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;

namespace batchgfn {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RunDir {
  fs::path dir;
  std::ofstream log;

  void note(const std::string& msg) {
    log << msg << "\n";
    std::cout << msg << "\n";
  }
  fs::path file(const std::string& name) const { return dir / name; }
};

RunDir open_run_dir(const Config& cfg, const std::string& out_dir) {
  fs::path dir(out_dir);
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw ConfigError("run directory '" + out_dir +
                      "' already exists and is not empty");
  fs::create_directories(dir);
  {
    std::ofstream res(dir / "config.resolved");
    res << cfg.resolved_text();
  }
  {
    const uint64_t root = cfg.get_u64("seed");
    nlohmann::ordered_json manifest;
    manifest["root_seed"] = root;
    nlohmann::ordered_json streams;
    for (const char* name :
         {"data/pool", "data/test", "seedset", "gfn/init", "gfn/train",
          "gfn/inference", "gfn/lookahead", "strategy", "sweep", "al",
          "transfer"}) {
      streams[name] = mix_seed(root, name);
    }
    manifest["streams"] = streams;
    std::ofstream mf(dir / "seed-manifest.json");
    mf << manifest.dump(2) << "\n";
  }
  RunDir rd;
  rd.dir = dir;
  rd.log.open(dir / "run.log");
  return rd;
}

GpFitOptions gp_options(const Config& cfg) {
  GpFitOptions o;
  o.epochs = cfg.get_int("gp.fit_epochs");
  o.lr = cfg.get_double("gp.fit_lr");
  o.init.lengthscale = cfg.get_double("gp.init_lengthscale");
  o.init.outputscale = cfg.get_double("gp.init_outputscale");
  o.init.noise_var = cfg.get_double("gp.init_noise_var");
  o.init.mean_const = cfg.get_double("gp.init_mean");
  o.init.nu = cfg.get_double("gp.nu");
  return o;
}

PolicyConfig policy_config(const Config& cfg) {
  PolicyConfig p;
  p.hidden_dim = cfg.get_int("gfn.hidden_dim");
  p.encoder_layers = cfg.get_int("gfn.encoder_layers");
  p.trunk_layers = cfg.get_int("gfn.trunk_layers");
  p.train_context = cfg.get_bool("gfn.train_context");
  return p;
}

TrainerConfig trainer_config(const Config& cfg) {
  TrainerConfig t;
  t.lambda = cfg.get_double("gfn.lambda");
  t.epsilon = cfg.get_double("gfn.epsilon");
  t.lr = cfg.get_double("gfn.lr");
  t.traj_batch_size = cfg.get_int("gfn.traj_batch_size");
  t.iterations = cfg.get_int("gfn.iterations");
  t.reward.temperature = cfg.get_double("reward.temperature");
  t.threads = cfg.get_int("gfn.threads");
  t.checkpoint_interval = cfg.get_int("gfn.checkpoint_interval");
  return t;
}

ALConfig al_config(const Config& cfg, uint64_t seed) {
  ALConfig a;
  a.seed_size = cfg.get_int("al.seed_size");
  a.query_size = cfg.get_int("al.query_size");
  a.al_steps = cfg.get_int("al.steps");
  a.strategy = cfg.get_string("al.strategy");
  a.inference_samples = cfg.get_int("gfn.inference_samples");
  a.lookahead_samples = cfg.get_int("al.lookahead_samples");
  a.transfer_mode = transfer_mode_from_string(cfg.get_string("al.transfer_mode"));
  a.seed = seed;
  a.gp = gp_options(cfg);
  a.gp_refit_lookahead = cfg.get_bool("gp.refit_lookahead");
  a.reward.temperature = cfg.get_double("reward.temperature");
  a.reward_posterior_cov = cfg.get_bool("reward.posterior_cov");
  a.policy = policy_config(cfg);
  a.trainer = trainer_config(cfg);
  a.warm_iterations = cfg.get_int("al.warm_iterations");
  a.stochastic_temp = cfg.get_double("strategy.stochastic_temp");
  a.lookahead_iterations = cfg.get_int("al.lookahead_iterations");
  return a;
}

Dataset make_dataset(const Config& cfg, uint64_t data_seed) {
  const std::string load = cfg.get_string("data.load");
  if (!load.empty()) return load_snapshot(load);
  Dataset d;
  const double noise = cfg.get_double("data.noise_std");
  d.pool = sample_pool(cfg.get_int("data.pool_size"), noise,
                       mix_seed(data_seed, "data/pool"));
  d.test = sample_test_set(cfg.get_int("data.test_size"), noise,
                           mix_seed(data_seed, "data/test"));
  return d;
}

void write_loss_trace(const fs::path& path,
                      const std::vector<TraceRecord>& trace) {
  std::ofstream out(path);
  for (const TraceRecord& r : trace) {
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["mean_loss"] = r.mean_loss;
    j["mean_sampled_log_reward"] = r.mean_sampled_log_reward;
    out << j.dump() << "\n";
  }
}

double batch_jmi(const GpContext& ctx, const BatchState& s) {
  return joint_mi(ctx.posterior_cov(s.indices), ctx.noise_var());
}

// --- subcommands -----------------------------------------------------------

void cmd_synth_data(const Config& cfg, RunDir& rd) {
  Dataset d = make_dataset(cfg, cfg.get_u64("seed"));
  save_snapshot(rd.file("dataset.jsonl").string(), d);
  rd.note("synth-data: pool " + std::to_string(d.pool.size()) + ", test " +
          std::to_string(d.test.size()));
}

struct FittedSetup {
  Dataset data;
  KernelParams params;
  GpFitResult fit;
};

FittedSetup prepare_fitted(const Config& cfg, uint64_t seed) {
  FittedSetup s;
  s.data = make_dataset(cfg, seed);
  const int b0 = cfg.get_int("al.seed_size");
  Rng seed_rng(mix_seed(seed, "seedset"));
  auto [train, pool] = draw_seed_set(s.data.pool, b0, seed_rng);
  s.data.pool = std::move(pool);
  s.data.train = std::move(train);
  s.fit = fit_hyperparams(s.data.train, gp_options(cfg));
  s.params = s.fit.params;
  return s;
}

void cmd_fit_gp(const Config& cfg, RunDir& rd) {
  FittedSetup s = prepare_fitted(cfg, cfg.get_u64("seed"));
  save_snapshot(rd.file("dataset.jsonl").string(), s.data);
  save_gp_checkpoint(rd.file("gp-checkpoint.json").string(), s.params,
                     "dataset.jsonl", s.data.train.size());
  std::ofstream trace(rd.file("lml-trace.jsonl"));
  for (size_t i = 0; i < s.fit.lml_trace.size(); ++i) {
    nlohmann::ordered_json j;
    j["epoch"] = i;
    j["lml"] = s.fit.lml_trace[i];
    trace << j.dump() << "\n";
  }
  rd.note("fit-gp: train size " + std::to_string(s.data.train.size()) +
          ", best LML " + fmt(s.fit.best_lml) + ", lengthscale " +
          fmt(s.params.lengthscale) + ", noise_var " + fmt(s.params.noise_var));
}

struct TrainedSetup {
  FittedSetup fitted;
  PolicyParams policy;
  AdamState opt;
  std::vector<TraceRecord> trace;
  BatchEnv env;
};

TrainedSetup prepare_trained(const Config& cfg, uint64_t seed) {
  TrainedSetup t;
  t.fitted = prepare_fitted(cfg, seed);
  GpContext ctx(t.fitted.data.train, t.fitted.params,
                t.fitted.data.pool.active_xs(),
                cfg.get_bool("reward.posterior_cov"));
  t.env = BatchEnv{t.fitted.data.pool.size(), cfg.get_int("al.query_size")};
  Rng init_rng(mix_seed(seed, "gfn/init"));
  PolicyParams init = init_policy(policy_config(cfg), init_rng);
  TrainerConfig tcfg = trainer_config(cfg);
  tcfg.seed = mix_seed(seed, "gfn/train");
  TrainResult res = train_subtb(t.env, ctx, tcfg, std::move(init));
  t.policy = std::move(res.params);
  t.opt = std::move(res.opt);
  t.trace = std::move(res.trace);
  return t;
}

void cmd_train_gfn(const Config& cfg, RunDir& rd) {
  TrainedSetup t = prepare_trained(cfg, cfg.get_u64("seed"));
  save_snapshot(rd.file("dataset.jsonl").string(), t.fitted.data);
  save_gp_checkpoint(rd.file("gp-checkpoint.json").string(), t.fitted.params,
                     "dataset.jsonl", t.fitted.data.train.size());
  save_policy(rd.file("policy-checkpoint.bin").string(), t.policy, &t.opt);
  write_loss_trace(rd.file("loss-trace.jsonl"), t.trace);
  rd.note("train-gfn: " + std::to_string(t.trace.size()) + " iterations, final loss " +
          (t.trace.empty() ? std::string("n/a") : fmt(t.trace.back().mean_loss)));
}

void cmd_oracle_compare(const Config& cfg, RunDir& rd) {
  const uint64_t seed = cfg.get_u64("seed");
  TrainedSetup t = prepare_trained(cfg, seed);
  GpContext ctx(t.fitted.data.train, t.fitted.params,
                t.fitted.data.pool.active_xs(),
                cfg.get_bool("reward.posterior_cov"));
  const uint64_t cap = cfg.get_u64("oracle.cap");
  RewardSpec spec{cfg.get_double("reward.temperature")};
  RewardDistribution truth = enumerate_rewards(ctx, t.env.batch_size, spec, cap);
  const TrainSet* tc = t.policy.cfg.train_context ? &ctx.train() : nullptr;
  PolicyEval eval(t.policy, ctx.pool_xs(), tc);
  Eigen::VectorXd marginal = exact_policy_marginal(eval, t.env, cap);
  DistributionReport report =
      make_report(t.env.pool_size, t.env.batch_size, spec.temperature, seed,
                  std::move(truth.support), std::move(truth.p), std::move(marginal));
  save_report(rd.file("report.jsonl").string(), report);
  write_loss_trace(rd.file("loss-trace.jsonl"), t.trace);
  rd.note("oracle-compare: JSD " + fmt(report.jsd_nats) + " nats, slope " +
          fmt(report.slope) + ", intercept " + fmt(report.intercept));
}

void cmd_jmi_sweep(const Config& cfg, RunDir& rd) {
  const uint64_t root = cfg.get_u64("seed");
  const auto temps = cfg.get_double_list("sweep.temperatures");
  const int replicas = cfg.get_int("sweep.replicas");
  const int b = cfg.get_int("al.query_size");
  const int k = cfg.get_int("gfn.inference_samples");
  const double noise = cfg.get_double("data.noise_std");
  const bool post_cov = cfg.get_bool("reward.posterior_cov");

  std::ofstream samples(rd.file("jmi-samples.csv"));
  samples << "strategy,temperature,replica,mean_jmi,max_jmi\n";
  struct Key {
    std::string strategy;
    double temp;
    bool operator<(const Key& o) const {
      return std::tie(strategy, temp) < std::tie(o.strategy, o.temp);
    }
  };
  std::map<Key, std::vector<double>> groups;
  auto emit = [&](const std::string& strategy, double temp, int r, double mean,
                  double mx) {
    samples << strategy << "," << (temp > 0 ? fmt(temp) : "") << "," << r << ","
            << fmt(mean) << "," << fmt(mx) << "\n";
    groups[{strategy, temp}].push_back(mean);
  };

  for (int r = 0; r < replicas; ++r) {
    const uint64_t rseed = mix_seed(root, "sweep", r);
    PoolSet pool0 = sample_pool(cfg.get_int("data.pool_size"), noise,
                                mix_seed(rseed, "data/pool"));
    Rng seed_rng(mix_seed(rseed, "seedset"));
    auto [train, pool] = draw_seed_set(pool0, cfg.get_int("al.seed_size"), seed_rng);
    KernelParams params = fit_hyperparams(train, gp_options(cfg)).params;
    GpContext ctx(train, params, pool.active_xs(), post_cov);
    BatchEnv env{pool.size(), b};

    {  // strategies that do not depend on the reward temperature
      Rng rng(mix_seed(rseed, "strategy/random"));
      double sum = 0, mx = -1e300;
      for (int i = 0; i < k; ++i) {
        const double j = batch_jmi(ctx, random_batch(pool.size(), b, rng));
        sum += j;
        mx = std::max(mx, j);
      }
      emit("random", 0.0, r, sum / k, mx);
    }
    const auto scores = bald_scores(ctx);
    {
      const double j = batch_jmi(ctx, bald_topB(scores, b));
      emit("bald", 0.0, r, j, j);
    }
    {
      Rng rng(mix_seed(rseed, "strategy/stochastic"));
      double sum = 0, mx = -1e300;
      for (int i = 0; i < k; ++i) {
        const double j = batch_jmi(
            ctx, stochastic_bald(scores, b,
                                 cfg.get_double("strategy.stochastic_temp"), rng));
        sum += j;
        mx = std::max(mx, j);
      }
      emit("stochastic-bald", 0.0, r, sum / k, mx);
    }
    {
      const double j = batch_jmi(ctx, batchbald_greedy(ctx, b));
      emit("batchbald", 0.0, r, j, j);
    }

    for (double temp : temps) {
      TrainerConfig tcfg = trainer_config(cfg);
      tcfg.iterations = cfg.get_int("sweep.iterations");
      tcfg.reward.temperature = temp;
      tcfg.seed = mix_seed(rseed, "gfn/train/" + fmt(temp));
      Rng init_rng(mix_seed(rseed, "gfn/init"));
      PolicyParams policy = init_policy(policy_config(cfg), init_rng);
      TrainResult res = train_subtb(env, ctx, tcfg, std::move(policy));
      Rng inf_rng(mix_seed(rseed, "gfn/inference/" + fmt(temp)));
      const auto batches = sample_batches(res.params, env, ctx,
                                          tcfg.reward, k, inf_rng);
      double sum = 0, mx = -1e300;
      for (const auto& sb : batches) {
        const double j = batch_jmi(ctx, sb.state);
        sum += j;
        mx = std::max(mx, j);
      }
      emit("gfn", temp, r, sum / k, mx);
      rd.note("jmi-sweep: replica " + std::to_string(r) + " T=" + fmt(temp) +
              " mean JMI " + fmt(sum / k));
    }
  }

  std::ofstream summary(rd.file("jmi-summary.csv"));
  summary << "strategy,temperature,mean_jmi,stderr_jmi,replicas\n";
  for (const auto& [key, values] : groups) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double stderr_ =
        values.size() > 1 ? std::sqrt(var / (values.size() - 1.0)) /
                                std::sqrt(static_cast<double>(values.size()))
                          : 0.0;
    summary << key.strategy << "," << (key.temp > 0 ? fmt(key.temp) : "") << ","
            << fmt(mean) << "," << fmt(stderr_) << "," << values.size() << "\n";
  }
}

void cmd_al_run(const Config& cfg, RunDir& rd) {
  const uint64_t root = cfg.get_u64("seed");
  const auto strategies = cfg.get_string_list("al.strategies");
  const int replicas = cfg.get_int("al.replicas");

  std::ofstream timings(rd.file("timings.jsonl"));
  // curve[strategy][step] -> per-replica MSEs
  std::map<std::string, std::map<int, std::vector<double>>> curve;
  std::map<std::string, std::map<int, int>> labelled;

  for (const std::string& strategy : strategies) {
    for (int r = 0; r < replicas; ++r) {
      Dataset data = make_dataset(cfg, mix_seed(root, "al/data", r));
      ALConfig acfg = al_config(cfg, mix_seed(root, "al/replica", r));
      acfg.strategy = strategy;
      RunLog log = run_al(acfg, std::move(data));

      std::ofstream runlog(
          rd.file("runlog-" + strategy + "-r" + std::to_string(r) + ".jsonl"));
      for (const StepRecord& s : log.steps) {
        nlohmann::ordered_json j;
        j["step"] = s.step;
        j["train_size"] = s.train_size;
        j["test_mse"] = s.test_mse;
        j["test_nlpd"] = s.test_nlpd;
        j["selected_batch"] = s.selected_batch;
        j["batch_log_reward"] = s.batch_log_reward;
        j["policy_eval_count"] = s.policy_eval_count;
        j["policy_train_eval_count"] = s.policy_train_eval_count;
        runlog << j.dump() << "\n";
        nlohmann::ordered_json tj;
        tj["strategy"] = strategy;
        tj["replica"] = r;
        tj["step"] = s.step;
        tj["wall_time_s"] = s.wall_time_s;
        timings << tj.dump() << "\n";
        curve[strategy][s.step].push_back(s.test_mse);
        labelled[strategy][s.step] = s.train_size;
      }
      rd.note("al-run: " + strategy + " replica " + std::to_string(r) +
              " final MSE " + fmt(log.steps.back().test_mse));
    }
  }

  std::ofstream out(rd.file("al-curve.csv"));
  out << "strategy,labelled_count,test_loss_mean,test_loss_stderr\n";
  for (const auto& [strategy, steps] : curve) {
    for (const auto& [step, values] : steps) {
      double mean = 0;
      for (double v : values) mean += v;
      mean /= values.size();
      double var = 0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double stderr_ =
          values.size() > 1 ? std::sqrt(var / (values.size() - 1.0)) /
                                  std::sqrt(static_cast<double>(values.size()))
                            : 0.0;
      out << strategy << "," << labelled[strategy][step] << "," << fmt(mean)
          << "," << fmt(stderr_) << "\n";
    }
  }
}

void cmd_transfer_exp(const Config& cfg, RunDir& rd) {
  TransferConfig t;
  t.seed = cfg.get_u64("seed");
  t.replicas = cfg.get_int("transfer.replicas");
  t.pool_size = cfg.get_int("transfer.pool_size");
  t.seed_size = cfg.get_int("transfer.seed_size");
  t.query_size = cfg.get_int("transfer.query_size");
  t.lookahead_samples = cfg.get_int("transfer.lookahead_samples");
  t.noise_std = cfg.get_double("data.noise_std");
  t.gp = gp_options(cfg);
  t.gp_refit_lookahead = cfg.get_bool("gp.refit_lookahead");
  t.reward.temperature = cfg.get_double("reward.temperature");
  t.reward_posterior_cov = cfg.get_bool("reward.posterior_cov");
  t.policy = policy_config(cfg);
  t.trainer = trainer_config(cfg);
  t.transfer_iterations = cfg.get_int("transfer.iterations");
  t.checkpoint_interval = cfg.get_int("transfer.checkpoint_interval");
  t.lookahead_iterations = cfg.get_int("transfer.lookahead_iterations");
  t.oracle_cap = cfg.get_u64("oracle.cap");

  const auto curves = transfer_experiment(t);
  std::ofstream out(rd.file("transfer-curves.csv"));
  out << "mode,replica,iteration,jsd_nats\n";
  for (const TransferCurve& c : curves)
    for (const auto& [iter, jsd_val] : c.jsd_at)
      out << c.mode << "," << c.replica << "," << iter << "," << fmt(jsd_val)
          << "\n";

  // Seed-averaged summary: iteration-0 JSD and iterations-to-0.1 per mode.
  nlohmann::ordered_json summary;
  for (const char* mode : {"reinit", "continue", "lookahead"}) {
    double jsd0 = 0, iters_to = 0;
    int n = 0, reached = 0;
    for (const TransferCurve& c : curves) {
      if (c.mode != mode) continue;
      ++n;
      jsd0 += c.jsd_at.front().second;
      for (const auto& [iter, jv] : c.jsd_at) {
        if (jv < 0.1) {
          iters_to += iter;
          ++reached;
          break;
        }
      }
    }
    nlohmann::ordered_json m;
    m["mean_iter0_jsd"] = n ? jsd0 / n : 0.0;
    m["mean_iterations_to_jsd_0.1"] = reached ? iters_to / reached : -1.0;
    m["replicas_reaching_0.1"] = reached;
    m["replicas"] = n;
    summary[mode] = m;
    rd.note(std::string("transfer-exp: ") + mode + " iter0 JSD " +
            fmt(n ? jsd0 / n : 0.0) + ", mean iters to 0.1 " +
            fmt(reached ? iters_to / reached : -1.0));
  }
  std::ofstream sj(rd.file("transfer-summary.json"));
  sj << summary.dump(2) << "\n";
}

}  // namespace

bool is_known_command(const std::string& command) {
  return command == "synth-data" || command == "fit-gp" ||
         command == "train-gfn" || command == "oracle-compare" ||
         command == "jmi-sweep" || command == "al-run" ||
         command == "transfer-exp";
}

void run_command(const Config& cfg, const std::string& command,
                 const std::string& out_dir) {
  if (!is_known_command(command))
    throw ConfigError("unknown command '" + command + "'");
  cfg.validate();
  RunDir rd = open_run_dir(cfg, out_dir);
  if (command == "synth-data") cmd_synth_data(cfg, rd);
  else if (command == "fit-gp") cmd_fit_gp(cfg, rd);
  else if (command == "train-gfn") cmd_train_gfn(cfg, rd);
  else if (command == "oracle-compare") cmd_oracle_compare(cfg, rd);
  else if (command == "jmi-sweep") cmd_jmi_sweep(cfg, rd);
  else if (command == "al-run") cmd_al_run(cfg, rd);
  else if (command == "transfer-exp") cmd_transfer_exp(cfg, rd);
}

}  // namespace batchgfn
