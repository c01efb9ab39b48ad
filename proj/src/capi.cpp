#include "batchgfn.h"

#include <cstring>
#include <string>

#include "al_harness.hpp"
#include "config.hpp"
#include "experiments.hpp"
#include "linalg.hpp"
#include "oracle.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
bgfn_status guarded(Fn&& fn) {
  try {
    fn();
    return BGFN_OK;
  } catch (const batchgfn::ConfigError& e) {
    g_last_error = e.what();
    return BGFN_ERR_CONFIG;
  } catch (const batchgfn::NumericalError& e) {
    g_last_error = e.what();
    return BGFN_ERR_NUMERICAL;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return BGFN_ERR_INVALID_ARGUMENT;
  } catch (const std::ios_base::failure& e) {
    g_last_error = e.what();
    return BGFN_ERR_IO;
  } catch (const std::runtime_error& e) {
    g_last_error = e.what();
    return BGFN_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BGFN_ERR_INTERNAL;
  }
}

bgfn_status require(bool ok, const char* msg) {
  if (ok) return BGFN_OK;
  g_last_error = msg;
  return BGFN_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct bgfn_config {
  batchgfn::Config impl;
};

struct bgfn_dataset {
  batchgfn::Dataset impl;
};

struct bgfn_gp {
  batchgfn::KernelParams params;
  batchgfn::TrainSet train;
  double best_lml = 0.0;
};

struct bgfn_sampler {
  batchgfn::PolicyParams policy;
  batchgfn::AdamState opt;
  batchgfn::TrainSet train;
  std::vector<double> pool_xs;
  batchgfn::KernelParams gp;
  batchgfn::RewardSpec reward;
  bool posterior_cov = true;
  batchgfn::BatchEnv env;
  uint64_t eval_count = 0;  // policy evaluations spent by sample/select
};

extern "C" {

const char* bgfn_status_name(bgfn_status status) {
  switch (status) {
    case BGFN_OK: return "ok";
    case BGFN_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case BGFN_ERR_CONFIG: return "config-error";
    case BGFN_ERR_NUMERICAL: return "numerical-error";
    case BGFN_ERR_IO: return "io-error";
    case BGFN_ERR_INTERNAL: return "internal-error";
  }
  return "unknown";
}

const char* bgfn_last_error(void) { return g_last_error.c_str(); }

const char* bgfn_version(void) { return "0.1.0"; }

bgfn_status bgfn_config_create(bgfn_config** out) {
  if (auto s = require(out != nullptr, "out is null")) return s;
  return guarded([&] { *out = new bgfn_config{batchgfn::Config::defaults()}; });
}

bgfn_status bgfn_config_load(const char* path, bgfn_config** out) {
  if (auto s = require(path && out, "path/out is null")) return s;
  return guarded(
      [&] { *out = new bgfn_config{batchgfn::Config::from_file(path)}; });
}

bgfn_status bgfn_config_set(bgfn_config* cfg, const char* key,
                            const char* value) {
  if (auto s = require(cfg && key && value, "cfg/key/value is null")) return s;
  return guarded([&] { cfg->impl.set(key, value); });
}

bgfn_status bgfn_config_get(const bgfn_config* cfg, const char* key, char* buf,
                            size_t buflen) {
  if (auto s = require(cfg && key && buf, "cfg/key/buf is null")) return s;
  return guarded([&] {
    const std::string& v = cfg->impl.raw(key);
    if (v.size() + 1 > buflen)
      throw batchgfn::InvalidArgument("buffer too small for value of '" +
                                      std::string(key) + "'");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

bgfn_status bgfn_config_validate(const bgfn_config* cfg) {
  if (auto s = require(cfg != nullptr, "cfg is null")) return s;
  return guarded([&] { cfg->impl.validate(); });
}

void bgfn_config_destroy(bgfn_config* cfg) { delete cfg; }

bgfn_status bgfn_run_command(const bgfn_config* cfg, const char* command,
                             const char* out_dir) {
  if (auto s = require(cfg && command && out_dir, "cfg/command/out_dir is null"))
    return s;
  return guarded([&] { batchgfn::run_command(cfg->impl, command, out_dir); });
}

bgfn_status bgfn_dataset_synth(const bgfn_config* cfg, bgfn_dataset** out) {
  if (auto s = require(cfg && out, "cfg/out is null")) return s;
  return guarded([&] {
    const double noise = cfg->impl.get_double("data.noise_std");
    const uint64_t seed = cfg->impl.get_u64("seed");
    batchgfn::Dataset d;
    d.pool = batchgfn::sample_pool(cfg->impl.get_int("data.pool_size"), noise,
                                   batchgfn::mix_seed(seed, "data/pool"));
    d.test = batchgfn::sample_test_set(cfg->impl.get_int("data.test_size"),
                                       noise,
                                       batchgfn::mix_seed(seed, "data/test"));
    *out = new bgfn_dataset{std::move(d)};
  });
}

bgfn_status bgfn_dataset_load(const char* path, bgfn_dataset** out) {
  if (auto s = require(path && out, "path/out is null")) return s;
  return guarded(
      [&] { *out = new bgfn_dataset{batchgfn::load_snapshot(path)}; });
}

bgfn_status bgfn_dataset_save(const bgfn_dataset* data, const char* path) {
  if (auto s = require(data && path, "data/path is null")) return s;
  return guarded([&] { batchgfn::save_snapshot(path, data->impl); });
}

bgfn_status bgfn_dataset_draw_seed_set(bgfn_dataset* data,
                                       const bgfn_config* cfg) {
  if (auto s = require(data && cfg, "data/cfg is null")) return s;
  return guarded([&] {
    batchgfn::Rng rng(
        batchgfn::mix_seed(cfg->impl.get_u64("seed"), "seedset"));
    auto [train, pool] = batchgfn::draw_seed_set(
        data->impl.pool, cfg->impl.get_int("al.seed_size"), rng);
    data->impl.pool = std::move(pool);
    data->impl.train = std::move(train);
  });
}

bgfn_status bgfn_dataset_sizes(const bgfn_dataset* data, size_t* pool,
                               size_t* train, size_t* test) {
  if (auto s = require(data != nullptr, "data is null")) return s;
  if (pool) *pool = static_cast<size_t>(data->impl.pool.size());
  if (train) *train = static_cast<size_t>(data->impl.train.size());
  if (test) *test = static_cast<size_t>(data->impl.test.size());
  return BGFN_OK;
}

void bgfn_dataset_destroy(bgfn_dataset* data) { delete data; }

bgfn_status bgfn_gp_fit(const bgfn_config* cfg, const bgfn_dataset* data,
                        bgfn_gp** out) {
  if (auto s = require(cfg && data && out, "cfg/data/out is null")) return s;
  return guarded([&] {
    batchgfn::GpFitOptions opts;
    opts.epochs = cfg->impl.get_int("gp.fit_epochs");
    opts.lr = cfg->impl.get_double("gp.fit_lr");
    opts.init.lengthscale = cfg->impl.get_double("gp.init_lengthscale");
    opts.init.outputscale = cfg->impl.get_double("gp.init_outputscale");
    opts.init.noise_var = cfg->impl.get_double("gp.init_noise_var");
    opts.init.mean_const = cfg->impl.get_double("gp.init_mean");
    opts.init.nu = cfg->impl.get_double("gp.nu");
    auto fit = batchgfn::fit_hyperparams(data->impl.train, opts);
    *out = new bgfn_gp{fit.params, data->impl.train, fit.best_lml};
  });
}

bgfn_status bgfn_gp_log_marginal_likelihood(const bgfn_gp* gp, double* out) {
  if (auto s = require(gp && out, "gp/out is null")) return s;
  return guarded(
      [&] { *out = batchgfn::log_marginal_likelihood(gp->train, gp->params); });
}

bgfn_status bgfn_gp_predict(const bgfn_gp* gp, const double* xs, size_t n,
                            double* mean, double* var) {
  if (auto s = require(gp && xs && n > 0, "gp/xs is null or n == 0")) return s;
  return guarded([&] {
    const auto post = batchgfn::posterior(gp->train, gp->params,
                                          std::span<const double>(xs, n));
    for (size_t i = 0; i < n; ++i) {
      if (mean) mean[i] = post.mean[i];
      if (var) var[i] = post.cov(i, i);
    }
  });
}

bgfn_status bgfn_gp_save(const bgfn_gp* gp, const char* path) {
  if (auto s = require(gp && path, "gp/path is null")) return s;
  return guarded([&] {
    batchgfn::save_gp_checkpoint(path, gp->params, "", gp->train.size());
  });
}

void bgfn_gp_destroy(bgfn_gp* gp) { delete gp; }

namespace {

bgfn_sampler* make_sampler(const bgfn_config* cfg, const bgfn_dataset* data,
                           const bgfn_gp* gp, batchgfn::PolicyParams policy,
                           batchgfn::AdamState opt) {
  auto* s = new bgfn_sampler;
  s->policy = std::move(policy);
  s->opt = std::move(opt);
  s->train = data->impl.train;
  s->pool_xs = data->impl.pool.active_xs();
  s->gp = gp->params;
  s->reward.temperature = cfg->impl.get_double("reward.temperature");
  s->posterior_cov = cfg->impl.get_bool("reward.posterior_cov");
  s->env = batchgfn::BatchEnv{static_cast<int>(s->pool_xs.size()),
                              cfg->impl.get_int("al.query_size")};
  return s;
}

}  // namespace

bgfn_status bgfn_sampler_train(const bgfn_config* cfg, const bgfn_dataset* data,
                               const bgfn_gp* gp, bgfn_sampler** out) {
  if (auto s = require(cfg && data && gp && out, "null argument")) return s;
  return guarded([&] {
    const uint64_t seed = cfg->impl.get_u64("seed");
    batchgfn::PolicyConfig pcfg;
    pcfg.hidden_dim = cfg->impl.get_int("gfn.hidden_dim");
    pcfg.encoder_layers = cfg->impl.get_int("gfn.encoder_layers");
    pcfg.trunk_layers = cfg->impl.get_int("gfn.trunk_layers");
    pcfg.train_context = cfg->impl.get_bool("gfn.train_context");
    batchgfn::Rng init_rng(batchgfn::mix_seed(seed, "gfn/init"));
    batchgfn::PolicyParams policy = batchgfn::init_policy(pcfg, init_rng);

    batchgfn::TrainerConfig tcfg;
    tcfg.lambda = cfg->impl.get_double("gfn.lambda");
    tcfg.epsilon = cfg->impl.get_double("gfn.epsilon");
    tcfg.lr = cfg->impl.get_double("gfn.lr");
    tcfg.traj_batch_size = cfg->impl.get_int("gfn.traj_batch_size");
    tcfg.iterations = cfg->impl.get_int("gfn.iterations");
    tcfg.reward.temperature = cfg->impl.get_double("reward.temperature");
    tcfg.threads = cfg->impl.get_int("gfn.threads");
    tcfg.seed = batchgfn::mix_seed(seed, "gfn/train");

    batchgfn::GpContext ctx(data->impl.train, gp->params,
                            data->impl.pool.active_xs(),
                            cfg->impl.get_bool("reward.posterior_cov"));
    batchgfn::BatchEnv env{static_cast<int>(ctx.pool_size()),
                           cfg->impl.get_int("al.query_size")};
    auto res = batchgfn::train_subtb(env, ctx, tcfg, std::move(policy));
    *out = make_sampler(cfg, data, gp, std::move(res.params), std::move(res.opt));
  });
}

bgfn_status bgfn_sampler_load(const bgfn_config* cfg, const bgfn_dataset* data,
                              const bgfn_gp* gp, const char* path,
                              bgfn_sampler** out) {
  if (auto s = require(cfg && data && gp && path && out, "null argument"))
    return s;
  return guarded([&] {
    batchgfn::AdamState opt;
    batchgfn::PolicyParams policy = batchgfn::load_policy(path, &opt);
    *out = make_sampler(cfg, data, gp, std::move(policy), std::move(opt));
  });
}

bgfn_status bgfn_sampler_batch_size(const bgfn_sampler* sampler, int* out) {
  if (auto s = require(sampler && out, "sampler/out is null")) return s;
  *out = sampler->env.batch_size;
  return BGFN_OK;
}

bgfn_status bgfn_sampler_sample(bgfn_sampler* sampler, size_t k, uint64_t seed,
                                int* indices, double* log_rewards) {
  if (auto s = require(sampler && indices, "sampler/indices is null")) return s;
  return guarded([&] {
    batchgfn::GpContext ctx(sampler->train, sampler->gp, sampler->pool_xs,
                            sampler->posterior_cov);
    batchgfn::Rng rng(seed);
    uint64_t evals = 0;
    const auto batches = batchgfn::sample_batches(
        sampler->policy, sampler->env, ctx, sampler->reward,
        static_cast<int>(k), rng, &evals);
    sampler->eval_count += evals;
    for (size_t i = 0; i < batches.size(); ++i) {
      for (int j = 0; j < sampler->env.batch_size; ++j)
        indices[i * sampler->env.batch_size + j] = batches[i].state.indices[j];
      if (log_rewards) log_rewards[i] = batches[i].log_reward;
    }
  });
}

bgfn_status bgfn_sampler_select(bgfn_sampler* sampler, size_t k, uint64_t seed,
                                int* batch, double* log_reward) {
  if (auto s = require(sampler && batch && k > 0, "bad arguments")) return s;
  return guarded([&] {
    batchgfn::GpContext ctx(sampler->train, sampler->gp, sampler->pool_xs,
                            sampler->posterior_cov);
    batchgfn::Rng rng(seed);
    uint64_t evals = 0;
    const auto batches = batchgfn::sample_batches(
        sampler->policy, sampler->env, ctx, sampler->reward,
        static_cast<int>(k), rng, &evals);
    sampler->eval_count += evals;
    const batchgfn::BatchState best = batchgfn::select_query(batches);
    for (int j = 0; j < sampler->env.batch_size; ++j)
      batch[j] = best.indices[j];
    if (log_reward) {
      for (const auto& sb : batches)
        if (sb.state == best) {
          *log_reward = sb.log_reward;
          break;
        }
    }
  });
}

bgfn_status bgfn_sampler_eval_count(const bgfn_sampler* sampler,
                                    uint64_t* out) {
  if (auto s = require(sampler && out, "sampler/out is null")) return s;
  *out = sampler->eval_count;
  return BGFN_OK;
}

bgfn_status bgfn_sampler_save(const bgfn_sampler* sampler, const char* path) {
  if (auto s = require(sampler && path, "sampler/path is null")) return s;
  return guarded(
      [&] { batchgfn::save_policy(path, sampler->policy, &sampler->opt); });
}

void bgfn_sampler_destroy(bgfn_sampler* sampler) { delete sampler; }

}  // extern "C"
