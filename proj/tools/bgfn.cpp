// bgfn: experiment runner for the BatchGFN active-learning laboratory.
// Thin shell over the C API in batchgfn.h: flags become config overrides and
// each subcommand maps onto bgfn_run_command.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "batchgfn.h"

namespace {

struct ConfigDeleter {
  void operator()(bgfn_config* c) const { bgfn_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<bgfn_config, ConfigDeleter>;

[[noreturn]] void fail(bgfn_status status) {
  std::fprintf(stderr, "error (%s): %s\n", bgfn_status_name(status),
               bgfn_last_error());
  std::exit(1);
}

void check(bgfn_status status) {
  if (status != BGFN_OK) fail(status);
}

std::string default_out_dir(const std::string& command, uint64_t seed) {
  for (int n = 0;; ++n) {
    std::string dir = "runs/" + command + "-seed" + std::to_string(seed) +
                      (n ? "-" + std::to_string(n) : "");
    if (!std::filesystem::exists(dir)) return dir;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BatchGFN batch active-learning laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy, transfer_mode, set_temp;
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_given = false;
  double temperature = 0.0;
  int pool_size = 0, query_size = 0, lookahead = -1;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth-data", "generate the 1-D toy pool/test data"},
      {"fit-gp", "fit GP hyperparameters on a drawn seed set"},
      {"train-gfn", "train the batch sampler against the GP JMI reward"},
      {"oracle-compare", "exact reward distribution vs. exact policy marginal"},
      {"jmi-sweep", "sampled-batch JMI across reward temperatures"},
      {"al-run", "active-learning benchmark across strategies"},
      {"transfer-exp", "between-step transfer (reinit/continue/lookahead)"},
  };

  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "root seed")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--out-dir", out_dir, "run directory (must not exist)");
    sub->add_option("--strategy", strategy,
                    "random|bald|stochastic-bald|batchbald|gfn");
    sub->add_option("--temperature", temperature, "reward temperature T")
        ->check(CLI::PositiveNumber);
    sub->add_option("--pool-size", pool_size, "pool size")
        ->check(CLI::PositiveNumber);
    sub->add_option("--query-size", query_size, "query batch size B")
        ->check(CLI::PositiveNumber);
    sub->add_option("--transfer-mode", transfer_mode,
                    "reinit|continue|lookahead");
    sub->add_option("--lookahead-samples", lookahead, "lookahead samples L");
    sub->add_option("--set", overrides, "extra overrides as key=value")
        ->expected(-1);
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  const bool transfer = command == "transfer-exp";

  bgfn_config* raw = nullptr;
  check(config_path.empty() ? bgfn_config_create(&raw)
                            : bgfn_config_load(config_path.c_str(), &raw));
  ConfigPtr cfg(raw);

  auto set = [&](const std::string& key, const std::string& value) {
    check(bgfn_config_set(cfg.get(), key.c_str(), value.c_str()));
  };
  if (seed_given) set("seed", std::to_string(seed));
  if (!strategy.empty()) set("al.strategy", strategy);
  if (temperature > 0) set("reward.temperature", std::to_string(temperature));
  if (pool_size > 0)
    set(transfer ? "transfer.pool_size" : "data.pool_size",
        std::to_string(pool_size));
  if (query_size > 0)
    set(transfer ? "transfer.query_size" : "al.query_size",
        std::to_string(query_size));
  if (!transfer_mode.empty()) set("al.transfer_mode", transfer_mode);
  if (lookahead >= 0)
    set(transfer ? "transfer.lookahead_samples" : "al.lookahead_samples",
        std::to_string(lookahead));
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n",
                   kv.c_str());
      return 1;
    }
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }

  check(bgfn_config_validate(cfg.get()));
  if (out_dir.empty()) {
    char buf[32];
    check(bgfn_config_get(cfg.get(), "seed", buf, sizeof(buf)));
    out_dir = default_out_dir(command, std::strtoull(buf, nullptr, 10));
  }
  check(bgfn_run_command(cfg.get(), command.c_str(), out_dir.c_str()));
  std::printf("run directory: %s\n", out_dir.c_str());
  return 0;
}
