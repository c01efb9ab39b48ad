#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace batchgfn {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError("config: " + key + " expects a real number, got '" + v + "'");
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return i;
  } catch (...) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

}  // namespace

const std::vector<Config::KeySpec>& Config::schema() {
  using T = Type;
  static const std::vector<KeySpec> kSchema = {
      {"seed", T::kU64, "0", "root seed; all streams derive from it"},
      {"data.pool_size", T::kInt, "2000", "number of pool points"},
      {"data.noise_std", T::kDouble, "0.1", "label noise standard deviation"},
      {"data.test_size", T::kInt, "1000", "test points"},
      {"data.load", T::kString, "", "optional dataset snapshot to load"},
      {"gp.nu", T::kDouble, "2.5", "Matern smoothness (0.5, 1.5, or 2.5)"},
      {"gp.fit_epochs", T::kInt, "1000", "Adam epochs for the GP fit"},
      {"gp.fit_lr", T::kDouble, "0.1", "GP fit learning rate"},
      {"gp.init_lengthscale", T::kDouble, "1.0", ""},
      {"gp.init_outputscale", T::kDouble, "1.0", ""},
      {"gp.init_noise_var", T::kDouble, "0.1", ""},
      {"gp.init_mean", T::kDouble, "0.0", ""},
      {"gp.refit_lookahead", T::kBool, "true",
       "refit GP hyperparameters on hallucinated data"},
      {"reward.temperature", T::kDouble, "0.1", "reward temperature T"},
      {"reward.posterior_cov", T::kBool, "true",
       "condition the JMI on the posterior (vs prior) covariance"},
      {"gfn.lambda", T::kDouble, "0.9", "SubTB lambda"},
      {"gfn.epsilon", T::kDouble, "0.1", "training exploration"},
      {"gfn.lr", T::kDouble, "0.001", "policy learning rate"},
      {"gfn.traj_batch_size", T::kInt, "8", "trajectories per iteration"},
      {"gfn.iterations", T::kInt, "5000", "training iterations"},
      {"gfn.inference_samples", T::kInt, "20", "batches sampled at inference"},
      {"gfn.hidden_dim", T::kInt, "256", "hidden layer width"},
      {"gfn.encoder_layers", T::kInt, "2", "hidden layers per encoder"},
      {"gfn.trunk_layers", T::kInt, "1", "hidden layers in the shared trunk"},
      {"gfn.train_context", T::kBool, "false",
       "condition the policy on the training set"},
      {"gfn.threads", T::kInt, "2", "trajectory-level threads per iteration"},
      {"gfn.checkpoint_interval", T::kInt, "0", "trace checkpoint spacing"},
      {"al.seed_size", T::kInt, "10", "B0"},
      {"al.query_size", T::kInt, "10", "B"},
      {"al.steps", T::kInt, "5", "acquisition steps"},
      {"al.strategy", T::kString, "gfn",
       "random | bald | stochastic-bald | batchbald | gfn"},
      {"al.strategies", T::kStringList, "random,bald,batchbald,gfn",
       "strategies compared by al-run"},
      {"al.replicas", T::kInt, "5", "independent seeded runs"},
      {"al.warm_iterations", T::kInt, "-1",
       "per-step budget for continue/lookahead (-1 = full budget)"},
      {"al.lookahead_samples", T::kInt, "0", "L (0 disables lookahead)"},
      {"al.lookahead_iterations", T::kInt, "200",
       "trainer budget per lookahead inner loop"},
      {"al.transfer_mode", T::kString, "reinit", "reinit | continue | lookahead"},
      {"strategy.stochastic_temp", T::kDouble, "1.0",
       "softmax temperature for stochastic-bald"},
      {"oracle.cap", T::kU64, "1000000", "max enumerated states"},
      {"sweep.temperatures", T::kDoubleList, "1,0.1,0.01",
       "reward temperatures for jmi-sweep"},
      {"sweep.replicas", T::kInt, "10", "seeded runs per sweep point"},
      {"sweep.iterations", T::kInt, "600",
       "GFN training iterations per sweep point"},
      {"transfer.pool_size", T::kInt, "50", ""},
      {"transfer.seed_size", T::kInt, "17", ""},
      {"transfer.query_size", T::kInt, "3", ""},
      {"transfer.lookahead_samples", T::kInt, "10", ""},
      {"transfer.replicas", T::kInt, "3", ""},
      {"transfer.iterations", T::kInt, "2000", "post-acquisition budget"},
      {"transfer.checkpoint_interval", T::kInt, "50", ""},
      {"transfer.lookahead_iterations", T::kInt, "200", ""},
  };
  return kSchema;
}

namespace {
const Config::KeySpec* find_spec(const std::string& key) {
  for (const auto& spec : Config::schema())
    if (spec.key == key) return &spec;
  return nullptr;
}
}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& spec : schema()) c.values_[spec.key] = spec.default_value;
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  Config c = defaults();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("config: unknown key '" + key + "'");
  switch (spec->type) {
    case Type::kInt:
      parse_int(key, value);
      break;
    case Type::kU64: {
      const int64_t v = parse_int(key, value);
      if (v < 0) throw ConfigError("config: " + key + " must be >= 0");
      break;
    }
    case Type::kDouble:
      parse_double(key, value);
      break;
    case Type::kBool:
      if (value != "true" && value != "false" && value != "0" && value != "1")
        throw ConfigError("config: " + key + " expects true/false, got '" +
                          value + "'");
      break;
    case Type::kDoubleList:
      for (const auto& item : split_list(value)) parse_double(key, item);
      break;
    case Type::kString:
    case Type::kStringList:
      break;
  }
  values_[key] = value;
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const {
  return static_cast<int>(parse_int(key, raw(key)));
}
uint64_t Config::get_u64(const std::string& key) const {
  return static_cast<uint64_t>(parse_int(key, raw(key)));
}
double Config::get_double(const std::string& key) const {
  return parse_double(key, raw(key));
}
bool Config::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  return v == "true" || v == "1";
}
std::string Config::get_string(const std::string& key) const { return raw(key); }

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key)))
    out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
  return split_list(raw(key));
}

void Config::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  require(get_int("data.pool_size") >= 1, "data.pool_size must be >= 1");
  require(get_double("data.noise_std") >= 0.0, "data.noise_std must be >= 0");
  const double nu = get_double("gp.nu");
  require(nu == 0.5 || nu == 1.5 || nu == 2.5, "gp.nu must be 0.5, 1.5 or 2.5");
  require(get_double("reward.temperature") > 0.0,
          "reward.temperature must be > 0");
  const double lambda = get_double("gfn.lambda");
  require(lambda > 0.0 && lambda <= 1.0, "gfn.lambda must lie in (0, 1]");
  const double eps = get_double("gfn.epsilon");
  require(eps >= 0.0 && eps <= 1.0, "gfn.epsilon must lie in [0, 1]");
  require(get_int("gfn.traj_batch_size") >= 1,
          "gfn.traj_batch_size must be >= 1");
  require(get_int("gfn.hidden_dim") >= 1, "gfn.hidden_dim must be >= 1");
  require(get_int("gfn.encoder_layers") >= 1 && get_int("gfn.trunk_layers") >= 1,
          "encoder/trunk layer counts must be >= 1");

  const int pool = get_int("data.pool_size");
  const int query = get_int("al.query_size");
  const int seed_size = get_int("al.seed_size");
  const int steps = get_int("al.steps");
  require(query >= 1, "al.query_size must be >= 1");
  if (query > pool)
    throw ConfigError("config: al.query_size (" + std::to_string(query) +
                      ") exceeds data.pool_size (" + std::to_string(pool) + ")");
  if (seed_size + steps * query > pool)
    throw ConfigError(
        "config: label budget al.seed_size + al.steps * al.query_size (" +
        std::to_string(seed_size + steps * query) +
        ") exceeds data.pool_size (" + std::to_string(pool) + ")");
  const std::string strategy = get_string("al.strategy");
  require(strategy == "random" || strategy == "bald" ||
              strategy == "stochastic-bald" || strategy == "batchbald" ||
              strategy == "gfn",
          "al.strategy must be one of random|bald|stochastic-bald|batchbald|gfn");
  const std::string mode = get_string("al.transfer_mode");
  require(mode == "reinit" || mode == "continue" || mode == "lookahead",
          "al.transfer_mode must be reinit|continue|lookahead");
  if (get_int("al.lookahead_samples") > 0)
    require(strategy == "gfn", "al.lookahead_samples requires al.strategy=gfn");
  require(get_double("strategy.stochastic_temp") > 0.0,
          "strategy.stochastic_temp must be > 0");
  for (double t : get_double_list("sweep.temperatures"))
    require(t > 0.0, "sweep.temperatures must all be > 0");
  const int tpool = get_int("transfer.pool_size");
  const int tseed = get_int("transfer.seed_size");
  const int tquery = get_int("transfer.query_size");
  if (tseed + 2 * tquery > tpool)
    throw ConfigError(
        "config: transfer.seed_size + 2*transfer.query_size (" +
        std::to_string(tseed + 2 * tquery) + ") exceeds transfer.pool_size (" +
        std::to_string(tpool) + ")");
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

}  // namespace batchgfn
