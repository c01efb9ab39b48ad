#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "linalg.hpp"

namespace batchgfn {

uint64_t binomial_capped(int n, int k, uint64_t cap, const char* what) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (c > cap)
      throw InvalidArgument(std::string(what) +
                            ": state count exceeds the configured cap (" +
                            std::to_string(cap) + ")");
  }
  return static_cast<uint64_t>(c);
}

namespace {

// In-place advance to the next colex combination; returns false at the end.
bool next_combination(std::vector<int>& c, int n) {
  const int b = static_cast<int>(c.size());
  for (int i = 0; i < b; ++i) {
    const int limit = (i + 1 < b) ? c[i + 1] : n;
    if (c[i] + 1 < limit) {
      ++c[i];
      for (int j = 0; j < i; ++j) c[j] = j;
      return true;
    }
  }
  return false;
}

uint64_t binom_raw(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  uint64_t c = 1;
  for (int i = 1; i <= k; ++i)
    c = c * static_cast<uint64_t>(n - k + i) / static_cast<uint64_t>(i);
  return c;
}

}  // namespace

uint64_t combination_rank(const std::vector<int>& indices) {
  uint64_t r = 0;
  for (size_t i = 0; i < indices.size(); ++i)
    r += binom_raw(indices[i], static_cast<int>(i) + 1);
  return r;
}

std::vector<BatchState> enumerate_support(int n, int b, uint64_t cap) {
  const uint64_t count = binomial_capped(n, b, cap, "enumerate_support");
  std::vector<BatchState> support;
  support.reserve(count);
  std::vector<int> c(b);
  for (int i = 0; i < b; ++i) c[i] = i;
  do {
    support.push_back(BatchState{c, b});
  } while (next_combination(c, n));
  return support;
}

RewardDistribution enumerate_rewards(const GpContext& ctx, int b,
                                     const RewardSpec& spec, uint64_t cap) {
  binomial_capped(ctx.pool_size(), b, cap, "enumerate_rewards");
  RewardDistribution dist;
  dist.support = enumerate_support(ctx.pool_size(), b, cap);
  dist.log_rewards.resize(dist.support.size());
  for (size_t i = 0; i < dist.support.size(); ++i)
    dist.log_rewards[i] = state_log_reward(dist.support[i], ctx, spec);
  // Normalize in log space.
  const double mx =
      *std::max_element(dist.log_rewards.begin(), dist.log_rewards.end());
  double sum = 0.0;
  for (double lr : dist.log_rewards) sum += std::exp(lr - mx);
  const double lse = mx + std::log(sum);
  dist.p.resize(dist.support.size());
  for (size_t i = 0; i < dist.support.size(); ++i)
    dist.p[i] = std::exp(dist.log_rewards[i] - lse);
  return dist;
}

Eigen::VectorXd exact_policy_marginal(const PolicyEval& eval,
                                      const BatchEnv& env, uint64_t cap) {
  const int n = env.pool_size;
  const int b = env.batch_size;
  if (n != eval.pool_size())
    throw InvalidArgument("exact_policy_marginal: pool size mismatch");
  uint64_t total = 0;
  for (int k = 0; k <= b; ++k)
    total += binomial_capped(n, k, cap, "exact_policy_marginal");
  if (total > cap)
    throw InvalidArgument(
        "exact_policy_marginal: state count exceeds the configured cap (" +
        std::to_string(cap) + ")");

  std::vector<double> cur{1.0};  // level 0: the empty state
  std::vector<int> c;
  for (int level = 0; level < b; ++level) {
    std::vector<double> next(binom_raw(n, level + 1), 0.0);
    c.resize(level);
    for (int i = 0; i < level; ++i) c[i] = i;
    uint64_t rank = 0;
    // Walk level `level` in colex order; rank advances sequentially.
    while (true) {
      const double p = cur[rank];
      if (p > 0.0) {
        BatchState s{c, b};
        const PolicyOutput out = eval.encode(s);
        const Eigen::VectorXd ls = masked_log_softmax(out.forward_logits);
        for (int a = 0; a < n; ++a) {
          if (s.contains(a)) continue;
          std::vector<int> child = c;
          child.insert(std::upper_bound(child.begin(), child.end(), a), a);
          next[combination_rank(child)] += p * std::exp(ls[a]);
        }
      }
      ++rank;
      if (level == 0 || !next_combination(c, n)) break;
    }
    cur = std::move(next);
  }
  return Eigen::Map<Eigen::VectorXd>(cur.data(), cur.size());
}

Eigen::VectorXd empirical_distribution(const std::vector<BatchState>& samples,
                                       int n, int b, uint64_t cap) {
  const uint64_t count = binomial_capped(n, b, cap, "empirical_distribution");
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(count);
  for (const BatchState& s : samples) {
    if (s.size() != b || !valid_state(s, n))
      throw InvalidArgument("empirical_distribution: sample outside support");
    freq[combination_rank(s.indices)] += 1.0;
  }
  if (!samples.empty()) freq /= static_cast<double>(samples.size());
  return freq;
}

double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw InvalidArgument("jsd: support mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) total += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) total += 0.5 * q[i] * std::log(q[i] / m);
  }
  return total;
}

double worst_submodularity_violation(const Eigen::MatrixXd& cov,
                                     double noise_var) {
  const int m = static_cast<int>(cov.rows());
  if (m > 20) throw InvalidArgument("worst_submodularity_violation: too large");
  // l over subsets by bitmask; indefinite blocks surface as +inf violations.
  std::vector<double> l(1u << m, 0.0);
  for (uint32_t mask = 1; mask < (1u << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    Eigen::MatrixXd block(idx.size(), idx.size());
    for (size_t a = 0; a < idx.size(); ++a)
      for (size_t c = 0; c < idx.size(); ++c) block(a, c) = cov(idx[a], idx[c]);
    try {
      l[mask] = joint_mi(block, noise_var);
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  double worst = 0.0;
  for (uint32_t sup = 0; sup < (1u << m); ++sup) {
    // Enumerate strict subsets of sup.
    for (uint32_t sub = (sup - 1) & sup;; sub = (sub - 1) & sup) {
      for (int x = 0; x < m; ++x) {
        if (sup & (1u << x)) continue;
        const uint32_t bit = 1u << x;
        const double gain_sub = l[sub | bit] - l[sub];
        const double gain_sup = l[sup | bit] - l[sup];
        worst = std::max(worst, gain_sup - gain_sub);
      }
      if (sub == 0) break;
    }
  }
  return worst;
}

SubmodCheckReport submodularity_check(int trials, int pool_size, Rng& rng,
                                      double tol) {
  SubmodCheckReport report;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd g(pool_size, pool_size);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
    const Eigen::MatrixXd cov = g * g.transpose();
    const double noise = 0.05 + 0.95 * rng.uniform01();
    report.worst_violation = std::max(
        report.worst_violation, worst_submodularity_violation(cov, noise));
  }
  report.pass = report.worst_violation <= tol;
  return report;
}

DistributionReport make_report(int n, int b, double temperature, uint64_t seed,
                               std::vector<BatchState> support,
                               Eigen::VectorXd p_true,
                               Eigen::VectorXd p_model) {
  if (p_true.size() != p_model.size() ||
      p_true.size() != static_cast<Eigen::Index>(support.size()))
    throw InvalidArgument("make_report: misaligned supports");
  DistributionReport r;
  r.n = n;
  r.b = b;
  r.temperature = temperature;
  r.seed = seed;
  r.support = std::move(support);
  r.p_true = std::move(p_true);
  r.p_model = std::move(p_model);
  r.jsd_nats = jsd(r.p_true, r.p_model);
  const double xbar = r.p_true.mean();
  const double ybar = r.p_model.mean();
  const double sxx = (r.p_true.array() - xbar).square().sum();
  const double sxy =
      ((r.p_true.array() - xbar) * (r.p_model.array() - ybar)).sum();
  r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  r.intercept = ybar - r.slope * xbar;
  return r;
}

void save_report(const std::string& path, const DistributionReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report: cannot open " + path);
  nlohmann::ordered_json hdr;
  hdr["format"] = "batchgfn-distribution-report-v1";
  hdr["N"] = report.n;
  hdr["B"] = report.b;
  hdr["T"] = report.temperature;
  hdr["seed"] = report.seed;
  hdr["jsd_nats"] = report.jsd_nats;
  hdr["slope"] = report.slope;
  hdr["intercept"] = report.intercept;
  hdr["divergence_units"] = "nats";
  hdr["regression"] = "p_model on p_true";
  hdr["support_order"] = "colex";
  out << hdr.dump() << "\n";
  for (size_t i = 0; i < report.support.size(); ++i) {
    nlohmann::ordered_json row;
    row["indices"] = report.support[i].indices;
    row["p_true"] = report.p_true[i];
    row["p_model"] = report.p_model[i];
    out << row.dump() << "\n";
  }
}

}  // namespace batchgfn
