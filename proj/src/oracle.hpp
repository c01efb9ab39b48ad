#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gfn_env.hpp"
#include "policy.hpp"
#include "reward.hpp"

namespace batchgfn {

// Ground-truth machinery over the full C(N,B) support. Support atoms are
// enumerated in colexicographic order of the sorted index tuples (rank =
// sum_i C(c_i, i+1)), which the subset-lattice DP can compute in O(B).

// C(n, k); throws if the value exceeds cap (so callers fail before
// allocating).
uint64_t binomial_capped(int n, int k, uint64_t cap, const char* what);

// All size-b subsets of [0, n) in colex order.
std::vector<BatchState> enumerate_support(int n, int b, uint64_t cap);

// Colex rank of a sorted index tuple.
uint64_t combination_rank(const std::vector<int>& indices);

struct RewardDistribution {
  std::vector<BatchState> support;
  Eigen::VectorXd p;                // normalized, log-space computation
  std::vector<double> log_rewards;  // l(s) per atom
};

// p_true(s) = exp(l(s) - logsumexp); errors out when C(N,B) > cap.
RewardDistribution enumerate_rewards(const GpContext& ctx, int b,
                                     const RewardSpec& spec,
                                     uint64_t cap = 1000000);

// Exact terminal marginal of the policy by dynamic programming over the
// subset lattice: P(s) = sum over (parent, x) of P(parent) P_F(x | parent).
// Aligned with enumerate_support(N, B); sums to 1 exactly up to roundoff
// because termination is structural. Cap bounds sum_{k<=B} C(N,k).
Eigen::VectorXd exact_policy_marginal(const PolicyEval& eval,
                                      const BatchEnv& env,
                                      uint64_t cap = 1000000);

// Frequency vector of terminal samples over the colex support; samples
// outside the support (wrong size, bad indices) are an error.
Eigen::VectorXd empirical_distribution(const std::vector<BatchState>& samples,
                                       int n, int b, uint64_t cap = 1000000);

// Jensen-Shannon divergence in nats; 0 log 0 := 0; bounded by ln 2.
double jsd(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct SubmodCheckReport {
  int trials = 0;
  double worst_violation = 0.0;  // +inf when an indefinite block was hit
  bool pass = false;
};

// Diminishing-returns audit of l over every nested-subset/element
// combination on random PSD posteriors of the given size. An indefinite
// covariance (corrupted input) is itself reported as a violation.
SubmodCheckReport submodularity_check(int trials, int pool_size, Rng& rng,
                                      double tol = 1e-9);

// Worst violation for one explicit covariance (negative-control hook).
double worst_submodularity_violation(const Eigen::MatrixXd& cov,
                                     double noise_var);

struct DistributionReport {
  int n = 0;
  int b = 0;
  double temperature = 1.0;
  uint64_t seed = 0;
  std::vector<BatchState> support;
  Eigen::VectorXd p_true;
  Eigen::VectorXd p_model;
  double jsd_nats = 0.0;
  double slope = 0.0;      // least squares, p_model regressed on p_true
  double intercept = 0.0;
};

DistributionReport make_report(int n, int b, double temperature, uint64_t seed,
                               std::vector<BatchState> support,
                               Eigen::VectorXd p_true, Eigen::VectorXd p_model);

// Header line (JSON: N, B, T, seed, jsd_nats, slope, intercept, conventions)
// followed by one JSON row per atom {indices, p_true, p_model}.
void save_report(const std::string& path, const DistributionReport& report);

}  // namespace batchgfn
