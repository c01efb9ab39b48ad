#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "data_synth.hpp"
#include "gfn_env.hpp"
#include "gp.hpp"

namespace batchgfn {

// Temperature-shaped reward R = exp(JMI / T); everything downstream works
// with the log reward l(s) = JMI(s) / T and never exponentiates before a
// comparison.
struct RewardSpec {
  double temperature = 0.1;
};

// 1/2 log det(I + cov / noise_var) via a stabilized Cholesky (never a raw
// determinant). cov must be symmetric PSD within jitter; noise_var > 0.
double joint_mi(const Eigen::MatrixXd& cov, double noise_var);

// Model context: a GP fitted on the current training set, specialized to the
// current pool. Precomputes the train-side factorization once so that
// posterior covariance blocks over pool points are O(|s|^2 M).
class GpContext {
 public:
  // posterior_cov=false conditions rewards on the prior kernel instead of
  // the posterior (config flag; posterior is the default).
  GpContext(const TrainSet& train, const KernelParams& params,
            std::vector<double> pool_xs, bool posterior_cov = true);

  int pool_size() const { return static_cast<int>(pool_xs_.size()); }
  const std::vector<double>& pool_xs() const { return pool_xs_; }
  const KernelParams& params() const { return params_; }
  const TrainSet& train() const { return train_; }
  double noise_var() const { return params_.noise_var; }

  // Posterior variance of pool point i given the training set.
  double post_var(int i) const { return post_diag_[i]; }
  // Posterior covariance entry between pool points i and j.
  double post_cov(int i, int j) const;
  // Posterior covariance block over a set of pool indices.
  Eigen::MatrixXd posterior_cov(std::span<const int> idxs) const;

 private:
  TrainSet train_;
  KernelParams params_;
  std::vector<double> pool_xs_;
  bool posterior_cov_ = true;
  Eigen::MatrixXd v_;          // L^-1 K(train, pool), M x N
  Eigen::VectorXd post_diag_;  // posterior variances over the pool
};

// l(s) = joint_mi(posterior covariance of s | D_train, noise) / T; l({}) = 0.
double state_log_reward(const BatchState& s, const GpContext& ctx,
                        const RewardSpec& spec);

// l(s + {x}) - l(s) >= 0 (monotone submodular gain).
double fl_gain(const BatchState& s, int added_index, const GpContext& ctx,
               const RewardSpec& spec);

// Per-point mutual information: 1/2 log(1 + postvar(x_i)/noise_var).
std::vector<double> bald_scores(const GpContext& ctx);

}  // namespace batchgfn
