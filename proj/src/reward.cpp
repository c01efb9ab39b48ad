#include "reward.hpp"

#include <cmath>

#include "linalg.hpp"

namespace batchgfn {

double joint_mi(const Eigen::MatrixXd& cov, double noise_var) {
  if (noise_var <= 0.0) throw InvalidArgument("joint_mi: noise_var must be > 0");
  if (cov.rows() != cov.cols()) throw InvalidArgument("joint_mi: non-square cov");
  if (cov.rows() == 0) return 0.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  m += cov / noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    // The identity summand keeps this PD for any PSD cov; one last nudge
    // absorbs roundoff-level indefiniteness, anything worse is an error.
    m.diagonal().array() += 1e-12 * m.diagonal().maxCoeff();
    llt.compute(m);
    if (llt.info() != Eigen::Success)
      throw NumericalError("joint_mi: covariance indefinite beyond tolerance");
  }
  return 0.5 * logdet_from_llt(llt);
}

GpContext::GpContext(const TrainSet& train, const KernelParams& params,
                     std::vector<double> pool_xs, bool posterior_cov)
    : train_(train),
      params_(params),
      pool_xs_(std::move(pool_xs)),
      posterior_cov_(posterior_cov) {
  const int n = pool_size();
  post_diag_.resize(n);
  for (int i = 0; i < n; ++i)
    post_diag_[i] = matern_kernel(pool_xs_[i], pool_xs_[i], params_);
  if (train_.size() == 0 || !posterior_cov_) {
    v_.resize(0, n);
    return;
  }
  const auto xs = train_.xs();
  Eigen::MatrixXd c = kernel_matrix(xs, xs, params_);
  c.diagonal().array() += params_.noise_var;
  auto chol = jittered_llt(c, params_.outputscale, "K + noise");
  const Eigen::MatrixXd ks = kernel_matrix(xs, pool_xs_, params_);
  v_ = chol.llt.matrixL().solve(ks);
  post_diag_ -= v_.colwise().squaredNorm().transpose();
}

double GpContext::post_cov(int i, int j) const {
  double k = matern_kernel(pool_xs_[i], pool_xs_[j], params_);
  if (v_.rows() > 0) k -= v_.col(i).dot(v_.col(j));
  return k;
}

Eigen::MatrixXd GpContext::posterior_cov(std::span<const int> idxs) const {
  const Eigen::Index q = idxs.size();
  Eigen::MatrixXd cov(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    cov(i, i) = post_diag_[idxs[i]];
    for (Eigen::Index j = i + 1; j < q; ++j) {
      const double c = post_cov(idxs[i], idxs[j]);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

double state_log_reward(const BatchState& s, const GpContext& ctx,
                        const RewardSpec& spec) {
  if (spec.temperature <= 0.0)
    throw InvalidArgument("state_log_reward: temperature must be > 0");
  if (s.size() == 0) return 0.0;
  return joint_mi(ctx.posterior_cov(s.indices), ctx.noise_var()) /
         spec.temperature;
}

double fl_gain(const BatchState& s, int added_index, const GpContext& ctx,
               const RewardSpec& spec) {
  if (s.contains(added_index))
    throw InvalidArgument("fl_gain: index already in state");
  BatchState grown = s;
  if (grown.size() >= grown.capacity) grown.capacity = grown.size() + 1;
  grown = apply(grown, added_index);
  return state_log_reward(grown, ctx, spec) - state_log_reward(s, ctx, spec);
}

std::vector<double> bald_scores(const GpContext& ctx) {
  std::vector<double> scores(ctx.pool_size());
  for (int i = 0; i < ctx.pool_size(); ++i) {
    const double v = std::max(ctx.post_var(i), 0.0);
    scores[i] = 0.5 * std::log1p(v / ctx.noise_var());
  }
  return scores;
}

}  // namespace batchgfn
