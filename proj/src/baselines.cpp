#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "linalg.hpp"

namespace batchgfn {

BatchState random_batch(int pool_size, int b, Rng& rng) {
  if (b < 0 || b > pool_size)
    throw InvalidArgument("random_batch: B exceeds pool size");
  std::vector<int> perm(pool_size);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < b; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(pool_size - i));
    std::swap(perm[i], perm[j]);
  }
  BatchState s{std::vector<int>(perm.begin(), perm.begin() + b), b};
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

BatchState bald_topB(std::span<const double> scores, int b) {
  const int n = static_cast<int>(scores.size());
  if (b < 0 || b > n) throw InvalidArgument("bald_topB: B exceeds pool size");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int c) {
    if (scores[a] != scores[c]) return scores[a] > scores[c];
    return a < c;
  });
  BatchState s{std::vector<int>(order.begin(), order.begin() + b), b};
  std::sort(s.indices.begin(), s.indices.end());
  return s;
}

BatchState stochastic_bald(std::span<const double> scores, int b, double temp,
                           Rng& rng) {
  const int n = static_cast<int>(scores.size());
  if (b < 0 || b > n)
    throw InvalidArgument("stochastic_bald: B exceeds pool size");
  if (temp <= 0.0) throw InvalidArgument("stochastic_bald: temp must be > 0");
  for (double s : scores)
    if (!std::isfinite(s))
      throw InvalidArgument("stochastic_bald: scores must be finite");
  std::vector<int> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  BatchState out{{}, b};
  std::vector<double> w;
  for (int step = 0; step < b; ++step) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int idx : remaining) mx = std::max(mx, scores[idx] / temp);
    w.assign(remaining.size(), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < remaining.size(); ++i)
      total += w[i] = std::exp(scores[remaining[i]] / temp - mx);
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    size_t pick = remaining.size() - 1;
    for (size_t i = 0; i < remaining.size(); ++i) {
      acc += w[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.indices.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + pick);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

namespace {

BatchState greedy_naive(const GpContext& ctx, int b) {
  BatchState s{{}, b};
  std::vector<int> current;
  for (int step = 0; step < b; ++step) {
    int best = -1;
    double best_jmi = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < ctx.pool_size(); ++x) {
      if (std::binary_search(current.begin(), current.end(), x)) continue;
      std::vector<int> cand = current;
      cand.insert(std::upper_bound(cand.begin(), cand.end(), x), x);
      const double jmi = joint_mi(ctx.posterior_cov(cand), ctx.noise_var());
      if (jmi > best_jmi) {
        best_jmi = jmi;
        best = x;
      }
    }
    current.insert(std::upper_bound(current.begin(), current.end(), best), best);
  }
  s.indices = std::move(current);
  return s;
}

}  // namespace

BatchState batchbald_greedy(const GpContext& ctx, int b, GreedyMode mode) {
  const int n = ctx.pool_size();
  if (b < 0 || b > n)
    throw InvalidArgument("batchbald_greedy: B exceeds pool size");
  if (mode == GreedyMode::kNaive) return greedy_naive(ctx, b);

  const double inv_noise = 1.0 / ctx.noise_var();
  // Growing Cholesky of M = I + cov(S)/noise, plus per-candidate solved
  // columns w_x = L^-1 (cov(S, x)/noise); appending a selection extends each
  // w_x by one entry in O(1) solves.
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(b, b);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(b, n);
  std::vector<int> selected;
  std::vector<char> taken(n, 0);
  for (int step = 0; step < b; ++step) {
    int best = -1;
    double best_d = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < n; ++x) {
      if (taken[x]) continue;
      const double d = 1.0 + inv_noise * ctx.post_var(x) -
                       w.col(x).head(step).squaredNorm();
      if (d > best_d) {
        best_d = d;
        best = x;
      }
    }
    // The gain log(d) is nonnegative up to roundoff; guard the diagonal.
    const double diag = std::max(best_d, 1e-12);
    chol.row(step).head(step) = w.col(best).head(step).transpose();
    chol(step, step) = std::sqrt(diag);
    for (int x = 0; x < n; ++x) {
      if (taken[x] || x == best) continue;
      const double cross = inv_noise * ctx.post_cov(best, x);
      w(step, x) =
          (cross - chol.row(step).head(step).dot(w.col(x).head(step))) /
          chol(step, step);
    }
    taken[best] = 1;
    selected.push_back(best);
  }
  std::sort(selected.begin(), selected.end());
  return BatchState{std::move(selected), b};
}

}  // namespace batchgfn
