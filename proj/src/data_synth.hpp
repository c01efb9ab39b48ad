#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"

namespace batchgfn {

struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
};

struct TrainSet {
  std::vector<LabeledPoint> points;

  int size() const { return static_cast<int>(points.size()); }
  std::vector<double> xs() const;
  std::vector<double> ys() const;
};

// Noiseless generator behind the 1-D regression task: a degree-6 polynomial
// (no x^4 term) times sin(pi x) times a Gaussian envelope. Vanishes at every
// integer x.
double target_mean(double x);

// Unlabeled pool with eagerly generated hidden labels. Points keep their
// original indices for the lifetime of a run; acquisition removes indices
// from the active set but never reorders or relabels. Hidden labels are only
// reachable through reveal_and_remove (the labeling oracle), so acquisition
// strategies cannot peek.
class PoolSet {
 public:
  PoolSet() = default;
  PoolSet(std::vector<double> xs, std::vector<double> hidden_ys);

  // Number of points still in the pool.
  int size() const { return static_cast<int>(active_.size()); }
  // Total points ever in the pool (stable index space).
  int total_size() const { return static_cast<int>(xs_.size()); }

  double x(int pos) const { return xs_[active_[pos]]; }
  int original_index(int pos) const { return active_[pos]; }
  std::vector<double> active_xs() const;
  const std::vector<int>& active_indices() const { return active_; }

  // Labeling oracle: reveals the hidden labels at the given active positions
  // and removes those points from the pool. Positions refer to the current
  // active ordering.
  std::vector<LabeledPoint> reveal_and_remove(std::vector<int> positions);

  // Snapshot plumbing (does not bypass the oracle for in-run consumers).
  double hidden_label_for_snapshot(int original_index) const {
    return ys_[original_index];
  }
  double x_by_original(int original_index) const { return xs_[original_index]; }
  bool is_active(int original_index) const;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;   // hidden labels, original order
  std::vector<int> active_;  // ascending original indices still unlabeled
};

// x ~ N(0,1); hidden y = target_mean(x) + noise_scale * N(0,1).
// Substreams "pool/x" and "pool/noise" are derived from rng_seed, so the
// same seed is bit-reproducible. n must be >= 1.
PoolSet sample_pool(int n, double noise_scale, uint64_t rng_seed);

// Labeled set from the same generative process (substreams "test/x",
// "test/noise"). Callers use a seed distinct from the pool seed.
TrainSet sample_test_set(int n, double noise_scale, uint64_t rng_seed);

// b0 points uniformly without replacement, labeled and removed from the pool.
std::pair<TrainSet, PoolSet> draw_seed_set(const PoolSet& pool, int b0, Rng& rng);

// Dataset bundle used by the experiment drivers.
struct Dataset {
  PoolSet pool;
  TrainSet train;
  TrainSet test;
};

// Line-delimited snapshot: one JSON object per line with fields
// {index, x, y_hidden, split}, split in {pool, train, test}. Byte layout is
// documented in the README; reloading reproduces the dataset exactly.
void save_snapshot(const std::string& path, const Dataset& data);
Dataset load_snapshot(const std::string& path);

}  // namespace batchgfn
