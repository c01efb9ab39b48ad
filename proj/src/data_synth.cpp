#include "data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "linalg.hpp"

namespace batchgfn {

std::vector<double> TrainSet::xs() const {
  std::vector<double> v(points.size());
  for (size_t i = 0; i < points.size(); ++i) v[i] = points[i].x;
  return v;
}

std::vector<double> TrainSet::ys() const {
  std::vector<double> v(points.size());
  for (size_t i = 0; i < points.size(); ++i) v[i] = points[i].y;
  return v;
}

double target_mean(double x) {
  const double x2 = x * x;
  const double poly = -0.6667 - 0.6012 * x - 1.0172 * x2 - 0.7687 * x2 * x +
                      1.4680 * x2 * x2 * x - 0.1678 * x2 * x2 * x2;
  return poly * std::sin(std::numbers::pi * x) * std::exp(-0.5 * x2);
}

PoolSet::PoolSet(std::vector<double> xs, std::vector<double> hidden_ys)
    : xs_(std::move(xs)), ys_(std::move(hidden_ys)) {
  if (xs_.size() != ys_.size())
    throw InvalidArgument("PoolSet: xs/ys size mismatch");
  active_.resize(xs_.size());
  for (size_t i = 0; i < xs_.size(); ++i) active_[i] = static_cast<int>(i);
}

std::vector<double> PoolSet::active_xs() const {
  std::vector<double> v(active_.size());
  for (size_t i = 0; i < active_.size(); ++i) v[i] = xs_[active_[i]];
  return v;
}

bool PoolSet::is_active(int original_index) const {
  return std::binary_search(active_.begin(), active_.end(), original_index);
}

std::vector<LabeledPoint> PoolSet::reveal_and_remove(std::vector<int> positions) {
  std::vector<LabeledPoint> out;
  out.reserve(positions.size());
  std::vector<int> originals;
  originals.reserve(positions.size());
  for (int pos : positions) {
    if (pos < 0 || pos >= size())
      throw InvalidArgument("reveal_and_remove: position out of range");
    originals.push_back(active_[pos]);
  }
  // Duplicate positions would double-label a point.
  std::vector<int> sorted = originals;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("reveal_and_remove: duplicate positions");
  for (int orig : originals) out.push_back({xs_[orig], ys_[orig]});
  std::erase_if(active_, [&](int idx) {
    return std::binary_search(sorted.begin(), sorted.end(), idx);
  });
  return out;
}

PoolSet sample_pool(int n, double noise_scale, uint64_t rng_seed) {
  if (n < 1) throw InvalidArgument("sample_pool: n must be >= 1");
  if (noise_scale < 0) throw InvalidArgument("sample_pool: negative noise_scale");
  Rng root(rng_seed);
  Rng rx = root.split("pool/x");
  Rng rn = root.split("pool/noise");
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) xs[i] = rx.normal();
  for (int i = 0; i < n; ++i) ys[i] = target_mean(xs[i]) + noise_scale * rn.normal();
  return PoolSet(std::move(xs), std::move(ys));
}

TrainSet sample_test_set(int n, double noise_scale, uint64_t rng_seed) {
  Rng root(rng_seed);
  Rng rx = root.split("test/x");
  Rng rn = root.split("test/noise");
  TrainSet out;
  out.points.resize(n);
  for (int i = 0; i < n; ++i) out.points[i].x = rx.normal();
  for (int i = 0; i < n; ++i)
    out.points[i].y = target_mean(out.points[i].x) + noise_scale * rn.normal();
  return out;
}

std::pair<TrainSet, PoolSet> draw_seed_set(const PoolSet& pool, int b0, Rng& rng) {
  if (b0 < 0 || b0 > pool.size())
    throw InvalidArgument("draw_seed_set: b0 exceeds pool size");
  // Partial Fisher-Yates over active positions.
  std::vector<int> perm(pool.size());
  for (int i = 0; i < pool.size(); ++i) perm[i] = i;
  for (int i = 0; i < b0; ++i) {
    const int j = i + static_cast<int>(rng.uniform_below(perm.size() - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> chosen(perm.begin(), perm.begin() + b0);
  PoolSet residual = pool;
  TrainSet train;
  train.points = residual.reveal_and_remove(chosen);
  return {std::move(train), std::move(residual)};
}

// Snapshot layout: one JSON object per line, keys in the fixed order
// {index, x, y_hidden, split}. Pool-index space comes first (split "pool"
// for active points, "train" for points already drawn), in ascending index
// order; test rows follow with indices continuing after the pool. Train
// points are therefore stored (and reloaded) in ascending pool-index order.
void save_snapshot(const std::string& path, const Dataset& data) {
  const PoolSet& p = data.pool;
  if (data.train.size() != p.total_size() - p.size())
    throw InvalidArgument(
        "save_snapshot: train set does not match the pool's drawn points");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_snapshot: cannot open " + path);
  for (int i = 0; i < p.total_size(); ++i) {
    nlohmann::ordered_json rec;
    rec["index"] = i;
    rec["x"] = p.x_by_original(i);
    rec["y_hidden"] = p.hidden_label_for_snapshot(i);
    rec["split"] = p.is_active(i) ? "pool" : "train";
    out << rec.dump() << "\n";
  }
  int idx = p.total_size();
  for (const auto& lp : data.test.points) {
    nlohmann::ordered_json rec;
    rec["index"] = idx++;
    rec["x"] = lp.x;
    rec["y_hidden"] = lp.y;
    rec["split"] = "test";
    out << rec.dump() << "\n";
  }
}

Dataset load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_snapshot: cannot open " + path);
  struct Row {
    int index;
    double x, y;
    std::string split;
  };
  std::vector<Row> pool_rows;
  TrainSet test;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    Row r{j.at("index").get<int>(), j.at("x").get<double>(),
          j.at("y_hidden").get<double>(), j.at("split").get<std::string>()};
    if (r.split == "test") {
      test.points.push_back({r.x, r.y});
    } else if (r.split == "pool" || r.split == "train") {
      pool_rows.push_back(std::move(r));
    } else {
      throw std::runtime_error("load_snapshot: unknown split '" + r.split + "'");
    }
  }
  std::sort(pool_rows.begin(), pool_rows.end(),
            [](const Row& a, const Row& b) { return a.index < b.index; });
  std::vector<double> xs, ys;
  std::vector<int> train_positions;
  for (const Row& r : pool_rows) {
    if (r.index != static_cast<int>(xs.size()))
      throw std::runtime_error("load_snapshot: pool indices not contiguous");
    if (r.split == "train") train_positions.push_back(r.index);
    xs.push_back(r.x);
    ys.push_back(r.y);
  }
  Dataset data;
  data.pool = PoolSet(std::move(xs), std::move(ys));
  data.train.points = data.pool.reveal_and_remove(train_positions);
  data.test = std::move(test);
  return data;
}

}  // namespace batchgfn
