#include "gfn_env.hpp"

#include <algorithm>

#include "linalg.hpp"

namespace batchgfn {

bool BatchState::contains(int idx) const {
  return std::binary_search(indices.begin(), indices.end(), idx);
}

BatchState initial_state(const BatchEnv& env) {
  if (env.batch_size < 1 || env.batch_size > env.pool_size)
    throw InvalidArgument("initial_state: need 1 <= B <= N");
  return BatchState{{}, env.batch_size};
}

std::vector<int> allowed_actions(const BatchState& s, int pool_size) {
  std::vector<int> out;
  if (s.is_terminal()) return out;
  out.reserve(pool_size - s.size());
  for (int i = 0; i < pool_size; ++i)
    if (!s.contains(i)) out.push_back(i);
  return out;
}

BatchState apply(const BatchState& s, int action) {
  if (s.is_terminal()) throw InvalidArgument("apply: state is terminal");
  if (s.contains(action))
    throw InvalidArgument("apply: duplicate index " + std::to_string(action) +
                          " (masking bug upstream)");
  BatchState next = s;
  next.indices.insert(
      std::upper_bound(next.indices.begin(), next.indices.end(), action),
      action);
  return next;
}

std::vector<std::pair<BatchState, int>> parents(const BatchState& s) {
  std::vector<std::pair<BatchState, int>> out;
  out.reserve(s.size());
  for (int pos = 0; pos < s.size(); ++pos) {
    BatchState parent = s;
    const int removed = parent.indices[pos];
    parent.indices.erase(parent.indices.begin() + pos);
    out.emplace_back(std::move(parent), removed);
  }
  return out;
}

uint64_t count_trajectories(const BatchState& s) {
  uint64_t f = 1;
  for (int i = 2; i <= s.size(); ++i) f *= static_cast<uint64_t>(i);
  return f;
}

bool valid_state(const BatchState& s, int pool_size) {
  if (s.size() > s.capacity) return false;
  for (int i = 0; i < s.size(); ++i) {
    if (s.indices[i] < 0 || s.indices[i] >= pool_size) return false;
    if (i > 0 && s.indices[i] <= s.indices[i - 1]) return false;
  }
  return true;
}

}  // namespace batchgfn
