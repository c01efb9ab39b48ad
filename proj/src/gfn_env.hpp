#pragma once

#include <cstdint>
#include <vector>

namespace batchgfn {

// A node of the batch-construction DAG: a duplicate-free set of pool indices
// kept in canonical sorted order, so set equality is structural equality.
struct BatchState {
  std::vector<int> indices;  // sorted, unique
  int capacity = 0;          // B

  int size() const { return static_cast<int>(indices.size()); }
  bool is_terminal() const { return size() == capacity; }
  bool contains(int idx) const;
  bool operator==(const BatchState& other) const {
    return indices == other.indices && capacity == other.capacity;
  }
};

struct Trajectory {
  std::vector<BatchState> states;  // s_0 .. s_B
  std::vector<int> actions;        // B added indices
};

// The environment is fully described by the pool size and the batch size;
// all operations are pure.
struct BatchEnv {
  int pool_size = 0;  // N
  int batch_size = 0; // B
};

BatchState initial_state(const BatchEnv& env);

// Pool indices not in s while |s| < B; empty at terminal states. Ascending.
std::vector<int> allowed_actions(const BatchState& s, int pool_size);

// Inserts `action` keeping canonical order. Throws on duplicates (a masking
// bug upstream) or when the state is already full.
BatchState apply(const BatchState& s, int action);

// All |s| parents: (state minus one element, the removed index).
std::vector<std::pair<BatchState, int>> parents(const BatchState& s);

// Number of orderings that reach the set s: |s|!.
uint64_t count_trajectories(const BatchState& s);

// Validity: sorted, unique, within [0, pool_size), |s| <= capacity.
bool valid_state(const BatchState& s, int pool_size);

}  // namespace batchgfn
