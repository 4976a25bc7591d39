#pragma once

#include <random>
#include <vector>

#include "wadc/types.hpp"

namespace wadc {

/// One MDP transition (s, a, r, s', done) with its replay priority.
struct Transition {
  Vec state;
  Vec action;  // normalized, in [-1, 1]
  double reward = 0.0;
  Vec next_state;
  bool done = false;
  double priority = 1.0;
};

struct ReplayConfig {
  std::size_t capacity = 1000;
  double alpha = 0.6;    // priority exponent
  double epsilon = 1e-3;  // added to every priority before exponentiation
};

struct ReplaySample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  // importance weights, max-normalized
  std::vector<Transition> batch;
};

/// Proportional prioritized replay over a ring buffer. New transitions enter
/// with the largest priority seen so far; the oldest entry is evicted first.
class PrioritizedReplay {
public:
  explicit PrioritizedReplay(ReplayConfig config = {});

  void add(Transition t);
  /// Samples with replacement, P(i) = (p_i + eps)^alpha / sum_j (p_j + eps)^alpha.
  ReplaySample sample(std::size_t batch_size, double beta, std::mt19937_64& rng) const;
  void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& priorities);

  std::vector<double> probabilities() const;

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return config_.capacity; }
  const ReplayConfig& config() const noexcept { return config_; }

  /// Ring storage; `at(0)` is the oldest live entry.
  const Transition& at(std::size_t i) const;

  // Raw ring state, exposed for checkpointing.
  const std::vector<Transition>& storage() const noexcept { return items_; }
  std::size_t next_slot() const noexcept { return next_; }
  double max_priority() const noexcept { return max_priority_; }
  void restore(std::vector<Transition> items, std::size_t next_slot, double max_priority);

private:
  ReplayConfig config_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace wadc
