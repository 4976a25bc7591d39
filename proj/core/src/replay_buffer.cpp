#include "wadc/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wadc {

PrioritizedReplay::PrioritizedReplay(ReplayConfig config) : config_(config) {
  if (config_.capacity == 0) throw InvalidArgument("replay capacity must be positive");
  if (config_.alpha < 0.0 || config_.epsilon < 0.0)
    throw InvalidArgument("replay exponents must be non-negative");
  items_.reserve(config_.capacity);
}

void PrioritizedReplay::add(Transition t) {
  t.priority = max_priority_;
  if (items_.size() < config_.capacity) {
    items_.push_back(std::move(t));
    next_ = items_.size() % config_.capacity;
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % config_.capacity;
  }
}

const Transition& PrioritizedReplay::at(std::size_t i) const {
  if (i >= items_.size()) throw InvalidArgument("replay index out of range");
  if (items_.size() < config_.capacity) return items_[i];
  return items_[(next_ + i) % config_.capacity];
}

std::vector<double> PrioritizedReplay::probabilities() const {
  std::vector<double> p(items_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    p[i] = std::pow(items_[i].priority + config_.epsilon, config_.alpha);
    total += p[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("all replay priorities are zero");
  for (auto& v : p) v /= total;
  return p;
}

ReplaySample PrioritizedReplay::sample(std::size_t batch_size, double beta, std::mt19937_64& rng) const {
  if (items_.empty()) throw InvalidArgument("empty replay buffer");
  if (batch_size > items_.size()) throw InvalidArgument("replay buffer smaller than batch");
  const auto probs = probabilities();
  std::vector<double> cdf(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());

  std::uniform_real_distribution<double> uni(0.0, cdf.back());
  ReplaySample out;
  out.indices.reserve(batch_size);
  out.weights.reserve(batch_size);
  out.batch.reserve(batch_size);
  const double n = static_cast<double>(items_.size());
  double wmax = 0.0;
  for (std::size_t k = 0; k < batch_size; ++k) {
    const double u = uni(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    while (probs[idx] == 0.0 && idx > 0) --idx;  // never land on a zero-probability slot
    out.indices.push_back(idx);
    const double w = std::pow(n * probs[idx], -beta);
    out.weights.push_back(w);
    wmax = std::max(wmax, w);
    out.batch.push_back(items_[idx]);
  }
  for (auto& w : out.weights) w /= wmax;
  return out;
}

void PrioritizedReplay::update_priorities(const std::vector<std::size_t>& indices,
                                          const std::vector<double>& priorities) {
  if (indices.size() != priorities.size()) throw InvalidArgument("priority update length mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= items_.size()) throw InvalidArgument("replay index out of range");
    const double p = priorities[k];
    if (!std::isfinite(p) || p < 0.0) throw InvalidArgument("priorities must be finite and non-negative");
    items_[indices[k]].priority = p;
    max_priority_ = std::max(max_priority_, p);
  }
}

void PrioritizedReplay::restore(std::vector<Transition> items, std::size_t next_slot, double max_priority) {
  if (items.size() > config_.capacity) throw InvalidArgument("restored replay exceeds capacity");
  items_ = std::move(items);
  next_ = next_slot % config_.capacity;
  max_priority_ = max_priority;
}

}  // namespace wadc
