#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kairos/distribution.hpp"
#include "kairos/types.hpp"

namespace kairos {

// Synthetic "zero latency" distribution label added to every distance
// matrix; it orients the 1D embedding so smaller anchor distance means
// shorter remaining latency. Agent names may not collide with it.
inline const char kAnchorLabel[] = "__anchor__";

struct DistanceMatrix {
  std::vector<std::string> labels;       // agents plus kAnchorLabel (last)
  std::vector<std::vector<double>> d;    // symmetric, zero diagonal

  std::size_t size() const { return labels.size(); }
  std::size_t anchor_index() const { return labels.size() - 1; }
};

// Pairwise 1-Wasserstein distances between the agents' remaining-latency
// distributions, plus the anchor point mass at zero (whose distance to an
// empirical distribution is its sample mean). All inputs must be converged
// non-empty distributions; throws when the map is empty.
DistanceMatrix build_distance_matrix(
    const std::map<AgentId, const EmpiricalDistribution*>& dists);
DistanceMatrix build_distance_matrix_from_samples(
    const std::map<AgentId, std::vector<double>>& samples);

// Agent -> 1D coordinate with the anchor fixing the priority direction.
// Rank of an agent = rank of |coord - anchor_coord|, ascending.
struct PriorityTable {
  std::map<AgentId, double> coord;
  double anchor_coord = 0.0;
  std::uint64_t version = 0;

  bool empty() const { return coord.empty(); }
  std::optional<double> anchor_distance(const AgentId& agent) const;
  // Median anchor distance among known agents; the cold-start priority for
  // agents that have not converged yet. Zero when the table is empty.
  double median_anchor_distance() const;
  // Effective priority key: anchor distance, or the cold-start median.
  double priority_key(const AgentId& agent) const;
  // Agents ranked by anchor distance ascending (ties by name).
  std::vector<AgentId> ranking() const;
  std::string csv() const;
};

// Classical (Torgerson) MDS restricted to one dimension: double-center the
// squared distance matrix and scale the top eigenvector by sqrt of its
// leading eigenvalue. Exact for distance matrices realizable on a line. A
// degenerate all-zero matrix maps every label to coordinate zero (one
// priority class). Requires n >= 2.
std::vector<double> classical_mds_1d(const std::vector<std::vector<double>>& d);

PriorityTable mds_embed_1d(const DistanceMatrix& m, std::uint64_t version = 0);

// Global ready queue. Dequeue order is (agent priority ascending by anchor
// distance, then app_start, then queue_enter, then msg_id, then uid); the
// priority component comes from whatever key function the active scheduling
// strategy supplies, so re-sorting is lazy: the latest table version is
// consulted at dequeue time.
class ReadyQueue {
 public:
  void enqueue(PendingRequest r) { entries_.push_back(std::move(r)); }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<PendingRequest>& entries() const { return entries_; }

  // Index of the best entry under (key, app_start, queue_enter, msg, uid).
  template <typename Key>
  std::size_t best_index(Key&& key) const;
  template <typename Key>
  const PendingRequest& peek(Key&& key) const;
  template <typename Key>
  PendingRequest pop(Key&& key);

 private:
  std::vector<PendingRequest> entries_;
};

template <typename Key>
std::size_t ReadyQueue::best_index(Key&& key) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = entries_[best];
    const auto ka = key(a);
    const auto kb = key(b);
    if (std::tie(ka, a.app_start, a.queue_enter, a.msg_id, a.uid) <
        std::tie(kb, b.app_start, b.queue_enter, b.msg_id, b.uid)) {
      best = i;
    }
  }
  return best;
}

template <typename Key>
const PendingRequest& ReadyQueue::peek(Key&& key) const {
  return entries_[best_index(key)];
}

template <typename Key>
PendingRequest ReadyQueue::pop(Key&& key) {
  const std::size_t i = best_index(key);
  PendingRequest r = std::move(entries_[i]);
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
  return r;
}

enum class PairScope {
  CrossAgent,  // pairs between requests of different agents (default)
  All,         // every request pair
};

// Fraction of correctly ordered pairs in a schedule: a pair is correct when
// the earlier-scheduled request has strictly smaller true remaining latency;
// latency ties score 0.5. Requests missing from `true_remaining` are
// skipped. Returns nullopt when fewer than two comparable requests exist.
std::optional<double> pairwise_sorting_accuracy(
    const std::vector<PendingRequest>& schedule_order,
    const std::map<std::uint64_t, double>& true_remaining,
    PairScope scope = PairScope::CrossAgent);

}  // namespace kairos
