#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kairos/priority.hpp"
#include "kairos/profiler.hpp"
#include "kairos/types.hpp"

namespace kairos {

// Total queue-ordering key; smaller dequeues first. The ready queue breaks
// remaining ties by (msg_id, uid).
struct OrderKey {
  double k0 = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;

  friend bool operator<(const OrderKey& a, const OrderKey& b) {
    if (a.k0 != b.k0) return a.k0 < b.k0;
    if (a.k1 != b.k1) return a.k1 < b.k1;
    return a.k2 < b.k2;
  }
};

// Strategy interface consulted lazily at every dequeue/admission decision, so
// a rebuilt priority table takes effect without explicit re-sorting.
class SchedulerPolicy {
 public:
  virtual ~SchedulerPolicy() = default;
  virtual std::string name() const = 0;
  virtual OrderKey order_key(const PendingRequest& r) const = 0;
  // Agent-level rank for preemption victim selection; the largest rank is
  // evicted first (ties resolved by the engine on latest exec_start).
  virtual double victim_rank(const AgentId&) const { return 0.0; }
  // Called once per completed workflow instance with the refreshed profile.
  virtual void on_instance_complete(const ProfilerSnapshot&,
                                    std::uint64_t /*completed_instances*/,
                                    bool /*newly_converged*/) {}
  virtual const PriorityTable* table() const { return nullptr; }
};

// First-come-first-served on request-level queue entry time (the order the
// request reached the current stage's queue).
class FcfsScheduler : public SchedulerPolicy {
 public:
  std::string name() const override { return "fcfs"; }
  OrderKey order_key(const PendingRequest& r) const override {
    return {r.queue_enter, r.app_start, 0.0};
  }
};

// Workflow-topology baseline: fewer remaining stages first, FCFS within a
// depth class. Depths come from the declared application structure.
class TopoDepthScheduler : public SchedulerPolicy {
 public:
  explicit TopoDepthScheduler(std::map<AgentId, int> depths)
      : depths_(std::move(depths)) {}
  std::string name() const override { return "topo_depth"; }
  OrderKey order_key(const PendingRequest& r) const override {
    return {static_cast<double>(depth_of(r.agent)), r.queue_enter, 0.0};
  }
  double victim_rank(const AgentId& agent) const override {
    return static_cast<double>(depth_of(agent));
  }

 private:
  int depth_of(const AgentId& agent) const {
    auto it = depths_.find(agent);
    return it == depths_.end() ? 1 : it->second;
  }
  std::map<AgentId, int> depths_;
};

// Shortest-remaining-time-first on the simulation ground truth; the lower
// bound reference, only meaningful inside the simulator.
class OracleScheduler : public SchedulerPolicy {
 public:
  explicit OracleScheduler(const std::map<std::uint64_t, double>* remaining)
      : remaining_(remaining) {}
  std::string name() const override { return "oracle"; }
  OrderKey order_key(const PendingRequest& r) const override {
    auto it = remaining_->find(r.uid);
    const double rem = it == remaining_->end() ? 0.0 : it->second;
    return {rem, r.queue_enter, 0.0};
  }

 private:
  const std::map<std::uint64_t, double>* remaining_;
};

struct KairosSchedulerConfig {
  std::uint64_t rebuild_interval = 256;  // completed instances per rebuild
  bool keep_table_history = false;
};

// Distribution-driven agent priorities: anchor distance from the 1D MDS
// embedding of the remaining-latency Wasserstein matrix, then earliest
// application-level start time within an agent. Unconverged agents ride at
// the median anchor distance; with no table at all the order degrades to
// application start / queue entry order.
class KairosScheduler : public SchedulerPolicy {
 public:
  explicit KairosScheduler(KairosSchedulerConfig cfg = {}) : cfg_(cfg) {}

  std::string name() const override { return "kairos"; }

  OrderKey order_key(const PendingRequest& r) const override {
    return {table_.priority_key(r.agent), r.app_start, r.queue_enter};
  }

  double victim_rank(const AgentId& agent) const override {
    return table_.priority_key(agent);
  }

  void on_instance_complete(const ProfilerSnapshot& profile,
                            std::uint64_t completed_instances,
                            bool newly_converged) override;

  const PriorityTable* table() const override { return &table_; }
  const std::vector<PriorityTable>& table_history() const { return history_; }

 private:
  void rebuild(const ProfilerSnapshot& profile);

  KairosSchedulerConfig cfg_;
  PriorityTable table_;
  std::vector<PriorityTable> history_;
  std::uint64_t next_version_ = 1;
};

}  // namespace kairos
