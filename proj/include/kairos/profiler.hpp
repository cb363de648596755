#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kairos/distribution.hpp"
#include "kairos/types.hpp"

namespace kairos {

// Remaining end-to-end latency samples for one agent: each sample is
// (workflow instance finish time - this request's exec_start), so samples
// from every observed downstream path merge into one distribution in their
// historical proportions.
struct RemainingLatencyDistribution {
  AgentId agent;
  EmpiricalDistribution dist;
};

// Immutable per-agent view handed to scheduler and dispatcher. Safe to share
// read-only across threads.
struct AgentProfile {
  std::vector<double> exec_samples;       // sorted single-request latencies
  std::vector<double> remaining_samples;  // sorted remaining latencies
  bool exec_converged = false;
  bool remaining_converged = false;
};

struct ProfilerSnapshot {
  std::map<AgentId, AgentProfile> agents;
  std::uint64_t version = 0;

  // Expected execution time for the memory model: mode of the single-request
  // latency distribution, median below min_samples, `fallback` when the
  // agent has no samples at all.
  double expected_exec_time(const AgentId& agent, double fallback) const;
};

struct ProfilerConfig {
  ConvergenceConfig exec;                      // single-request distributions
  ConvergenceConfig remaining{16, 0.05, 4096}; // sliding window per agent
  std::size_t mode_min_samples = 16;
};

// Owns every distribution; single-writer. Readers receive snapshots
// refreshed after each completed instance (configurable via snapshot()).
class LatencyProfiler {
 public:
  explicit LatencyProfiler(ProfilerConfig cfg = {});

  // One completed request's engine latency (exec_end - exec_start).
  void record_execution(const AgentId& agent, double latency);

  // One completed workflow instance: adds a remaining-latency sample for
  // every record (instance finish - record exec_start).
  void record_remaining(const std::vector<RequestRecord>& instance_records);

  // Convenience for trace-driven analysis: groups by msg_id, records both
  // distributions for every instance.
  void ingest_trace(const std::vector<RequestRecord>& records);

  const EmpiricalDistribution* exec_distribution(const AgentId& agent) const;
  const RemainingLatencyDistribution* remaining_distribution(
      const AgentId& agent) const;

  // Agents whose remaining-latency distribution has converged.
  std::map<AgentId, const EmpiricalDistribution*> converged_remaining() const;

  // True when some agent's remaining distribution converged since the last
  // call; used to trigger priority rebuilds.
  bool take_newly_converged();

  std::shared_ptr<const ProfilerSnapshot> snapshot();

  // Per-agent summary rows (count, min, median, mode, p90, max, converged)
  // as CSV for the distribution-dump interface.
  std::string summary_csv() const;

 private:
  ProfilerConfig cfg_;
  std::map<AgentId, EmpiricalDistribution> exec_;
  std::map<AgentId, RemainingLatencyDistribution> remaining_;
  std::uint64_t version_ = 0;
  bool newly_converged_ = false;
  std::map<AgentId, bool> was_converged_;
};

}  // namespace kairos
