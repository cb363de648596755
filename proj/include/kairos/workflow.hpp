#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kairos/types.hpp"

namespace kairos {

enum class FanoutKind { Single, Parallel, Sequential };

const char* to_string(FanoutKind kind);

// Execution span of one downstream call, used for parallel/sequential
// disambiguation of multi-downstream call patterns.
struct TaskSpan {
  AgentId agent;
  double exec_start = 0.0;
  double exec_end = 0.0;
};

// Sweep-line classification over >= 2 spans that share one upstream within a
// single workflow instance: Parallel iff two intervals are ever open at the
// same time. Interval endpoints that merely touch (within kTimeEpsilon) do
// not count as overlap. Throws on spans with exec_end < exec_start.
FanoutKind classify_fanout(const std::vector<TaskSpan>& spans);

inline constexpr double kTimeEpsilon = 1e-9;

struct WorkflowEdge {
  AgentId from;
  AgentId to;
  std::uint64_t observations = 0;
};

struct FanoutPattern {
  AgentId node;
  std::set<AgentId> downstreams;  // union over all observations
  FanoutKind kind = FanoutKind::Single;
  // Per-instance evidence tallies behind the majority vote.
  std::uint64_t parallel_obs = 0;
  std::uint64_t sequential_obs = 0;
  std::uint64_t single_obs = 0;
};

// Reconstructed agent call graph. Aggregates observations from completed
// workflow instances; all containers are ordered so the result is
// independent of ingestion order.
class WorkflowGraph {
 public:
  // Adds one record's node/edge/entry evidence. Safe to call record by
  // record; fanout evidence is contributed by ingest_instance.
  void ingest(const RequestRecord& record);

  // Folds one completed instance (all records sharing a msg_id): ingests
  // every record, then classifies each upstream's multi-call pattern with
  // the sweep line and updates the majority tallies. Entry conflicts within
  // the instance are reported as diagnostics; records are kept regardless.
  void ingest_instance(const std::vector<RequestRecord>& records);

  const std::set<AgentId>& nodes() const { return nodes_; }
  std::vector<WorkflowEdge> edges() const;
  std::uint64_t edge_observations(const AgentId& from, const AgentId& to) const;
  bool has_edge(const AgentId& from, const AgentId& to) const;

  // Entry agents observed (upstream-less). Single-application graphs have
  // exactly one; co-located traces may contribute one per application.
  const std::set<AgentId>& entries() const { return entries_; }
  // The unique entry; throws if the graph has none or several.
  const AgentId& entry() const;

  const std::map<AgentId, FanoutPattern>& fanouts() const { return fanouts_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  std::uint64_t instances_ingested() const { return instances_ingested_; }

  std::vector<AgentId> downstream_agents(const AgentId& from) const;

  // Edges that close a cycle when walking from the entries (e.g. the
  // re-development loop in a feedback workflow).
  std::set<std::pair<AgentId, AgentId>> feedback_edges() const;

  // All simple downstream paths from `agent` (as node sequences starting at
  // `agent`) to agents where no edge remains traversable. Non-feedback edges
  // are used at most once per path; feedback edges at most `max_loop` times,
  // and every loop exit point is also reported as a path of its own. Throws
  // if the agent is unknown.
  std::vector<std::vector<AgentId>> downstream_paths(const AgentId& agent,
                                                     int max_loop = 3) const;

  // Longest remaining path length counted in stages (nodes, including the
  // agent itself) with feedback edges unrolled once. Throws on unknown
  // agents.
  int topo_depth(const AgentId& agent) const;

  // Human-readable reconstruction report (nodes, edges with counts, fanout
  // kinds, entries, diagnostics).
  std::string report() const;

 private:
  std::set<AgentId> nodes_;
  std::map<std::pair<AgentId, AgentId>, std::uint64_t> edges_;
  std::set<AgentId> entries_;
  std::map<AgentId, FanoutPattern> fanouts_;
  std::vector<std::string> diagnostics_;
  std::uint64_t instances_ingested_ = 0;
};

// Single-writer online analyzer: buffers records per msg_id and folds each
// instance into the graph when the instance completes. Readers receive
// immutable snapshots that are safe to share across threads.
class WorkflowAnalyzer {
 public:
  void observe(const RequestRecord& record);
  void complete_instance(const MessageId& msg_id);
  // Groups a full trace by msg_id and ingests every group as one instance.
  void ingest_trace(const std::vector<RequestRecord>& records);

  std::shared_ptr<const WorkflowGraph> snapshot() const;
  std::size_t pending_instances() const { return pending_.size(); }

 private:
  void refresh_snapshot();

  WorkflowGraph graph_;
  std::map<MessageId, std::vector<RequestRecord>> pending_;
  std::shared_ptr<const WorkflowGraph> snapshot_;
};

}  // namespace kairos
