#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "kairos/dispatcher.hpp"
#include "kairos/priority.hpp"
#include "kairos/profiler.hpp"
#include "kairos/scheduler.hpp"
#include "kairos/types.hpp"
#include "kairos/workflow.hpp"
#include "kairos/workload.hpp"

namespace kairos {

// Static profile of one LLM instance. Each running request decodes at
// decode_rate independently (continuous batching with per-request streams);
// memory is counted in KV tokens.
struct InstanceProfile {
  InstanceId id = 0;
  double capacity_tokens = 0.0;
  double decode_rate = 50.0;     // k: generated tokens per second per request
  double prefill_rate = 8000.0;  // prompt tokens per second
  int max_batch = 64;
};

struct EngineConfig {
  std::vector<InstanceProfile> instances;
  double dispatch_period = 0.1;    // periodic scheduling round
  double recompute_fraction = 1.0; // share of generated tokens lost on preempt
  bool collect_decision_log = false;
  bool collect_event_log = false;
  bool measure_overhead = false;
  double default_expected_time = 1.0;  // T before any sample exists
};

enum class EventKind {
  Arrival = 0,
  PrefillDone = 1,
  TokenTick = 2,
  RequestDone = 3,
  PreemptCheck = 4,
  DispatchRound = 5,
};

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t seq = 0;  // schedule order; totalizes same-time ordering
  std::uint64_t uid = 0;
  InstanceId instance = -1;
  std::uint64_t epoch = 0;  // stale-event filter after preemption
};

struct InstanceStatus {
  InstanceId id = 0;
  double live_kv = 0.0;
  int running = 0;
  int waiting = 0;
  std::uint64_t preempted_total = 0;
};

struct StatusSnapshot {
  double time = 0.0;
  std::vector<InstanceStatus> instances;
};

struct CompletedCall {
  RequestRecord record;
  std::uint64_t uid = 0;
  double first_enqueue = 0.0;
  double queue_seconds = 0.0;  // summed over episodes (global + engine wait)
  int episodes = 0;
  int preemptions = 0;
  InstanceId instance = -1;
};

struct CompletedInstanceStat {
  MessageId msg_id;
  double app_start = 0.0;
  double finish = 0.0;
  std::int64_t output_tokens = 0;  // across all of the instance's requests
  std::size_t calls = 0;
};

struct DecisionLogRow {
  double time = 0.0;
  std::uint64_t uid = 0;
  AgentId agent;
  std::optional<InstanceId> target;
  double predicted_peak = 0.0;
  std::vector<double> candidate_peaks;
};

struct RunResult {
  std::vector<CompletedCall> calls;             // completion order
  std::vector<CompletedInstanceStat> instances; // completion order
  std::uint64_t preemption_events = 0;
  std::uint64_t preempted_requests = 0;  // unique requests ever preempted
  double wasted_kv_tokens = 0.0;
  double completed_kv_tokens = 0.0;
  double prefill_seconds = 0.0;
  double decode_seconds = 0.0;
  std::uint64_t total_events = 0;
  double end_time = 0.0;
  std::vector<InstanceStatus> final_status;
  std::vector<PriorityTable> table_history;
  std::vector<DecisionLogRow> decisions;
  std::vector<std::string> event_log;
  std::vector<double> sort_seconds;  // queue selection cost per decision
  std::vector<double> eval_seconds;  // instance evaluation cost per decision
};

// Deterministic single-threaded discrete-event simulation of LLM instances
// with continuous batching, KV growth per generated token, and
// preempt-with-recompute when an instance exceeds capacity. Scheduler,
// dispatcher, profiler and analyzer run as logical components invoked
// synchronously from the loop.
class Simulator {
 public:
  Simulator(EngineConfig cfg, const WorkloadRealization& realization,
            SchedulerPolicy& scheduler, Dispatcher& dispatcher,
            LatencyProfiler& profiler, WorkflowAnalyzer& analyzer);

  RunResult run();

  StatusSnapshot snapshot() const;
  double now() const { return clock_; }

 private:
  struct RunningRequest {
    PendingRequest request;
    const PlannedCall* plan = nullptr;
    std::int64_t tokens_generated = 0;  // includes retained tokens
    std::int64_t kv_tokens = 0;
    enum class Phase { Prefill, Decode } phase = Phase::Prefill;
    double exec_start = 0.0;
    std::uint64_t epoch = 0;
  };

  struct InstanceState {
    InstanceProfile profile;
    std::map<std::uint64_t, RunningRequest> running;
    std::vector<PendingRequest> waiting;  // committed, not yet admitted
    double live_kv = 0.0;
    std::uint64_t preempted_total = 0;
  };

  struct CallRuntime {
    const PlannedCall* plan = nullptr;
    std::size_t instance_index = 0;  // into realization
    int remaining_parents = 0;
    std::optional<AgentId> upstream;  // completing parent that fired the call
    double app_start = 0.0;
    double first_enqueue = -1.0;
    double enqueue_time = 0.0;
    double queue_seconds = 0.0;
    std::int64_t kept_tokens = 0;
    int episodes = 0;
    int preemptions = 0;
    std::uint64_t epoch = 0;
    bool completed = false;
  };

  struct WorkflowRuntime {
    const PlannedInstance* plan = nullptr;
    std::size_t remaining_calls = 0;
    std::vector<RequestRecord> records;
    std::vector<std::vector<std::uint64_t>> children;  // by node_id
  };

  struct EventOrder {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };

  void schedule(double time, EventKind kind, std::uint64_t uid = 0,
                InstanceId instance = -1, std::uint64_t epoch = 0);
  void schedule_dispatch_round(double time);

  void handle_arrival(const SimEvent& ev);
  void handle_prefill_done(const SimEvent& ev);
  void handle_token_tick(const SimEvent& ev);
  void handle_request_done(const SimEvent& ev);
  void handle_preempt_check(const SimEvent& ev);
  void handle_dispatch_round(const SimEvent& ev);

  void enqueue_call(std::uint64_t uid, double now);
  InstanceState& state_of(InstanceId id);
  void dispatch_loop();
  void try_admit(InstanceState& inst);
  void admit(InstanceState& inst, const PendingRequest& r);
  void evict(InstanceState& inst, std::uint64_t uid);
  void on_workflow_complete(WorkflowRuntime& wf);
  double expected_exec_time(const PendingRequest& r) const;
  std::vector<InstanceLive> collect_live();
  bool work_pending() const;
  RunningRequest* find_running(const SimEvent& ev, InstanceState** inst_out);

  EngineConfig cfg_;
  const WorkloadRealization& realization_;
  SchedulerPolicy& scheduler_;
  Dispatcher& dispatcher_;
  LatencyProfiler& profiler_;
  WorkflowAnalyzer& analyzer_;

  std::priority_queue<SimEvent, std::vector<SimEvent>, EventOrder> events_;
  std::uint64_t next_seq_ = 0;
  double clock_ = 0.0;
  bool dispatch_round_pending_ = false;
  bool tick_scheduled_ = false;
  std::size_t arrivals_remaining_ = 0;

  std::vector<InstanceState> instances_;
  ReadyQueue queue_;
  std::map<std::uint64_t, CallRuntime> calls_;
  std::map<MessageId, WorkflowRuntime> workflows_;
  std::shared_ptr<const ProfilerSnapshot> profile_;
  std::uint64_t completed_instances_ = 0;
  std::set<std::uint64_t> preempted_uids_;

  RunResult result_;
};

}  // namespace kairos
