#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace kairos {

// Role label of an LLM-calling agent. Equality is exact string match; ids
// are unique within a deployment and usable as map keys.
using AgentId = std::string;

// Globally unique id shared by every agent request spawned by one user
// request (one workflow instance).
using MessageId = std::string;

// One completed agent-level LLM call, the unit of tracing and profiling.
struct RequestRecord {
  MessageId msg_id;
  AgentId agent;
  std::optional<AgentId> upstream;  // absent for the workflow entry call
  double exec_start = 0.0;          // engine start, seconds on the sim clock
  double exec_end = 0.0;
  std::int64_t prompt_tokens = 1;
  std::int64_t output_tokens = 1;
  double app_start = 0.0;           // frontend arrival of the owning instance
};

// Checks the record invariants (span ordering, non-negative times, token
// counts >= 1). Returns false and fills `why` on the first violation.
bool validate(const RequestRecord& r, std::string* why = nullptr);

// Queue-side view of a request before execution. `uid` is assigned once per
// planned call and survives re-queueing after preemption.
struct PendingRequest {
  MessageId msg_id;
  AgentId agent;
  std::int64_t prompt_tokens = 1;
  double app_start = 0.0;
  double queue_enter = 0.0;
  std::uint64_t uid = 0;
};

// Monotone counter; an id is never reissued within a run. Deterministic by
// construction so replays produce identical traces.
class MessageIdFactory {
 public:
  explicit MessageIdFactory(std::string prefix = "m-")
      : prefix_(std::move(prefix)) {}

  MessageId next() { return prefix_ + std::to_string(counter_++); }
  std::uint64_t issued() const { return counter_; }

 private:
  std::string prefix_;
  std::uint64_t counter_ = 0;
};

}  // namespace kairos
