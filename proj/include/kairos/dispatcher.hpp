#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kairos/types.hpp"

namespace kairos {

using InstanceId = int;

// Linear KV-cache growth model of one request: prefill memory P plus decode
// growth at rate k over the expected execution window.
struct MemoryModel {
  double prefill_tokens = 0.0;     // P: memory of the prompt
  double decode_rate = 0.0;        // k: tokens per second of growth
  double t_start = 0.0;            // dispatch / decode start
  double expected_duration = 0.0;  // T: expected execution time

  double t_end() const { return t_start + expected_duration; }
};

// Expected memory of the request at time t: P + k*(t - t_start) strictly
// inside (t_start, t_end), zero outside.
double memory_at(const MemoryModel& m, double t);

// Indices of every slot of length slot_len that intersects the open
// interval (t_start, t_end). Slot s covers [s*slot_len, (s+1)*slot_len).
std::vector<std::int64_t> span_slots(const MemoryModel& m, double slot_len);

// Largest model value inside slot s (the ramp evaluated at the slot end,
// clamped to the model's own end) - an upper bound on the true within-slot
// usage, so packing stays conservative.
double peak_in_slot(const MemoryModel& m, std::int64_t slot, double slot_len);

struct Placement {
  bool fits = false;
  double predicted_peak = 0.0;         // valid when fits
  std::int64_t violating_slot = 0;     // first violating slot when !fits
};

// Expected memory usage of one instance over discretized future time: the
// slot-wise sum of every assigned request's model. Per-request entries are
// kept so early finishes and preemptions can subtract their contributions.
class SlotLedger {
 public:
  SlotLedger(InstanceId instance, double slot_len, double capacity_tokens);

  InstanceId instance() const { return instance_; }
  double slot_len() const { return slot_len_; }
  double capacity() const { return capacity_; }

  // Accumulates the candidate on top of the existing usage. Fits carries the
  // max total over all future slots (the expected total peak); Exceeds
  // carries the first slot whose total would pass capacity.
  Placement try_place(const MemoryModel& m) const;

  // Adds the request's per-slot contributions. Committing a model that
  // try_place rejects is a contract violation and throws.
  void commit(std::uint64_t uid, const MemoryModel& m);

  // Removes the request's contributions from every slot strictly after the
  // slot containing actual_end; called when a request finishes (or is
  // preempted) before its predicted end. Unknown uids throw.
  void correct_early_finish(std::uint64_t uid, double actual_end);

  // Drops slots that ended before `now` and fully elapsed requests.
  void gc(double now);

  bool has_request(std::uint64_t uid) const { return active_.count(uid) > 0; }
  std::size_t active_requests() const { return active_.size(); }
  double usage_in_slot(std::int64_t slot) const;
  std::size_t slot_count() const { return usage_.size(); }

 private:
  InstanceId instance_;
  double slot_len_;
  double capacity_;
  std::map<std::int64_t, double> usage_;          // slot index -> tokens
  std::unordered_map<std::uint64_t, MemoryModel> active_;
};

struct DispatchDecision {
  PendingRequest request;
  std::optional<InstanceId> target;  // absent: no instance available
  double predicted_peak = 0.0;
  // Per-instance evaluation outcomes for the decision log: peak when the
  // instance fits, negative slot - 1 otherwise.
  std::vector<double> candidate_peaks;
};

// Picks the fitting ledger with the lowest expected total peak (ties to the
// lowest instance id). Suspended or full instances are skipped by passing
// them as nullptr. Returns no target when nothing fits. The per-ledger
// variant lets each candidate carry its own decode rate.
DispatchDecision select_instance(const std::vector<const SlotLedger*>& ledgers,
                                 const MemoryModel& m,
                                 const PendingRequest& request);
DispatchDecision select_instance(const std::vector<const SlotLedger*>& ledgers,
                                 const std::vector<MemoryModel>& models,
                                 const PendingRequest& request);

enum class DispatchPolicy { TimeSlot, RoundRobin, StaticThreshold };

DispatchPolicy dispatch_policy_from_string(const std::string& s);
const char* to_string(DispatchPolicy p);

struct DispatcherConfig {
  DispatchPolicy policy = DispatchPolicy::TimeSlot;
  double slot_len = 0.5;
  double resume_watermark = 0.85;   // fraction of capacity to resume after overload
  double static_threshold = 0.90;   // StaticThreshold admission bound
  double default_expected_time = 1.0;  // T before any latency sample exists
  // Use ground-truth durations as T (simulation-only; models the
  // actual-equals-expected regime).
  bool oracle_expected_time = false;
};

// Live view of one instance, provided by the engine at dispatch time.
struct InstanceLive {
  double live_kv = 0.0;
  int running = 0;
  int waiting = 0;
  bool batch_full = false;
};

// Owns one SlotLedger per instance plus the overload/suspension state.
// The engine asks it where each dequeued request should run.
class Dispatcher {
 public:
  // decode_rates hold each instance's profiled k (tokens/second), used for
  // the candidate memory ramp on that instance.
  Dispatcher(DispatcherConfig cfg, std::vector<InstanceId> instances,
             std::vector<double> capacities, std::vector<double> decode_rates);

  const DispatcherConfig& config() const { return cfg_; }

  // Chooses a target for the request, or none (request stays queued; for
  // RoundRobin there is always a target). `expected_T` is the Eq.-2 horizon.
  DispatchDecision choose(const PendingRequest& request, double now,
                          double expected_T,
                          const std::vector<InstanceLive>& live);

  // Books the decision into the target's ledger (TimeSlot only).
  void commit(const DispatchDecision& decision, double now, double expected_T);

  void on_request_finished(InstanceId instance, std::uint64_t uid,
                           double actual_end);
  void on_request_preempted(InstanceId instance, std::uint64_t uid,
                            double now);

  // Actual memory exhaustion on an instance: suspend new dispatches until
  // its live usage drops below the resume watermark.
  void on_overload(InstanceId instance);
  void on_live_usage(InstanceId instance, double live_kv);
  bool suspended(InstanceId instance) const;

  void gc(double now);

  const SlotLedger& ledger(InstanceId instance) const;

 private:
  std::size_t index_of(InstanceId instance) const;

  DispatcherConfig cfg_;
  std::vector<InstanceId> ids_;
  std::vector<double> decode_rates_;
  std::vector<SlotLedger> ledgers_;
  std::vector<bool> suspended_;
  std::size_t rr_next_ = 0;
};

}  // namespace kairos
