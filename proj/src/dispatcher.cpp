#include "kairos/dispatcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kairos/workflow.hpp"  // kTimeEpsilon

namespace kairos {

double memory_at(const MemoryModel& m, double t) {
  if (t > m.t_start && t < m.t_end()) {
    return m.prefill_tokens + m.decode_rate * (t - m.t_start);
  }
  return 0.0;
}

std::vector<std::int64_t> span_slots(const MemoryModel& m, double slot_len) {
  if (slot_len <= 0.0) {
    throw std::invalid_argument("slot_len must be positive");
  }
  std::vector<std::int64_t> slots;
  if (m.expected_duration <= 0.0) return slots;
  const auto first = static_cast<std::int64_t>(
      std::floor((m.t_start + kTimeEpsilon) / slot_len));
  const auto last = static_cast<std::int64_t>(
      std::floor((m.t_end() - kTimeEpsilon) / slot_len));
  for (std::int64_t s = first; s <= last; ++s) slots.push_back(s);
  return slots;
}

double peak_in_slot(const MemoryModel& m, std::int64_t slot, double slot_len) {
  const double slot_start = static_cast<double>(slot) * slot_len;
  const double slot_end = slot_start + slot_len;
  if (slot_end <= m.t_start + kTimeEpsilon ||
      slot_start >= m.t_end() - kTimeEpsilon) {
    return 0.0;
  }
  const double eval_t = std::min(slot_end, m.t_end());
  return m.prefill_tokens + m.decode_rate * (eval_t - m.t_start);
}

SlotLedger::SlotLedger(InstanceId instance, double slot_len,
                       double capacity_tokens)
    : instance_(instance), slot_len_(slot_len), capacity_(capacity_tokens) {
  if (slot_len <= 0.0 || capacity_tokens <= 0.0) {
    throw std::invalid_argument("ledger needs positive slot_len and capacity");
  }
}

Placement SlotLedger::try_place(const MemoryModel& m) const {
  const auto slots = span_slots(m, slot_len_);
  for (std::int64_t s : slots) {
    const double total = usage_in_slot(s) + peak_in_slot(m, s, slot_len_);
    if (total > capacity_) return {false, 0.0, s};
  }
  // Expected total peak: the max over every future slot the instance will
  // see, including slots the candidate does not touch.
  double peak = 0.0;
  for (const auto& [s, used] : usage_) {
    peak = std::max(peak, used + peak_in_slot(m, s, slot_len_));
  }
  for (std::int64_t s : slots) {
    peak = std::max(peak, usage_in_slot(s) + peak_in_slot(m, s, slot_len_));
  }
  return {true, peak, 0};
}

void SlotLedger::commit(std::uint64_t uid, const MemoryModel& m) {
  const auto placement = try_place(m);
  if (!placement.fits) {
    throw std::logic_error("commit after Exceeds is a contract violation");
  }
  for (std::int64_t s : span_slots(m, slot_len_)) {
    usage_[s] += peak_in_slot(m, s, slot_len_);
  }
  active_[uid] = m;
}

void SlotLedger::correct_early_finish(std::uint64_t uid, double actual_end) {
  auto it = active_.find(uid);
  if (it == active_.end()) {
    throw std::invalid_argument("correct_early_finish: unknown request");
  }
  MemoryModel& m = it->second;
  if (actual_end >= m.t_end() - kTimeEpsilon) return;  // finished on schedule
  const auto cutoff = static_cast<std::int64_t>(
      std::floor((std::max(actual_end, m.t_start) + kTimeEpsilon) / slot_len_));
  for (std::int64_t s : span_slots(m, slot_len_)) {
    if (s <= cutoff) continue;
    auto slot = usage_.find(s);
    if (slot == usage_.end()) continue;
    slot->second -= peak_in_slot(m, s, slot_len_);
    if (slot->second < 1e-9) slot->second = 0.0;  // cancel rounding residue
  }
  // Truncate the stored model so a later gc or repeat correction agrees.
  m.expected_duration = std::max(actual_end, m.t_start) - m.t_start;
}

void SlotLedger::gc(double now) {
  const auto current = static_cast<std::int64_t>(
      std::floor((now + kTimeEpsilon) / slot_len_));
  for (auto it = usage_.begin(); it != usage_.end();) {
    if (it->first < current) {
      it = usage_.erase(it);
    } else {
      break;  // map is ordered
    }
  }
  for (auto it = active_.begin(); it != active_.end();) {
    if (it->second.t_end() <= now + kTimeEpsilon) {
      it = active_.erase(it);
    } else {
      ++it;
    }
  }
}

double SlotLedger::usage_in_slot(std::int64_t slot) const {
  auto it = usage_.find(slot);
  return it == usage_.end() ? 0.0 : it->second;
}

DispatchDecision select_instance(const std::vector<const SlotLedger*>& ledgers,
                                 const std::vector<MemoryModel>& models,
                                 const PendingRequest& request) {
  if (ledgers.empty() || ledgers.size() != models.size()) {
    throw std::invalid_argument("select_instance needs matching ledger list");
  }
  DispatchDecision decision;
  decision.request = request;
  double best_peak = std::numeric_limits<double>::infinity();
  std::optional<InstanceId> best;
  for (std::size_t i = 0; i < ledgers.size(); ++i) {
    const SlotLedger* ledger = ledgers[i];
    if (!ledger) {
      decision.candidate_peaks.push_back(-1.0);
      continue;
    }
    const auto placement = ledger->try_place(models[i]);
    if (!placement.fits) {
      decision.candidate_peaks.push_back(
          -static_cast<double>(placement.violating_slot) - 1.0);
      continue;
    }
    decision.candidate_peaks.push_back(placement.predicted_peak);
    if (placement.predicted_peak < best_peak ||
        (placement.predicted_peak == best_peak && best &&
         ledger->instance() < *best)) {
      best_peak = placement.predicted_peak;
      best = ledger->instance();
    }
  }
  decision.target = best;
  if (best) decision.predicted_peak = best_peak;
  return decision;
}

DispatchDecision select_instance(const std::vector<const SlotLedger*>& ledgers,
                                 const MemoryModel& m,
                                 const PendingRequest& request) {
  return select_instance(ledgers,
                         std::vector<MemoryModel>(ledgers.size(), m), request);
}

DispatchPolicy dispatch_policy_from_string(const std::string& s) {
  if (s == "time_slot") return DispatchPolicy::TimeSlot;
  if (s == "round_robin" || s == "kairos_wo_packing") {
    return DispatchPolicy::RoundRobin;
  }
  if (s == "static_threshold") return DispatchPolicy::StaticThreshold;
  throw std::invalid_argument("unknown dispatcher policy: " + s);
}

const char* to_string(DispatchPolicy p) {
  switch (p) {
    case DispatchPolicy::TimeSlot: return "time_slot";
    case DispatchPolicy::RoundRobin: return "round_robin";
    case DispatchPolicy::StaticThreshold: return "static_threshold";
  }
  return "?";
}

Dispatcher::Dispatcher(DispatcherConfig cfg, std::vector<InstanceId> instances,
                       std::vector<double> capacities,
                       std::vector<double> decode_rates)
    : cfg_(cfg), ids_(std::move(instances)), decode_rates_(std::move(decode_rates)) {
  if (ids_.empty() || ids_.size() != capacities.size() ||
      ids_.size() != decode_rates_.size()) {
    throw std::invalid_argument("dispatcher needs matching instance lists");
  }
  ledgers_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    ledgers_.emplace_back(ids_[i], cfg_.slot_len, capacities[i]);
  }
  suspended_.assign(ids_.size(), false);
}

std::size_t Dispatcher::index_of(InstanceId instance) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == instance) return i;
  }
  throw std::invalid_argument("unknown instance id");
}

DispatchDecision Dispatcher::choose(const PendingRequest& request, double now,
                                    double expected_T,
                                    const std::vector<InstanceLive>& live) {
  if (live.size() != ids_.size()) {
    throw std::invalid_argument("live status size mismatch");
  }
  DispatchDecision decision;
  decision.request = request;

  switch (cfg_.policy) {
    case DispatchPolicy::RoundRobin: {
      decision.target = ids_[rr_next_ % ids_.size()];
      ++rr_next_;
      return decision;
    }
    case DispatchPolicy::StaticThreshold: {
      // Round-robin order, skipping instances at or above the threshold.
      for (std::size_t probe = 0; probe < ids_.size(); ++probe) {
        const std::size_t i = (rr_next_ + probe) % ids_.size();
        if (live[i].live_kv < cfg_.static_threshold * ledgers_[i].capacity() &&
            !live[i].batch_full) {
          decision.target = ids_[i];
          rr_next_ = i + 1;
          return decision;
        }
      }
      return decision;  // none admit; request stays queued
    }
    case DispatchPolicy::TimeSlot: {
      // Evaluate every instance (conceptually in parallel); suspended and
      // batch-full instances are unavailable this round.
      std::vector<const SlotLedger*> candidates(ids_.size(), nullptr);
      std::vector<MemoryModel> models(ids_.size());
      for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (suspended_[i] || live[i].batch_full) continue;
        candidates[i] = &ledgers_[i];
        models[i] = MemoryModel{static_cast<double>(request.prompt_tokens),
                                decode_rates_[i], now, expected_T};
      }
      return select_instance(candidates, models, request);
    }
  }
  return decision;
}

void Dispatcher::commit(const DispatchDecision& decision, double now,
                        double expected_T) {
  if (!decision.target) {
    throw std::logic_error("commit without a dispatch target");
  }
  if (cfg_.policy != DispatchPolicy::TimeSlot) return;
  const std::size_t i = index_of(*decision.target);
  const MemoryModel m{static_cast<double>(decision.request.prompt_tokens),
                      decode_rates_[i], now, expected_T};
  ledgers_[i].commit(decision.request.uid, m);
}

void Dispatcher::on_request_finished(InstanceId instance, std::uint64_t uid,
                                     double actual_end) {
  if (cfg_.policy != DispatchPolicy::TimeSlot) return;
  auto& ledger = ledgers_[index_of(instance)];
  if (ledger.has_request(uid)) {
    ledger.correct_early_finish(uid, actual_end);
  }
}

void Dispatcher::on_request_preempted(InstanceId instance, std::uint64_t uid,
                                      double now) {
  on_request_finished(instance, uid, now);
}

void Dispatcher::on_overload(InstanceId instance) {
  if (cfg_.policy != DispatchPolicy::TimeSlot) return;
  suspended_[index_of(instance)] = true;
}

void Dispatcher::on_live_usage(InstanceId instance, double live_kv) {
  const std::size_t i = index_of(instance);
  if (suspended_[i] &&
      live_kv < cfg_.resume_watermark * ledgers_[i].capacity()) {
    suspended_[i] = false;
  }
}

bool Dispatcher::suspended(InstanceId instance) const {
  return suspended_[index_of(instance)];
}

void Dispatcher::gc(double now) {
  for (auto& ledger : ledgers_) ledger.gc(now);
}

const SlotLedger& Dispatcher::ledger(InstanceId instance) const {
  return ledgers_[index_of(instance)];
}

}  // namespace kairos
