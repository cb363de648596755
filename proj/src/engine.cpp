#include "kairos/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kairos {

namespace {

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::Arrival: return "arrival";
    case EventKind::PrefillDone: return "prefill_done";
    case EventKind::TokenTick: return "token_tick";
    case EventKind::RequestDone: return "request_done";
    case EventKind::PreemptCheck: return "preempt_check";
    case EventKind::DispatchRound: return "dispatch_round";
  }
  return "?";
}

constexpr std::uint64_t kMaxEvents = 200'000'000;

double seconds_between(std::chrono::steady_clock::time_point a,
                       std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

Simulator::Simulator(EngineConfig cfg, const WorkloadRealization& realization,
                     SchedulerPolicy& scheduler, Dispatcher& dispatcher,
                     LatencyProfiler& profiler, WorkflowAnalyzer& analyzer)
    : cfg_(std::move(cfg)),
      realization_(realization),
      scheduler_(scheduler),
      dispatcher_(dispatcher),
      profiler_(profiler),
      analyzer_(analyzer) {
  if (cfg_.instances.empty()) {
    throw std::invalid_argument("engine needs at least one instance");
  }
  for (const auto& profile : cfg_.instances) {
    if (profile.capacity_tokens <= 0 || profile.decode_rate <= 0 ||
        profile.prefill_rate <= 0 || profile.max_batch < 1) {
      throw std::invalid_argument("instance profile fields must be positive");
    }
    InstanceState state;
    state.profile = profile;
    instances_.push_back(std::move(state));
  }
  // The capacity must cover the largest single-request peak or that request
  // could never run.
  double largest_capacity = 0.0;
  for (const auto& inst : instances_) {
    largest_capacity = std::max(largest_capacity, inst.profile.capacity_tokens);
  }
  for (const auto& instance : realization_.instances) {
    for (const auto& call : instance.calls) {
      const double peak =
          static_cast<double>(call.prompt_tokens + call.target_tokens);
      if (peak > largest_capacity) {
        throw std::invalid_argument(
            "instance capacity below largest single-request peak (" +
            std::to_string(peak) + " tokens)");
      }
    }
  }
}

void Simulator::schedule(double time, EventKind kind, std::uint64_t uid,
                         InstanceId instance, std::uint64_t epoch) {
  events_.push(SimEvent{time, kind, next_seq_++, uid, instance, epoch});
}

void Simulator::schedule_dispatch_round(double time) {
  if (dispatch_round_pending_) return;
  dispatch_round_pending_ = true;
  schedule(time, EventKind::DispatchRound, /*uid=*/0);
}

RunResult Simulator::run() {
  arrivals_remaining_ = realization_.instances.size();
  for (std::size_t i = 0; i < realization_.instances.size(); ++i) {
    schedule(realization_.instances[i].arrival, EventKind::Arrival, i);
  }

  std::uint64_t processed = 0;
  while (!events_.empty()) {
    const SimEvent ev = events_.top();
    events_.pop();
    if (ev.time < clock_ - kTimeEpsilon) {
      throw std::logic_error("event time ran backwards");
    }
    clock_ = std::max(clock_, ev.time);
    if (++processed > kMaxEvents) {
      throw std::runtime_error("event budget exhausted; simulation stuck?");
    }
    if (cfg_.collect_event_log) {
      std::ostringstream line;
      line << "t=" << clock_ << " kind=" << kind_name(ev.kind)
           << " uid=" << ev.uid << " inst=" << ev.instance;
      result_.event_log.push_back(line.str());
    }
    switch (ev.kind) {
      case EventKind::Arrival: handle_arrival(ev); break;
      case EventKind::PrefillDone: handle_prefill_done(ev); break;
      case EventKind::TokenTick: handle_token_tick(ev); break;
      case EventKind::RequestDone: handle_request_done(ev); break;
      case EventKind::PreemptCheck: handle_preempt_check(ev); break;
      case EventKind::DispatchRound: handle_dispatch_round(ev); break;
    }
  }

  result_.total_events = processed;
  result_.end_time = clock_;
  const auto status = snapshot();
  result_.final_status = status.instances;
  return std::move(result_);
}

StatusSnapshot Simulator::snapshot() const {
  StatusSnapshot s;
  s.time = clock_;
  for (const auto& inst : instances_) {
    s.instances.push_back({inst.profile.id, inst.live_kv,
                           static_cast<int>(inst.running.size()),
                           static_cast<int>(inst.waiting.size()),
                           inst.preempted_total});
  }
  return s;
}

void Simulator::handle_arrival(const SimEvent& ev) {
  const PlannedInstance& plan = realization_.instances[ev.uid];
  WorkflowRuntime wf;
  wf.plan = &plan;
  wf.remaining_calls = plan.calls.size();
  wf.children.assign(plan.calls.size(), {});
  for (const auto& call : plan.calls) {
    for (int p : call.parents) {
      wf.children[static_cast<std::size_t>(p)].push_back(call.uid);
    }
    CallRuntime c;
    c.plan = &call;
    c.instance_index = ev.uid;
    c.remaining_parents = static_cast<int>(call.parents.size());
    c.app_start = plan.arrival;
    calls_[call.uid] = std::move(c);
  }
  workflows_[plan.msg_id] = std::move(wf);
  for (const auto& call : plan.calls) {
    if (call.parents.empty()) enqueue_call(call.uid, clock_);
  }
  --arrivals_remaining_;
  schedule_dispatch_round(clock_);
}

void Simulator::enqueue_call(std::uint64_t uid, double now) {
  CallRuntime& c = calls_.at(uid);
  const PlannedInstance& plan = realization_.instances[c.instance_index];
  PendingRequest r;
  r.msg_id = plan.msg_id;
  r.agent = c.plan->agent;
  r.prompt_tokens = c.plan->prompt_tokens;
  r.app_start = c.app_start;
  r.queue_enter = now;
  r.uid = uid;
  c.enqueue_time = now;
  if (c.first_enqueue < 0.0) c.first_enqueue = now;
  queue_.enqueue(std::move(r));
}

double Simulator::expected_exec_time(const PendingRequest& r) const {
  if (dispatcher_.config().oracle_expected_time) {
    return calls_.at(r.uid).plan->pure_exec;
  }
  if (profile_) {
    return profile_->expected_exec_time(r.agent, cfg_.default_expected_time);
  }
  return cfg_.default_expected_time;
}

std::vector<InstanceLive> Simulator::collect_live() {
  std::vector<InstanceLive> live;
  live.reserve(instances_.size());
  for (auto& inst : instances_) {
    // Watermark resume happens on the freshest usage numbers.
    dispatcher_.on_live_usage(inst.profile.id, inst.live_kv);
    InstanceLive l;
    l.live_kv = inst.live_kv;
    l.running = static_cast<int>(inst.running.size());
    l.waiting = static_cast<int>(inst.waiting.size());
    l.batch_full =
        l.running + l.waiting >= inst.profile.max_batch;
    live.push_back(l);
  }
  return live;
}

void Simulator::handle_dispatch_round(const SimEvent& ev) {
  if (ev.uid == 1) {
    tick_scheduled_ = false;
  } else {
    dispatch_round_pending_ = false;
  }
  dispatch_loop();
  for (auto& inst : instances_) try_admit(inst);
  dispatcher_.gc(clock_);
  if (work_pending() && !tick_scheduled_) {
    tick_scheduled_ = true;
    schedule(clock_ + cfg_.dispatch_period, EventKind::DispatchRound,
             /*uid=*/1);
  }
}

void Simulator::dispatch_loop() {
  const auto key = [this](const PendingRequest& r) {
    return scheduler_.order_key(r);
  };
  while (!queue_.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t idx = queue_.best_index(key);
    const auto t1 = std::chrono::steady_clock::now();
    if (cfg_.measure_overhead) {
      result_.sort_seconds.push_back(seconds_between(t0, t1));
    }

    const PendingRequest& head = queue_.entries()[idx];
    const double expected_T = expected_exec_time(head);
    auto live = collect_live();
    const auto t2 = std::chrono::steady_clock::now();
    DispatchDecision decision =
        dispatcher_.choose(head, clock_, expected_T, live);
    const auto t3 = std::chrono::steady_clock::now();
    if (cfg_.measure_overhead) {
      result_.eval_seconds.push_back(seconds_between(t2, t3));
    }
    if (cfg_.collect_decision_log) {
      result_.decisions.push_back({clock_, head.uid, head.agent,
                                   decision.target, decision.predicted_peak,
                                   decision.candidate_peaks});
    }
    if (!decision.target) break;  // head keeps its place until the next round

    InstanceState& inst = state_of(*decision.target);

    if (dispatcher_.config().policy == DispatchPolicy::TimeSlot) {
      // The engine refuses admission without room for the prompt; treat it
      // as a detected overload and let the watermark lift the suspension.
      if (inst.live_kv + static_cast<double>(head.prompt_tokens) >
          inst.profile.capacity_tokens) {
        dispatcher_.on_overload(inst.profile.id);
        continue;
      }
      PendingRequest r = queue_.pop(key);
      dispatcher_.commit(decision, clock_, expected_T);
      admit(inst, r);
    } else {
      PendingRequest r = queue_.pop(key);
      inst.waiting.push_back(std::move(r));
      try_admit(inst);
    }
  }
}

void Simulator::try_admit(InstanceState& inst) {
  const auto key = [this](const PendingRequest& r) {
    return scheduler_.order_key(r);
  };
  while (!inst.waiting.empty() &&
         static_cast<int>(inst.running.size()) < inst.profile.max_batch) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < inst.waiting.size(); ++i) {
      const auto& a = inst.waiting[i];
      const auto& b = inst.waiting[best];
      const auto ka = key(a);
      const auto kb = key(b);
      if (std::tie(ka, a.msg_id, a.uid) < std::tie(kb, b.msg_id, b.uid)) {
        best = i;
      }
    }
    const PendingRequest& head = inst.waiting[best];
    if (inst.live_kv + static_cast<double>(head.prompt_tokens) >
        inst.profile.capacity_tokens) {
      break;  // strict admission order: the head waits for memory
    }
    PendingRequest r = inst.waiting[best];
    inst.waiting.erase(inst.waiting.begin() +
                       static_cast<std::ptrdiff_t>(best));
    admit(inst, r);
  }
}

void Simulator::admit(InstanceState& inst, const PendingRequest& r) {
  CallRuntime& c = calls_.at(r.uid);
  c.queue_seconds += clock_ - c.enqueue_time;
  ++c.episodes;

  RunningRequest run;
  run.request = r;
  run.plan = c.plan;
  run.tokens_generated = c.kept_tokens;
  run.kv_tokens = c.plan->prompt_tokens + c.kept_tokens;
  run.phase = RunningRequest::Phase::Prefill;
  run.exec_start = clock_;
  run.epoch = ++c.epoch;
  inst.live_kv += static_cast<double>(run.kv_tokens);

  const double prefill_duration =
      static_cast<double>(c.plan->prompt_tokens) / inst.profile.prefill_rate;
  result_.prefill_seconds += prefill_duration;
  schedule(clock_ + prefill_duration, EventKind::PrefillDone, r.uid,
           inst.profile.id, run.epoch);
  inst.running[r.uid] = std::move(run);
}

Simulator::RunningRequest* Simulator::find_running(const SimEvent& ev,
                                                   InstanceState** inst_out) {
  for (auto& inst : instances_) {
    if (inst.profile.id != ev.instance) continue;
    auto it = inst.running.find(ev.uid);
    if (it == inst.running.end()) return nullptr;
    if (it->second.epoch != ev.epoch) return nullptr;  // preempted since
    *inst_out = &inst;
    return &it->second;
  }
  return nullptr;
}

void Simulator::handle_prefill_done(const SimEvent& ev) {
  InstanceState* inst = nullptr;
  RunningRequest* run = find_running(ev, &inst);
  if (!run) return;
  run->phase = RunningRequest::Phase::Decode;
  schedule(clock_ + 1.0 / inst->profile.decode_rate, EventKind::TokenTick,
           ev.uid, ev.instance, ev.epoch);
}

void Simulator::handle_token_tick(const SimEvent& ev) {
  InstanceState* inst = nullptr;
  RunningRequest* run = find_running(ev, &inst);
  if (!run) return;
  ++run->tokens_generated;
  ++run->kv_tokens;
  inst->live_kv += 1.0;
  result_.decode_seconds += 1.0 / inst->profile.decode_rate;

  if (run->tokens_generated >= run->plan->target_tokens) {
    schedule(clock_, EventKind::RequestDone, ev.uid, ev.instance, ev.epoch);
  } else {
    schedule(clock_ + 1.0 / inst->profile.decode_rate, EventKind::TokenTick,
             ev.uid, ev.instance, ev.epoch);
  }
  if (inst->live_kv > inst->profile.capacity_tokens) {
    schedule(clock_, EventKind::PreemptCheck, 0, ev.instance);
  }
}

void Simulator::handle_request_done(const SimEvent& ev) {
  InstanceState* inst = nullptr;
  RunningRequest* run_ptr = find_running(ev, &inst);
  if (!run_ptr) return;
  RunningRequest run = std::move(*run_ptr);
  inst->running.erase(ev.uid);
  inst->live_kv -= static_cast<double>(run.kv_tokens);
  result_.completed_kv_tokens += static_cast<double>(run.kv_tokens);

  CallRuntime& c = calls_.at(ev.uid);
  c.completed = true;

  RequestRecord record;
  const PlannedInstance& plan = realization_.instances[c.instance_index];
  record.msg_id = plan.msg_id;
  record.agent = c.plan->agent;
  record.upstream = c.upstream;
  record.exec_start = run.exec_start;
  record.exec_end = clock_;
  record.prompt_tokens = c.plan->prompt_tokens;
  record.output_tokens = c.plan->target_tokens;
  record.app_start = c.app_start;

  result_.calls.push_back({record, ev.uid, c.first_enqueue, c.queue_seconds,
                           c.episodes, c.preemptions, inst->profile.id});

  profiler_.record_execution(record.agent, record.exec_end - record.exec_start);
  analyzer_.observe(record);
  dispatcher_.on_request_finished(inst->profile.id, ev.uid, clock_);
  dispatcher_.on_live_usage(inst->profile.id, inst->live_kv);

  WorkflowRuntime& wf = workflows_.at(plan.msg_id);
  wf.records.push_back(record);
  --wf.remaining_calls;
  for (std::uint64_t child_uid :
       wf.children[static_cast<std::size_t>(c.plan->node_id)]) {
    CallRuntime& child = calls_.at(child_uid);
    if (--child.remaining_parents == 0) {
      child.upstream = record.agent;
      enqueue_call(child_uid, clock_);
    }
  }
  if (wf.remaining_calls == 0) on_workflow_complete(wf);

  try_admit(*inst);
  schedule_dispatch_round(clock_);
}

void Simulator::on_workflow_complete(WorkflowRuntime& wf) {
  double finish = wf.plan->arrival;
  std::int64_t output_tokens = 0;
  for (const auto& r : wf.records) {
    finish = std::max(finish, r.exec_end);
    output_tokens += r.output_tokens;
  }
  result_.instances.push_back({wf.plan->msg_id, wf.plan->arrival, finish,
                               output_tokens, wf.records.size()});

  profiler_.record_remaining(wf.records);
  analyzer_.complete_instance(wf.plan->msg_id);
  profile_ = profiler_.snapshot();
  ++completed_instances_;
  const bool newly = profiler_.take_newly_converged();
  scheduler_.on_instance_complete(*profile_, completed_instances_, newly);
}

Simulator::InstanceState& Simulator::state_of(InstanceId id) {
  for (auto& inst : instances_) {
    if (inst.profile.id == id) return inst;
  }
  throw std::logic_error("unknown instance id " + std::to_string(id));
}

void Simulator::handle_preempt_check(const SimEvent& ev) {
  InstanceState* inst = &state_of(ev.instance);
  bool evicted = false;
  while (inst->live_kv > inst->profile.capacity_tokens &&
         !inst->running.empty()) {
    // Victim: lowest scheduler priority, ties broken by latest engine start.
    std::uint64_t victim = 0;
    double best_rank = -1.0;
    double best_start = -1.0;
    for (const auto& [uid, run] : inst->running) {
      const double rank = scheduler_.victim_rank(run.request.agent);
      if (std::tie(rank, run.exec_start, uid) >
          std::tie(best_rank, best_start, victim)) {
        best_rank = rank;
        best_start = run.exec_start;
        victim = uid;
      }
    }
    evict(*inst, victim);
    evicted = true;
  }
  if (evicted) {
    dispatcher_.on_overload(inst->profile.id);
    dispatcher_.on_live_usage(inst->profile.id, inst->live_kv);
    schedule_dispatch_round(clock_);
  }
}

void Simulator::evict(InstanceState& inst, std::uint64_t uid) {
  auto it = inst.running.find(uid);
  if (it == inst.running.end()) return;
  RunningRequest run = std::move(it->second);
  inst.running.erase(it);
  inst.live_kv -= static_cast<double>(run.kv_tokens);
  ++inst.preempted_total;
  ++result_.preemption_events;
  preempted_uids_.insert(uid);
  result_.preempted_requests = preempted_uids_.size();
  result_.wasted_kv_tokens += static_cast<double>(run.kv_tokens);

  CallRuntime& c = calls_.at(uid);
  ++c.preemptions;
  ++c.epoch;  // cancels this episode's in-flight events
  // Recompute semantics: the KV state is discarded; a configurable fraction
  // of generated tokens survives as logical progress (swap-style retention).
  c.kept_tokens = static_cast<std::int64_t>(
      std::floor((1.0 - cfg_.recompute_fraction) *
                 static_cast<double>(run.tokens_generated)));
  dispatcher_.on_request_preempted(inst.profile.id, uid, clock_);
  enqueue_call(uid, clock_);
}

bool Simulator::work_pending() const {
  if (arrivals_remaining_ > 0 || !queue_.empty()) return true;
  for (const auto& inst : instances_) {
    if (!inst.running.empty() || !inst.waiting.empty()) return true;
  }
  return false;
}

}  // namespace kairos
