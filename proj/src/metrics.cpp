#include "kairos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "kairos/distribution.hpp"
#include "kairos/trace.hpp"

namespace kairos {

MetricsReport compute_metrics(const std::string& strategy, std::uint64_t seed,
                              const RunResult& run,
                              const MetricsOptions& opts) {
  MetricsReport m;
  m.strategy = strategy;
  m.seed = seed;
  m.sim_end_time = run.end_time;

  // Instances (and their requests) arriving inside the warmup window are
  // excluded from every reported number.
  std::set<MessageId> measured;
  std::vector<double> token_latencies;
  for (const auto& inst : run.instances) {
    if (inst.app_start < opts.warmup_seconds) continue;
    measured.insert(inst.msg_id);
    if (inst.output_tokens > 0) {
      token_latencies.push_back((inst.finish - inst.app_start) /
                                static_cast<double>(inst.output_tokens));
    }
  }
  m.instances = measured.size();
  std::sort(token_latencies.begin(), token_latencies.end());
  if (!token_latencies.empty()) {
    double sum = 0.0;
    for (double v : token_latencies) sum += v;
    m.mean_token_latency = sum / static_cast<double>(token_latencies.size());
    m.p90_token_latency = quantile_sorted(token_latencies, 0.90);
    m.p95_token_latency = quantile_sorted(token_latencies, 0.95);
    m.p99_token_latency = quantile_sorted(token_latencies, 0.99);
  }

  double queue_sum = 0.0;
  double e2e_sum = 0.0;
  double request_token_latency_sum = 0.0;
  std::uint64_t request_count = 0;
  std::map<AgentId, AgentBreakdown> agents;
  for (const auto& call : run.calls) {
    if (!measured.count(call.record.msg_id)) continue;
    ++request_count;
    queue_sum += call.queue_seconds;
    e2e_sum += call.record.exec_end - call.first_enqueue;
    request_token_latency_sum +=
        (call.record.exec_end - call.first_enqueue) /
        static_cast<double>(call.record.output_tokens);
    auto& a = agents[call.record.agent];
    a.agent = call.record.agent;
    ++a.requests;
    a.mean_exec += call.record.exec_end - call.record.exec_start;
    a.mean_queue += call.queue_seconds;
  }
  m.requests = request_count;
  m.total_queue_seconds = queue_sum;
  if (e2e_sum > 0.0) m.mean_queueing_ratio = queue_sum / e2e_sum;
  if (request_count > 0) {
    m.mean_request_token_latency =
        request_token_latency_sum / static_cast<double>(request_count);
    m.preemption_rate = static_cast<double>(run.preempted_requests) /
                        static_cast<double>(run.calls.size());
  }
  m.preempted_requests = run.preempted_requests;
  m.preemption_events = run.preemption_events;
  const double kv_total = run.wasted_kv_tokens + run.completed_kv_tokens;
  if (kv_total > 0.0) m.wasted_memory_fraction = run.wasted_kv_tokens / kv_total;

  const double engine_time = run.prefill_seconds + run.decode_seconds;
  if (engine_time > 0.0) m.decode_time_fraction = run.decode_seconds / engine_time;

  for (auto& [name, a] : agents) {
    if (a.requests > 0) {
      a.mean_exec /= static_cast<double>(a.requests);
      a.mean_queue /= static_cast<double>(a.requests);
    }
    m.agents.push_back(a);
  }
  return m;
}

MetricsReport aggregate_metrics(const std::vector<MetricsReport>& runs) {
  MetricsReport agg;
  if (runs.empty()) return agg;
  agg.strategy = runs.front().strategy;
  agg.seed = 0;
  const double n = static_cast<double>(runs.size());
  double accuracy_sum = 0.0;
  std::uint64_t accuracy_n = 0;
  for (const auto& r : runs) {
    agg.instances += r.instances;
    agg.requests += r.requests;
    agg.mean_token_latency += r.mean_token_latency / n;
    agg.p90_token_latency += r.p90_token_latency / n;
    agg.p95_token_latency += r.p95_token_latency / n;
    agg.p99_token_latency += r.p99_token_latency / n;
    agg.mean_request_token_latency += r.mean_request_token_latency / n;
    agg.mean_queueing_ratio += r.mean_queueing_ratio / n;
    agg.preemption_rate += r.preemption_rate / n;
    agg.preempted_requests += r.preempted_requests;
    agg.preemption_events += r.preemption_events;
    agg.wasted_memory_fraction += r.wasted_memory_fraction / n;
    agg.total_queue_seconds += r.total_queue_seconds;
    agg.decode_time_fraction += r.decode_time_fraction / n;
    agg.sim_end_time = std::max(agg.sim_end_time, r.sim_end_time);
    if (r.sorting_accuracy) {
      accuracy_sum += *r.sorting_accuracy;
      ++accuracy_n;
    }
  }
  if (accuracy_n > 0) {
    agg.sorting_accuracy = accuracy_sum / static_cast<double>(accuracy_n);
  }
  return agg;
}

namespace {

std::string fmt(double v) { return format_seconds(v); }

}  // namespace

std::string metrics_csv_header() {
  return "strategy,seed,instances,requests,mean_token_latency,"
         "p90_token_latency,p95_token_latency,p99_token_latency,"
         "mean_request_token_latency,mean_queueing_ratio,preemption_rate,"
         "preempted_requests,preemption_events,wasted_memory_fraction,"
         "sorting_accuracy,total_queue_seconds,decode_time_fraction,"
         "sim_end_time";
}

std::string metrics_csv_row(const MetricsReport& m) {
  std::ostringstream out;
  out << m.strategy << ',' << m.seed << ',' << m.instances << ',' << m.requests
      << ',' << fmt(m.mean_token_latency) << ',' << fmt(m.p90_token_latency)
      << ',' << fmt(m.p95_token_latency) << ',' << fmt(m.p99_token_latency)
      << ',' << fmt(m.mean_request_token_latency) << ','
      << fmt(m.mean_queueing_ratio) << ',' << fmt(m.preemption_rate) << ','
      << m.preempted_requests << ',' << m.preemption_events << ','
      << fmt(m.wasted_memory_fraction) << ','
      << (m.sorting_accuracy ? fmt(*m.sorting_accuracy) : std::string()) << ','
      << fmt(m.total_queue_seconds) << ',' << fmt(m.decode_time_fraction)
      << ',' << fmt(m.sim_end_time);
  return out.str();
}

std::string agents_csv_header() {
  return "strategy,seed,agent,requests,mean_exec_seconds,mean_queue_seconds";
}

std::string agents_csv_rows(const MetricsReport& m) {
  std::ostringstream out;
  for (const auto& a : m.agents) {
    out << m.strategy << ',' << m.seed << ',' << a.agent << ',' << a.requests
        << ',' << fmt(a.mean_exec) << ',' << fmt(a.mean_queue) << '\n';
  }
  return out.str();
}

OverheadSummary measure_overhead(const RunResult& run) {
  OverheadSummary s;
  s.decisions = run.sort_seconds.size();
  for (double v : run.sort_seconds) {
    s.mean_sort_seconds += v;
    s.max_sort_seconds = std::max(s.max_sort_seconds, v);
  }
  for (double v : run.eval_seconds) {
    s.mean_eval_seconds += v;
    s.max_eval_seconds = std::max(s.max_eval_seconds, v);
  }
  if (!run.sort_seconds.empty()) {
    s.mean_sort_seconds /= static_cast<double>(run.sort_seconds.size());
  }
  if (!run.eval_seconds.empty()) {
    s.mean_eval_seconds /= static_cast<double>(run.eval_seconds.size());
  }
  return s;
}

}  // namespace kairos
