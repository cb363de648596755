#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kairos/engine.hpp"
#include "kairos/types.hpp"

namespace kairos {

struct AgentBreakdown {
  AgentId agent;
  std::uint64_t requests = 0;
  double mean_exec = 0.0;
  double mean_queue = 0.0;
};

struct MetricsOptions {
  // Instances arriving before this time are executed but excluded from the
  // report (measurement starts once the pipeline is warm).
  double warmup_seconds = 0.0;
};

// Per-run metrics. Program-level token latency divides a workflow instance's
// end-to-end response time by the total tokens its requests generated; the
// per-request variant divides each request's own span instead.
struct MetricsReport {
  std::string strategy;
  std::uint64_t seed = 0;
  std::uint64_t instances = 0;
  std::uint64_t requests = 0;
  double mean_token_latency = 0.0;
  double p90_token_latency = 0.0;
  double p95_token_latency = 0.0;
  double p99_token_latency = 0.0;
  double mean_request_token_latency = 0.0;
  double mean_queueing_ratio = 0.0;  // sum(queue) / sum(end-to-end)
  double preemption_rate = 0.0;      // unique preempted / completed requests
  std::uint64_t preempted_requests = 0;
  std::uint64_t preemption_events = 0;
  double wasted_memory_fraction = 0.0;
  std::optional<double> sorting_accuracy;
  double total_queue_seconds = 0.0;
  double decode_time_fraction = 0.0;
  double sim_end_time = 0.0;
  std::vector<AgentBreakdown> agents;
};

MetricsReport compute_metrics(const std::string& strategy, std::uint64_t seed,
                              const RunResult& run,
                              const MetricsOptions& opts = {});

// Aggregate over the per-seed reports of one strategy (plain means).
MetricsReport aggregate_metrics(const std::vector<MetricsReport>& runs);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& m);
std::string agents_csv_header();
std::string agents_csv_rows(const MetricsReport& m);

// Mean/max style summary of the per-decision overhead samples.
struct OverheadSummary {
  std::uint64_t decisions = 0;
  double mean_sort_seconds = 0.0;
  double max_sort_seconds = 0.0;
  double mean_eval_seconds = 0.0;
  double max_eval_seconds = 0.0;
};

OverheadSummary measure_overhead(const RunResult& run);

}  // namespace kairos
