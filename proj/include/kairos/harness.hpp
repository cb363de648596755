#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kairos/dispatcher.hpp"
#include "kairos/engine.hpp"
#include "kairos/metrics.hpp"
#include "kairos/workload.hpp"

namespace kairos {

enum class SchedulerKind { Kairos, Fcfs, TopoDepth, Oracle };

SchedulerKind scheduler_kind_from_string(const std::string& s);
const char* to_string(SchedulerKind k);

struct StrategyConfig {
  SchedulerKind scheduler = SchedulerKind::Kairos;
  DispatchPolicy dispatcher = DispatchPolicy::TimeSlot;
  std::string label;  // defaults to "<scheduler>+<dispatcher>"
  bool oracle_expected_time = false;  // dispatcher uses true durations as T

  std::string name() const;
  // Accepts the ablation aliases: "kairos_wo_priority" (fcfs scheduling,
  // time-slot packing kept) and "kairos_wo_packing" (kairos scheduling,
  // round-robin dispatch).
  static StrategyConfig parse(const std::string& scheduler,
                              const std::string& dispatcher);
};

struct ExperimentConfig {
  WorkloadConfig workload;
  EngineConfig engine;
  DispatcherConfig dispatcher;  // slot length, watermark, threshold
  std::vector<StrategyConfig> strategies;
  std::vector<std::uint64_t> seeds;
  MetricsOptions metrics;
  int max_parallel_cells = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct CellResult {
  StrategyConfig strategy;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  std::vector<RequestRecord> trace;  // completion order
  std::vector<PriorityTable> table_history;
  OverheadSummary overhead;
  std::vector<DecisionLogRow> decisions;
};

struct ExperimentResult {
  std::vector<CellResult> cells;  // strategy-major, seed-minor order
  std::vector<MetricsReport> aggregates;  // one per strategy
};

// Runs every (strategy x seed) cell. All strategies of one seed replay the
// identical workload realization (same arrivals, branch draws, and token
// lengths), making every comparison paired.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Runs a single cell; the realization may be shared across calls.
CellResult run_cell(const ExperimentConfig& config,
                    const StrategyConfig& strategy, std::uint64_t seed,
                    const WorkloadRealization& realization);

WorkloadRealization realize_for(const ExperimentConfig& config,
                                std::uint64_t seed);

// Queue-simulation sorting accuracy: every measured request of the run forms
// one simulated queue, ranked by the policy's end-of-run state and scored
// against the true remaining execution times (cross-agent pairs).
std::optional<double> pool_sorting_accuracy(
    const SchedulerPolicy& scheduler, const RunResult& run,
    const WorkloadRealization& realization, double warmup_seconds = 0.0);

// Bisection search over the Poisson arrival rate until the baseline strategy
// reaches the requested mean queueing ratio (strategy defaults to
// fcfs+round_robin; the rate->ratio map depends on the workload).
struct CalibrationResult {
  double rate = 0.0;
  double achieved_ratio = 0.0;
  int evaluations = 0;
};

CalibrationResult calibrate_rate(const ExperimentConfig& config,
                                 double target_ratio, double tolerance = 0.02,
                                 int max_iterations = 24);

// Writes metrics.csv / aggregate.csv / agents.csv / summary.txt (and the
// optional per-cell dumps) under out_dir. Returns the files written.
std::vector<std::string> write_experiment_outputs(
    const ExperimentResult& result, const ExperimentConfig& config,
    const std::string& out_dir, bool emit_traces = false,
    bool emit_priorities = false, bool emit_decisions = false,
    bool emit_overhead = false);

}  // namespace kairos
