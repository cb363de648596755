#include "kairos/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kairos/trace.hpp"

namespace kairos {

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  if (s == "kairos") return SchedulerKind::Kairos;
  if (s == "fcfs" || s == "kairos_wo_priority") return SchedulerKind::Fcfs;
  if (s == "topo_depth" || s == "topo") return SchedulerKind::TopoDepth;
  if (s == "oracle") return SchedulerKind::Oracle;
  throw std::invalid_argument("unknown scheduler: " + s);
}

const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Kairos: return "kairos";
    case SchedulerKind::Fcfs: return "fcfs";
    case SchedulerKind::TopoDepth: return "topo_depth";
    case SchedulerKind::Oracle: return "oracle";
  }
  return "?";
}

std::string StrategyConfig::name() const {
  if (!label.empty()) return label;
  return std::string(to_string(scheduler)) + "+" + to_string(dispatcher);
}

StrategyConfig StrategyConfig::parse(const std::string& scheduler,
                                     const std::string& dispatcher) {
  StrategyConfig s;
  s.scheduler = scheduler_kind_from_string(scheduler);
  s.dispatcher = dispatch_policy_from_string(dispatcher);
  if (scheduler == "kairos_wo_priority" || dispatcher == "kairos_wo_packing") {
    s.label = scheduler == "kairos_wo_priority" ? "kairos_wo_priority"
                                                : "kairos_wo_packing";
  }
  return s;
}

void ExperimentConfig::validate() const {
  workload.validate();
  if (engine.instances.empty()) {
    throw std::invalid_argument("no LLM instances configured");
  }
  if (strategies.empty()) throw std::invalid_argument("no strategies");
  if (seeds.empty()) throw std::invalid_argument("no seeds");
  std::vector<std::string> names;
  for (const auto& s : strategies) names.push_back(s.name());
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw std::invalid_argument("duplicate strategy label");
  }
}

WorkloadRealization realize_for(const ExperimentConfig& config,
                                std::uint64_t seed) {
  ReferenceRates rates{config.engine.instances.front().prefill_rate,
                       config.engine.instances.front().decode_rate};
  return realize(config.workload, rates, seed);
}

std::optional<double> pool_sorting_accuracy(
    const SchedulerPolicy& scheduler, const RunResult& run,
    const WorkloadRealization& realization, double warmup_seconds) {
  // One simulated queue holding every measured request of the run, ranked by
  // the policy's final state; scored against the true remaining execution
  // times. Using all historical requests keeps the pair composition
  // identical across strategies.
  std::vector<PendingRequest> pool;
  pool.reserve(run.calls.size());
  for (const auto& call : run.calls) {
    if (call.record.app_start < warmup_seconds) continue;
    PendingRequest r;
    r.msg_id = call.record.msg_id;
    r.agent = call.record.agent;
    r.prompt_tokens = call.record.prompt_tokens;
    r.app_start = call.record.app_start;
    r.queue_enter = call.first_enqueue;
    r.uid = call.uid;
    pool.push_back(std::move(r));
  }
  std::sort(pool.begin(), pool.end(),
            [&](const PendingRequest& a, const PendingRequest& b) {
              const auto ka = scheduler.order_key(a);
              const auto kb = scheduler.order_key(b);
              return std::tie(ka, a.app_start, a.queue_enter, a.msg_id,
                              a.uid) < std::tie(kb, b.app_start,
                                                b.queue_enter, b.msg_id,
                                                b.uid);
            });
  return pairwise_sorting_accuracy(pool, realization.remaining_by_uid);
}

CellResult run_cell(const ExperimentConfig& config,
                    const StrategyConfig& strategy, std::uint64_t seed,
                    const WorkloadRealization& realization) {
  LatencyProfiler profiler;
  WorkflowAnalyzer analyzer;

  std::unique_ptr<SchedulerPolicy> scheduler;
  KairosScheduler* kairos_sched = nullptr;
  switch (strategy.scheduler) {
    case SchedulerKind::Kairos: {
      KairosSchedulerConfig kcfg;
      kcfg.keep_table_history = true;
      auto k = std::make_unique<KairosScheduler>(kcfg);
      kairos_sched = k.get();
      scheduler = std::move(k);
      break;
    }
    case SchedulerKind::Fcfs:
      scheduler = std::make_unique<FcfsScheduler>();
      break;
    case SchedulerKind::TopoDepth:
      scheduler = std::make_unique<TopoDepthScheduler>(
          topo_depths(config.workload));
      break;
    case SchedulerKind::Oracle:
      scheduler = std::make_unique<OracleScheduler>(
          &realization.remaining_by_uid);
      break;
  }

  DispatcherConfig dcfg = config.dispatcher;
  dcfg.policy = strategy.dispatcher;
  dcfg.oracle_expected_time = strategy.oracle_expected_time;
  dcfg.default_expected_time = config.engine.default_expected_time;
  std::vector<InstanceId> ids;
  std::vector<double> capacities;
  std::vector<double> rates;
  for (const auto& p : config.engine.instances) {
    ids.push_back(p.id);
    capacities.push_back(p.capacity_tokens);
    rates.push_back(p.decode_rate);
  }
  Dispatcher dispatcher(dcfg, ids, capacities, rates);

  Simulator sim(config.engine, realization, *scheduler, dispatcher, profiler,
                analyzer);
  RunResult run = sim.run();

  CellResult cell;
  cell.strategy = strategy;
  cell.seed = seed;
  cell.metrics = compute_metrics(strategy.name(), seed, run, config.metrics);
  cell.metrics.sorting_accuracy = pool_sorting_accuracy(
      *scheduler, run, realization, config.metrics.warmup_seconds);
  cell.overhead = measure_overhead(run);
  cell.trace.reserve(run.calls.size());
  for (const auto& call : run.calls) cell.trace.push_back(call.record);
  if (kairos_sched) cell.table_history = kairos_sched->table_history();
  cell.decisions = std::move(run.decisions);
  return cell;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  // One realization per seed, shared (read-only) by every strategy.
  std::vector<WorkloadRealization> realizations;
  realizations.reserve(config.seeds.size());
  for (auto seed : config.seeds) {
    realizations.push_back(realize_for(config, seed));
  }

  struct Cell {
    std::size_t strategy_idx;
    std::size_t seed_idx;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < config.strategies.size(); ++si) {
    for (std::size_t di = 0; di < config.seeds.size(); ++di) {
      cells.push_back({si, di});
    }
  }

  ExperimentResult result;
  result.cells.resize(cells.size());
  std::size_t parallel = config.max_parallel_cells > 0
                             ? static_cast<std::size_t>(config.max_parallel_cells)
                             : std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < cells.size(); start += parallel) {
    const std::size_t end = std::min(cells.size(), start + parallel);
    std::vector<std::future<CellResult>> futures;
    for (std::size_t i = start; i < end; ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        const auto& cell = cells[i];
        return run_cell(config, config.strategies[cell.strategy_idx],
                        config.seeds[cell.seed_idx],
                        realizations[cell.seed_idx]);
      }));
    }
    for (std::size_t i = start; i < end; ++i) {
      result.cells[i] = futures[i - start].get();
    }
  }

  for (const auto& strategy : config.strategies) {
    std::vector<MetricsReport> runs;
    for (const auto& cell : result.cells) {
      if (cell.strategy.name() == strategy.name()) runs.push_back(cell.metrics);
    }
    result.aggregates.push_back(aggregate_metrics(runs));
  }
  return result;
}

CalibrationResult calibrate_rate(const ExperimentConfig& config,
                                 double target_ratio, double tolerance,
                                 int max_iterations) {
  if (target_ratio <= 0.0 || target_ratio >= 1.0) {
    throw std::invalid_argument("target ratio must be in (0, 1)");
  }
  if (config.workload.arrival.kind != ArrivalSpec::Kind::Poisson) {
    throw std::invalid_argument("calibration needs a poisson arrival spec");
  }

  CalibrationResult out;
  StrategyConfig baseline;
  baseline.scheduler = SchedulerKind::Fcfs;
  baseline.dispatcher = DispatchPolicy::RoundRobin;

  auto ratio_at = [&](double rate) {
    ExperimentConfig probe = config;
    probe.workload.arrival.rate = rate;
    probe.strategies = {baseline};
    probe.seeds = {config.seeds.front(), config.seeds.front() + 7919};
    const auto res = run_experiment(probe);
    ++out.evaluations;
    ++out.evaluations;  // two seeds per probe
    double sum = 0.0;
    for (const auto& cell : res.cells) sum += cell.metrics.mean_queueing_ratio;
    return sum / static_cast<double>(res.cells.size());
  };

  double lo = config.workload.arrival.rate;
  double lo_ratio = ratio_at(lo);
  while (lo_ratio > target_ratio && lo > 1e-6) {
    lo /= 2.0;
    lo_ratio = ratio_at(lo);
  }
  double hi = lo;
  double hi_ratio = lo_ratio;
  int guard = 0;
  while (hi_ratio < target_ratio && guard++ < 24) {
    hi *= 2.0;
    hi_ratio = ratio_at(hi);
  }
  if (hi_ratio < target_ratio) {
    throw std::runtime_error("could not reach target queueing ratio");
  }

  double best_rate = hi;
  double best_ratio = hi_ratio;
  for (int i = 0; i < max_iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double r = ratio_at(mid);
    if (std::abs(r - target_ratio) < std::abs(best_ratio - target_ratio)) {
      best_rate = mid;
      best_ratio = r;
    }
    if (std::abs(r - target_ratio) <= tolerance) break;
    if (r < target_ratio) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.rate = best_rate;
  out.achieved_ratio = best_ratio;
  return out;
}

namespace {

void write_file(const std::string& path, const std::string& content,
                std::vector<std::string>* written) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  written->push_back(path);
}

}  // namespace

std::vector<std::string> write_experiment_outputs(
    const ExperimentResult& result, const ExperimentConfig& config,
    const std::string& out_dir, bool emit_traces, bool emit_priorities,
    bool emit_decisions, bool emit_overhead) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  std::ostringstream metrics;
  metrics << metrics_csv_header() << '\n';
  for (const auto& cell : result.cells) {
    metrics << metrics_csv_row(cell.metrics) << '\n';
  }
  write_file(out_dir + "/metrics.csv", metrics.str(), &written);

  std::ostringstream agg;
  agg << metrics_csv_header() << '\n';
  for (const auto& a : result.aggregates) {
    agg << metrics_csv_row(a) << '\n';
  }
  write_file(out_dir + "/aggregate.csv", agg.str(), &written);

  std::ostringstream agents;
  agents << agents_csv_header() << '\n';
  for (const auto& cell : result.cells) {
    agents << agents_csv_rows(cell.metrics);
  }
  write_file(out_dir + "/agents.csv", agents.str(), &written);

  std::ostringstream summary;
  summary << "experiment: " << config.strategies.size() << " strategies x "
          << config.seeds.size() << " seeds\n";
  for (const auto& a : result.aggregates) {
    summary << a.strategy << ": mean token latency "
            << format_seconds(a.mean_token_latency) << " s/token, p90 "
            << format_seconds(a.p90_token_latency) << ", queueing ratio "
            << format_seconds(a.mean_queueing_ratio) << ", preempted "
            << a.preempted_requests;
    if (a.sorting_accuracy) {
      summary << ", sorting accuracy " << format_seconds(*a.sorting_accuracy);
    }
    summary << '\n';
  }
  write_file(out_dir + "/summary.txt", summary.str(), &written);

  for (const auto& cell : result.cells) {
    const std::string stem =
        cell.strategy.name() + "_" + std::to_string(cell.seed);
    if (emit_traces) {
      std::ostringstream trace;
      write_trace(trace, cell.trace);
      write_file(out_dir + "/trace_" + stem + ".csv", trace.str(), &written);
    }
    if (emit_priorities && !cell.table_history.empty()) {
      std::ostringstream tables;
      tables << "version,agent,coordinate,anchor_distance,rank\n";
      for (const auto& table : cell.table_history) {
        std::istringstream rows(table.csv());
        std::string line;
        std::getline(rows, line);  // drop the per-table header
        while (std::getline(rows, line)) tables << line << '\n';
      }
      write_file(out_dir + "/priorities_" + stem + ".csv", tables.str(),
                 &written);
    }
    if (emit_decisions) {
      std::ostringstream log;
      log << "time,uid,agent,target,predicted_peak,candidate_peaks\n";
      for (const auto& d : cell.decisions) {
        log << format_seconds(d.time) << ',' << d.uid << ',' << d.agent << ','
            << (d.target ? std::to_string(*d.target) : std::string()) << ','
            << format_seconds(d.predicted_peak) << ',';
        for (std::size_t i = 0; i < d.candidate_peaks.size(); ++i) {
          if (i) log << ';';
          log << format_seconds(d.candidate_peaks[i]);
        }
        log << '\n';
      }
      write_file(out_dir + "/decisions_" + stem + ".csv", log.str(), &written);
    }
  }

  if (emit_overhead) {
    // Wall-clock numbers vary run to run; they live outside the CSV contract.
    std::ostringstream oh;
    oh << "strategy seed decisions mean_sort_s max_sort_s mean_eval_s "
          "max_eval_s\n";
    for (const auto& cell : result.cells) {
      oh << cell.strategy.name() << ' ' << cell.seed << ' '
         << cell.overhead.decisions << ' ' << cell.overhead.mean_sort_seconds
         << ' ' << cell.overhead.max_sort_seconds << ' '
         << cell.overhead.mean_eval_seconds << ' '
         << cell.overhead.max_eval_seconds << '\n';
    }
    write_file(out_dir + "/overhead.txt", oh.str(), &written);
  }
  return written;
}

}  // namespace kairos
