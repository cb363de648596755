#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "kairos/config.hpp"
#include "kairos/harness.hpp"
#include "kairos/priority.hpp"
#include "kairos/profiler.hpp"
#include "kairos/trace.hpp"
#include "kairos/workflow.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir,
            bool emit_traces, bool emit_priorities, bool emit_decisions,
            bool overhead, bool event_log) {
  auto config = kairos::load_experiment_config(config_path);
  if (emit_decisions) config.engine.collect_decision_log = true;
  if (overhead) config.engine.measure_overhead = true;
  if (event_log) config.engine.collect_event_log = true;
  const auto result = kairos::run_experiment(config);
  const auto files = kairos::write_experiment_outputs(
      result, config, out_dir, emit_traces, emit_priorities, emit_decisions,
      overhead);
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
  for (const auto& agg : result.aggregates) {
    std::cout << agg.strategy << ": mean token latency "
              << kairos::format_seconds(agg.mean_token_latency)
              << " s/token, queueing ratio "
              << kairos::format_seconds(agg.mean_queueing_ratio) << '\n';
  }
  return 0;
}

int dump_priorities(const kairos::LatencyProfiler& profiler,
                    const std::string& out_path) {
  const auto converged = profiler.converged_remaining();
  if (converged.empty()) {
    std::cout << "no converged agent distributions; priority table skipped\n";
    return 1;
  }
  const auto matrix = kairos::build_distance_matrix(converged);
  const auto table = kairos::mds_embed_1d(matrix, 1);
  if (out_path.empty()) {
    std::cout << table.csv();
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    out << table.csv();
    std::cout << "wrote " << out_path << '\n';
  }
  return 0;
}

int cmd_analyze_trace(const std::string& trace_path, int max_loop,
                      const std::string& distributions_csv,
                      const std::string& priorities_csv) {
  const auto records = kairos::read_trace_file(trace_path);
  kairos::WorkflowAnalyzer analyzer;
  analyzer.ingest_trace(records);
  const auto graph = analyzer.snapshot();
  std::cout << graph->report();
  if (!graph->nodes().empty() && graph->entries().size() == 1) {
    const auto paths = graph->downstream_paths(graph->entry(), max_loop);
    std::cout << "paths from " << graph->entry() << ":\n";
    for (const auto& p : paths) {
      std::cout << "  ";
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) std::cout << " -> ";
        std::cout << p[i];
      }
      std::cout << '\n';
    }
  }

  kairos::LatencyProfiler profiler;
  profiler.ingest_trace(records);
  if (!distributions_csv.empty()) {
    std::ofstream out(distributions_csv, std::ios::trunc);
    out << profiler.summary_csv();
    std::cout << "wrote " << distributions_csv << '\n';
  }
  if (!priorities_csv.empty()) {
    dump_priorities(profiler, priorities_csv);
  }
  return 0;
}

int cmd_priorities(const std::string& trace_path, const std::string& out_path) {
  const auto records = kairos::read_trace_file(trace_path);
  kairos::LatencyProfiler profiler;
  profiler.ingest_trace(records);
  return dump_priorities(profiler, out_path);
}

int cmd_calibrate(const std::string& config_path, double target_ratio,
                  double tolerance, const std::string& out_path) {
  const auto config = kairos::load_experiment_config(config_path);
  const auto result = kairos::calibrate_rate(config, target_ratio, tolerance);
  std::cout << "calibrated rate " << result.rate << " req/s (queueing ratio "
            << result.achieved_ratio << ", " << result.evaluations
            << " probe runs)\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    out << result.rate << '\n';
    std::cout << "wrote " << out_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent LLM serving simulator and scheduling testbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  bool emit_traces = false;
  bool emit_priorities = false;
  bool emit_decisions = false;
  bool overhead = false;
  bool event_log = false;
  auto* run = app.add_subcommand("run", "run an experiment matrix");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--emit-traces", emit_traces, "write per-cell trace CSVs");
  run->add_flag("--dump-priorities", emit_priorities,
                "write priority table history per cell");
  run->add_flag("--decision-log", emit_decisions,
                "write per-dispatch decision CSVs");
  run->add_flag("--overhead", overhead,
                "measure per-decision wall-clock overhead");
  run->add_flag("--event-log", event_log,
                "write the per-event debug log per cell");

  std::string trace_path;
  int max_loop = 3;
  std::string distributions_csv;
  std::string priorities_csv;
  auto* analyze = app.add_subcommand(
      "analyze-trace", "reconstruct the workflow graph from a trace file");
  analyze->add_option("--trace", trace_path, "trace CSV")->required();
  analyze->add_option("--max-loop", max_loop, "feedback unroll bound");
  analyze->add_option("--distributions", distributions_csv,
                      "write per-agent distribution summaries CSV");
  analyze->add_option("--priorities", priorities_csv,
                      "write the MDS priority table CSV");

  std::string prio_trace;
  std::string prio_out;
  auto* priorities = app.add_subcommand(
      "priorities", "dump the priority table derived from a trace");
  priorities->add_option("--trace", prio_trace, "trace CSV")->required();
  priorities->add_option("--out", prio_out, "output CSV (stdout if omitted)");

  double target_ratio = 0.5;
  double tolerance = 0.02;
  std::string rate_out;
  auto* calibrate = app.add_subcommand(
      "calibrate", "bisect the arrival rate to a target queueing ratio");
  calibrate->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  calibrate->add_option("--target-ratio", target_ratio,
                        "queueing-time / end-to-end-time target");
  calibrate->add_option("--tolerance", tolerance, "acceptable ratio error");
  calibrate->add_option("--out", rate_out, "file to write the rate to");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, out_dir, emit_traces, emit_priorities,
                     emit_decisions, overhead, event_log);
    }
    if (analyze->parsed()) {
      return cmd_analyze_trace(trace_path, max_loop, distributions_csv,
                               priorities_csv);
    }
    if (priorities->parsed()) {
      return cmd_priorities(prio_trace, prio_out);
    }
    if (calibrate->parsed()) {
      return cmd_calibrate(config_path, target_ratio, tolerance, rate_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
