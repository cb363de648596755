#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kairos/rng.hpp"
#include "kairos/types.hpp"
#include "kairos/workflow.hpp"

namespace kairos {

// Token-length generator. Lognormal draws are rounded and clamped to
// [min_tokens, max_tokens]; the cap keeps the largest single-request memory
// peak finite so instance capacity can be validated up front.
struct LengthSpec {
  enum class Kind { Fixed, UniformInt, LognormalInt };
  Kind kind = Kind::Fixed;
  double a = 1.0;  // Fixed: value; UniformInt: lo; LognormalInt: mu
  double b = 0.0;  // UniformInt: hi; LognormalInt: sigma
  std::int64_t min_tokens = 1;
  std::int64_t max_tokens = 1 << 20;

  static LengthSpec fixed(std::int64_t v);
  static LengthSpec uniform(std::int64_t lo, std::int64_t hi);
  static LengthSpec lognormal(double median_tokens, double sigma,
                              std::int64_t cap);

  std::int64_t sample(Rng& rng) const;
  std::int64_t upper_bound() const;
};

// One agent role within an application workflow. Downstream structure is
// either a probabilistic choice (dynamic branching / sequential chains) or a
// parallel group; feedback re-invokes an upstream agent with a bounded
// iteration count (dynamic feedback).
struct AgentSpec {
  AgentId name;
  LengthSpec prompt_len;
  LengthSpec output_len;
  std::vector<std::pair<AgentId, double>> choice;  // probabilities sum to 1
  std::vector<AgentId> parallel;
  struct Feedback {
    AgentId target;
    double probability = 0.0;
    int max_iterations = 1;
  };
  std::optional<Feedback> feedback;
};

// One application: a set of agents reachable from `entry`.
struct AppSpec {
  std::string name;
  std::vector<AgentSpec> agents;
  AgentId entry;
  double weight = 1.0;  // share of arrivals in co-located configs
};

struct ArrivalSpec {
  enum class Kind { Poisson, TraceFile };
  Kind kind = Kind::Poisson;
  double rate = 1.0;       // Poisson arrivals per second
  std::string path;        // TraceFile: one timestamp per line
  double scale = 1.0;      // TraceFile: inter-arrival scaling factor
};

struct WorkloadConfig {
  std::vector<AppSpec> apps;
  ArrivalSpec arrival;
  double duration = 60.0;  // arrival window, seconds
  std::uint64_t seed = 1;
  enum class EntrySelection { Weighted, Cycle } entry_selection =
      EntrySelection::Weighted;

  const AppSpec* app_of_entry(const AgentId& entry) const;
  const AgentSpec* find_agent(const AgentId& name) const;
  // Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

// Reads a file of monotone-non-decreasing timestamps, multiplies the
// inter-arrival gaps by `scale`, and normalizes the first arrival to zero.
// Throws on non-monotone input.
std::vector<double> ingest_arrival_trace(const std::string& path, double scale);
std::vector<double> scale_arrival_gaps(const std::vector<double>& timestamps,
                                       double scale);

// One planned agent call within a workflow instance. The true output length
// is sampled at arrival time and hidden from scheduler and dispatcher.
struct PlannedCall {
  int node_id = 0;
  AgentId agent;
  std::vector<int> parents;  // node_ids that must complete before this fires
  std::int64_t prompt_tokens = 1;
  std::int64_t target_tokens = 1;
  double pure_exec = 0.0;       // prefill + decode on the reference profile
  double remaining_exec = 0.0;  // critical-path execution time from here
  std::uint64_t uid = 0;        // unique across the whole realization
};

struct PlannedInstance {
  MessageId msg_id;
  double arrival = 0.0;
  AgentId entry;
  std::vector<PlannedCall> calls;  // calls[0] is the entry call
};

// Every random draw for one experiment seed: arrival times, workflow shapes,
// prompt/output lengths, plus the oracle ground truth. All strategies of a
// paired comparison replay the same realization.
struct WorkloadRealization {
  std::vector<PlannedInstance> instances;  // sorted by arrival time
  std::map<std::uint64_t, double> remaining_by_uid;
  std::uint64_t total_calls = 0;
};

// Rates used to precompute pure execution times for the oracle ground truth.
struct ReferenceRates {
  double prefill_rate = 8000.0;  // prompt tokens per second
  double decode_rate = 50.0;     // output tokens per second
};

// Expands one workflow instance from the template: respects the app topology,
// draws branches, iterates feedback loops geometrically up to their caps.
PlannedInstance instantiate_workflow(const WorkloadConfig& config,
                                     const AgentId& entry,
                                     const MessageId& msg_id, Rng& rng);

WorkloadRealization realize(const WorkloadConfig& config,
                            const ReferenceRates& rates, std::uint64_t seed);

// Builds the structural workflow graph an application declares (the graph a
// developer-defined topology baseline works from).
WorkflowGraph template_graph(const AppSpec& app);
// Remaining stage count per agent over all apps, feedback unrolled once.
std::map<AgentId, int> topo_depths(const WorkloadConfig& config);

// Benchmark workflow templates.
AppSpec qa_app();
AppSpec rg_app();
AppSpec cg_app();
WorkloadConfig qa_workload(double rate, double duration, std::uint64_t seed);
WorkloadConfig rg_workload(double rate, double duration, std::uint64_t seed);
WorkloadConfig cg_workload(double rate, double duration, std::uint64_t seed);
// QA + RG + CG sharing the same instances.
WorkloadConfig colocated_workload(double rate, double duration,
                                  std::uint64_t seed);

}  // namespace kairos
