#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "kairos/rng.hpp"
#include "kairos/workflow.hpp"

using namespace kairos;

namespace {

RequestRecord rec(const MessageId& msg, const AgentId& agent,
                  std::optional<AgentId> upstream, double start, double end) {
  RequestRecord r;
  r.msg_id = msg;
  r.agent = agent;
  r.upstream = std::move(upstream);
  r.exec_start = start;
  r.exec_end = end;
  r.prompt_tokens = 10;
  r.output_tokens = 10;
  r.app_start = 0.0;
  return r;
}

// Quadratic overlap oracle: parallel iff some pair of spans shares interior
// time (touching endpoints within the epsilon do not count).
FanoutKind overlap_oracle(const std::vector<TaskSpan>& spans) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      const double lo = std::max(spans[i].exec_start, spans[j].exec_start);
      const double hi = std::min(spans[i].exec_end, spans[j].exec_end);
      if (hi - lo > kTimeEpsilon) return FanoutKind::Parallel;
    }
  }
  return FanoutKind::Sequential;
}

}  // namespace

TEST_CASE("overlapping spans classify as parallel") {
  CHECK(classify_fanout({{"B", 0.0, 2.0}, {"C", 1.0, 3.0}}) ==
        FanoutKind::Parallel);
}

TEST_CASE("disjoint spans classify as sequential") {
  CHECK(classify_fanout({{"B", 0.0, 2.0}, {"C", 3.0, 5.0}}) ==
        FanoutKind::Sequential);
}

TEST_CASE("touching endpoints are not simultaneity") {
  CHECK(classify_fanout({{"B", 0.0, 2.0}, {"C", 2.0, 4.0}}) ==
        FanoutKind::Sequential);
  // Even within the float epsilon.
  CHECK(classify_fanout({{"B", 0.0, 2.0}, {"C", 2.0 + 1e-12, 4.0}}) ==
        FanoutKind::Sequential);
}

TEST_CASE("degenerate spans are rejected") {
  CHECK_THROWS_AS(classify_fanout({{"B", 2.0, 1.0}, {"C", 0.0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(classify_fanout({{"B", 0.0, 1.0}}), std::invalid_argument);
}

TEST_CASE("sweep line agrees with the quadratic oracle on random spans") {
  Rng rng(1234);
  for (int iter = 0; iter < 10000; ++iter) {
    const std::size_t n = 2 + rng.next_u64() % 6;
    std::vector<TaskSpan> spans;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid provokes plenty of exact endpoint touches.
      const double start = static_cast<double>(rng.next_u64() % 12);
      const double len = static_cast<double>(rng.next_u64() % 5);
      spans.push_back({"a" + std::to_string(i), start, start + len});
    }
    CHECK(classify_fanout(spans) == overlap_oracle(spans));
  }
}

TEST_CASE("single record builds a single edge graph") {
  WorkflowGraph g;
  g.ingest_instance({rec("m-0", "Router", std::nullopt, 0.0, 1.0),
                     rec("m-0", "Math", "Router", 1.5, 3.0)});
  CHECK(g.nodes() == std::set<AgentId>{"Math", "Router"});
  CHECK(g.edge_observations("Router", "Math") == 1);
  CHECK(g.entry() == "Router");
}

TEST_CASE("qa-style traces reconstruct the branch shape") {
  WorkflowGraph g;
  // Alternating branch choices across instances.
  for (int i = 0; i < 10; ++i) {
    const MessageId msg = "m-" + std::to_string(i);
    const AgentId expert = (i % 2 == 0) ? "Math" : "Humanities";
    g.ingest_instance({rec(msg, "Router", std::nullopt, 0.0, 1.0),
                       rec(msg, expert, "Router", 1.5, 3.0)});
  }
  CHECK(g.nodes() == std::set<AgentId>{"Humanities", "Math", "Router"});
  CHECK(g.has_edge("Router", "Math"));
  CHECK(g.has_edge("Router", "Humanities"));
  CHECK(g.entry() == "Router");
  // Every observation had a single downstream call: a branch, not a fanout.
  const auto& pat = g.fanouts().at("Router");
  CHECK(pat.kind == FanoutKind::Single);
  CHECK(pat.downstreams == std::set<AgentId>{"Humanities", "Math"});
}

TEST_CASE("feedback re-invocation closes a cycle") {
  WorkflowGraph g;
  // Engineer -> QAEngineer -> Engineer (re-development) -> QAEngineer.
  g.ingest_instance({
      rec("m-0", "Engineer", std::nullopt, 0.0, 2.0),
      rec("m-0", "QAEngineer", "Engineer", 2.5, 3.0),
      rec("m-0", "Engineer", "QAEngineer", 3.5, 5.5),
      rec("m-0", "QAEngineer", "Engineer", 6.0, 6.5),
  });
  CHECK(g.has_edge("QAEngineer", "Engineer"));
  CHECK(g.edge_observations("Engineer", "QAEngineer") == 2);
  const auto feedback = g.feedback_edges();
  CHECK(feedback == std::set<std::pair<AgentId, AgentId>>{
                        {{"QAEngineer", "Engineer"}}});
  // Repeated calls to one downstream agent stay a single call pattern.
  CHECK(g.fanouts().at("Engineer").kind == FanoutKind::Single);
}

TEST_CASE("conflicting entries are diagnosed but stored") {
  WorkflowGraph g;
  g.ingest_instance({rec("m-0", "A", std::nullopt, 0.0, 1.0),
                     rec("m-0", "B", std::nullopt, 0.2, 1.2)});
  REQUIRE(g.diagnostics().size() == 1);
  CHECK(g.diagnostics()[0].find("conflicting entries") != std::string::npos);
  CHECK(g.nodes().count("A") == 1);
  CHECK(g.nodes().count("B") == 1);
}

TEST_CASE("parallel fanout wins the majority vote with ties parallel") {
  WorkflowGraph g;
  auto parallel_instance = [&](const MessageId& msg) {
    g.ingest_instance({rec(msg, "A", std::nullopt, 0.0, 1.0),
                       rec(msg, "B", "A", 1.5, 3.0),
                       rec(msg, "C", "A", 2.0, 3.5)});
  };
  auto sequential_instance = [&](const MessageId& msg) {
    g.ingest_instance({rec(msg, "A", std::nullopt, 0.0, 1.0),
                       rec(msg, "B", "A", 1.5, 2.0),
                       rec(msg, "C", "A", 2.5, 3.0)});
  };
  parallel_instance("m-0");
  sequential_instance("m-1");
  CHECK(g.fanouts().at("A").kind == FanoutKind::Parallel);  // 1:1 tie
  sequential_instance("m-2");
  CHECK(g.fanouts().at("A").kind == FanoutKind::Sequential);  // 1:2
  parallel_instance("m-3");
  parallel_instance("m-4");
  CHECK(g.fanouts().at("A").kind == FanoutKind::Parallel);  // 3:2
}

TEST_CASE("reconstruction is independent of ingestion order") {
  std::vector<std::vector<RequestRecord>> instances;
  for (int i = 0; i < 20; ++i) {
    const MessageId msg = "m-" + std::to_string(i);
    std::vector<RequestRecord> inst{
        rec(msg, "Router", std::nullopt, 0.0, 1.0),
        rec(msg, (i % 3 == 0) ? "Math" : "Humanities", "Router", 1.5, 3.0)};
    instances.push_back(std::move(inst));
  }

  auto build = [&](const std::vector<std::size_t>& order,
                   bool shuffle_records) {
    WorkflowAnalyzer analyzer;
    std::mt19937 shuffler(99);
    for (std::size_t idx : order) {
      auto records = instances[idx];
      if (shuffle_records) {
        std::shuffle(records.begin(), records.end(), shuffler);
      }
      for (const auto& r : records) analyzer.observe(r);
      analyzer.complete_instance(records.front().msg_id);
    }
    return analyzer.snapshot()->report();
  };

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto baseline = build(order, false);
  std::mt19937 gen(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), gen);
    CHECK(build(order, true) == baseline);
  }
}

TEST_CASE("downstream paths of a branch graph") {
  WorkflowGraph g;
  g.ingest_instance({rec("m-0", "Router", std::nullopt, 0.0, 1.0),
                     rec("m-0", "Math", "Router", 1.5, 3.0)});
  g.ingest_instance({rec("m-1", "Router", std::nullopt, 0.0, 1.0),
                     rec("m-1", "Humanities", "Router", 1.5, 3.0)});
  const auto paths = g.downstream_paths("Router");
  const std::vector<std::vector<AgentId>> expected{
      {"Router", "Humanities"}, {"Router", "Math"}};
  CHECK(paths == expected);
}

TEST_CASE("downstream paths of a linear graph and a leaf") {
  WorkflowGraph g;
  g.ingest_instance({rec("m-0", "Researcher", std::nullopt, 0.0, 1.0),
                     rec("m-0", "Writer", "Researcher", 1.5, 3.0)});
  CHECK(g.downstream_paths("Researcher") ==
        std::vector<std::vector<AgentId>>{{"Researcher", "Writer"}});
  // A terminal agent yields a single zero-edge path.
  CHECK(g.downstream_paths("Writer") ==
        std::vector<std::vector<AgentId>>{{"Writer"}});
  CHECK_THROWS_AS(g.downstream_paths("Nobody"), std::invalid_argument);
}

TEST_CASE("feedback loops unroll up to the loop bound") {
  WorkflowGraph g;
  g.ingest_instance({
      rec("m-0", "Engineer", std::nullopt, 0.0, 2.0),
      rec("m-0", "QAEngineer", "Engineer", 2.5, 3.0),
      rec("m-0", "Engineer", "QAEngineer", 3.5, 5.5),
      rec("m-0", "QAEngineer", "Engineer", 6.0, 6.5),
  });
  const auto paths = g.downstream_paths("Engineer", /*max_loop=*/2);
  // Exit after 0, 1 or 2 feedback iterations.
  const std::vector<std::vector<AgentId>> expected{
      {"Engineer", "QAEngineer"},
      {"Engineer", "QAEngineer", "Engineer", "QAEngineer"},
      {"Engineer", "QAEngineer", "Engineer", "QAEngineer", "Engineer",
       "QAEngineer"},
  };
  CHECK(paths == expected);
}

TEST_CASE("topo depth counts remaining stages") {
  WorkflowGraph rg;
  rg.ingest_instance({rec("m-0", "Researcher", std::nullopt, 0.0, 1.0),
                      rec("m-0", "Writer", "Researcher", 1.5, 3.0)});
  CHECK(rg.topo_depth("Writer") == 1);
  CHECK(rg.topo_depth("Researcher") == 2);

  WorkflowGraph qa;
  qa.ingest_instance({rec("m-0", "Router", std::nullopt, 0.0, 1.0),
                      rec("m-0", "Math", "Router", 1.5, 3.0)});
  qa.ingest_instance({rec("m-1", "Router", std::nullopt, 0.0, 1.0),
                      rec("m-1", "Humanities", "Router", 1.5, 3.0)});
  CHECK(qa.topo_depth("Router") == 2);
  CHECK(qa.topo_depth("Math") == 1);
  CHECK(qa.topo_depth("Humanities") == 1);
}
