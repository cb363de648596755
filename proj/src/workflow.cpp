#include "kairos/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kairos {

const char* to_string(FanoutKind kind) {
  switch (kind) {
    case FanoutKind::Single: return "single";
    case FanoutKind::Parallel: return "parallel";
    case FanoutKind::Sequential: return "sequential";
  }
  return "?";
}

FanoutKind classify_fanout(const std::vector<TaskSpan>& spans) {
  if (spans.size() < 2) {
    throw std::invalid_argument("classify_fanout needs at least two spans");
  }
  struct Event {
    double t;
    int delta;  // +1 open, -1 close
  };
  std::vector<Event> events;
  events.reserve(spans.size() * 2);
  for (const auto& s : spans) {
    if (s.exec_end < s.exec_start) {
      throw std::invalid_argument("span with exec_end < exec_start");
    }
    events.push_back({s.exec_start, +1});
    events.push_back({s.exec_end, -1});
  }
  // Closings sort before openings at (nearly) equal times so touching
  // endpoints never count as simultaneity.
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (std::abs(a.t - b.t) > kTimeEpsilon) return a.t < b.t;
    return a.delta < b.delta;
  });
  int open = 0;
  for (const auto& e : events) {
    open += e.delta;
    if (open >= 2) return FanoutKind::Parallel;
  }
  return FanoutKind::Sequential;
}

void WorkflowGraph::ingest(const RequestRecord& record) {
  nodes_.insert(record.agent);
  if (record.upstream) {
    nodes_.insert(*record.upstream);
    ++edges_[{*record.upstream, record.agent}];
  } else {
    entries_.insert(record.agent);
  }
}

void WorkflowGraph::ingest_instance(const std::vector<RequestRecord>& records) {
  if (records.empty()) return;
  const MessageId& msg = records.front().msg_id;
  std::optional<AgentId> instance_entry;
  for (const auto& r : records) {
    if (r.msg_id != msg) {
      throw std::invalid_argument(
          "ingest_instance: records span multiple msg_ids");
    }
    if (!r.upstream) {
      if (instance_entry && *instance_entry != r.agent) {
        diagnostics_.push_back("msg " + msg + ": conflicting entries '" +
                               *instance_entry + "' and '" + r.agent + "'");
      }
      if (!instance_entry) instance_entry = r.agent;
    }
    ingest(r);
  }

  // Group this instance's calls by upstream name and classify the pattern of
  // each upstream that issued calls to two or more distinct downstreams.
  std::map<AgentId, std::vector<TaskSpan>> by_upstream;
  for (const auto& r : records) {
    if (!r.upstream) continue;
    by_upstream[*r.upstream].push_back({r.agent, r.exec_start, r.exec_end});
  }
  for (auto& [up, spans] : by_upstream) {
    auto& pat = fanouts_[up];
    pat.node = up;
    std::set<AgentId> distinct;
    for (const auto& s : spans) distinct.insert(s.agent);
    pat.downstreams.insert(distinct.begin(), distinct.end());
    if (distinct.size() < 2) {
      // Repeated calls to one downstream (e.g. a feedback loop) are a single
      // call pattern, not a fanout.
      ++pat.single_obs;
    } else if (classify_fanout(spans) == FanoutKind::Parallel) {
      ++pat.parallel_obs;
    } else {
      ++pat.sequential_obs;
    }
    if (pat.parallel_obs + pat.sequential_obs == 0) {
      pat.kind = FanoutKind::Single;
    } else if (pat.parallel_obs >= pat.sequential_obs) {
      // Mixed evidence: majority vote, ties parallel.
      pat.kind = FanoutKind::Parallel;
    } else {
      pat.kind = FanoutKind::Sequential;
    }
  }
  ++instances_ingested_;
}

std::vector<WorkflowEdge> WorkflowGraph::edges() const {
  std::vector<WorkflowEdge> out;
  out.reserve(edges_.size());
  for (const auto& [key, count] : edges_) {
    out.push_back({key.first, key.second, count});
  }
  return out;
}

std::uint64_t WorkflowGraph::edge_observations(const AgentId& from,
                                               const AgentId& to) const {
  auto it = edges_.find({from, to});
  return it == edges_.end() ? 0 : it->second;
}

bool WorkflowGraph::has_edge(const AgentId& from, const AgentId& to) const {
  return edges_.count({from, to}) > 0;
}

const AgentId& WorkflowGraph::entry() const {
  if (entries_.size() != 1) {
    throw std::logic_error("graph has " + std::to_string(entries_.size()) +
                           " entries, expected exactly one");
  }
  return *entries_.begin();
}

std::vector<AgentId> WorkflowGraph::downstream_agents(const AgentId& from) const {
  std::vector<AgentId> out;
  for (const auto& [key, count] : edges_) {
    if (key.first == from) out.push_back(key.second);
  }
  return out;
}

std::set<std::pair<AgentId, AgentId>> WorkflowGraph::feedback_edges() const {
  std::set<std::pair<AgentId, AgentId>> feedback;
  std::set<AgentId> done;
  std::set<AgentId> on_stack;

  // Iterative DFS from each entry (then any unreached node, keeping the walk
  // total on disconnected traces); an edge into a node on the current stack
  // closes a cycle.
  auto dfs = [&](const AgentId& root) {
    if (done.count(root)) return;
    struct Frame {
      AgentId node;
      std::vector<AgentId> next;
      std::size_t i = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({root, downstream_agents(root)});
    on_stack.insert(root);
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.i < f.next.size()) {
        const AgentId to = f.next[f.i++];
        if (on_stack.count(to)) {
          feedback.insert({f.node, to});
        } else if (!done.count(to)) {
          on_stack.insert(to);
          stack.push_back({to, downstream_agents(to)});
        }
      } else {
        done.insert(f.node);
        on_stack.erase(f.node);
        stack.pop_back();
      }
    }
  };
  for (const auto& e : entries_) dfs(e);
  for (const auto& n : nodes_) dfs(n);
  return feedback;
}

namespace {

bool reaches(const WorkflowGraph& g, const AgentId& from, const AgentId& to) {
  std::set<AgentId> seen;
  std::vector<AgentId> stack{from};
  while (!stack.empty()) {
    AgentId n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const auto& next : g.downstream_agents(n)) {
      if (next == to) return true;
      stack.push_back(next);
    }
  }
  return false;
}

}  // namespace

std::vector<std::vector<AgentId>> WorkflowGraph::downstream_paths(
    const AgentId& agent, int max_loop) const {
  if (!nodes_.count(agent)) {
    throw std::invalid_argument("unknown agent: " + agent);
  }
  const auto feedback = feedback_edges();

  // Feedback edges bound the number of loop iterations; the other edges of a
  // loop body get one extra pass per iteration. Acyclic edges are simple.
  auto budget_of = [&](const AgentId& from, const AgentId& to) {
    if (feedback.count({from, to})) return max_loop;
    const bool on_cycle = (from == to) || reaches(*this, to, from);
    return on_cycle ? max_loop + 1 : 1;
  };

  std::vector<std::vector<AgentId>> paths;
  std::vector<AgentId> current{agent};
  std::map<std::pair<AgentId, AgentId>, int> used;

  // Regular edges always extend the path; feedback edges fork the walk: the
  // workflow may exit the loop here, or iterate again while budget lasts.
  auto walk = [&](auto&& self, const AgentId& node) -> void {
    bool extended = false;
    for (const auto& to : downstream_agents(node)) {
      const std::pair<AgentId, AgentId> edge{node, to};
      const bool is_feedback = feedback.count(edge) > 0;
      if (used[edge] >= budget_of(node, to)) continue;
      ++used[edge];
      current.push_back(to);
      self(self, to);
      current.pop_back();
      --used[edge];
      if (!is_feedback) extended = true;
    }
    if (!extended) {
      // Terminal, or a loop exit point: both are execution-complete paths.
      paths.push_back(current);
    }
  };
  walk(walk, agent);
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  return paths;
}

int WorkflowGraph::topo_depth(const AgentId& agent) const {
  auto paths = downstream_paths(agent, /*max_loop=*/1);
  int depth = 1;
  for (const auto& p : paths) {
    depth = std::max(depth, static_cast<int>(p.size()));
  }
  return depth;
}

std::string WorkflowGraph::report() const {
  std::ostringstream out;
  out << "workflow graph: " << nodes_.size() << " nodes, " << edges_.size()
      << " edges, " << instances_ingested_ << " instances\n";
  out << "entries:";
  for (const auto& e : entries_) out << ' ' << e;
  out << '\n';
  out << "edges:\n";
  for (const auto& [key, count] : edges_) {
    out << "  " << key.first << " -> " << key.second << "  (x" << count
        << ")\n";
  }
  const auto feedback = feedback_edges();
  if (!feedback.empty()) {
    out << "feedback edges:\n";
    for (const auto& [from, to] : feedback) {
      out << "  " << from << " -> " << to << '\n';
    }
  }
  out << "fanouts:\n";
  for (const auto& [node, pat] : fanouts_) {
    out << "  " << node << ": " << to_string(pat.kind) << " {";
    bool first = true;
    for (const auto& d : pat.downstreams) {
      if (!first) out << ", ";
      out << d;
      first = false;
    }
    out << "}  [par=" << pat.parallel_obs << " seq=" << pat.sequential_obs
        << " single=" << pat.single_obs << "]\n";
  }
  if (!diagnostics_.empty()) {
    out << "diagnostics:\n";
    for (const auto& d : diagnostics_) out << "  " << d << '\n';
  }
  return out.str();
}

void WorkflowAnalyzer::observe(const RequestRecord& record) {
  pending_[record.msg_id].push_back(record);
}

void WorkflowAnalyzer::complete_instance(const MessageId& msg_id) {
  auto it = pending_.find(msg_id);
  if (it == pending_.end()) return;
  // Order within the instance must not matter; normalize for determinism.
  auto records = std::move(it->second);
  pending_.erase(it);
  std::sort(records.begin(), records.end(),
            [](const RequestRecord& a, const RequestRecord& b) {
              return std::tie(a.exec_start, a.agent, a.exec_end) <
                     std::tie(b.exec_start, b.agent, b.exec_end);
            });
  graph_.ingest_instance(records);
  refresh_snapshot();
}

void WorkflowAnalyzer::ingest_trace(const std::vector<RequestRecord>& records) {
  for (const auto& r : records) observe(r);
  std::vector<MessageId> msgs;
  msgs.reserve(pending_.size());
  for (const auto& [msg, recs] : pending_) msgs.push_back(msg);
  for (const auto& msg : msgs) complete_instance(msg);
}

std::shared_ptr<const WorkflowGraph> WorkflowAnalyzer::snapshot() const {
  if (!snapshot_) return std::make_shared<const WorkflowGraph>(graph_);
  return snapshot_;
}

void WorkflowAnalyzer::refresh_snapshot() {
  snapshot_ = std::make_shared<const WorkflowGraph>(graph_);
}

}  // namespace kairos
