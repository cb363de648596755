#include "kairos/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "kairos/priority.hpp"  // kAnchorLabel

namespace kairos {

LengthSpec LengthSpec::fixed(std::int64_t v) {
  LengthSpec s;
  s.kind = Kind::Fixed;
  s.a = static_cast<double>(v);
  s.min_tokens = v;
  s.max_tokens = v;
  return s;
}

LengthSpec LengthSpec::uniform(std::int64_t lo, std::int64_t hi) {
  LengthSpec s;
  s.kind = Kind::UniformInt;
  s.a = static_cast<double>(lo);
  s.b = static_cast<double>(hi);
  s.min_tokens = lo;
  s.max_tokens = hi;
  return s;
}

LengthSpec LengthSpec::lognormal(double median_tokens, double sigma,
                                 std::int64_t cap) {
  LengthSpec s;
  s.kind = Kind::LognormalInt;
  s.a = std::log(median_tokens);
  s.b = sigma;
  s.min_tokens = 1;
  s.max_tokens = cap;
  return s;
}

std::int64_t LengthSpec::sample(Rng& rng) const {
  std::int64_t v = 1;
  switch (kind) {
    case Kind::Fixed:
      v = static_cast<std::int64_t>(a);
      break;
    case Kind::UniformInt:
      v = rng.uniform_int(static_cast<std::int64_t>(a),
                          static_cast<std::int64_t>(b));
      break;
    case Kind::LognormalInt:
      v = static_cast<std::int64_t>(std::llround(rng.lognormal(a, b)));
      break;
  }
  return std::clamp(v, min_tokens, max_tokens);
}

std::int64_t LengthSpec::upper_bound() const { return max_tokens; }

const AppSpec* WorkloadConfig::app_of_entry(const AgentId& entry) const {
  for (const auto& app : apps) {
    if (app.entry == entry) return &app;
  }
  return nullptr;
}

const AgentSpec* WorkloadConfig::find_agent(const AgentId& name) const {
  for (const auto& app : apps) {
    for (const auto& agent : app.agents) {
      if (agent.name == name) return &agent;
    }
  }
  return nullptr;
}

namespace {

void validate_name(const std::string& name, const char* what) {
  if (name.empty()) {
    throw std::invalid_argument(std::string(what) + " name is empty");
  }
  if (name == kAnchorLabel) {
    throw std::invalid_argument(std::string(what) + " name '" + name +
                                "' is reserved");
  }
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) {
      throw std::invalid_argument(std::string(what) + " name '" + name +
                                  "' has characters outside [A-Za-z0-9_-]");
    }
  }
}

}  // namespace

void WorkloadConfig::validate() const {
  if (apps.empty()) throw std::invalid_argument("no applications configured");
  if (duration <= 0.0) throw std::invalid_argument("duration must be positive");
  if (arrival.kind == ArrivalSpec::Kind::Poisson && arrival.rate <= 0.0) {
    throw std::invalid_argument("poisson rate must be positive");
  }
  std::set<AgentId> names;
  for (const auto& app : apps) {
    if (app.weight <= 0.0) {
      throw std::invalid_argument("app weight must be positive: " + app.name);
    }
    for (const auto& agent : app.agents) {
      validate_name(agent.name, "agent");
      if (!names.insert(agent.name).second) {
        throw std::invalid_argument("duplicate agent name: " + agent.name);
      }
    }
  }
  for (const auto& app : apps) {
    if (!find_agent(app.entry)) {
      throw std::invalid_argument("entry agent not defined: " + app.entry);
    }
    for (const auto& agent : app.agents) {
      if (!agent.choice.empty() && !agent.parallel.empty()) {
        throw std::invalid_argument(agent.name +
                                    ": choice and parallel are exclusive");
      }
      double p_sum = 0.0;
      for (const auto& [to, p] : agent.choice) {
        if (!find_agent(to)) {
          throw std::invalid_argument(agent.name + ": unknown downstream " + to);
        }
        if (p < 0.0) throw std::invalid_argument("negative probability");
        p_sum += p;
      }
      if (!agent.choice.empty() && std::abs(p_sum - 1.0) > 1e-9) {
        throw std::invalid_argument(agent.name +
                                    ": choice probabilities must sum to 1");
      }
      for (const auto& to : agent.parallel) {
        if (!find_agent(to)) {
          throw std::invalid_argument(agent.name + ": unknown downstream " + to);
        }
      }
      if (agent.feedback) {
        if (!find_agent(agent.feedback->target)) {
          throw std::invalid_argument(agent.name + ": unknown feedback target");
        }
        if (agent.feedback->max_iterations < 1) {
          throw std::invalid_argument(agent.name + ": max_iterations < 1");
        }
        if (agent.feedback->probability < 0.0 ||
            agent.feedback->probability > 1.0) {
          throw std::invalid_argument(agent.name + ": feedback probability");
        }
      }
    }
    // The declared choice/parallel structure must be acyclic; loops may only
    // come from declared feedback edges.
    std::map<AgentId, int> color;  // 0 white, 1 on stack, 2 done
    auto dfs = [&](auto&& self, const AgentId& node) -> void {
      color[node] = 1;
      const AgentSpec* spec = find_agent(node);
      std::vector<AgentId> next;
      for (const auto& [to, p] : spec->choice) {
        (void)p;
        next.push_back(to);
      }
      for (const auto& to : spec->parallel) next.push_back(to);
      for (const auto& to : next) {
        if (color[to] == 1) {
          throw std::invalid_argument(app.name + ": cycle through " + node +
                                      " -> " + to +
                                      " is not a declared feedback edge");
        }
        if (color[to] == 0) self(self, to);
      }
      color[node] = 2;
    };
    for (const auto& agent : app.agents) {
      if (color[agent.name] == 0) dfs(dfs, agent.name);
    }
  }
}

std::vector<double> scale_arrival_gaps(const std::vector<double>& timestamps,
                                       double scale) {
  if (scale <= 0.0) throw std::invalid_argument("scale must be positive");
  std::vector<double> out;
  out.reserve(timestamps.size());
  double prev = 0.0;
  double t = 0.0;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (i > 0) {
      const double gap = timestamps[i] - prev;
      if (gap < 0.0) {
        throw std::invalid_argument("non-monotone timestamp at index " +
                                    std::to_string(i));
      }
      t += gap * scale;
    }
    prev = timestamps[i];
    out.push_back(t);
  }
  return out;
}

std::vector<double> ingest_arrival_trace(const std::string& path,
                                         double scale) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open arrival trace: " + path);
  std::vector<double> timestamps;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      timestamps.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw std::invalid_argument("arrival trace line " +
                                  std::to_string(lineno) + ": bad timestamp");
    }
  }
  return scale_arrival_gaps(timestamps, scale);
}

PlannedInstance instantiate_workflow(const WorkloadConfig& config,
                                     const AgentId& entry,
                                     const MessageId& msg_id, Rng& rng) {
  PlannedInstance instance;
  instance.msg_id = msg_id;
  instance.entry = entry;
  // Loop budget per feedback-owning agent, shared across the instance.
  std::map<AgentId, int> loops_left;
  for (const auto& app : config.apps) {
    for (const auto& agent : app.agents) {
      if (agent.feedback) {
        loops_left[agent.name] = agent.feedback->max_iterations;
      }
    }
  }

  auto add_call = [&](const AgentId& agent_name,
                      std::vector<int> parents) -> int {
    const AgentSpec* spec = config.find_agent(agent_name);
    if (!spec) throw std::logic_error("unknown agent " + agent_name);
    PlannedCall call;
    call.node_id = static_cast<int>(instance.calls.size());
    call.agent = agent_name;
    call.parents = std::move(parents);
    call.prompt_tokens = spec->prompt_len.sample(rng);
    call.target_tokens = spec->output_len.sample(rng);
    instance.calls.push_back(std::move(call));
    return instance.calls.back().node_id;
  };

  // Depth-first structural expansion; every random draw happens here, at
  // arrival time, so execution order cannot perturb the realization. A fired
  // feedback loop repeats the covered stages instead of continuing, so the
  // downstream step only happens once the evaluation passes.
  auto expand = [&](auto&& self, int node_id) -> void {
    const AgentSpec* spec = config.find_agent(instance.calls[node_id].agent);
    if (spec->feedback && loops_left[spec->name] > 0 &&
        rng.uniform() < spec->feedback->probability) {
      --loops_left[spec->name];
      self(self, add_call(spec->feedback->target, {node_id}));
      return;
    }
    if (!spec->parallel.empty()) {
      for (const auto& to : spec->parallel) {
        self(self, add_call(to, {node_id}));
      }
    } else if (!spec->choice.empty()) {
      double u = rng.uniform();
      const AgentId* chosen = &spec->choice.back().first;
      for (const auto& [to, p] : spec->choice) {
        if (u < p) {
          chosen = &to;
          break;
        }
        u -= p;
      }
      self(self, add_call(*chosen, {node_id}));
    }
  };
  expand(expand, add_call(entry, {}));
  return instance;
}

namespace {

void finalize_instance(PlannedInstance& instance, const ReferenceRates& rates,
                       std::uint64_t* next_uid,
                       std::map<std::uint64_t, double>* remaining_by_uid) {
  // Children lists for the critical-path recursion.
  std::vector<std::vector<int>> children(instance.calls.size());
  for (const auto& call : instance.calls) {
    for (int p : call.parents) children[p].push_back(call.node_id);
  }
  for (auto& call : instance.calls) {
    call.uid = (*next_uid)++;
    call.pure_exec =
        static_cast<double>(call.prompt_tokens) / rates.prefill_rate +
        static_cast<double>(call.target_tokens) / rates.decode_rate;
  }
  // Calls are created parents-first, so a reverse sweep sees children done.
  for (auto it = instance.calls.rbegin(); it != instance.calls.rend(); ++it) {
    double tail = 0.0;
    for (int c : children[it->node_id]) {
      tail = std::max(tail, instance.calls[c].remaining_exec);
    }
    it->remaining_exec = it->pure_exec + tail;
    (*remaining_by_uid)[it->uid] = it->remaining_exec;
  }
}

}  // namespace

WorkloadRealization realize(const WorkloadConfig& config,
                            const ReferenceRates& rates, std::uint64_t seed) {
  config.validate();
  WorkloadRealization real;

  // Arrival times.
  std::vector<double> arrivals;
  if (config.arrival.kind == ArrivalSpec::Kind::Poisson) {
    Rng arrival_rng(Rng::derive(seed, 0));
    double t = 0.0;
    while (true) {
      t += arrival_rng.exponential(config.arrival.rate);
      if (t > config.duration) break;
      arrivals.push_back(t);
    }
  } else {
    auto all = ingest_arrival_trace(config.arrival.path, config.arrival.scale);
    for (double t : all) {
      if (t <= config.duration) arrivals.push_back(t);
    }
  }

  // Entry selection stream is independent of the per-instance draws.
  Rng entry_rng(Rng::derive(seed, 1));
  double weight_sum = 0.0;
  for (const auto& app : config.apps) weight_sum += app.weight;

  MessageIdFactory ids;
  std::uint64_t next_uid = 1;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const AppSpec* app = nullptr;
    if (config.entry_selection == WorkloadConfig::EntrySelection::Cycle) {
      app = &config.apps[i % config.apps.size()];
    } else {
      double u = entry_rng.uniform() * weight_sum;
      for (const auto& a : config.apps) {
        if (u < a.weight) {
          app = &a;
          break;
        }
        u -= a.weight;
      }
      if (!app) app = &config.apps.back();
    }
    Rng instance_rng(Rng::derive(seed, 1000 + i));
    auto instance = instantiate_workflow(config, app->entry, ids.next(),
                                         instance_rng);
    instance.arrival = arrivals[i];
    finalize_instance(instance, rates, &next_uid, &real.remaining_by_uid);
    real.total_calls += instance.calls.size();
    real.instances.push_back(std::move(instance));
  }
  return real;
}

WorkflowGraph template_graph(const AppSpec& app) {
  auto find = [&](const AgentId& name) -> const AgentSpec* {
    for (const auto& agent : app.agents) {
      if (agent.name == name) return &agent;
    }
    throw std::invalid_argument("unknown agent in template: " + name);
  };

  WorkflowGraph graph;
  int msg_counter = 0;

  // Synthesizes one full realization: `pick` forces the branch taken at each
  // choice node (default: first alternative); `loop_owner` takes its feedback
  // edge exactly once. Parallel children share a time window so the sweep
  // line sees them as concurrent; everything else is strictly sequential.
  auto make_instance = [&](const std::map<AgentId, std::size_t>& pick,
                           const std::optional<AgentId>& loop_owner) {
    std::vector<RequestRecord> records;
    const MessageId msg = "template-" + std::to_string(msg_counter++);
    std::map<AgentId, int> loops;
    if (loop_owner) loops[*loop_owner] = 1;
    double clock = 0.0;

    auto emit = [&](auto&& self, const AgentId& name,
                    std::optional<AgentId> upstream, double start,
                    double end) -> void {
      if (records.size() > 10000) {
        throw std::logic_error("template expansion too deep: " + app.name);
      }
      RequestRecord r;
      r.msg_id = msg;
      r.agent = name;
      r.upstream = std::move(upstream);
      r.exec_start = start;
      r.exec_end = end;
      r.app_start = 0.0;
      records.push_back(r);
      clock = std::max(clock, end);

      const AgentSpec* spec = find(name);
      if (spec->feedback && loops[name] > 0) {
        --loops[name];
        const double t0 = clock + 1.0;
        self(self, spec->feedback->target, name, t0, t0 + 1.0);
        return;
      }
      if (!spec->parallel.empty()) {
        const double t0 = clock + 1.0;
        for (const auto& child : spec->parallel) {
          self(self, child, name, t0, t0 + 1.0);
        }
      } else if (!spec->choice.empty()) {
        std::size_t idx = 0;
        if (auto it = pick.find(name); it != pick.end()) idx = it->second;
        const double t0 = clock + 1.0;
        self(self, spec->choice[idx].first, name, t0, t0 + 1.0);
      }
    };
    emit(emit, app.entry, std::nullopt, 0.0, 1.0);
    graph.ingest_instance(records);
  };

  // Base shape plus one shape per non-default alternative and one per
  // feedback loop: together they cover every declared edge with the same
  // per-instance call patterns a live trace would show.
  make_instance({}, std::nullopt);
  for (const auto& agent : app.agents) {
    for (std::size_t j = 1; j < agent.choice.size(); ++j) {
      make_instance({{agent.name, j}}, std::nullopt);
    }
    if (agent.feedback) {
      make_instance({}, agent.name);
    }
  }
  return graph;
}

std::map<AgentId, int> topo_depths(const WorkloadConfig& config) {
  std::map<AgentId, int> depths;
  for (const auto& app : config.apps) {
    const auto graph = template_graph(app);
    for (const auto& agent : app.agents) {
      depths[agent.name] = graph.topo_depth(agent.name);
    }
  }
  return depths;
}

AppSpec qa_app() {
  AppSpec app;
  app.name = "qa";
  app.entry = "Router";
  AgentSpec router;
  router.name = "Router";
  router.prompt_len = LengthSpec::uniform(40, 80);
  router.output_len = LengthSpec::lognormal(10.0, 0.25, 40);
  router.choice = {{"Math", 0.5}, {"Humanities", 0.5}};
  AgentSpec math;
  math.name = "Math";
  math.prompt_len = LengthSpec::uniform(60, 120);
  math.output_len = LengthSpec::lognormal(70.0, 0.35, 400);
  AgentSpec hum;
  hum.name = "Humanities";
  hum.prompt_len = LengthSpec::uniform(60, 120);
  hum.output_len = LengthSpec::lognormal(240.0, 0.35, 900);
  app.agents = {router, math, hum};
  return app;
}

AppSpec rg_app() {
  AppSpec app;
  app.name = "rg";
  app.entry = "Researcher";
  AgentSpec researcher;
  researcher.name = "Researcher";
  researcher.prompt_len = LengthSpec::uniform(80, 160);
  researcher.output_len = LengthSpec::lognormal(150.0, 0.35, 700);
  researcher.choice = {{"Writer", 1.0}};
  AgentSpec writer;
  writer.name = "Writer";
  writer.prompt_len = LengthSpec::uniform(120, 240);
  writer.output_len = LengthSpec::lognormal(380.0, 0.30, 1100);
  app.agents = {researcher, writer};
  return app;
}

AppSpec cg_app() {
  AppSpec app;
  app.name = "cg";
  app.entry = "ProductManager";
  auto chain = [](const char* name, double median, double sigma,
                  std::int64_t cap, const char* next) {
    AgentSpec a;
    a.name = name;
    a.prompt_len = LengthSpec::uniform(80, 160);
    a.output_len = LengthSpec::lognormal(median, sigma, cap);
    if (next) a.choice = {{next, 1.0}};
    return a;
  };
  AgentSpec pm = chain("ProductManager", 70.0, 0.35, 300, "Architect");
  AgentSpec arch = chain("Architect", 110.0, 0.35, 450, "ProjectManager");
  AgentSpec pjm = chain("ProjectManager", 50.0, 0.30, 200, "Engineer");
  AgentSpec eng = chain("Engineer", 300.0, 0.40, 1100, "QAEngineer");
  eng.prompt_len = LengthSpec::uniform(100, 200);
  AgentSpec qa = chain("QAEngineer", 40.0, 0.30, 160, nullptr);
  qa.feedback = AgentSpec::Feedback{"Engineer", 0.3, 3};
  app.agents = {pm, arch, pjm, eng, qa};
  return app;
}

namespace {

WorkloadConfig single_app(AppSpec app, double rate, double duration,
                          std::uint64_t seed) {
  WorkloadConfig cfg;
  cfg.apps = {std::move(app)};
  cfg.arrival.kind = ArrivalSpec::Kind::Poisson;
  cfg.arrival.rate = rate;
  cfg.duration = duration;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

WorkloadConfig qa_workload(double rate, double duration, std::uint64_t seed) {
  return single_app(qa_app(), rate, duration, seed);
}

WorkloadConfig rg_workload(double rate, double duration, std::uint64_t seed) {
  return single_app(rg_app(), rate, duration, seed);
}

WorkloadConfig cg_workload(double rate, double duration, std::uint64_t seed) {
  return single_app(cg_app(), rate, duration, seed);
}

WorkloadConfig colocated_workload(double rate, double duration,
                                  std::uint64_t seed) {
  WorkloadConfig cfg;
  cfg.apps = {qa_app(), rg_app(), cg_app()};
  cfg.arrival.kind = ArrivalSpec::Kind::Poisson;
  cfg.arrival.rate = rate;
  cfg.duration = duration;
  cfg.seed = seed;
  return cfg;
}

}  // namespace kairos
