#include "kairos/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace kairos {

using nlohmann::json;

namespace {

LengthSpec parse_length(const json& j, const std::string& where) {
  if (j.is_number_integer()) {
    return LengthSpec::fixed(j.get<std::int64_t>());
  }
  const std::string kind = j.value("kind", "");
  if (kind == "fixed") return LengthSpec::fixed(j.at("tokens").get<std::int64_t>());
  if (kind == "uniform") {
    return LengthSpec::uniform(j.at("lo").get<std::int64_t>(),
                               j.at("hi").get<std::int64_t>());
  }
  if (kind == "lognormal") {
    return LengthSpec::lognormal(j.at("median").get<double>(),
                                 j.at("sigma").get<double>(),
                                 j.at("cap").get<std::int64_t>());
  }
  throw std::invalid_argument(where + ": unknown length kind '" + kind + "'");
}

AgentSpec parse_agent(const json& j) {
  AgentSpec a;
  a.name = j.at("name").get<std::string>();
  a.prompt_len = parse_length(j.at("prompt_len"), a.name + ".prompt_len");
  a.output_len = parse_length(j.at("output_len"), a.name + ".output_len");
  if (j.contains("choice")) {
    for (const auto& entry : j.at("choice")) {
      a.choice.emplace_back(entry.at(0).get<std::string>(),
                            entry.at(1).get<double>());
    }
  }
  if (j.contains("parallel")) {
    for (const auto& entry : j.at("parallel")) {
      a.parallel.push_back(entry.get<std::string>());
    }
  }
  if (j.contains("feedback")) {
    const auto& f = j.at("feedback");
    a.feedback = AgentSpec::Feedback{f.at("target").get<std::string>(),
                                     f.at("probability").get<double>(),
                                     f.value("max_iterations", 1)};
  }
  return a;
}

AppSpec parse_app(const json& j) {
  AppSpec app;
  app.name = j.at("name").get<std::string>();
  app.entry = j.at("entry").get<std::string>();
  app.weight = j.value("weight", 1.0);
  for (const auto& agent : j.at("agents")) {
    app.agents.push_back(parse_agent(agent));
  }
  return app;
}

AppSpec template_by_name(const std::string& name) {
  if (name == "qa") return qa_app();
  if (name == "rg") return rg_app();
  if (name == "cg") return cg_app();
  throw std::invalid_argument("unknown workload template: " + name);
}

}  // namespace

StrategyConfig strategy_from_shorthand(const std::string& name) {
  if (name == "kairos") return StrategyConfig::parse("kairos", "time_slot");
  if (name == "parrot" || name == "fcfs") {
    return StrategyConfig::parse("fcfs", "round_robin");
  }
  if (name == "ayo" || name == "topo" || name == "topo_depth") {
    return StrategyConfig::parse("topo_depth", "round_robin");
  }
  if (name == "oracle") return StrategyConfig::parse("oracle", "round_robin");
  if (name == "kairos_wo_priority") {
    return StrategyConfig::parse("kairos_wo_priority", "time_slot");
  }
  if (name == "kairos_wo_packing") {
    return StrategyConfig::parse("kairos", "kairos_wo_packing");
  }
  const auto plus = name.find('+');
  if (plus != std::string::npos) {
    return StrategyConfig::parse(name.substr(0, plus), name.substr(plus + 1));
  }
  throw std::invalid_argument("unknown strategy shorthand: " + name);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg;

  const auto& w = j.at("workload");
  if (w.contains("templates")) {
    for (const auto& name : w.at("templates")) {
      cfg.workload.apps.push_back(template_by_name(name.get<std::string>()));
    }
  }
  if (w.contains("apps")) {
    for (const auto& app : w.at("apps")) {
      cfg.workload.apps.push_back(parse_app(app));
    }
  }
  const auto& arrival = w.at("arrival");
  const std::string arrival_kind = arrival.value("kind", "poisson");
  if (arrival_kind == "poisson") {
    cfg.workload.arrival.kind = ArrivalSpec::Kind::Poisson;
    cfg.workload.arrival.rate = arrival.at("rate").get<double>();
  } else if (arrival_kind == "trace") {
    cfg.workload.arrival.kind = ArrivalSpec::Kind::TraceFile;
    cfg.workload.arrival.path = arrival.at("path").get<std::string>();
    cfg.workload.arrival.scale = arrival.value("scale", 1.0);
  } else {
    throw std::invalid_argument("unknown arrival kind: " + arrival_kind);
  }
  cfg.workload.duration = w.at("duration").get<double>();
  cfg.workload.seed = w.value("seed", 1);
  const std::string entry_sel = w.value("entry_selection", "weighted");
  if (entry_sel == "weighted") {
    cfg.workload.entry_selection = WorkloadConfig::EntrySelection::Weighted;
  } else if (entry_sel == "cycle") {
    cfg.workload.entry_selection = WorkloadConfig::EntrySelection::Cycle;
  } else {
    throw std::invalid_argument("unknown entry_selection: " + entry_sel);
  }

  const auto& e = j.at("engine");
  for (const auto& inst : e.at("instances")) {
    InstanceProfile p;
    p.id = inst.at("id").get<int>();
    p.capacity_tokens = inst.at("capacity_tokens").get<double>();
    p.decode_rate = inst.value("decode_rate", 50.0);
    p.prefill_rate = inst.value("prefill_rate", 8000.0);
    p.max_batch = inst.value("max_batch", 64);
    cfg.engine.instances.push_back(p);
  }
  cfg.engine.dispatch_period = e.value("dispatch_period", 0.1);
  cfg.engine.recompute_fraction = e.value("recompute_fraction", 1.0);
  cfg.engine.default_expected_time = e.value("default_expected_time", 1.0);

  if (j.contains("dispatcher")) {
    const auto& d = j.at("dispatcher");
    cfg.dispatcher.slot_len = d.value("slot_len", 0.5);
    cfg.dispatcher.resume_watermark = d.value("resume_watermark", 0.85);
    cfg.dispatcher.static_threshold = d.value("static_threshold", 0.90);
  }

  for (const auto& s : j.at("strategies")) {
    if (s.is_string()) {
      cfg.strategies.push_back(strategy_from_shorthand(s.get<std::string>()));
    } else {
      auto strategy = StrategyConfig::parse(
          s.at("scheduler").get<std::string>(),
          s.at("dispatcher").get<std::string>());
      if (s.contains("label")) strategy.label = s.at("label").get<std::string>();
      strategy.oracle_expected_time = s.value("oracle_expected_time", false);
      cfg.strategies.push_back(strategy);
    }
  }
  for (const auto& seed : j.at("seeds")) {
    cfg.seeds.push_back(seed.get<std::uint64_t>());
  }
  if (j.contains("metrics")) {
    cfg.metrics.warmup_seconds = j.at("metrics").value("warmup_seconds", 0.0);
  }
  cfg.max_parallel_cells = j.value("max_parallel_cells", 0);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

}  // namespace kairos
