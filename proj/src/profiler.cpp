#include "kairos/profiler.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "kairos/trace.hpp"

namespace kairos {

double ProfilerSnapshot::expected_exec_time(const AgentId& agent,
                                            double fallback) const {
  auto it = agents.find(agent);
  if (it == agents.end() || it->second.exec_samples.empty()) return fallback;
  return mode_estimate(it->second.exec_samples).value;
}

LatencyProfiler::LatencyProfiler(ProfilerConfig cfg) : cfg_(cfg) {}

void LatencyProfiler::record_execution(const AgentId& agent, double latency) {
  if (latency < 0.0) {
    throw std::invalid_argument("negative execution latency");
  }
  auto it = exec_.find(agent);
  if (it == exec_.end()) {
    it = exec_.emplace(agent, EmpiricalDistribution(cfg_.exec)).first;
  }
  it->second.add(latency);
}

void LatencyProfiler::record_remaining(
    const std::vector<RequestRecord>& instance_records) {
  if (instance_records.empty()) return;
  double finish = instance_records.front().exec_end;
  for (const auto& r : instance_records) finish = std::max(finish, r.exec_end);
  for (const auto& r : instance_records) {
    auto it = remaining_.find(r.agent);
    if (it == remaining_.end()) {
      it = remaining_
               .emplace(r.agent, RemainingLatencyDistribution{
                                     r.agent,
                                     EmpiricalDistribution(cfg_.remaining)})
               .first;
    }
    const bool before = it->second.dist.converged();
    it->second.dist.add(finish - r.exec_start);
    if (!before && it->second.dist.converged()) newly_converged_ = true;
  }
  ++version_;
}

void LatencyProfiler::ingest_trace(const std::vector<RequestRecord>& records) {
  std::map<MessageId, std::vector<RequestRecord>> by_msg;
  for (const auto& r : records) {
    record_execution(r.agent, r.exec_end - r.exec_start);
    by_msg[r.msg_id].push_back(r);
  }
  for (const auto& [msg, recs] : by_msg) record_remaining(recs);
}

const EmpiricalDistribution* LatencyProfiler::exec_distribution(
    const AgentId& agent) const {
  auto it = exec_.find(agent);
  return it == exec_.end() ? nullptr : &it->second;
}

const RemainingLatencyDistribution* LatencyProfiler::remaining_distribution(
    const AgentId& agent) const {
  auto it = remaining_.find(agent);
  return it == remaining_.end() ? nullptr : &it->second;
}

std::map<AgentId, const EmpiricalDistribution*>
LatencyProfiler::converged_remaining() const {
  std::map<AgentId, const EmpiricalDistribution*> out;
  for (const auto& [agent, rem] : remaining_) {
    if (rem.dist.converged()) out[agent] = &rem.dist;
  }
  return out;
}

bool LatencyProfiler::take_newly_converged() {
  const bool v = newly_converged_;
  newly_converged_ = false;
  return v;
}

std::shared_ptr<const ProfilerSnapshot> LatencyProfiler::snapshot() {
  auto snap = std::make_shared<ProfilerSnapshot>();
  snap->version = version_;
  for (const auto& [agent, dist] : exec_) {
    auto& p = snap->agents[agent];
    p.exec_samples = dist.samples();
    p.exec_converged = dist.converged();
  }
  for (const auto& [agent, rem] : remaining_) {
    auto& p = snap->agents[agent];
    p.remaining_samples = rem.dist.samples();
    p.remaining_converged = rem.dist.converged();
  }
  return snap;
}

std::string LatencyProfiler::summary_csv() const {
  std::ostringstream out;
  out << "agent,kind,count,min,median,mode,p90,max,converged\n";
  auto row = [&](const AgentId& agent, const char* kind,
                 const EmpiricalDistribution& d) {
    if (d.empty()) return;
    const auto mode = mode_estimate(d.samples(), cfg_.mode_min_samples);
    out << agent << ',' << kind << ',' << d.size() << ','
        << format_seconds(d.min()) << ',' << format_seconds(d.median()) << ','
        << format_seconds(mode.value) << ',' << format_seconds(d.quantile(0.9))
        << ',' << format_seconds(d.max()) << ','
        << (d.converged() ? "true" : "false") << '\n';
  };
  for (const auto& [agent, dist] : exec_) row(agent, "exec", dist);
  for (const auto& [agent, rem] : remaining_) row(agent, "remaining", rem.dist);
  return out.str();
}

}  // namespace kairos
