#include "kairos/scheduler.hpp"

namespace kairos {

void KairosScheduler::on_instance_complete(const ProfilerSnapshot& profile,
                                           std::uint64_t completed_instances,
                                           bool newly_converged) {
  if (newly_converged || completed_instances % cfg_.rebuild_interval == 0) {
    rebuild(profile);
  }
}

void KairosScheduler::rebuild(const ProfilerSnapshot& profile) {
  std::map<AgentId, std::vector<double>> converged;
  for (const auto& [agent, p] : profile.agents) {
    if (p.remaining_converged && !p.remaining_samples.empty()) {
      converged[agent] = p.remaining_samples;
    }
  }
  if (converged.empty()) return;  // nothing to rank yet
  const auto matrix = build_distance_matrix_from_samples(converged);
  table_ = mds_embed_1d(matrix, next_version_++);
  if (cfg_.keep_table_history) history_.push_back(table_);
}

}  // namespace kairos
