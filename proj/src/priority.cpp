#include "kairos/priority.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kairos/trace.hpp"

namespace kairos {

namespace {

DistanceMatrix build_matrix(
    const std::vector<std::pair<AgentId, std::vector<double>>>& agents) {
  if (agents.empty()) {
    throw std::invalid_argument("no converged agent distributions");
  }
  DistanceMatrix m;
  for (const auto& [agent, samples] : agents) {
    if (agent == kAnchorLabel) {
      throw std::invalid_argument("agent name collides with anchor label");
    }
    if (samples.empty()) {
      throw std::invalid_argument("empty distribution for agent " + agent);
    }
    m.labels.push_back(agent);
  }
  m.labels.push_back(kAnchorLabel);

  const std::vector<double> anchor{0.0};
  const std::size_t n = m.labels.size();
  m.d.assign(n, std::vector<double>(n, 0.0));
  auto samples_of = [&](std::size_t i) -> const std::vector<double>& {
    return i + 1 == n ? anchor : agents[i].second;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = wasserstein_1d(samples_of(i), samples_of(j));
      m.d[i][j] = w;
      m.d[j][i] = w;
    }
  }
  return m;
}

}  // namespace

DistanceMatrix build_distance_matrix(
    const std::map<AgentId, const EmpiricalDistribution*>& dists) {
  std::vector<std::pair<AgentId, std::vector<double>>> agents;
  agents.reserve(dists.size());
  for (const auto& [agent, dist] : dists) {
    agents.emplace_back(agent, dist->samples());
  }
  return build_matrix(agents);
}

DistanceMatrix build_distance_matrix_from_samples(
    const std::map<AgentId, std::vector<double>>& samples) {
  std::vector<std::pair<AgentId, std::vector<double>>> agents(samples.begin(),
                                                              samples.end());
  return build_matrix(agents);
}

std::vector<double> classical_mds_1d(
    const std::vector<std::vector<double>>& d) {
  const std::size_t n = d.size();
  if (n < 2) {
    throw std::invalid_argument("MDS needs at least two points");
  }
  Eigen::MatrixXd sq(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          d[i][j] * d[i][j];
    }
  }
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(ni, ni) -
      Eigen::MatrixXd::Constant(ni, ni, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd b = -0.5 * centering * sq * centering;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("MDS eigendecomposition failed");
  }
  // Eigenvalues are sorted ascending; the leading one carries the 1D layout.
  const double lambda = solver.eigenvalues()(ni - 1);
  std::vector<double> coords(n, 0.0);
  if (lambda <= 1e-15) return coords;  // degenerate: one priority class
  const double scale = std::sqrt(lambda);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = scale * solver.eigenvectors()(static_cast<Eigen::Index>(i),
                                              ni - 1);
  }
  return coords;
}

PriorityTable mds_embed_1d(const DistanceMatrix& m, std::uint64_t version) {
  const auto coords = classical_mds_1d(m.d);
  PriorityTable table;
  table.version = version;
  table.anchor_coord = coords[m.anchor_index()];
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (i == m.anchor_index()) continue;
    table.coord[m.labels[i]] = coords[i];
  }
  return table;
}

std::optional<double> PriorityTable::anchor_distance(
    const AgentId& agent) const {
  auto it = coord.find(agent);
  if (it == coord.end()) return std::nullopt;
  return std::abs(it->second - anchor_coord);
}

double PriorityTable::median_anchor_distance() const {
  if (coord.empty()) return 0.0;
  std::vector<double> dists;
  dists.reserve(coord.size());
  for (const auto& [agent, c] : coord) {
    dists.push_back(std::abs(c - anchor_coord));
  }
  std::sort(dists.begin(), dists.end());
  return quantile_sorted(dists, 0.5);
}

double PriorityTable::priority_key(const AgentId& agent) const {
  if (auto d = anchor_distance(agent)) return *d;
  return median_anchor_distance();
}

std::vector<AgentId> PriorityTable::ranking() const {
  std::vector<AgentId> agents;
  agents.reserve(coord.size());
  for (const auto& [agent, c] : coord) agents.push_back(agent);
  std::sort(agents.begin(), agents.end(),
            [&](const AgentId& a, const AgentId& b) {
              const double da = *anchor_distance(a);
              const double db = *anchor_distance(b);
              if (da != db) return da < db;
              return a < b;
            });
  return agents;
}

std::string PriorityTable::csv() const {
  std::ostringstream out;
  out << "version,agent,coordinate,anchor_distance,rank\n";
  const auto ranked = ranking();
  std::map<AgentId, std::size_t> rank_of;
  for (std::size_t i = 0; i < ranked.size(); ++i) rank_of[ranked[i]] = i + 1;
  for (const auto& [agent, c] : coord) {
    out << version << ',' << agent << ',' << format_seconds(c) << ','
        << format_seconds(std::abs(c - anchor_coord)) << ',' << rank_of[agent]
        << '\n';
  }
  return out.str();
}

std::optional<double> pairwise_sorting_accuracy(
    const std::vector<PendingRequest>& order,
    const std::map<std::uint64_t, double>& true_remaining, PairScope scope) {
  double correct = 0.0;
  std::uint64_t pairs = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto ri = true_remaining.find(order[i].uid);
    if (ri == true_remaining.end()) continue;
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (scope == PairScope::CrossAgent && order[i].agent == order[j].agent) {
        continue;
      }
      auto rj = true_remaining.find(order[j].uid);
      if (rj == true_remaining.end()) continue;
      ++pairs;
      if (ri->second < rj->second) {
        correct += 1.0;
      } else if (ri->second == rj->second) {
        correct += 0.5;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return correct / static_cast<double>(pairs);
}

}  // namespace kairos
