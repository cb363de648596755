#include "kairos/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kairos {

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("wasserstein_1d: empty sample set");
  }
  const std::uint64_t na = a.size();
  const std::uint64_t nb = b.size();
  // Walk the merged quantile grid in exact rational steps of 1/(na*nb).
  // Segment (cur, nxt] has constant inverse CDFs a[i] and b[j].
  const std::uint64_t total = na * nb;
  std::uint64_t cur = 0;
  std::size_t i = 0, j = 0;
  double acc = 0.0;
  while (cur < total) {
    const std::uint64_t a_next = static_cast<std::uint64_t>(i + 1) * nb;
    const std::uint64_t b_next = static_cast<std::uint64_t>(j + 1) * na;
    const std::uint64_t nxt = std::min(a_next, b_next);
    acc += static_cast<double>(nxt - cur) * std::abs(a[i] - b[j]);
    if (a_next == nxt) ++i;
    if (b_next == nxt) ++j;
    cur = nxt;
  }
  return acc / static_cast<double>(total);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) {
    throw std::invalid_argument("quantile of empty sample set");
  }
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double histogram_mode(std::span<const double> sorted) {
  if (sorted.empty()) {
    throw std::invalid_argument("histogram_mode of empty sample set");
  }
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (!(hi > lo)) return lo;  // degenerate: all samples equal

  const double n = static_cast<double>(sorted.size());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  std::size_t bins = 64;
  if (iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(n);
    bins = static_cast<std::size_t>(std::ceil((hi - lo) / width));
    bins = std::clamp<std::size_t>(bins, 1, 4096);
  }
  std::vector<std::uint64_t> counts(bins, 0);
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double x : sorted) {
    auto idx = static_cast<std::size_t>((x - lo) * scale);
    if (idx >= bins) idx = bins - 1;  // x == hi
    ++counts[idx];
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < bins; ++k) {
    if (counts[k] > counts[best]) best = k;  // ties keep the lowest bin
  }
  return lo + (static_cast<double>(best) + 0.5) * (hi - lo) /
                  static_cast<double>(bins);
}

ModeEstimate mode_estimate(std::span<const double> sorted,
                           std::size_t min_samples) {
  if (sorted.empty()) {
    throw std::invalid_argument("mode_estimate of empty sample set");
  }
  if (sorted.size() < min_samples) {
    return {quantile_sorted(sorted, 0.5), true};
  }
  return {histogram_mode(sorted), false};
}

EmpiricalDistribution::EmpiricalDistribution(ConvergenceConfig cfg)
    : cfg_(cfg), next_checkpoint_(cfg.min_samples) {}

void EmpiricalDistribution::add(double value) {
  if (value < 0.0) {
    throw std::invalid_argument("latency sample must be non-negative");
  }
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), value);
  sorted_.insert(it, value);
  if (cfg_.window_cap > 0) {
    arrival_order_.push_back(value);
    if (arrival_order_.size() > cfg_.window_cap) {
      const double oldest = arrival_order_.front();
      arrival_order_.pop_front();
      auto evict = std::lower_bound(sorted_.begin(), sorted_.end(), oldest);
      sorted_.erase(evict);
    }
  }
  ++total_added_;
  if (total_added_ == next_checkpoint_) {
    check_convergence();
    next_checkpoint_ *= 2;
  }
}

void EmpiricalDistribution::check_convergence() {
  if (!snapshot_.empty()) {
    const double w = wasserstein_1d(snapshot_, sorted_);
    last_checkpoint_distance_ = w;
    const double tau = std::max(cfg_.relative_threshold * mean(), 1e-12);
    if (w < tau) converged_ = true;
  }
  snapshot_ = sorted_;
}

double EmpiricalDistribution::mean() const {
  if (sorted_.empty()) throw std::logic_error("mean of empty distribution");
  double s = 0.0;
  for (double v : sorted_) s += v;
  return s / static_cast<double>(sorted_.size());
}

double EmpiricalDistribution::min() const {
  if (sorted_.empty()) throw std::logic_error("min of empty distribution");
  return sorted_.front();
}

double EmpiricalDistribution::max() const {
  if (sorted_.empty()) throw std::logic_error("max of empty distribution");
  return sorted_.back();
}

double EmpiricalDistribution::median() const {
  return quantile_sorted(sorted_, 0.5);
}

double EmpiricalDistribution::quantile(double p) const {
  return quantile_sorted(sorted_, p);
}

}  // namespace kairos
