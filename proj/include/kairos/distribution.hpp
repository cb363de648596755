#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

namespace kairos {

// 1-Wasserstein distance between two empirical distributions given as sorted
// sample vectors. Equal sizes reduce to the mean absolute difference of the
// sorted pairing; unequal sizes use exact quantile-function integration over
// the merged quantile grid (no subsampling). Throws on empty input.
double wasserstein_1d(std::span<const double> a_sorted,
                      std::span<const double> b_sorted);

// Linear-interpolation quantile (numpy default) over sorted samples,
// p in [0, 1].
double quantile_sorted(std::span<const double> sorted, double p);

// Center of the highest-count histogram bin. Bin width is Freedman-Diaconis,
// falling back to a fixed 64-bin histogram when the IQR is zero. Ties go to
// the lowest bin. Input must be sorted and non-empty.
double histogram_mode(std::span<const double> sorted);

struct ModeEstimate {
  double value = 0.0;
  bool median_fallback = false;  // set when below min_samples
};

// Mode of an empirical sample set; below `min_samples` falls back to the
// median and flags it so callers can surface the warning.
ModeEstimate mode_estimate(std::span<const double> sorted,
                           std::size_t min_samples = 16);

struct ConvergenceConfig {
  std::size_t min_samples = 16;     // first doubling checkpoint
  double relative_threshold = 0.05; // tau = threshold * current sample mean
  std::size_t window_cap = 0;       // 0 = unbounded retention
};

// Sorted latency samples with doubling-checkpoint convergence detection:
// each time the total inserted count doubles (starting at min_samples), the
// distance W1(previous snapshot, current samples) is compared against
// tau = relative_threshold * mean; once it falls below, the distribution is
// converged and stays so. With window_cap > 0 only the most recent samples
// are retained (checkpoints still count total insertions).
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(ConvergenceConfig cfg = {});

  void add(double value);  // throws std::invalid_argument on negative input

  const std::vector<double>& samples() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }
  std::uint64_t total_added() const { return total_added_; }
  bool converged() const { return converged_; }
  bool empty() const { return sorted_.empty(); }

  double mean() const;
  double min() const;
  double max() const;
  double median() const;
  double quantile(double p) const;

  // Distance computed at the most recent checkpoint comparison; negative
  // until two checkpoints have been reached.
  double last_checkpoint_distance() const { return last_checkpoint_distance_; }

  const ConvergenceConfig& config() const { return cfg_; }

 private:
  void check_convergence();

  ConvergenceConfig cfg_;
  std::vector<double> sorted_;
  std::deque<double> arrival_order_;  // only maintained when window_cap > 0
  std::vector<double> snapshot_;      // samples at the previous checkpoint
  std::uint64_t total_added_ = 0;
  std::uint64_t next_checkpoint_ = 0;
  bool converged_ = false;
  double last_checkpoint_distance_ = -1.0;
};

}  // namespace kairos
