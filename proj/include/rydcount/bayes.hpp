#pragma once

#include <span>
#include <vector>

#include "rydcount/error.hpp"

namespace rydcount::bayes {

// P(N) over the contiguous support n_min, n_min + 1, ..., n_max.
// Instances are immutable and always normalized.
class AtomNumberDistribution {
 public:
  // Weights must already sum to one within 1e-9.
  AtomNumberDistribution(AtomCount n_min, std::vector<double> weights);

  // Rescales arbitrary nonnegative weights. Throws inconsistent-observation
  // when the total mass is zero.
  static AtomNumberDistribution normalized(AtomCount n_min,
                                           std::vector<double> weights);

  static AtomNumberDistribution point_mass(AtomCount n);

  AtomCount n_min() const noexcept { return n_min_; }
  AtomCount n_max() const noexcept {
    return n_min_ + static_cast<AtomCount>(weights_.size()) - 1;
  }
  std::size_t size() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }

  // Zero outside the support.
  double operator()(AtomCount n) const noexcept;

  bool operator==(const AtomNumberDistribution&) const = default;

 private:
  AtomCount n_min_;
  std::vector<double> weights_;
};

struct SeedSpec {
  double mean_n = 0.0;
  double tail_bound = 1e-10;
};

struct InterrogationPlan {
  int m = 1;
  AtomCount np_initial = 1;
};

struct DistributionStats {
  double mean = 0.0;
  double std = 0.0;
  AtomCount argmax = 0;
  AtomCount credible_68_low = 0;
  AtomCount credible_68_high = 0;

  bool operator==(const DistributionStats&) const = default;
};

/// Poisson seed truncated to the smallest contiguous range around the mode
/// whose excluded mass is below spec.tail_bound, then renormalized.
AtomNumberDistribution seed_poisson(const SeedSpec& spec);

/// Full width at half maximum of the Poisson seed, 2 sqrt(2 ln2 mean).
double fwhm(double mean_n);

/// floor(2 mean / (3 fwhm(mean))), clamped to at least 1.
int choose_m(double mean_n);

InterrogationPlan make_plan(double mean_n);

/// The N >= 1 of largest weight. Ties go to the N closest to reference_np,
/// then to the larger N.
AtomCount most_probable(const AtomNumberDistribution& dist,
                        AtomCount reference_np);

// Bayes updates after a pulse of single-atom area theta.
AtomNumberDistribution update_no_detection(const AtomNumberDistribution& dist,
                                           double theta);
AtomNumberDistribution update_detection_recycle(
    const AtomNumberDistribution& dist, double theta);
// The detected atom was removed, so the support shifts down by one.
AtomNumberDistribution update_detection_removal(
    const AtomNumberDistribution& dist, double theta);

DistributionStats stats(const AtomNumberDistribution& dist);

}  // namespace rydcount::bayes
