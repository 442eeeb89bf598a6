#pragma once

// Brute-force joint-likelihood posterior used as an independent check of the
// sequential Bayes updates. Works on hypotheses about the *initial* atom
// number and multiplies the per-step likelihoods along each hypothesis.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

enum class Outcome { none, recycle, removal };

struct Observation {
  Outcome outcome;
  double theta;
};

// Posterior over the current atom number, keyed by N.
inline std::map<std::int64_t, double> joint_posterior(
    std::int64_t n_min, const std::vector<double>& prior,
    const std::vector<Observation>& observations) {
  std::map<std::int64_t, double> unnormalized;
  double total = 0.0;
  for (std::size_t k = 0; k < prior.size(); ++k) {
    std::int64_t n = n_min + static_cast<std::int64_t>(k);
    long double likelihood = prior[k];
    for (const auto& obs : observations) {
      const long double half = 0.5L * std::sqrt(static_cast<long double>(n)) * obs.theta;
      const long double s = std::sin(half);
      const long double c = std::cos(half);
      likelihood *= obs.outcome == Outcome::none ? c * c : s * s;
      if (obs.outcome == Outcome::removal) --n;
    }
    if (n < 0) continue;
    unnormalized[n] += static_cast<double>(likelihood);
    total += static_cast<double>(likelihood);
  }
  for (auto& [n, w] : unnormalized) w /= total;
  return unnormalized;
}

}  // namespace oracle
