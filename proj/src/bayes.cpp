#include "rydcount/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rydcount/physics.hpp"

namespace rydcount::bayes {

namespace {

double kahan_total(std::span<const double> values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

template <typename Likelihood>
AtomNumberDistribution reweight(const AtomNumberDistribution& dist,
                                AtomCount n_min, AtomCount source_offset,
                                std::size_t count, Likelihood&& likelihood) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    const AtomCount n = n_min + static_cast<AtomCount>(k) + source_offset;
    out[k] = likelihood(n) * dist(n);
  }
  return AtomNumberDistribution::normalized(n_min, std::move(out));
}

}  // namespace

AtomNumberDistribution::AtomNumberDistribution(AtomCount n_min,
                                               std::vector<double> weights)
    : n_min_(n_min), weights_(std::move(weights)) {
  require(n_min_ >= 0, "distribution support must start at N >= 0");
  require(!weights_.empty(), "distribution support must be non-empty");
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0, "distribution weights must be >= 0");
  }
  const double total = kahan_total(weights_);
  require(std::abs(total - 1.0) <= 1e-9,
          "distribution weights must sum to 1 (got " + std::to_string(total) +
              ")");
}

AtomNumberDistribution AtomNumberDistribution::normalized(
    AtomCount n_min, std::vector<double> weights) {
  const double total = kahan_total(weights);
  if (!(total > 0.0) || !std::isfinite(total)) {
    fail(ErrorKind::inconsistent_observation,
         "observation has zero likelihood over the whole support");
  }
  for (double& w : weights) w /= total;
  return AtomNumberDistribution(n_min, std::move(weights));
}

AtomNumberDistribution AtomNumberDistribution::point_mass(AtomCount n) {
  return AtomNumberDistribution(n, {1.0});
}

double AtomNumberDistribution::operator()(AtomCount n) const noexcept {
  if (n < n_min_ || n > n_max()) return 0.0;
  return weights_[static_cast<std::size_t>(n - n_min_)];
}

AtomNumberDistribution seed_poisson(const SeedSpec& spec) {
  require(spec.mean_n > 0.0 && std::isfinite(spec.mean_n),
          "seed mean must be > 0");
  require(spec.tail_bound > 0.0 && spec.tail_bound < 1e-3,
          "tail bound must be in (0, 1e-3)");
  const double lambda = spec.mean_n;
  const auto mode = static_cast<AtomCount>(std::floor(lambda));
  const double log_peak = static_cast<double>(mode) * std::log(lambda) -
                          lambda - std::lgamma(static_cast<double>(mode) + 1.0);
  const double peak = std::exp(log_peak);

  // Neighbours follow from the p.m.f. ratio P(k+1)/P(k) = lambda/(k+1). The
  // ratio is formed first so P(lambda - 1) == P(lambda) holds exactly for
  // integer lambda.
  AtomCount lo = mode;
  AtomCount hi = mode;
  double left = lo > 0 ? peak * (static_cast<double>(lo) / lambda) : 0.0;
  double right = peak * lambda / static_cast<double>(hi + 1);
  double included = peak;
  double carry = 0.0;
  auto add = [&](double v) {
    const double y = v - carry;
    const double t = included + y;
    carry = (t - included) - y;
    included = t;
  };
  while (1.0 - included >= spec.tail_bound) {
    const bool can_left = lo > 0;
    if (can_left && left >= right) {
      add(left);
      --lo;
      left = lo > 0 ? left * (static_cast<double>(lo) / lambda) : 0.0;
    } else {
      add(right);
      ++hi;
      right *= lambda / static_cast<double>(hi + 1);
    }
    if (left == 0.0 && right == 0.0) break;
  }

  std::vector<double> weights(static_cast<std::size_t>(hi - lo + 1));
  const auto at = [&](AtomCount n) -> double& {
    return weights[static_cast<std::size_t>(n - lo)];
  };
  at(mode) = peak;
  for (AtomCount n = mode; n > lo; --n) {
    at(n - 1) = at(n) * (static_cast<double>(n) / lambda);
  }
  for (AtomCount n = mode; n < hi; ++n) {
    at(n + 1) = at(n) * lambda / static_cast<double>(n + 1);
  }
  return AtomNumberDistribution::normalized(lo, std::move(weights));
}

double fwhm(double mean_n) {
  require(mean_n > 0.0, "mean atom number must be > 0");
  return 2.0 * std::sqrt(2.0 * std::numbers::ln2 * mean_n);
}

int choose_m(double mean_n) {
  const double m = std::floor(2.0 * mean_n / (3.0 * fwhm(mean_n)));
  return std::max(1, static_cast<int>(m));
}

InterrogationPlan make_plan(double mean_n) {
  require(mean_n > 0.0, "mean atom number must be > 0");
  InterrogationPlan plan;
  plan.m = choose_m(mean_n);
  plan.np_initial = std::max<AtomCount>(1, std::llround(mean_n));
  return plan;
}

AtomCount most_probable(const AtomNumberDistribution& dist,
                        AtomCount reference_np) {
  const auto w = dist.weights();
  AtomCount best = -1;
  double best_weight = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const AtomCount n = dist.n_min() + static_cast<AtomCount>(k);
    if (n < 1 || w[k] <= 0.0) continue;
    bool take = best < 0 || w[k] > best_weight;
    if (!take && w[k] == best_weight) {
      const AtomCount d_new = std::abs(n - reference_np);
      const AtomCount d_old = std::abs(best - reference_np);
      // Scanning upward, so an equal distance means n is the larger one.
      take = d_new <= d_old;
    }
    if (take) {
      best = n;
      best_weight = w[k];
    }
  }
  if (best < 0) {
    fail(ErrorKind::degenerate_distribution,
         "no probability mass on N >= 1");
  }
  return best;
}

AtomNumberDistribution update_no_detection(const AtomNumberDistribution& dist,
                                           double theta) {
  return reweight(dist, dist.n_min(), 0, dist.size(), [theta](AtomCount n) {
    return physics::no_excitation_probability(n, theta);
  });
}

AtomNumberDistribution update_detection_recycle(
    const AtomNumberDistribution& dist, double theta) {
  return reweight(dist, dist.n_min(), 0, dist.size(), [theta](AtomCount n) {
    return physics::excitation_probability(n, theta);
  });
}

AtomNumberDistribution update_detection_removal(
    const AtomNumberDistribution& dist, double theta) {
  // Posterior weight at N comes from the prior at N + 1. A prior entry at
  // N = 0 cannot have produced an excitation and has no image.
  const AtomCount n_min = std::max<AtomCount>(0, dist.n_min() - 1);
  const AtomCount n_max = dist.n_max() - 1;
  if (n_max < n_min) {
    fail(ErrorKind::inconsistent_observation,
         "detection is impossible for an empty ensemble");
  }
  const auto count = static_cast<std::size_t>(n_max - n_min + 1);
  return reweight(dist, n_min, 1, count, [theta](AtomCount n) {
    return physics::excitation_probability(n, theta);
  });
}

DistributionStats stats(const AtomNumberDistribution& dist) {
  const auto w = dist.weights();
  double mean = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    mean += static_cast<double>(dist.n_min() + static_cast<AtomCount>(k)) * w[k];
  }
  // Central moment rather than E[N^2] - mean^2, which cancels badly for
  // narrow posteriors at large N.
  double var = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double d =
        static_cast<double>(dist.n_min() + static_cast<AtomCount>(k)) - mean;
    var += d * d * w[k];
  }

  DistributionStats out;
  out.mean = mean;
  out.std = std::sqrt(std::max(0.0, var));
  try {
    out.argmax = most_probable(dist, std::llround(mean));
  } catch (const Error&) {
    out.argmax = 0;  // all mass at N = 0
  }

  AtomCount lo = out.argmax;
  AtomCount hi = out.argmax;
  double mass = dist(out.argmax);
  while (mass < 0.68 && (lo > dist.n_min() || hi < dist.n_max())) {
    if (lo > dist.n_min()) mass += dist(--lo);
    if (hi < dist.n_max()) mass += dist(++hi);
  }
  out.credible_68_low = lo;
  out.credible_68_high = hi;
  return out;
}

}  // namespace rydcount::bayes
