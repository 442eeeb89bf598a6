#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>

#include "bayes_oracle.hpp"
#include "rydcount/bayes.hpp"

using namespace rydcount;
using namespace rydcount::bayes;

namespace {

constexpr double kPi = std::numbers::pi;

double total(const AtomNumberDistribution& d) {
  return std::accumulate(d.weights().begin(), d.weights().end(), 0.0);
}

AtomNumberDistribution two_point() {
  std::vector<double> w(101, 0.0);
  w.front() = 0.5;
  w.back() = 0.5;
  return AtomNumberDistribution(100, w);
}

double poisson_pmf(AtomCount n, double lambda) {
  return std::exp(static_cast<double>(n) * std::log(lambda) - lambda -
                  std::lgamma(static_cast<double>(n) + 1.0));
}

}  // namespace

TEST_CASE("distribution construction validates its invariants") {
  CHECK_THROWS_AS(AtomNumberDistribution(0, {}), Error);
  CHECK_THROWS_AS(AtomNumberDistribution(-1, {1.0}), Error);
  CHECK_THROWS_AS(AtomNumberDistribution(3, {0.5, 0.4}), Error);
  CHECK_THROWS_AS(AtomNumberDistribution(3, {1.5, -0.5}), Error);
  CHECK_NOTHROW(AtomNumberDistribution(3, {0.5, 0.5}));

  const auto d = AtomNumberDistribution::normalized(5, {1.0, 3.0});
  CHECK(d(5) == 0.25);
  CHECK(d(6) == 0.75);
  CHECK(d(4) == 0.0);
  CHECK(d(7) == 0.0);
  try {
    AtomNumberDistribution::normalized(5, {0.0, 0.0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::inconsistent_observation);
  }
}

TEST_CASE("Poisson seed") {
  SUBCASE("integer mean 175 has an exact argmax tie at 174 and 175") {
    const auto seed = seed_poisson({175.0});
    CHECK(std::memcmp(&seed.weights()[174 - static_cast<std::size_t>(seed.n_min())],
                      &seed.weights()[175 - static_cast<std::size_t>(seed.n_min())],
                      sizeof(double)) == 0);
    CHECK(seed(175) > seed(176));
    CHECK(seed(174) > seed(173));
    CHECK(std::abs(total(seed) - 1.0) < 1e-12);
    const double six_sigma = 6 * std::sqrt(175.0);
    CHECK(static_cast<double>(seed.n_min()) == doctest::Approx(175 - six_sigma).epsilon(0.05));
    CHECK(static_cast<double>(seed.n_max()) == doctest::Approx(175 + six_sigma).epsilon(0.05));
    CHECK(most_probable(seed, 175) == 175);
  }
  SUBCASE("weights match the direct p.m.f. up to the truncation renormalization") {
    const auto seed = seed_poisson({175.0});
    double kept = 0.0;
    for (AtomCount n = seed.n_min(); n <= seed.n_max(); ++n) kept += poisson_pmf(n, 175.0);
    CHECK(1.0 - kept < 1e-10);
    for (AtomCount n = seed.n_min(); n <= seed.n_max(); n += 7) {
      CHECK(seed(n) == doctest::Approx(poisson_pmf(n, 175.0) / kept).epsilon(1e-11));
    }
  }
  SUBCASE("support is the smallest one meeting the tail bound") {
    for (double mean : {0.5, 3.0, 42.7, 175.0, 250.0}) {
      const auto seed = seed_poisson({mean, 1e-10});
      auto mass = [&](AtomCount lo, AtomCount hi) {
        double m = 0.0;
        for (AtomCount n = lo; n <= hi; ++n) m += poisson_pmf(n, mean);
        return m;
      };
      CHECK(1.0 - mass(seed.n_min(), seed.n_max()) < 1e-10);
      // Dropping either end breaks the bound.
      if (seed.n_min() < seed.n_max()) {
        CHECK(1.0 - mass(seed.n_min() + 1, seed.n_max()) >= 1e-10 * 0.999);
        CHECK(1.0 - mass(seed.n_min(), seed.n_max() - 1) >= 1e-10 * 0.999);
      }
    }
  }
  SUBCASE("small mean includes N = 0") {
    const auto seed = seed_poisson({0.5});
    CHECK(seed.n_min() == 0);
    double norm = 0.0;
    for (AtomCount n = seed.n_min(); n <= seed.n_max(); ++n) norm += poisson_pmf(n, 0.5);
    CHECK(seed(0) == doctest::Approx(std::exp(-0.5) / norm).epsilon(1e-12));
  }
  SUBCASE("variance equals mean for large means") {
    for (double mean : {100.0, 175.0, 250.0, 1000.0, 1e5}) {
      const auto s = stats(seed_poisson({mean}));
      CHECK(s.std * s.std == doctest::Approx(mean).epsilon(1e-3));
    }
  }
  SUBCASE("large means do not overflow") {
    const auto seed = seed_poisson({1e6});
    CHECK(std::abs(total(seed) - 1.0) < 1e-12);
    CHECK(stats(seed).mean == doctest::Approx(1e6).epsilon(1e-9));
  }
  CHECK_THROWS_AS(seed_poisson({0.0}), Error);
  CHECK_THROWS_AS(seed_poisson({-3.0}), Error);
  CHECK_THROWS_AS(seed_poisson({10.0, 0.1}), Error);
}

TEST_CASE("fwhm and pulse multiplier") {
  CHECK(fwhm(175) == doctest::Approx(31.15134110730906).epsilon(1e-13));
  CHECK(fwhm(250) == doctest::Approx(37.23297411059034).epsilon(1e-13));
  CHECK(fwhm(1.0 / (8.0 * std::numbers::ln2)) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK(choose_m(175) == 3);
  CHECK(choose_m(250) == 4);
  CHECK(choose_m(10) == 1);
  CHECK(choose_m(0.3) == 1);

  // Same value as the composite formula across the range.
  for (double mu = 1.0; mu <= 1e5; mu *= 1.013) {
    const int composite = std::max(1, static_cast<int>(std::floor(2 * mu / (3 * fwhm(mu)))));
    REQUIRE(choose_m(mu) == composite);
  }
  for (int mu = 1; mu <= 100000; mu += 37) {
    const double d = static_cast<double>(mu);
    const int composite = std::max(1, static_cast<int>(std::floor(2 * d / (3 * fwhm(d)))));
    REQUIRE(choose_m(d) == composite);
  }

  const auto plan = make_plan(174.6);
  CHECK(plan.np_initial == 175);
  CHECK(plan.m == 3);
}

TEST_CASE("most probable atom number") {
  SUBCASE("tie broken toward the reference") {
    const auto d = AtomNumberDistribution::normalized(
        5, {0.4, 0, 0, 0, 0.4, 0, 0.2});  // {5: .4, 9: .4, 11: .2}
    CHECK(most_probable(d, 6) == 5);
    CHECK(most_probable(d, 8) == 9);
    CHECK(most_probable(d, 7) == 9);  // equidistant: larger wins
  }
  CHECK(most_probable(AtomNumberDistribution::point_mass(42), 1) == 42);
  SUBCASE("N = 0 is never chosen") {
    const auto d = AtomNumberDistribution::normalized(0, {0.9, 0.1});
    CHECK(most_probable(d, 0) == 1);
    try {
      most_probable(AtomNumberDistribution::point_mass(0), 0);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::degenerate_distribution);
    }
  }
}

TEST_CASE("no-detection update") {
  const auto post = update_no_detection(two_point(), kPi / 10);
  CHECK(post(100) < 1e-30);
  CHECK(post(200) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(post.n_min() == 100);
  CHECK(post.n_max() == 200);

  const auto seed = seed_poisson({175.0});
  const auto same = update_no_detection(seed, 1e-12);
  for (AtomCount n = seed.n_min(); n <= seed.n_max(); ++n) {
    REQUIRE(std::abs(same(n) - seed(n)) <= 1e-15);
  }
}

TEST_CASE("detection with recycling") {
  const auto post = update_detection_recycle(two_point(), kPi / 10);
  CHECK(post(100) == doctest::Approx(0.6123219989132865).epsilon(1e-13));
  CHECK(post(200) == doctest::Approx(0.3876780010867135).epsilon(1e-13));

  // All prior mass where a detection is impossible.
  try {
    update_detection_recycle(AtomNumberDistribution::point_mass(0), kPi);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::inconsistent_observation);
  }

  // Uniform likelihood: N = 1 and N = 9 at theta = pi give sin^2 = 1.
  const auto prior = AtomNumberDistribution::normalized(1, {0.3, 0, 0, 0, 0, 0, 0, 0, 0.7});
  const auto same = update_detection_recycle(prior, kPi);
  CHECK(same(1) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(same(9) == doctest::Approx(0.7).epsilon(1e-14));
}

TEST_CASE("detection with removal shifts the support") {
  const auto post = update_detection_removal(AtomNumberDistribution::point_mass(1), kPi);
  CHECK(post.n_min() == 0);
  CHECK(post(0) == 1.0);

  const auto shifted = update_detection_removal(two_point(), 0.37);
  CHECK(shifted.n_min() == 99);
  CHECK(shifted.n_max() == 199);
  CHECK(shifted(99) > 0.0);
  CHECK(shifted(199) > 0.0);
  CHECK(std::abs(total(shifted) - 1.0) < 1e-12);

  // Support starting at 0 loses only the impossible N = -1 image.
  const auto from_zero =
      update_detection_removal(AtomNumberDistribution::normalized(0, {0.2, 0.3, 0.5}), 1.1);
  CHECK(from_zero.n_min() == 0);
  CHECK(from_zero.n_max() == 1);

  try {
    update_detection_removal(AtomNumberDistribution::point_mass(0), 1.0);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::inconsistent_observation);
  }
}

TEST_CASE("every update stays normalized") {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto size = 1 + static_cast<std::size_t>(u(gen) * 60);
    std::vector<double> w(size);
    for (auto& x : w) x = u(gen);
    const auto prior =
        AtomNumberDistribution::normalized(1 + static_cast<AtomCount>(u(gen) * 400), w);
    const double theta = 0.01 + u(gen) * 2.0;
    REQUIRE(std::abs(total(update_no_detection(prior, theta)) - 1.0) < 1e-12);
    REQUIRE(std::abs(total(update_detection_recycle(prior, theta)) - 1.0) < 1e-12);
    REQUIRE(std::abs(total(update_detection_removal(prior, theta)) - 1.0) < 1e-12);
  }
}

TEST_CASE("sequential updates match the joint-likelihood oracle") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  using oracle::Outcome;
  const Outcome kinds[] = {Outcome::none, Outcome::recycle, Outcome::removal};
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto size = 1 + static_cast<std::size_t>(u(gen) * 30);
    std::vector<double> w(size);
    for (auto& x : w) x = 0.05 + u(gen);
    const AtomCount n_min = 4 + static_cast<AtomCount>(u(gen) * 300);
    const auto prior = AtomNumberDistribution::normalized(n_min, w);
    const std::vector<double> prior_w(prior.weights().begin(), prior.weights().end());

    for (int len = 1; len <= 3; ++len) {
      int combos = 1;
      for (int k = 0; k < len; ++k) combos *= 3;
      for (int code = 0; code < combos; ++code) {
        std::vector<oracle::Observation> obs;
        auto post = prior;
        int c = code;
        for (int k = 0; k < len; ++k, c /= 3) {
          const double theta = 0.05 + u(gen) * 1.5;
          const Outcome o = kinds[c % 3];
          obs.push_back({o, theta});
          post = o == Outcome::none      ? update_no_detection(post, theta)
                 : o == Outcome::recycle ? update_detection_recycle(post, theta)
                                         : update_detection_removal(post, theta);
        }
        const auto expected = oracle::joint_posterior(n_min, prior_w, obs);
        for (const auto& [n, p] : expected) {
          const double diff = std::abs(post(n) - p);
          worst = std::max(worst, diff);
          REQUIRE(diff <= 1e-12);
        }
        REQUIRE(post.n_min() == expected.begin()->first);
        REQUIRE(post.n_max() == expected.rbegin()->first);
      }
    }
  }
  MESSAGE("worst weight difference " << worst);
}

TEST_CASE("distribution statistics") {
  const auto poisson = stats(seed_poisson({175.0}));
  CHECK(poisson.mean == doctest::Approx(175.0).epsilon(1e-9));
  CHECK(poisson.std == doctest::Approx(13.22875655532295).epsilon(0.005));
  CHECK(poisson.argmax == 175);
  CHECK(poisson.credible_68_low <= 175 - 12);
  CHECK(poisson.credible_68_high >= 175 + 12);

  const auto point = stats(AtomNumberDistribution::point_mass(42));
  CHECK(point.mean == 42.0);
  CHECK(point.std == 0.0);
  CHECK(point.argmax == 42);
  CHECK(point.credible_68_low == 42);
  CHECK(point.credible_68_high == 42);

  const auto pair = stats(two_point());
  CHECK(pair.mean == doctest::Approx(150.0));
  CHECK(pair.std == doctest::Approx(50.0));
  CHECK(pair.credible_68_low == 100);
  CHECK(pair.credible_68_high == 200);
}
