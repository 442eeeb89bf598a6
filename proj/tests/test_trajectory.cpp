#include <doctest.h>

#include <cmath>
#include <deque>
#include <map>

#include "rydcount/trajectory.hpp"

using namespace rydcount;
using namespace rydcount::trajectory;

namespace {

constexpr double kTheta175m3 = 1.424892494068471138541550357539;
constexpr double kSigma200at175m3 = 0.366957489072290234107962533673;

// Replays fixed draws and fails the test when the script runs dry.
class ScriptedDraws final : public DrawSource {
 public:
  ScriptedDraws(std::deque<double> uniforms, std::deque<double> normals = {})
      : uniforms_(std::move(uniforms)), normals_(std::move(normals)) {}
  double uniform() override { return pop(uniforms_); }
  double normal() override { return pop(normals_); }
  std::size_t remaining() const { return uniforms_.size() + normals_.size(); }

 private:
  static double pop(std::deque<double>& q) {
    REQUIRE_FALSE(q.empty());
    const double v = q.front();
    q.pop_front();
    return v;
  }
  std::deque<double> uniforms_;
  std::deque<double> normals_;
};

TrajectoryState fresh_state(AtomCount n_actual, double mean = 175.0) {
  return {bayes::seed_poisson({mean}), n_actual, bayes::make_plan(mean).np_initial,
          bayes::choose_m(mean)};
}

TrajectoryConfig baseline() {
  TrajectoryConfig c;
  c.mean_n = 175;
  c.actual_n_initial = 200;
  c.steps = 40;
  return c;
}

}  // namespace

TEST_CASE("rng test vectors") {
  struct Vector {
    std::uint64_t seed;
    std::uint64_t first[4];
  };
  const Vector vectors[] = {
      {0, {0x99ec5f36cb75f2b4, 0xbf6e1f784956452a, 0x1a5f849d4933e6e0, 0x6aa594f1262d2d2c}},
      {7, {0xb358faf74ef9765a, 0x475c3d964f482cd2, 0xd6f1d349952c7996, 0xfb2938731e807240}},
      {0xDEADBEEF,
       {0xc5555444a74d7e83, 0x65c30d37b4b16e38, 0x54f773200a4efa23, 0x429aed75fb958af7}},
  };
  for (const auto& v : vectors) {
    Rng rng(v.seed);
    for (auto expected : v.first) CHECK(rng.next() == expected);
  }
  CHECK(derive_trajectory_seed(7, 0) == 0x63cbe1e459320dd7ULL);
  CHECK(derive_trajectory_seed(7, 1) == 0x044c3cd7f43c661cULL);
  CHECK(derive_trajectory_seed(0, 999) == 0x14e0abb2bfcf7c3eULL);
  Rng rng(42);
  CHECK(rng.uniform() == 0.08386297105988216);
}

TEST_CASE("rng distributions") {
  Rng rng(123);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.01));

  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("derived seeds are well spread") {
  // Chi-square over 64 bins of the top 6 bits of the first uniform.
  constexpr int kBins = 64;
  constexpr int kSamples = 64000;
  int counts[kBins] = {};
  for (std::uint64_t i = 0; i < kSamples; ++i) {
    Rng rng(derive_trajectory_seed(11, i));
    ++counts[rng.next() >> 58];
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(kSamples) / kBins;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 63 degrees of freedom; 99.9th percentile is about 103.
  CHECK(chi2 < 103.0);

  std::map<std::uint64_t, int> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) ++seen[derive_trajectory_seed(5, i)];
  CHECK(seen.size() == 10000);
}

TEST_CASE("first step from a 200-atom ensemble believed to hold 175") {
  auto state = fresh_state(200);
  CHECK(state.n_perceived == 175);
  CHECK(state.m == 3);
  ScriptedDraws draws({0.99});  // no excitation
  const auto rec = step(state, {}, 1, draws);
  CHECK(rec.theta_nominal == doctest::Approx(kTheta175m3).epsilon(1e-15));
  CHECK(rec.theta_applied == rec.theta_nominal);
  CHECK(rec.sigma_actual == doctest::Approx(kSigma200at175m3).epsilon(1e-13));
  CHECK_FALSE(rec.excited);
  CHECK_FALSE(rec.detected);
  CHECK(rec.n_actual_after == 200);
  CHECK(draws.remaining() == 0);
  // A dark result is certain at N = 175, so the guess stays.
  CHECK(rec.n_perceived_next == 175);
  CHECK(rec.fidelity == physics::swap_fidelity(200, rec.n_perceived_next));
}

TEST_CASE("excited and detected step removes an atom") {
  auto state = fresh_state(200);
  ScriptedDraws draws({0.1, 0.5});
  const auto rec = step(state, {}, 1, draws);
  CHECK(rec.excited);
  CHECK(rec.detected);
  CHECK(rec.n_actual_after == 199);
  CHECK(state.n_actual == 199);
  const auto expected = bayes::update_detection_removal(bayes::seed_poisson({175.0}), kTheta175m3);
  CHECK(state.posterior == expected);
}

TEST_CASE("zero efficiency: excitation is lost but still removes an atom") {
  auto state = fresh_state(200);
  StepContext ctx;
  ctx.detector.eta = 0.0;
  ScriptedDraws draws({0.1, 0.0});
  const auto rec = step(state, ctx, 1, draws);
  CHECK(rec.excited);
  CHECK_FALSE(rec.detected);
  CHECK(rec.n_actual_after == 199);
  CHECK(state.posterior ==
        bayes::update_no_detection(bayes::seed_poisson({175.0}), kTheta175m3));
}

TEST_CASE("a missed detection updates like a dark result") {
  auto missed = fresh_state(200);
  auto dark = fresh_state(200);
  StepContext ctx;
  ctx.detector.eta = 0.6;
  ctx.mode = DetectionMode::recycle;
  ScriptedDraws miss({0.1, 0.9});
  ScriptedDraws none({0.9});
  const auto a = step(missed, ctx, 1, miss);
  const auto b = step(dark, ctx, 1, none);
  CHECK(a.excited);
  CHECK_FALSE(a.detected);
  CHECK(missed.posterior == dark.posterior);
  CHECK(a.n_perceived_next == b.n_perceived_next);
  CHECK(missed.n_actual == 200);  // recycle mode keeps the atom
}

TEST_CASE("pulse noise draws a normal first and changes only the applied area") {
  auto state = fresh_state(200);
  StepContext ctx;
  ctx.pulse_noise_sigma = 0.01;
  ScriptedDraws draws({0.99}, {2.0});
  const auto rec = step(state, ctx, 1, draws);
  CHECK(rec.theta_applied == doctest::Approx(rec.theta_nominal * 1.02).epsilon(1e-15));
  CHECK(rec.sigma_actual == physics::excitation_probability(200, rec.theta_applied));
  CHECK(state.posterior ==
        bayes::update_no_detection(bayes::seed_poisson({175.0}), rec.theta_nominal));
}

TEST_CASE("a failed step leaves the state untouched") {
  TrajectoryState state{bayes::AtomNumberDistribution::normalized(1, {0.5, 0.5}), 1, 1, 1};
  const auto before = state.posterior;
  ScriptedDraws draws({0.0, 0.0});
  try {
    step(state, {}, 1, draws);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ensemble_empty);
  }
  CHECK(state.n_actual == 1);
  CHECK(state.posterior == before);
}

TEST_CASE("inverse-CDF sampling") {
  const auto d = bayes::AtomNumberDistribution::normalized(10, {0.25, 0.5, 0.25});
  CHECK(sample_atom_number(d, 0.0) == 10);
  CHECK(sample_atom_number(d, 0.2499) == 10);
  CHECK(sample_atom_number(d, 0.25) == 11);
  CHECK(sample_atom_number(d, 0.7499) == 11);
  CHECK(sample_atom_number(d, 0.75) == 12);
  CHECK(sample_atom_number(d, 0.9999999) == 12);
}

TEST_CASE("a correct guess is absorbing") {
  for (double mean : {100.0, 175.0, 250.0}) {
    TrajectoryConfig c;
    c.mean_n = mean;
    c.actual_n_initial = static_cast<AtomCount>(mean);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = run_trajectory(c, seed, 0);
      REQUIRE_FALSE(r.failure);
      CHECK(r.excitations == 0);
      for (const auto& s : r.steps) REQUIRE(s.n_perceived_next == r.n_perceived_initial);
      CHECK(r.steps.back().fidelity.infidelity == 0.0);
    }
  }
}

TEST_CASE("trajectories are reproducible from (seed, index)") {
  const auto c = baseline();
  CHECK(run_trajectory(c, 7, 3) == run_trajectory(c, 7, 3));
  CHECK_FALSE(run_trajectory(c, 7, 3) == run_trajectory(c, 7, 4));

  TrajectoryConfig sampled = c;
  sampled.actual_n_initial.reset();
  const auto a = run_trajectory(sampled, 9, 1);
  const auto b = run_trajectory(sampled, 9, 1);
  CHECK(a == b);
  Rng rng(derive_trajectory_seed(9, 1));
  CHECK(a.n_actual_initial == sample_atom_number(bayes::seed_poisson({175.0}), rng.uniform()));
}

TEST_CASE("removal bookkeeping") {
  const auto c = baseline();
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto r = run_trajectory(c, 21, i);
    REQUIRE_FALSE(r.failure);
    REQUIRE(r.steps.size() == 40);
    CHECK(r.steps.back().n_actual_after == r.n_actual_initial - r.excitations);
    CHECK(r.detections == r.excitations);  // eta = 1
    AtomCount prev = r.n_perceived_initial;
    for (const auto& s : r.steps) {
      REQUIRE(s.n_perceived == prev);
      prev = s.n_perceived_next;
    }
  }
}

TEST_CASE("posterior concentrates at the true atom number") {
  const auto c = baseline();
  auto mass_near = [](const bayes::AtomNumberDistribution& d, AtomCount n) {
    double m = 0.0;
    for (AtomCount k = n - 2; k <= n + 2; ++k) m += d(k);
    return m;
  };
  const auto seed = bayes::seed_poisson({175.0});
  const double initial = mass_near(seed, 200);
  int concentrated = 0;
  double detections = 0.0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    const auto r = run_trajectory(c, 5, static_cast<std::uint64_t>(i));
    REQUIRE_FALSE(r.failure);
    const AtomCount truth = r.steps.back().n_actual_after;
    concentrated += mass_near(r.final_posterior, truth) > initial ? 1 : 0;
    detections += r.detections;
  }
  CHECK(concentrated >= 0.95 * n);
  CHECK(detections / n > 0.0);
  CHECK(detections / n < 4.0);
}

TEST_CASE("recycle and removal agree at scale") {
  auto c = baseline();
  auto mean_abs_error = [&](DetectionMode mode) {
    c.mode = mode;
    double acc = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const auto r = run_trajectory(c, 3, static_cast<std::uint64_t>(i));
      REQUIRE_FALSE(r.failure);
      acc += static_cast<double>(
          std::abs(r.steps.back().n_actual_after - r.steps.back().n_perceived_next));
    }
    return acc / n;
  };
  const double removal = mean_abs_error(DetectionMode::removal);
  const double recycle = mean_abs_error(DetectionMode::recycle);
  MESSAGE("mean |Na - Np|: removal " << removal << ", recycle " << recycle);
  CHECK(std::abs(removal - recycle) < 1.0);
}

TEST_CASE("config validation") {
  auto c = baseline();
  c.actual_n_initial = 0;
  CHECK_THROWS_WITH_AS(c.validate(), "actual-n must be >= 1", Error);
  c = baseline();
  c.detector.eta = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = baseline();
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = baseline();
  c.m_override = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = baseline();
  CHECK(c.pulse_multiplier() == 3);
  c.m_override = 5;
  CHECK(c.pulse_multiplier() == 5);
}
