#pragma once

// One simulated run of the adaptive counting protocol: a hidden actual atom
// number, Monte Carlo excitation and detection draws, and the Bayesian
// estimator in the loop.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rydcount/bayes.hpp"
#include "rydcount/physics.hpp"
#include "rydcount/rng.hpp"

namespace rydcount::trajectory {

enum class DetectionMode { removal, recycle };

struct DetectorModel {
  double eta = 1.0;
  bool operator==(const DetectorModel&) const = default;
};

struct TrajectoryConfig {
  double mean_n = 175.0;
  // Unset: draw the initial actual number from the Poisson seed.
  std::optional<AtomCount> actual_n_initial;
  int steps = 40;
  DetectorModel detector;
  DetectionMode mode = DetectionMode::removal;
  std::optional<int> m_override;
  double pulse_noise_sigma = 0.0;
  double tail_bound = 1e-10;

  void validate() const;
  int pulse_multiplier() const;

  bool operator==(const TrajectoryConfig&) const = default;
};

struct StepRecord {
  int index = 0;  // 1-based
  AtomCount n_perceived = 0;  // N^(p) used to set this step's pulse
  double theta_nominal = 0.0;
  double theta_applied = 0.0;
  double sigma_actual = 0.0;
  bool excited = false;
  bool detected = false;
  AtomCount n_actual_after = 0;
  AtomCount n_perceived_next = 0;
  physics::FidelityReport fidelity;
  bayes::DistributionStats posterior_stats;

  bool operator==(const StepRecord&) const = default;
};

struct Failure {
  ErrorKind kind = ErrorKind::invalid_argument;
  std::string message;
  bool operator==(const Failure&) const = default;
};

struct TrajectoryRecord {
  TrajectoryConfig config;
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;
  int m = 1;
  AtomCount n_actual_initial = 0;
  AtomCount n_perceived_initial = 0;
  physics::FidelityReport initial_fidelity;
  std::vector<StepRecord> steps;
  int excitations = 0;
  int detections = 0;
  bayes::AtomNumberDistribution final_posterior{0, {1.0}};
  std::optional<Failure> failure;

  bool operator==(const TrajectoryRecord&) const = default;
};

// Randomness consumed by `step`. Tests substitute scripted draws.
class DrawSource {
 public:
  virtual ~DrawSource() = default;
  virtual double uniform() = 0;
  virtual double normal() = 0;
};

class RngDraws final : public DrawSource {
 public:
  explicit RngDraws(std::uint64_t seed) : rng_(seed) {}
  double uniform() override { return rng_.uniform(); }
  double normal() override { return rng_.normal(); }

 private:
  Rng rng_;
};

struct TrajectoryState {
  bayes::AtomNumberDistribution posterior;
  AtomCount n_actual = 0;
  AtomCount n_perceived = 0;  // used by the next pulse
  int m = 1;
};

struct StepContext {
  DetectorModel detector;
  DetectionMode mode = DetectionMode::removal;
  double pulse_noise_sigma = 0.0;
};

/// Executes one interrogation step and advances `state`. Draw order per step:
/// noise epsilon (only when pulse_noise_sigma > 0), q_sigma, then q_eta
/// (only when excited). On error `state` is left untouched.
StepRecord step(TrajectoryState& state, const StepContext& ctx, int index,
                DrawSource& draws);

/// Inverse-CDF draw of an atom number from `dist` using one uniform.
AtomCount sample_atom_number(const bayes::AtomNumberDistribution& dist,
                             double u);

/// Runs config.steps steps with the stream seeded by
/// derive_trajectory_seed(master_seed, index). When the initial actual number
/// is sampled, its uniform is the first draw of the stream. Terminal errors
/// are captured in the record's `failure`.
TrajectoryRecord run_trajectory(const TrajectoryConfig& config,
                                std::uint64_t master_seed, std::uint64_t index);

}  // namespace rydcount::trajectory
