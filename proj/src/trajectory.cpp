#include "rydcount/trajectory.hpp"

#include <cmath>

namespace rydcount::trajectory {

void TrajectoryConfig::validate() const {
  require(std::isfinite(mean_n) && mean_n > 0.0, "mean-n must be > 0");
  require(!actual_n_initial || *actual_n_initial >= 1, "actual-n must be >= 1");
  require(steps >= 1, "steps must be >= 1");
  require(detector.eta >= 0.0 && detector.eta <= 1.0, "eta must be in [0, 1]");
  require(!m_override || *m_override >= 1, "m must be >= 1");
  require(pulse_noise_sigma >= 0.0 && pulse_noise_sigma < 0.5,
          "pulse-noise must be in [0, 0.5)");
  require(tail_bound > 0.0 && tail_bound < 1e-3,
          "tail-bound must be in (0, 1e-3)");
}

int TrajectoryConfig::pulse_multiplier() const {
  return m_override ? *m_override : bayes::choose_m(mean_n);
}

StepRecord step(TrajectoryState& state, const StepContext& ctx, int index,
                DrawSource& draws) {
  require(state.n_actual >= 1, "actual atom number must be >= 1");
  StepRecord rec;
  rec.index = index;
  rec.n_perceived = state.n_perceived;
  rec.theta_nominal = physics::pulse_area(state.n_perceived, state.m);
  rec.theta_applied = rec.theta_nominal;
  if (ctx.pulse_noise_sigma > 0.0) {
    rec.theta_applied *= 1.0 + ctx.pulse_noise_sigma * draws.normal();
  }
  rec.sigma_actual =
      physics::excitation_probability(state.n_actual, rec.theta_applied);
  rec.excited = draws.uniform() < rec.sigma_actual;
  if (rec.excited) rec.detected = draws.uniform() < ctx.detector.eta;

  // The estimator only ever sees the nominal pulse and the detector output.
  AtomCount n_actual = state.n_actual;
  bayes::AtomNumberDistribution posterior = [&] {
    if (!rec.detected) {
      return bayes::update_no_detection(state.posterior, rec.theta_nominal);
    }
    if (ctx.mode == DetectionMode::removal) {
      return bayes::update_detection_removal(state.posterior,
                                             rec.theta_nominal);
    }
    return bayes::update_detection_recycle(state.posterior, rec.theta_nominal);
  }();
  if (rec.excited && ctx.mode == DetectionMode::removal) --n_actual;
  if (n_actual < 1) {
    fail(ErrorKind::ensemble_empty, "actual atom number reached 0");
  }

  rec.n_actual_after = n_actual;
  rec.n_perceived_next = bayes::most_probable(posterior, state.n_perceived);
  rec.fidelity = physics::swap_fidelity(n_actual, rec.n_perceived_next);
  rec.posterior_stats = bayes::stats(posterior);

  state.posterior = std::move(posterior);
  state.n_actual = n_actual;
  state.n_perceived = rec.n_perceived_next;
  return rec;
}

AtomCount sample_atom_number(const bayes::AtomNumberDistribution& dist,
                             double u) {
  const auto w = dist.weights();
  double cumulative = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    cumulative += w[k];
    if (u < cumulative) return dist.n_min() + static_cast<AtomCount>(k);
  }
  return dist.n_max();
}

TrajectoryRecord run_trajectory(const TrajectoryConfig& config,
                                std::uint64_t master_seed,
                                std::uint64_t index) {
  config.validate();
  TrajectoryRecord record;
  record.config = config;
  record.master_seed = master_seed;
  record.index = index;

  RngDraws draws(derive_trajectory_seed(master_seed, index));
  auto seed = bayes::seed_poisson({config.mean_n, config.tail_bound});
  record.m = config.pulse_multiplier();
  record.n_perceived_initial = bayes::make_plan(config.mean_n).np_initial;
  record.n_actual_initial = config.actual_n_initial
                                ? *config.actual_n_initial
                                : sample_atom_number(seed, draws.uniform());
  record.final_posterior = seed;
  if (record.n_actual_initial < 1) {
    record.failure = Failure{ErrorKind::ensemble_empty,
                             "sampled an empty ensemble"};
    return record;
  }
  record.initial_fidelity =
      physics::swap_fidelity(record.n_actual_initial, record.n_perceived_initial);

  TrajectoryState state{std::move(seed), record.n_actual_initial,
                        record.n_perceived_initial, record.m};
  const StepContext ctx{config.detector, config.mode, config.pulse_noise_sigma};
  record.steps.reserve(static_cast<std::size_t>(config.steps));
  try {
    for (int i = 1; i <= config.steps; ++i) {
      StepRecord rec = step(state, ctx, i, draws);
      record.excitations += rec.excited ? 1 : 0;
      record.detections += rec.detected ? 1 : 0;
      record.steps.push_back(std::move(rec));
    }
  } catch (const Error& e) {
    record.failure = Failure{e.kind(), e.what()};
  }
  record.final_posterior = std::move(state.posterior);
  return record;
}

}  // namespace rydcount::trajectory
