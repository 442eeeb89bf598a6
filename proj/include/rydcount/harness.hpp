#pragma once

// Ensembles, parameter sweeps and infidelity surfaces built from independent
// trajectories, plus isoline extraction and the a/(eta + b) isoline fit.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rydcount/trajectory.hpp"

namespace rydcount::harness {

// Worker count never changes results: every trajectory writes into its own
// pre-allocated slot and reductions run in index order afterwards.
struct ExecOptions {
  unsigned workers = 1;
};

// Per-step aggregates. Index 0 is the state before the first pulse, index i
// the state after step i, so every sequence has steps + 1 entries.
struct EnsembleStats {
  int trajectories = 0;
  int failures = 0;
  std::vector<double> mean_diff;  // <N^(a) - N^(p)>
  std::vector<double> std_diff;
  std::vector<double> mean_fidelity;
  std::vector<double> mean_infidelity;  // 1 - <F>
  std::vector<double> std_fidelity;
  std::vector<double> mean_detections_cum;
  std::vector<int> active;        // trajectories still running at this step
  std::vector<int> failures_cum;  // trajectories failed at or before this step

  int steps() const { return static_cast<int>(mean_diff.size()) - 1; }
  double standard_error(int step) const;
};

struct SweepRow {
  AtomCount na_initial = 0;
  double eta = 1.0;
  int steps = 0;
  double mean_diff = 0.0;
  double std_diff = 0.0;
  double mean_infidelity = 0.0;
  double std_fidelity = 0.0;
  double reference_infidelity = 0.0;  // before any interrogation, N^(p) = <N>
  int trajectories = 0;
  int failures = 0;

  double standard_error() const;
};

enum class NaSampling { poisson_sample, weighted_grid };

struct SurfaceCell {
  double eta = 1.0;
  int steps = 0;
  double avg_infidelity = 0.0;
  double standard_error = 0.0;
};

struct IsolinePoint {
  double eta = 0.0;
  double steps = 0.0;
};

struct Isoline {
  double level = 0.0;
  std::vector<IsolinePoint> points;
};

struct HyperbolaFit {
  double level = 0.0;
  double a = 0.0;
  double b = 0.0;
  double rms_residual = 0.0;
  int n_points = 0;

  double operator()(double eta) const { return a / (eta + b); }
};

/// Applies `fn(i)` for i in [0, count) on `workers` threads.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn);

std::vector<trajectory::TrajectoryRecord> run_trajectories(
    const trajectory::TrajectoryConfig& config, int trajectories,
    std::uint64_t master_seed, const ExecOptions& exec = {});

EnsembleStats aggregate(std::span<const trajectory::TrajectoryRecord> records);

/// Runs trajectories with seeds derive_trajectory_seed(master_seed, 0..R-1).
EnsembleStats run_ensemble(const trajectory::TrajectoryConfig& config,
                           int trajectories, std::uint64_t master_seed,
                           const ExecOptions& exec = {});

/// One independent ensemble per (na, eta, steps) cell, in that nesting order.
/// An empty `etas` uses the base detector efficiency. Cell k is seeded with
/// derive_trajectory_seed(master_seed, k).
std::vector<SweepRow> sweep_actual_n(const trajectory::TrajectoryConfig& base,
                                     std::span<const AtomCount> na_values,
                                     std::span<const int> steps_list,
                                     std::span<const double> etas,
                                     int trajectories, std::uint64_t master_seed,
                                     const ExecOptions& exec = {});

/// 1 - <F> over the Poisson seed of the initial actual number, for every
/// (eta, steps) with steps in 0..max_steps. Column e is seeded with
/// derive_trajectory_seed(master_seed, e). `base` supplies mode, m, pulse
/// noise and tail bound; its mean, actual number and detector are replaced.
std::vector<SurfaceCell> infidelity_surface(
    const trajectory::TrajectoryConfig& base, std::span<const double> etas,
    int max_steps, int trajectories_per_cell, std::uint64_t master_seed,
    NaSampling sampling, const ExecOptions& exec = {});

/// Poisson-weighted swap infidelity before any interrogation.
double initial_average_infidelity(double mean_n, double tail_bound = 1e-10);

/// First crossing of each level per eta column, interpolated linearly in
/// log-infidelity. Columns that never cross are omitted; throws empty-isoline
/// only when no level crosses anywhere.
std::vector<Isoline> extract_isolines(std::span<const SurfaceCell> surface,
                                      std::span<const double> levels);

/// Least-squares fit of steps = a / (eta + b) with eta + b > 0 on the data.
HyperbolaFit fit_hyperbola(std::span<const IsolinePoint> points);

}  // namespace rydcount::harness

#include "rydcount/detail/parallel.hpp"
