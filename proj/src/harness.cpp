#include "rydcount/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace rydcount::harness {

namespace {

using trajectory::TrajectoryConfig;
using trajectory::TrajectoryRecord;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Number of aggregate points (step 0 included) a record contributes.
std::size_t points_of(const TrajectoryRecord& r) {
  return r.n_actual_initial >= 1 ? r.steps.size() + 1 : 0;
}

struct Point {
  double diff;
  double fidelity;
  double infidelity;
  double detections;
};

Point point_at(const TrajectoryRecord& r, std::size_t s) {
  if (s == 0) {
    return {static_cast<double>(r.n_actual_initial - r.n_perceived_initial),
            r.initial_fidelity.fidelity, r.initial_fidelity.infidelity, 0.0};
  }
  const auto& rec = r.steps[s - 1];
  int detections = 0;
  for (std::size_t k = 0; k < s; ++k) detections += r.steps[k].detected ? 1 : 0;
  return {static_cast<double>(rec.n_actual_after - rec.n_perceived_next),
          rec.fidelity.fidelity, rec.fidelity.infidelity,
          static_cast<double>(detections)};
}

double population_std(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

double EnsembleStats::standard_error(int step) const {
  const auto s = static_cast<std::size_t>(step);
  if (active.at(s) == 0) return kNaN;
  return std_fidelity[s] / std::sqrt(static_cast<double>(active[s]));
}

double SweepRow::standard_error() const {
  const int n = trajectories - failures;
  return n > 0 ? std_fidelity / std::sqrt(static_cast<double>(n)) : kNaN;
}

std::vector<TrajectoryRecord> run_trajectories(const TrajectoryConfig& config,
                                               int trajectories,
                                               std::uint64_t master_seed,
                                               const ExecOptions& exec) {
  require(trajectories >= 1, "trajectories must be >= 1");
  config.validate();
  std::vector<TrajectoryRecord> records(static_cast<std::size_t>(trajectories));
  parallel_for(records.size(), exec.workers, [&](std::size_t i) {
    records[i] = trajectory::run_trajectory(config, master_seed, i);
  });
  return records;
}

EnsembleStats aggregate(std::span<const TrajectoryRecord> records) {
  require(!records.empty(), "cannot aggregate an empty ensemble");
  const auto steps = static_cast<std::size_t>(records.front().config.steps);
  EnsembleStats out;
  out.trajectories = static_cast<int>(records.size());
  for (const auto& r : records) out.failures += r.failure ? 1 : 0;

  std::vector<double> diff, fid, infid, det;
  for (std::size_t s = 0; s <= steps; ++s) {
    diff.clear();
    fid.clear();
    infid.clear();
    det.clear();
    int failed = 0;
    for (const auto& r : records) {
      if (points_of(r) > s) {
        const Point p = point_at(r, s);
        diff.push_back(p.diff);
        fid.push_back(p.fidelity);
        infid.push_back(p.infidelity);
        det.push_back(p.detections);
      } else if (r.failure) {
        ++failed;
      }
    }
    out.active.push_back(static_cast<int>(diff.size()));
    out.failures_cum.push_back(failed);
    if (diff.empty()) {
      for (auto* seq : {&out.mean_diff, &out.std_diff, &out.mean_fidelity,
                        &out.mean_infidelity, &out.std_fidelity,
                        &out.mean_detections_cum}) {
        seq->push_back(kNaN);
      }
      continue;
    }
    const double md = mean_of(diff);
    out.mean_diff.push_back(md);
    out.std_diff.push_back(population_std(diff, md));
    out.mean_fidelity.push_back(mean_of(fid));
    // 1 - <F> accumulated from the per-trajectory infidelities.
    const double mi = mean_of(infid);
    out.mean_infidelity.push_back(mi);
    out.std_fidelity.push_back(population_std(infid, mi));
    out.mean_detections_cum.push_back(mean_of(det));
  }
  return out;
}

EnsembleStats run_ensemble(const TrajectoryConfig& config, int trajectories,
                           std::uint64_t master_seed, const ExecOptions& exec) {
  const auto records = run_trajectories(config, trajectories, master_seed, exec);
  return aggregate(records);
}

std::vector<SweepRow> sweep_actual_n(const TrajectoryConfig& base,
                                     std::span<const AtomCount> na_values,
                                     std::span<const int> steps_list,
                                     std::span<const double> etas,
                                     int trajectories, std::uint64_t master_seed,
                                     const ExecOptions& exec) {
  require(!na_values.empty(), "sweep needs at least one actual-n value");
  require(!steps_list.empty(), "sweep needs at least one step count");
  const std::vector<double> eta_values =
      etas.empty() ? std::vector<double>{base.detector.eta}
                   : std::vector<double>(etas.begin(), etas.end());
  const auto np0 = bayes::make_plan(base.mean_n).np_initial;

  std::vector<SweepRow> rows;
  std::uint64_t cell = 0;
  for (AtomCount na : na_values) {
    require(na >= 1, "actual-n values must be >= 1");
    const double reference = physics::swap_fidelity(na, np0).infidelity;
    for (double eta : eta_values) {
      for (int steps : steps_list) {
        TrajectoryConfig config = base;
        config.actual_n_initial = na;
        config.detector.eta = eta;
        config.steps = steps;
        const auto stats = run_ensemble(
            config, trajectories, derive_trajectory_seed(master_seed, cell++),
            exec);
        const auto s = static_cast<std::size_t>(steps);
        SweepRow row;
        row.na_initial = na;
        row.eta = eta;
        row.steps = steps;
        row.mean_diff = stats.mean_diff[s];
        row.std_diff = stats.std_diff[s];
        row.mean_infidelity = stats.mean_infidelity[s];
        row.std_fidelity = stats.std_fidelity[s];
        row.reference_infidelity = reference;
        row.trajectories = stats.trajectories;
        row.failures = stats.failures;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

double initial_average_infidelity(double mean_n, double tail_bound) {
  const auto seed = bayes::seed_poisson({mean_n, tail_bound});
  const auto np0 = bayes::make_plan(mean_n).np_initial;
  double acc = 0.0;
  for (AtomCount n = seed.n_min(); n <= seed.n_max(); ++n) {
    acc += seed(n) * physics::swap_fidelity(n, np0).infidelity;
  }
  return acc;
}

std::vector<SurfaceCell> infidelity_surface(const TrajectoryConfig& base,
                                            std::span<const double> etas,
                                            int max_steps,
                                            int trajectories_per_cell,
                                            std::uint64_t master_seed,
                                            NaSampling sampling,
                                            const ExecOptions& exec) {
  require(!etas.empty(), "eta grid must be non-empty");
  require(max_steps >= 1, "steps must be >= 1");
  require(trajectories_per_cell >= 1, "trajectories must be >= 1");

  std::vector<SurfaceCell> cells;
  for (std::size_t e = 0; e < etas.size(); ++e) {
    TrajectoryConfig config = base;
    config.detector.eta = etas[e];
    config.steps = max_steps;
    const std::uint64_t column_seed = derive_trajectory_seed(master_seed, e);
    const auto steps = static_cast<std::size_t>(max_steps);
    std::vector<double> avg(steps + 1, 0.0);
    std::vector<double> var(steps + 1, 0.0);

    if (sampling == NaSampling::poisson_sample) {
      config.actual_n_initial.reset();
      const auto stats =
          run_ensemble(config, trajectories_per_cell, column_seed, exec);
      for (std::size_t s = 0; s <= steps; ++s) {
        avg[s] = stats.mean_infidelity[s];
        const double se = stats.standard_error(static_cast<int>(s));
        var[s] = se * se;
      }
    } else {
      const auto seed = bayes::seed_poisson({config.mean_n, config.tail_bound});
      for (AtomCount n = std::max<AtomCount>(1, seed.n_min());
           n <= seed.n_max(); ++n) {
        config.actual_n_initial = n;
        const auto stats =
            run_ensemble(config, trajectories_per_cell,
                         derive_trajectory_seed(column_seed,
                                                static_cast<std::uint64_t>(n)),
                         exec);
        const double p = seed(n);
        for (std::size_t s = 0; s <= steps; ++s) {
          avg[s] += p * stats.mean_infidelity[s];
          const double se = stats.standard_error(static_cast<int>(s));
          var[s] += p * p * se * se;
        }
      }
    }
    for (std::size_t s = 0; s <= steps; ++s) {
      cells.push_back(
          {etas[e], static_cast<int>(s), avg[s], std::sqrt(var[s])});
    }
  }
  return cells;
}

std::vector<Isoline> extract_isolines(std::span<const SurfaceCell> surface,
                                      std::span<const double> levels) {
  require(!surface.empty(), "surface must be non-empty");
  require(!levels.empty(), "levels must be non-empty");
  std::map<double, std::vector<SurfaceCell>> columns;
  for (const auto& cell : surface) columns[cell.eta].push_back(cell);
  std::vector<int> grid;
  for (auto& [eta, column] : columns) {
    std::ranges::sort(column, {}, &SurfaceCell::steps);
    std::vector<int> steps;
    for (const auto& c : column) steps.push_back(c.steps);
    if (grid.empty()) grid = steps;
    require(steps == grid, "surface must cover a rectangular (eta, steps) grid");
  }

  std::vector<Isoline> out;
  bool any = false;
  for (double level : levels) {
    require(level > 0.0, "isoline levels must be > 0");
    Isoline line{level, {}};
    for (const auto& [eta, column] : columns) {
      for (std::size_t k = 0; k < column.size(); ++k) {
        const double cur = column[k].avg_infidelity;
        if (!(cur <= level)) continue;
        double at = column[k].steps;
        if (k > 0) {
          const double prev = column[k - 1].avg_infidelity;
          const double span_steps = column[k].steps - column[k - 1].steps;
          double t;
          if (cur > 0.0) {
            t = (std::log(prev) - std::log(level)) /
                (std::log(prev) - std::log(cur));
          } else {
            t = (prev - level) / (prev - cur);
          }
          at = column[k - 1].steps + t * span_steps;
        }
        line.points.push_back({eta, at});
        break;
      }
    }
    any = any || !line.points.empty();
    out.push_back(std::move(line));
  }
  if (!any) fail(ErrorKind::empty_isoline, "no eta column crosses any level");
  return out;
}

namespace {

struct Reduced {
  double a;
  double sse;
};

// Closed-form amplitude at fixed offset b.
Reduced reduced_fit(std::span<const IsolinePoint> pts, double b) {
  double sg = 0.0, gg = 0.0;
  for (const auto& p : pts) {
    const double g = 1.0 / (p.eta + b);
    sg += p.steps * g;
    gg += g * g;
  }
  const double a = sg / gg;
  double sse = 0.0;
  for (const auto& p : pts) {
    const double r = p.steps - a / (p.eta + b);
    sse += r * r;
  }
  return {a, sse};
}

double sse_of(std::span<const IsolinePoint> pts, double a, double b) {
  double sse = 0.0;
  for (const auto& p : pts) {
    const double r = p.steps - a / (p.eta + b);
    sse += r * r;
  }
  return sse;
}

}  // namespace

HyperbolaFit fit_hyperbola(std::span<const IsolinePoint> points) {
  if (points.size() < 3) {
    fail(ErrorKind::fit_failed, "hyperbola fit needs at least 3 points, got " +
                                    std::to_string(points.size()));
  }
  double eta_min = points.front().eta;
  double eta_max = points.front().eta;
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(std::isfinite(points[i].eta) && std::isfinite(points[i].steps),
            "fit points must be finite");
    for (std::size_t j = 0; j < i; ++j) {
      require(points[i].eta != points[j].eta, "fit points need distinct eta");
    }
    eta_min = std::min(eta_min, points[i].eta);
    eta_max = std::max(eta_max, points[i].eta);
  }

  // Scan the offset c = b + eta_min > 0 on a log grid.
  const double scale = std::max(eta_max - eta_min, 1e-3);
  constexpr int kGrid = 4000;
  const double log_lo = std::log(1e-6 * scale);
  const double log_hi = std::log(1e4 * scale);
  auto c_at = [&](int k) {
    return std::exp(log_lo + (log_hi - log_lo) * k / kGrid);
  };
  int best_k = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= kGrid; ++k) {
    const double sse = reduced_fit(points, c_at(k) - eta_min).sse;
    if (sse < best_sse) {
      best_sse = sse;
      best_k = k;
    }
  }
  if (best_k == kGrid) {
    fail(ErrorKind::fit_failed,
         "residual surface is flat: isoline is consistent with a constant");
  }

  // Golden-section refinement in log c between the neighbouring grid nodes.
  double lo = std::log(c_at(std::max(best_k - 1, 0)));
  double hi = std::log(c_at(std::min(best_k + 1, kGrid)));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto objective = [&](double log_c) {
    return reduced_fit(points, std::exp(log_c) - eta_min).sse;
  };
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  double b = std::exp(0.5 * (lo + hi)) - eta_min;
  double a = reduced_fit(points, b).a;
  double sse = sse_of(points, a, b);

  // Gauss-Newton polish on (a, b).
  for (int it = 0; it < 50; ++it) {
    double jaa = 0.0, jab = 0.0, jbb = 0.0, ga = 0.0, gb = 0.0;
    for (const auto& p : points) {
      const double g = 1.0 / (p.eta + b);
      const double r = p.steps - a * g;
      const double da = -g;
      const double db = a * g * g;
      jaa += da * da;
      jab += da * db;
      jbb += db * db;
      ga += da * r;
      gb += db * r;
    }
    const double det = jaa * jbb - jab * jab;
    if (!(std::abs(det) > 0.0)) break;
    const double step_a = -(jbb * ga - jab * gb) / det;
    const double step_b = -(jaa * gb - jab * ga) / det;
    const double na = a + step_a;
    const double nb = b + step_b;
    if (!(eta_min + nb > 0.0)) break;
    const double nsse = sse_of(points, na, nb);
    if (!(nsse <= sse)) break;
    const bool converged = nsse == sse;
    a = na;
    b = nb;
    sse = nsse;
    if (converged) break;
  }

  HyperbolaFit fit;
  fit.a = a;
  fit.b = b;
  fit.rms_residual = std::sqrt(sse / static_cast<double>(points.size()));
  fit.n_points = static_cast<int>(points.size());
  return fit;
}

}  // namespace rydcount::harness
