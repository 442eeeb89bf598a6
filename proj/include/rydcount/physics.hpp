#pragma once

// Closed-form collective-excitation, gate and storage formulas for a
// blockaded ensemble treated as a two-level system |G> <-> |R>.

#include <optional>

#include "rydcount/error.hpp"

namespace rydcount::physics {

// Single-atom pulse area. m is set when theta was derived from a perceived
// atom number as 2 m pi / sqrt(N).
struct Pulse {
  double theta = 0.0;
  std::optional<int> m;
};

// Infidelity is carried separately so values near 1e-6 keep full precision.
struct FidelityReport {
  double fidelity = 1.0;
  double infidelity = 0.0;

  bool operator==(const FidelityReport&) const = default;
};

struct StorageModel {
  double u_gg = 0.0;
  double u_gs = 0.0;
  double tau = 0.0;  // seconds
};

struct StorageDephasing {
  double delta_u = 0.0;
  double e_g = 0.0;
  double e_s = 0.0;
  double energy_gap = 0.0;  // delta_u * (n - 1), evaluated directly
  double delta_phi = 0.0;
};

/// sin^2(sqrt(n) theta / 2): probability that the pulse leaves one
/// collective Rydberg excitation.
double excitation_probability(AtomCount n, double theta);

/// cos^2(sqrt(n) theta / 2).
double no_excitation_probability(AtomCount n, double theta);

/// |sin((pi/2) sqrt(actual/perceived))| of a collective pi-pulse tuned for
/// `perceived` atoms applied to `actual` atoms.
FidelityReport swap_fidelity(AtomCount n_actual, AtomCount n_perceived);

/// sin^2(m pi sqrt(actual/perceived)).
double actual_excitation_probability(AtomCount n_actual, AtomCount n_perceived,
                                     int m);

/// 2 m pi / sqrt(perceived).
double pulse_area(AtomCount n_perceived, int m);

Pulse make_pulse(AtomCount n_perceived, int m);

/// (pi^2/32) (delta_n / mean_n)^2
double gate_infidelity_approx(double delta_n, double mean_n);

StorageDephasing storage_dephasing(const StorageModel& model, AtomCount n,
                                   double delta_n);

/// sqrt((1 + cos(delta_phi)) / 2), averaged over qubit states.
FidelityReport storage_fidelity(double delta_phi);

double storage_infidelity_poisson(double mean_n, double delta_u, double tau);

}  // namespace rydcount::physics
