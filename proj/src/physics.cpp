#include "rydcount/physics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rydcount {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::inconsistent_observation: return "inconsistent-observation";
    case ErrorKind::degenerate_distribution: return "degenerate-distribution";
    case ErrorKind::ensemble_empty: return "terminal-ensemble-empty";
    case ErrorKind::empty_isoline: return "empty-isoline";
    case ErrorKind::fit_failed: return "fit-failed";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace rydcount

namespace rydcount::physics {

namespace {

constexpr double kPi = std::numbers::pi;

// Fidelity |cos(d)| with the infidelity 1 - |cos(d)| = 2 sin^2(d'/2), where
// d' is d folded into [-pi/2, pi/2].
FidelityReport from_cosine_deviation(double d) {
  const double folded = std::remainder(d, kPi);
  const double half_sin = std::sin(0.5 * folded);
  FidelityReport report;
  report.fidelity = std::cos(folded);
  report.infidelity = 2.0 * half_sin * half_sin;
  return report;
}

}  // namespace

double excitation_probability(AtomCount n, double theta) {
  require(n >= 0, "atom count must be >= 0");
  const double s = std::sin(0.5 * std::sqrt(static_cast<double>(n)) * theta);
  return s * s;
}

double no_excitation_probability(AtomCount n, double theta) {
  require(n >= 0, "atom count must be >= 0");
  const double c = std::cos(0.5 * std::sqrt(static_cast<double>(n)) * theta);
  return c * c;
}

FidelityReport swap_fidelity(AtomCount n_actual, AtomCount n_perceived) {
  require(n_perceived >= 1, "perceived atom count must be >= 1");
  require(n_actual >= 0, "actual atom count must be >= 0");
  // F = |sin(x)| with x = (pi/2) sqrt(r) = pi/2 + d, so F = |cos(d)| and
  // d = (pi/2) (r - 1) / (sqrt(r) + 1). (r - 1) is formed from the integer
  // difference so small mismatches do not cancel.
  const double p = static_cast<double>(n_perceived);
  const double ratio = static_cast<double>(n_actual) / p;
  const double excess = static_cast<double>(n_actual - n_perceived) / p;
  const double d = 0.5 * kPi * excess / (std::sqrt(ratio) + 1.0);
  return from_cosine_deviation(d);
}

double actual_excitation_probability(AtomCount n_actual, AtomCount n_perceived,
                                     int m) {
  require(n_perceived >= 1, "perceived atom count must be >= 1");
  require(n_actual >= 0, "actual atom count must be >= 0");
  require(m >= 1, "pulse multiplier must be >= 1");
  const double ratio =
      static_cast<double>(n_actual) / static_cast<double>(n_perceived);
  const double s = std::sin(m * kPi * std::sqrt(ratio));
  return s * s;
}

double pulse_area(AtomCount n_perceived, int m) {
  require(n_perceived >= 1, "perceived atom count must be >= 1");
  require(m >= 1, "pulse multiplier must be >= 1");
  return 2.0 * m * kPi / std::sqrt(static_cast<double>(n_perceived));
}

Pulse make_pulse(AtomCount n_perceived, int m) {
  return Pulse{pulse_area(n_perceived, m), m};
}

double gate_infidelity_approx(double delta_n, double mean_n) {
  require(mean_n > 0.0, "mean atom number must be > 0");
  require(delta_n >= 0.0, "atom number spread must be >= 0");
  const double rel = delta_n / mean_n;
  return kPi * kPi / 32.0 * rel * rel;
}

StorageDephasing storage_dephasing(const StorageModel& model, AtomCount n,
                                   double delta_n) {
  require(n >= 1, "atom count must be >= 1");
  require(model.tau >= 0.0, "storage time must be >= 0");
  const double nd = static_cast<double>(n);
  StorageDephasing out;
  out.delta_u = model.u_gg - model.u_gs;
  out.e_g = 0.5 * model.u_gg * nd * (nd - 1.0);
  out.e_s = 0.5 * model.u_gg * (nd - 1.0) * (nd - 2.0) + model.u_gs * (nd - 1.0);
  out.energy_gap = out.delta_u * (nd - 1.0);
  out.delta_phi = delta_n * out.delta_u * model.tau;
  return out;
}

FidelityReport storage_fidelity(double delta_phi) {
  require(std::isfinite(delta_phi), "phase must be finite");
  // sqrt((1 + cos phi) / 2) = |cos(phi / 2)|
  return from_cosine_deviation(0.5 * delta_phi);
}

double storage_infidelity_poisson(double mean_n, double delta_u, double tau) {
  require(mean_n >= 0.0 && tau >= 0.0, "mean atom number and time must be >= 0");
  const double phase = delta_u * tau;
  return mean_n * phase * phase / 8.0;
}

}  // namespace rydcount::physics
