#include "rydcount/rydcount.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "rydcount/io.hpp"
#include "rydcount/version.hpp"

struct rc_distribution {
  rydcount::bayes::AtomNumberDistribution value;
};

struct rc_config {
  rydcount::io::RunConfig value;
};

struct rc_result {
  rydcount::io::RunResult value;
};

namespace {

using rydcount::Error;
using rydcount::ErrorKind;

thread_local std::string last_error;

rc_status to_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return RC_INVALID_ARGUMENT;
    case ErrorKind::inconsistent_observation: return RC_INCONSISTENT_OBSERVATION;
    case ErrorKind::degenerate_distribution: return RC_DEGENERATE_DISTRIBUTION;
    case ErrorKind::ensemble_empty: return RC_ENSEMBLE_EMPTY;
    case ErrorKind::empty_isoline: return RC_EMPTY_ISOLINE;
    case ErrorKind::fit_failed: return RC_FIT_FAILED;
    case ErrorKind::io_error: return RC_IO_ERROR;
  }
  return RC_INTERNAL_ERROR;
}

rc_status set_error(rc_status status, const char* what) {
  try {
    last_error = what;
  } catch (...) {
  }
  return status;
}

// Runs `body` and maps any exception to a status code.
template <typename Body>
rc_status guarded(Body&& body) {
  try {
    body();
    return RC_OK;
  } catch (const Error& e) {
    return set_error(to_status(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(RC_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return set_error(RC_INTERNAL_ERROR, e.what());
  } catch (...) {
    return set_error(RC_INTERNAL_ERROR, "unknown error");
  }
}

rc_status null_argument() {
  return set_error(RC_INVALID_ARGUMENT, "null pointer argument");
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

rc_fidelity to_c(rydcount::physics::FidelityReport r) {
  return {r.fidelity, r.infidelity};
}

}  // namespace

extern "C" {

const char* rc_version(void) { return rydcount::kVersion; }

const char* rc_status_name(rc_status status) {
  switch (status) {
    case RC_OK: return "ok";
    case RC_INVALID_ARGUMENT: return "invalid-argument";
    case RC_INCONSISTENT_OBSERVATION: return "inconsistent-observation";
    case RC_DEGENERATE_DISTRIBUTION: return "degenerate-distribution";
    case RC_ENSEMBLE_EMPTY: return "terminal-ensemble-empty";
    case RC_EMPTY_ISOLINE: return "empty-isoline";
    case RC_FIT_FAILED: return "fit-failed";
    case RC_IO_ERROR: return "io-error";
    case RC_INTERNAL_ERROR: return "internal-error";
  }
  return "unknown";
}

const char* rc_last_error(void) { return last_error.c_str(); }

void rc_string_free(char* str) { std::free(str); }

rc_status rc_excitation_probability(int64_t n, double theta, double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::physics::excitation_probability(n, theta); });
}

rc_status rc_no_excitation_probability(int64_t n, double theta, double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::physics::no_excitation_probability(n, theta); });
}

rc_status rc_swap_fidelity(int64_t n_actual, int64_t n_perceived, rc_fidelity* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = to_c(rydcount::physics::swap_fidelity(n_actual, n_perceived)); });
}

rc_status rc_actual_excitation_probability(int64_t n_actual, int64_t n_perceived, int m,
                                           double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] {
    *out = rydcount::physics::actual_excitation_probability(n_actual, n_perceived, m);
  });
}

rc_status rc_pulse_area(int64_t n_perceived, int m, double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::physics::pulse_area(n_perceived, m); });
}

rc_status rc_gate_infidelity_approx(double delta_n, double mean_n, double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::physics::gate_infidelity_approx(delta_n, mean_n); });
}

rc_status rc_storage_dephasing(const rc_storage_model* model, int64_t n, double delta_n,
                               rc_dephasing* out) {
  if (model == nullptr || out == nullptr) return null_argument();
  return guarded([&] {
    const auto r = rydcount::physics::storage_dephasing({model->u_gg, model->u_gs, model->tau},
                                                        n, delta_n);
    *out = {r.delta_u, r.e_g, r.e_s, r.energy_gap, r.delta_phi};
  });
}

rc_status rc_storage_fidelity(double delta_phi, rc_fidelity* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = to_c(rydcount::physics::storage_fidelity(delta_phi)); });
}

rc_status rc_storage_infidelity_poisson(double mean_n, double delta_u, double tau, double* out) {
  if (out == nullptr) return null_argument();
  return guarded(
      [&] { *out = rydcount::physics::storage_infidelity_poisson(mean_n, delta_u, tau); });
}

rc_status rc_fwhm(double mean_n, double* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::bayes::fwhm(mean_n); });
}

rc_status rc_choose_m(double mean_n, int* out) {
  if (out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::bayes::choose_m(mean_n); });
}

rc_status rc_distribution_seed_poisson(double mean_n, double tail_bound, rc_distribution** out) {
  if (out == nullptr) return null_argument();
  return guarded([&] {
    *out = new rc_distribution{rydcount::bayes::seed_poisson({mean_n, tail_bound})};
  });
}

rc_status rc_distribution_from_weights(int64_t n_min, const double* weights, size_t count,
                                       rc_distribution** out) {
  if (out == nullptr || (weights == nullptr && count > 0)) return null_argument();
  return guarded([&] {
    std::vector<double> w(weights, weights + count);
    rydcount::require(!w.empty(), "distribution support must be non-empty");
    for (double x : w) rydcount::require(x >= 0.0, "distribution weights must be >= 0");
    *out = new rc_distribution{
        rydcount::bayes::AtomNumberDistribution::normalized(n_min, std::move(w))};
  });
}

void rc_distribution_free(rc_distribution* dist) { delete dist; }

int64_t rc_distribution_n_min(const rc_distribution* dist) {
  return dist ? dist->value.n_min() : 0;
}

size_t rc_distribution_size(const rc_distribution* dist) {
  return dist ? dist->value.size() : 0;
}

size_t rc_distribution_weights(const rc_distribution* dist, double* out, size_t capacity) {
  if (dist == nullptr || out == nullptr) return 0;
  const auto w = dist->value.weights();
  const size_t n = std::min(capacity, w.size());
  std::copy_n(w.begin(), n, out);
  return n;
}

rc_status rc_distribution_update(const rc_distribution* dist, rc_outcome outcome, double theta,
                                 rc_distribution** out) {
  if (dist == nullptr || out == nullptr) return null_argument();
  return guarded([&] {
    using namespace rydcount::bayes;
    switch (outcome) {
      case RC_NO_DETECTION:
        *out = new rc_distribution{update_no_detection(dist->value, theta)};
        return;
      case RC_DETECTION_RECYCLE:
        *out = new rc_distribution{update_detection_recycle(dist->value, theta)};
        return;
      case RC_DETECTION_REMOVAL:
        *out = new rc_distribution{update_detection_removal(dist->value, theta)};
        return;
    }
    rydcount::fail(ErrorKind::invalid_argument, "unknown outcome");
  });
}

rc_status rc_distribution_most_probable(const rc_distribution* dist, int64_t reference_np,
                                        int64_t* out) {
  if (dist == nullptr || out == nullptr) return null_argument();
  return guarded([&] { *out = rydcount::bayes::most_probable(dist->value, reference_np); });
}

rc_status rc_distribution_stats(const rc_distribution* dist, rc_posterior_stats* out) {
  if (dist == nullptr || out == nullptr) return null_argument();
  return guarded([&] {
    const auto s = rydcount::bayes::stats(dist->value);
    *out = {s.mean, s.std, s.argmax, s.credible_68_low, s.credible_68_high};
  });
}

rc_status rc_distribution_to_json(const rc_distribution* dist, char** out) {
  if (dist == nullptr || out == nullptr) return null_argument();
  return guarded([&] { *out = copy_string(rydcount::io::render_posterior(dist->value)); });
}

uint64_t rc_derive_trajectory_seed(uint64_t master_seed, uint64_t index) {
  return rydcount::derive_trajectory_seed(master_seed, index);
}

rc_status rc_config_from_json(const char* json, rc_config** out) {
  if (json == nullptr || out == nullptr) return null_argument();
  return guarded([&] { *out = new rc_config{rydcount::io::parse_config(json)}; });
}

rc_status rc_config_to_json(const rc_config* config, char** out) {
  if (config == nullptr || out == nullptr) return null_argument();
  return guarded([&] { *out = copy_string(rydcount::io::to_json(config->value)); });
}

void rc_config_free(rc_config* config) { delete config; }

rc_status rc_run(const rc_config* config, rc_result** out) {
  if (config == nullptr || out == nullptr) return null_argument();
  return guarded([&] { *out = new rc_result{rydcount::io::execute(config->value)}; });
}

void rc_result_free(rc_result* result) { delete result; }

void rc_result_counts(const rc_result* result, int* trajectories, int* failures) {
  if (result == nullptr) return;
  if (trajectories) *trajectories = result->value.trajectories;
  if (failures) *failures = result->value.failures;
}

size_t rc_result_warning_count(const rc_result* result) {
  return result ? result->value.warnings.size() : 0;
}

const char* rc_result_warning(const rc_result* result, size_t index) {
  if (result == nullptr || index >= result->value.warnings.size()) return nullptr;
  return result->value.warnings[index].c_str();
}

rc_status rc_result_render(const rc_result* result, rc_format format, char** out) {
  if (result == nullptr || out == nullptr) return null_argument();
  return guarded([&] {
    const auto f = format == RC_FORMAT_JSON ? rydcount::io::Format::json
                                            : rydcount::io::Format::csv;
    *out = copy_string(rydcount::io::render(result->value, f));
  });
}

rc_status rc_result_posterior_json(const rc_result* result, char** out) {
  if (result == nullptr || out == nullptr) return null_argument();
  return guarded([&] {
    const auto* record =
        std::get_if<rydcount::trajectory::TrajectoryRecord>(&result->value.payload);
    rydcount::require(record != nullptr, "posterior is only available for simulate runs");
    *out = copy_string(rydcount::io::render_posterior(record->final_posterior));
  });
}

rc_status rc_digest(const char* data, size_t size, char** out) {
  if ((data == nullptr && size > 0) || out == nullptr) return null_argument();
  return guarded([&] { *out = copy_string(rydcount::io::digest({data, size})); });
}

rc_status rc_emit(const char* data, size_t size, const char* path, char** digest) {
  if ((data == nullptr && size > 0) || path == nullptr) return null_argument();
  return guarded([&] {
    const auto d = rydcount::io::emit({data, size}, path);
    if (digest != nullptr) *digest = copy_string(d);
  });
}

}  // extern "C"
