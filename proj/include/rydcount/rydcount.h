/*
 * rydcount C API.
 *
 * Every fallible call returns an rc_status. On failure the message is
 * available from rc_last_error() on the calling thread until the next
 * failing call on that thread. Objects are opaque handles released with the
 * matching *_free function; strings returned through char** are released
 * with rc_string_free.
 */
#ifndef RYDCOUNT_H
#define RYDCOUNT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RYDCOUNT_BUILDING)
#    define RYDCOUNT_API __declspec(dllexport)
#  else
#    define RYDCOUNT_API __declspec(dllimport)
#  endif
#else
#  define RYDCOUNT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rc_status {
  RC_OK = 0,
  RC_INVALID_ARGUMENT = 1,
  RC_INCONSISTENT_OBSERVATION = 2,
  RC_DEGENERATE_DISTRIBUTION = 3,
  RC_ENSEMBLE_EMPTY = 4,
  RC_EMPTY_ISOLINE = 5,
  RC_FIT_FAILED = 6,
  RC_IO_ERROR = 7,
  RC_INTERNAL_ERROR = 8
} rc_status;

typedef enum rc_outcome {
  RC_NO_DETECTION = 0,
  RC_DETECTION_RECYCLE = 1,
  RC_DETECTION_REMOVAL = 2
} rc_outcome;

typedef enum rc_format { RC_FORMAT_CSV = 0, RC_FORMAT_JSON = 1 } rc_format;

typedef struct rc_fidelity {
  double fidelity;
  double infidelity;
} rc_fidelity;

typedef struct rc_storage_model {
  double u_gg;
  double u_gs;
  double tau;
} rc_storage_model;

typedef struct rc_dephasing {
  double delta_u;
  double e_g;
  double e_s;
  double energy_gap;
  double delta_phi;
} rc_dephasing;

typedef struct rc_posterior_stats {
  double mean;
  double std;
  int64_t argmax;
  int64_t credible_68_low;
  int64_t credible_68_high;
} rc_posterior_stats;

typedef struct rc_distribution rc_distribution;
typedef struct rc_config rc_config;
typedef struct rc_result rc_result;

RYDCOUNT_API const char* rc_version(void);
RYDCOUNT_API const char* rc_status_name(rc_status status);
RYDCOUNT_API const char* rc_last_error(void);
RYDCOUNT_API void rc_string_free(char* str);

/* Closed-form formulas. */
RYDCOUNT_API rc_status rc_excitation_probability(int64_t n, double theta, double* out);
RYDCOUNT_API rc_status rc_no_excitation_probability(int64_t n, double theta, double* out);
RYDCOUNT_API rc_status rc_swap_fidelity(int64_t n_actual, int64_t n_perceived, rc_fidelity* out);
RYDCOUNT_API rc_status rc_actual_excitation_probability(int64_t n_actual, int64_t n_perceived,
                                                        int m, double* out);
RYDCOUNT_API rc_status rc_pulse_area(int64_t n_perceived, int m, double* out);
RYDCOUNT_API rc_status rc_gate_infidelity_approx(double delta_n, double mean_n, double* out);
RYDCOUNT_API rc_status rc_storage_dephasing(const rc_storage_model* model, int64_t n,
                                            double delta_n, rc_dephasing* out);
RYDCOUNT_API rc_status rc_storage_fidelity(double delta_phi, rc_fidelity* out);
RYDCOUNT_API rc_status rc_storage_infidelity_poisson(double mean_n, double delta_u, double tau,
                                                     double* out);
RYDCOUNT_API rc_status rc_fwhm(double mean_n, double* out);
RYDCOUNT_API rc_status rc_choose_m(double mean_n, int* out);

/* Atom-number distributions. */
RYDCOUNT_API rc_status rc_distribution_seed_poisson(double mean_n, double tail_bound,
                                                    rc_distribution** out);
/* Weights are renormalized; they must be nonnegative with positive sum. */
RYDCOUNT_API rc_status rc_distribution_from_weights(int64_t n_min, const double* weights,
                                                    size_t count, rc_distribution** out);
RYDCOUNT_API void rc_distribution_free(rc_distribution* dist);
RYDCOUNT_API int64_t rc_distribution_n_min(const rc_distribution* dist);
RYDCOUNT_API size_t rc_distribution_size(const rc_distribution* dist);
/* Copies min(capacity, size) weights. */
RYDCOUNT_API size_t rc_distribution_weights(const rc_distribution* dist, double* out,
                                            size_t capacity);
RYDCOUNT_API rc_status rc_distribution_update(const rc_distribution* dist, rc_outcome outcome,
                                              double theta, rc_distribution** out);
RYDCOUNT_API rc_status rc_distribution_most_probable(const rc_distribution* dist,
                                                     int64_t reference_np, int64_t* out);
RYDCOUNT_API rc_status rc_distribution_stats(const rc_distribution* dist,
                                             rc_posterior_stats* out);
RYDCOUNT_API rc_status rc_distribution_to_json(const rc_distribution* dist, char** out);

RYDCOUNT_API uint64_t rc_derive_trajectory_seed(uint64_t master_seed, uint64_t index);

/* Run configuration (strict JSON, unknown keys rejected). */
RYDCOUNT_API rc_status rc_config_from_json(const char* json, rc_config** out);
/* Fully resolved configuration, every key explicit. */
RYDCOUNT_API rc_status rc_config_to_json(const rc_config* config, char** out);
RYDCOUNT_API void rc_config_free(rc_config* config);

/* Runs the configured command. */
RYDCOUNT_API rc_status rc_run(const rc_config* config, rc_result** out);
RYDCOUNT_API void rc_result_free(rc_result* result);
RYDCOUNT_API void rc_result_counts(const rc_result* result, int* trajectories, int* failures);
RYDCOUNT_API size_t rc_result_warning_count(const rc_result* result);
RYDCOUNT_API const char* rc_result_warning(const rc_result* result, size_t index);
RYDCOUNT_API rc_status rc_result_render(const rc_result* result, rc_format format, char** out);
/* Terminal posterior of a `simulate` run as {"n_min", "weights"}. */
RYDCOUNT_API rc_status rc_result_posterior_json(const rc_result* result, char** out);

/* Output files. */
RYDCOUNT_API rc_status rc_digest(const char* data, size_t size, char** out);
RYDCOUNT_API rc_status rc_emit(const char* data, size_t size, const char* path, char** digest);

#ifdef __cplusplus
}
#endif

#endif /* RYDCOUNT_H */
