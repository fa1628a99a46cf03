#ifndef CVPUF_H
#define CVPUF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvpufStatus {
  CVPUF_STATUS_OK = 0,
  CVPUF_STATUS_NULL_POINTER = 1,
  CVPUF_STATUS_INVALID_ARGUMENT = 2,
  CVPUF_STATUS_JSON = 3,
  CVPUF_STATUS_IO = 4,
  CVPUF_STATUS_DEGENERATE_KEY = 5,
  CVPUF_STATUS_MODE_MISMATCH = 6,
  CVPUF_STATUS_EMPTY_DATABASE = 7,
  CVPUF_STATUS_UTF8 = 8,
  CVPUF_STATUS_PANIC = 9,
} CvpufStatus;

/**
 * Opaque challenge-response database.
 */
typedef struct CvpufDatabase CvpufDatabase;

/**
 * Opaque scattering key.
 */
typedef struct CvpufKey CvpufKey;

/**
 * Result of one verification run.
 */
typedef struct CvpufReport {
  uint64_t sessions;
  uint64_t hits;
  double p_in;
  double p_in_expected;
  double epsilon;
  double enrollment_error;
  bool accepted;
} CvpufReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *cvpuf_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cvpuf_string_free(char *s);

/**
 * Draws a key with `mode_count` modes from `seed`. Same key as `cvpuf enroll --seed`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvpufStatus cvpuf_key_generate(size_t mode_count,
                                    double l_over_l,
                                    uint64_t seed,
                                    struct CvpufKey **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CvpufStatus cvpuf_key_from_json(const char *json, struct CvpufKey **out);

/**
 * # Safety
 * `key` must be a live handle; `out` a valid pointer. Free the result with [`cvpuf_string_free`].
 */
enum CvpufStatus cvpuf_key_to_json(const struct CvpufKey *key, char **out);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `key` must be null or a live handle.
 */
size_t cvpuf_key_mode_count(const struct CvpufKey *key);

/**
 * Enhancement of the optimal mask under uniform coupling with loss `tau`.
 *
 * # Safety
 * `key` must be a live handle; `out` a valid pointer.
 */
enum CvpufStatus cvpuf_key_optimal_enhancement(const struct CvpufKey *key,
                                               double tau,
                                               double mean_challenge_photons,
                                               double *out);

/**
 * # Safety
 * `key` must be null or a handle not yet freed.
 */
void cvpuf_key_free(struct CvpufKey *key);

/**
 * Exact enrollment under uniform coupling with loss `tau`.
 *
 * # Safety
 * `key` must be a live handle; `out` a valid pointer.
 */
enum CvpufStatus cvpuf_enroll_exact(const struct CvpufKey *key,
                                    double tau,
                                    size_t probe_states,
                                    double mean_probe_photons,
                                    double efficiency,
                                    double delta_over_sigma,
                                    struct CvpufDatabase **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CvpufStatus cvpuf_database_from_json(const char *json, struct CvpufDatabase **out);

/**
 * # Safety
 * `db` must be a live handle; `out` a valid pointer. Free the result with [`cvpuf_string_free`].
 */
enum CvpufStatus cvpuf_database_to_json(const struct CvpufDatabase *db, char **out);

/**
 * Number of modes, or 0 for a null handle.
 *
 * # Safety
 * `db` must be null or a live handle.
 */
size_t cvpuf_database_mode_count(const struct CvpufDatabase *db);

/**
 * # Safety
 * `db` must be null or a handle not yet freed.
 */
void cvpuf_database_free(struct CvpufDatabase *db);

/**
 * Verifies `key` against `db` with `sessions` sessions. Same draws as `cvpuf verify --seed`.
 *
 * # Safety
 * `key` and `db` must be live handles; `out` a valid pointer.
 */
enum CvpufStatus cvpuf_verify(const struct CvpufKey *key,
                              const struct CvpufDatabase *db,
                              uint64_t sessions,
                              double epsilon,
                              double zeta,
                              uint64_t seed,
                              struct CvpufReport *out);

/**
 * Theoretical in-bin probability for detection efficiency and bin width.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvpufStatus cvpuf_p_in(double efficiency, double bin_width, double *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvpufStatus cvpuf_m_threshold(double epsilon, double zeta, uint64_t *out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum CvpufStatus cvpuf_e_threshold(double mean_challenge_photons,
                                   size_t mode_count,
                                   double l_over_l,
                                   double *out);

/**
 * # Safety
 * `rho_f` and `rho_t` must be valid pointers.
 */
enum CvpufStatus cvpuf_radii(double mean_challenge_photons,
                             double variance,
                             double enhancement,
                             double *rho_f,
                             double *rho_t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVPUF_H */
