#ifndef NANODECOH_H
#define NANODECOH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum NdcStatus {
  NDC_OK = 0,
  /**
   * A required pointer argument was null.
   */
  NDC_ERR_NULL_POINTER = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  NDC_ERR_INVALID_ARGUMENT = 2,
  /**
   * A value outside the domain of the function (e.g. `ω ≤ 0`).
   */
  NDC_ERR_DOMAIN = 3,
  /**
   * Input data were unusable (too few points, bad shapes).
   */
  NDC_ERR_DATA = 4,
  /**
   * Quadrature, root finding, fitting or a solver failed.
   */
  NDC_ERR_NUMERICAL = 5,
  /**
   * An internal panic was caught.
   */
  NDC_ERR_PANIC = 6,
} NdcStatus;

/**
 * Opaque solved band-bending profile.
 */
typedef struct NdcBandProfile NdcBandProfile;

/**
 * Opaque noise spectral density handle.
 */
typedef struct NdcSpectrum NdcSpectrum;

/**
 * Result of [`ndc_fit_stretched_exp`].
 */
typedef struct NdcStretchedFit {
  double amplitude;
  double t2;
  double stretch;
  double t0;
  double residual_norm;
} NdcStretchedFit;

/**
 * DEER signals from the four photon counts.
 */
typedef struct NdcDeerSignals {
  double s_d;
  double s_e;
  double s_fid;
} NdcDeerSignals;

/**
 * Depletion summary of a solved profile.
 */
typedef struct NdcDepletionReport {
  /**
   * Depth below the surface where neutral P1 falls below half its bulk
   * value, nm.
   */
  double width_nm;
  /**
   * Fractional loss of neutral P1 over the whole core.
   */
  double p1_reduction;
  /**
   * Relative change of the NV⁻ count.
   */
  double nv_change;
  /**
   * Relative Gauss's-law mismatch of the solution.
   */
  double gauss_closure;
} NdcDepletionReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len − 1` bytes) and returns the full message
 * length without the terminator. Returns 0 when there is no error; `buf`
 * may be null to query the length.
 */
size_t ndc_last_error_message(char *buf, size_t len);

/**
 * Clears the last error of this thread.
 */
void ndc_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ndc_version(void);

/**
 * Creates an empty (zero) spectrum.
 */
struct NdcSpectrum *ndc_spectrum_new(void);

/**
 * The core-shell reference spectrum.
 */
struct NdcSpectrum *ndc_spectrum_core_shell(void);

/**
 * The bare-particle reference spectrum.
 */
struct NdcSpectrum *ndc_spectrum_bare(void);

/**
 * Releases a spectrum. Null is ignored.
 */
void ndc_spectrum_free(struct NdcSpectrum *h);

/**
 * Adds `Δ²τ/(π(1 + ω²τ²))`.
 */
enum NdcStatus ndc_spectrum_add_lorentzian(struct NdcSpectrum *h, double delta, double tau_c);

/**
 * Sets the `Δ_e/ω^a` term.
 */
enum NdcStatus ndc_spectrum_set_one_over_f(struct NdcSpectrum *h,
                                           double delta_e,
                                           double exponent_a);

/**
 * Sets the white floor `S₀`.
 */
enum NdcStatus ndc_spectrum_set_white_floor(struct NdcSpectrum *h, double level);

/**
 * `S(ω)`.
 */
enum NdcStatus ndc_spectrum_density(const struct NdcSpectrum *h, double omega, double *out);

/**
 * `κ`, the δ-approximation constant (π/2).
 */
double ndc_kappa(void);

/**
 * Dimensionless CPMG filter `F_N(x)`; 0 for `n_pulses == 0`.
 */
double ndc_filter_fn(double x, uint32_t n_pulses);

/**
 * Exact decoherence exponent `χ` for `n_pulses` ideal π pulses over
 * `total_time`.
 */
enum NdcStatus ndc_chi_exact(const struct NdcSpectrum *h,
                             uint32_t n_pulses,
                             double total_time,
                             double *out);

/**
 * δ-peak approximation `χ ≈ κ t S(πN/t)/π`.
 */
enum NdcStatus ndc_chi_delta(const struct NdcSpectrum *h,
                             uint32_t n_pulses,
                             double total_time,
                             double *out);

/**
 * `T₂` where `χ = 1`.
 */
enum NdcStatus ndc_t2_for_pulses(const struct NdcSpectrum *h, uint32_t n_pulses, double *out);

/**
 * `T₂` for each of `len` pulse numbers, written to `out_t2[0..len]`.
 */
enum NdcStatus ndc_predict_t2_curve(const struct NdcSpectrum *h,
                                    const uint32_t *n_pulses,
                                    size_t len,
                                    double *out_t2);

/**
 * Fits `c(t) = a·exp(−((t − N t_π)/T₂)ⁿ)` to `len` samples.
 */
enum NdcStatus ndc_fit_stretched_exp(const double *t,
                                     const double *c,
                                     size_t len,
                                     uint32_t n_pulses,
                                     double t_pi,
                                     struct NdcStretchedFit *out);

/**
 * Fits `T₂(N) = T₂,echo·N^k` to `len` points.
 */
enum NdcStatus ndc_fit_power_law(const uint32_t *n_pulses,
                                 const double *t2,
                                 size_t len,
                                 double *out_t2_echo,
                                 double *out_k);

/**
 * Fraction of NV⁰ in `measured = a·nv0 + (1 − a)·nvm` (each normalized to
 * unit sum), clipped to `[0, 1]`.
 */
enum NdcStatus ndc_unmix_pl(const double *measured,
                            const double *ref_nv0,
                            const double *ref_nvm,
                            size_t len,
                            double *out_nv0_fraction);

enum NdcStatus ndc_deer_signals(double f1,
                                double f2,
                                double f3,
                                double f4,
                                struct NdcDeerSignals *out);

/**
 * Solves Poisson's equation for a preset (`"flat"`, `"bare"` or
 * `"core-shell"`). A finite `surface_bending` (eV) overrides the preset's
 * value; pass NaN to keep it.
 */
enum NdcStatus ndc_bandbend_solve(const char *preset,
                                  double surface_bending,
                                  struct NdcBandProfile **out);

/**
 * Releases a profile. Null is ignored.
 */
void ndc_band_profile_free(struct NdcBandProfile *h);

/**
 * Number of radial nodes; 0 for a null handle.
 */
size_t ndc_band_profile_len(const struct NdcBandProfile *h);

/**
 * Copies radius (nm) and band bending (eV) into arrays of length `len`,
 * which must be at least [`ndc_band_profile_len`].
 */
enum NdcStatus ndc_band_profile_copy(const struct NdcBandProfile *h,
                                     double *r_nm,
                                     double *phi_ev,
                                     size_t len);

/**
 * P1 depletion at the default threshold plus NV⁻ stability.
 */
enum NdcStatus ndc_band_profile_report(const struct NdcBandProfile *h,
                                       struct NdcDepletionReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NANODECOH_H */
