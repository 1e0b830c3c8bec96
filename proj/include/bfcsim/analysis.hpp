// analysis.hpp — parameter extraction and model/data comparison for
// coincidence histograms: single-bin linewidth fitting, fringe period/shift/
// contrast estimation, and pointwise residual reports.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bfcsim/detection.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// Generic sampled-curve utilities
// ---------------------------------------------------------------------------

// Full width at half maximum via linear interpolation of the half-max
// crossings around the global peak. Throws when no two crossings exist.
double fwhm_of(std::span<const double> x, std::span<const double> y);

struct Peak {
    double position = 0.0;
    double value = 0.0;
};

// Local maxima above threshold_frac * global max, with 3-point parabolic
// position refinement.
std::vector<Peak> find_local_maxima(std::span<const double> x, std::span<const double> y,
                                    double threshold_frac = 0.1);

// Lag that best aligns `curve` to `reference` (positive when curve is shifted
// toward larger x), from the argmax of the discrete cross-correlation with
// 3-point parabolic sub-step refinement.
double cross_correlation_shift(std::span<const double> curve, std::span<const double> reference,
                               double step);

// ---------------------------------------------------------------------------
// Linewidth fit
// ---------------------------------------------------------------------------

struct FitResult {
    double gamma_rad_s = 0.0;
    double scale = 0.0;         // arb. amplitude of the fitted model
    double center_offset_s = 0.0;
    double residual_rms = 0.0;  // in units of the data counts
    bool converged = false;
};

struct FitOptions {
    double gamma_bracket_low_hz = 0.2e9;   // gamma/2pi multi-start bracket
    double gamma_bracket_high_hz = 5.0e9;
    int starts = 5;                        // log-spaced over the bracket
    int max_evaluations = 400;             // per Nelder-Mead start
    double relative_tolerance = 1e-10;     // simplex contraction tolerance
};

// Fit scale * [I_gamma(tau - t0)^2 convolved with h], binned like the data,
// to a d = 1 histogram. Loss is Poisson negative log-likelihood when the
// counts are integers (noisy data) and least squares otherwise; the scale is
// profiled out in closed form, leaving a derivative-free 2-D search over
// (gamma, t0) with multi-start (ties broken toward lower gamma).
FitResult fit_gamma(const Histogram& hist, const ImpulseResponse& h,
                    const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Fringe metrics
// ---------------------------------------------------------------------------

struct FringeMetrics {
    double period_s = 0.0;     // median spacing of detected maxima
    double shift_s = 0.0;      // relative to the reference curve (0 if none)
    double contrast = 0.0;     // (max - min)/(max + min) over the central window
    std::vector<double> peak_positions_s;
};

// Period/shift/contrast of a fringed histogram. The reference (same bin grid)
// is required for the shift; central_window_s limits the contrast evaluation
// to |tau| <= window (pass 1/gamma to stay inside the envelope).
FringeMetrics fringe_metrics(const Histogram& hist,
                             const std::optional<Histogram>& reference = std::nullopt,
                             double central_window_s = 0.0);

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

struct ResidualReport {
    std::vector<double> residuals;  // data - model, after joint normalization
    double rms = 0.0;
    double max_abs = 0.0;
};

// Closed-form pipeline prediction for `config`, binned onto the histogram's
// grid, then both curves normalized as one family; reports pointwise
// residuals.
ResidualReport compare_to_model(const Histogram& hist, const ShaperConfig& config,
                                const ImpulseResponse& h);

void write_fit_report_csv(std::ostream& out, const FitResult& fit);
void write_metrics_report_csv(std::ostream& out, const FringeMetrics& metrics);

} // namespace bfc
