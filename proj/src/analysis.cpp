#include "bfcsim/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "bfcsim/csv.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// Curve utilities
// ---------------------------------------------------------------------------

double fwhm_of(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("fwhm_of: need matching x/y with >= 3 samples");
    }
    const auto peak_it = std::max_element(y.begin(), y.end());
    const double half = 0.5 * *peak_it;
    const auto peak = static_cast<std::size_t>(peak_it - y.begin());
    if (half <= 0.0) throw std::invalid_argument("fwhm_of: flat curve");

    auto interp = [&](std::size_t a, std::size_t b) {
        return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    };
    double left = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = peak; j > 0; --j) {
        if (y[j - 1] < half && y[j] >= half) { left = interp(j - 1, j); break; }
    }
    double right = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = peak; j + 1 < y.size(); ++j) {
        if (y[j] >= half && y[j + 1] < half) { right = interp(j + 1, j); break; }
    }
    if (!std::isfinite(left) || !std::isfinite(right)) {
        throw std::invalid_argument("fwhm_of: half-max crossings not bracketed by the grid");
    }
    return right - left;
}

std::vector<Peak> find_local_maxima(std::span<const double> x, std::span<const double> y,
                                    double threshold_frac) {
    if (x.size() != y.size() || x.size() < 3) {
        throw std::invalid_argument("find_local_maxima: need matching x/y with >= 3 samples");
    }
    const double global_max = *std::max_element(y.begin(), y.end());
    const double threshold = threshold_frac * global_max;
    std::vector<Peak> peaks;
    for (std::size_t j = 1; j + 1 < y.size(); ++j) {
        if (!(y[j] > y[j - 1] && y[j] >= y[j + 1] && y[j] >= threshold)) continue;
        // 3-point parabola through (j-1, j, j+1)
        const double denom = y[j - 1] - 2.0 * y[j] + y[j + 1];
        double frac = 0.0;
        if (denom < 0.0) frac = 0.5 * (y[j - 1] - y[j + 1]) / denom;
        frac = std::clamp(frac, -0.5, 0.5);
        const double step = x[j + 1] - x[j];
        peaks.push_back({x[j] + frac * step, y[j] - 0.25 * (y[j - 1] - y[j + 1]) * frac});
    }
    return peaks;
}

double cross_correlation_shift(std::span<const double> curve, std::span<const double> reference,
                               double step) {
    const std::size_t n = curve.size();
    if (n != reference.size() || n < 3) {
        throw std::invalid_argument("cross_correlation_shift: grids mismatch");
    }
    const auto max_lag = static_cast<std::ptrdiff_t>(n) - 1;
    std::vector<double> xc(2 * static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(j) - lag;
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(n)) continue;
            acc += curve[j] * reference[static_cast<std::size_t>(r)];
        }
        xc[static_cast<std::size_t>(lag + max_lag)] = acc;
    }
    const auto best_it = std::max_element(xc.begin(), xc.end());
    const auto best = static_cast<std::size_t>(best_it - xc.begin());
    double frac = 0.0;
    if (best > 0 && best + 1 < xc.size()) {
        const double denom = xc[best - 1] - 2.0 * xc[best] + xc[best + 1];
        if (denom < 0.0) frac = std::clamp(0.5 * (xc[best - 1] - xc[best + 1]) / denom, -0.5, 0.5);
    }
    return (static_cast<double>(best) - static_cast<double>(max_lag) + frac) * step;
}

// ---------------------------------------------------------------------------
// Linewidth fit
// ---------------------------------------------------------------------------

namespace {

// Model d = 1 coincidence curve: envelope^2 shifted by t0, convolved with the
// response and integrated over the data's bins. Returned per-bin masses are
// un-scaled; the amplitude is profiled by the caller.
std::vector<double> binned_envelope_model(const Histogram& hist, const ImpulseResponse& h,
                                          double gamma_rad_s, double t0_s) {
    const double w = hist.bin_width_s;
    // Fine step: at least 4 samples per bin and enough to sample the kernel.
    double step = w / 4.0;
    while (step > h.fwhm_s / 8.0) step *= 0.5;
    const double margin = h.support_half_width_s() + 4.0 * step;
    const double lo = hist.bin_centers_s.front() - 0.5 * w - margin;
    const double hi = hist.bin_centers_s.back() + 0.5 * w + margin;

    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
    std::vector<double> g2(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = lo + static_cast<double>(j) * step;
        const double env = closed_form_envelope(gamma_rad_s, t - t0_s);
        g2[j] = env * env;
    }
    const std::vector<double> kernel = h.kernel(step);
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);

    std::vector<double> model(hist.bin_centers_s.size(), 0.0);
    for (std::size_t b = 0; b < model.size(); ++b) {
        const double b_lo = hist.bin_centers_s[b] - 0.5 * w;
        const auto j_lo = static_cast<std::ptrdiff_t>(std::ceil((b_lo - lo) / step - 1e-9));
        const auto j_hi = static_cast<std::ptrdiff_t>(std::floor((b_lo + w - lo) / step - 1e-9));
        double acc = 0.0;
        for (std::ptrdiff_t j = j_lo; j <= j_hi; ++j) {
            double conv = 0.0;
            for (std::ptrdiff_t m = -half; m <= half; ++m) {
                const std::ptrdiff_t src = j - m;
                if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
                conv += kernel[static_cast<std::size_t>(m + half)] * g2[static_cast<std::size_t>(src)];
            }
            acc += conv * step;
        }
        model[b] = acc;
    }
    return model;
}

bool counts_are_integral(const Histogram& hist) {
    if (!hist.noisy) return false;
    for (double v : hist.counts) {
        if (std::abs(v - std::round(v)) > 1e-9) return false;
    }
    return true;
}

struct ProfiledLoss {
    double loss = std::numeric_limits<double>::infinity();
    double scale = 0.0;
};

ProfiledLoss evaluate_loss(const Histogram& hist, const std::vector<double>& model,
                           bool poisson) {
    ProfiledLoss out;
    double sum_m = 0.0, sum_y = 0.0, sum_my = 0.0, sum_mm = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        sum_m += model[i];
        sum_y += hist.counts[i];
        sum_my += model[i] * hist.counts[i];
        sum_mm += model[i] * model[i];
    }
    if (sum_mm <= 0.0 || sum_m <= 0.0) return out;
    if (poisson) {
        // NLL = sum(A m - y log(A m)); dNLL/dA = 0 gives A = sum y / sum m.
        const double scale = sum_y / sum_m;
        double nll = 0.0;
        for (std::size_t i = 0; i < model.size(); ++i) {
            const double lambda = std::max(scale * model[i], 1e-300);
            nll += lambda - hist.counts[i] * std::log(lambda);
        }
        out.loss = nll;
        out.scale = scale;
    } else {
        const double scale = sum_my / sum_mm;
        double ss = 0.0;
        for (std::size_t i = 0; i < model.size(); ++i) {
            const double r = hist.counts[i] - scale * model[i];
            ss += r * r;
        }
        out.loss = ss;
        out.scale = scale;
    }
    return out;
}

struct SimplexResult {
    std::array<double, 2> x{};
    double loss = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Plain 2-D Nelder-Mead.
SimplexResult nelder_mead_2d(const std::function<double(const std::array<double, 2>&)>& f,
                             std::array<double, 2> x0, std::array<double, 2> spread,
                             int max_evaluations, double rel_tol) {
    std::array<std::array<double, 2>, 3> xs{x0,
                                            {x0[0] + spread[0], x0[1]},
                                            {x0[0], x0[1] + spread[1]}};
    std::array<double, 3> fs{};
    int evals = 0;
    for (int i = 0; i < 3; ++i) { fs[i] = f(xs[i]); ++evals; }

    auto order = [&] {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::array<std::array<double, 2>, 3> nxs{xs[idx[0]], xs[idx[1]], xs[idx[2]]};
        std::array<double, 3> nfs{fs[idx[0]], fs[idx[1]], fs[idx[2]]};
        xs = nxs;
        fs = nfs;
    };

    SimplexResult result;
    while (evals < max_evaluations) {
        order();
        const double span = std::abs(fs[2] - fs[0]);
        const double scale = std::abs(fs[0]) + std::abs(fs[2]) + 1e-300;
        if (span <= rel_tol * scale) { result.converged = true; break; }

        const std::array<double, 2> centroid{0.5 * (xs[0][0] + xs[1][0]),
                                             0.5 * (xs[0][1] + xs[1][1])};
        auto point = [&](double c) {
            return std::array<double, 2>{centroid[0] + c * (xs[2][0] - centroid[0]),
                                         centroid[1] + c * (xs[2][1] - centroid[1])};
        };
        const auto xr = point(-1.0);
        const double fr = f(xr); ++evals;
        if (fr < fs[0]) {
            const auto xe = point(-2.0);
            const double fe = f(xe); ++evals;
            if (fe < fr) { xs[2] = xe; fs[2] = fe; } else { xs[2] = xr; fs[2] = fr; }
        } else if (fr < fs[1]) {
            xs[2] = xr; fs[2] = fr;
        } else {
            const auto xc = point(0.5);
            const double fc = f(xc); ++evals;
            if (fc < fs[2]) {
                xs[2] = xc; fs[2] = fc;
            } else {  // shrink toward the best vertex
                for (int i = 1; i < 3; ++i) {
                    xs[i] = {xs[0][0] + 0.5 * (xs[i][0] - xs[0][0]),
                             xs[0][1] + 0.5 * (xs[i][1] - xs[0][1])};
                    fs[i] = f(xs[i]); ++evals;
                }
            }
        }
    }
    order();
    result.x = xs[0];
    result.loss = fs[0];
    return result;
}

}  // namespace

FitResult fit_gamma(const Histogram& hist, const ImpulseResponse& h, const FitOptions& options) {
    if (hist.counts.size() < 30) {
        throw std::invalid_argument("fit_gamma: need >= 30 bins");
    }
    const double peak = hist.peak();
    const double floor = *std::min_element(hist.counts.begin(), hist.counts.end());
    if (peak <= 0.0 || peak - floor <= 1e-12 * std::max(peak, 1.0)) {
        throw std::invalid_argument("fit_gamma: degenerate (flat) data");
    }
    const bool poisson = counts_are_integral(hist);

    // Start t0 at the histogram peak.
    const auto peak_idx = static_cast<std::size_t>(
        std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
    const double t0_start = hist.bin_centers_s[peak_idx];

    auto loss_at = [&](const std::array<double, 2>& params) {
        const double gamma = std::exp(params[0]);
        const auto model = binned_envelope_model(hist, h, gamma, params[1]);
        return evaluate_loss(hist, model, poisson).loss;
    };

    FitResult best;
    double best_loss = std::numeric_limits<double>::infinity();
    const double lo = std::log(hz_to_rad(options.gamma_bracket_low_hz));
    const double hi = std::log(hz_to_rad(options.gamma_bracket_high_hz));
    for (int s = 0; s < options.starts; ++s) {
        const double frac = options.starts == 1 ? 0.5
                                                : static_cast<double>(s) /
                                                      static_cast<double>(options.starts - 1);
        const std::array<double, 2> x0{lo + frac * (hi - lo), t0_start};
        const std::array<double, 2> spread{0.2, 2.0 * hist.bin_width_s};
        const SimplexResult r = nelder_mead_2d(loss_at, x0, spread, options.max_evaluations,
                                               options.relative_tolerance);
        const double gamma = std::exp(r.x[0]);
        const bool better =
            r.loss < best_loss * (1.0 - 1e-12) ||
            (std::abs(r.loss - best_loss) <= 1e-12 * std::abs(best_loss) && gamma < best.gamma_rad_s);
        if (better) {
            best_loss = r.loss;
            best.gamma_rad_s = gamma;
            best.center_offset_s = r.x[1];
            best.converged = r.converged;
        }
    }

    const auto model = binned_envelope_model(hist, h, best.gamma_rad_s, best.center_offset_s);
    const ProfiledLoss final_loss = evaluate_loss(hist, model, poisson);
    best.scale = final_loss.scale;
    double ss = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double r = hist.counts[i] - final_loss.scale * model[i];
        ss += r * r;
    }
    best.residual_rms = std::sqrt(ss / static_cast<double>(model.size()));
    return best;
}

// ---------------------------------------------------------------------------
// Fringe metrics
// ---------------------------------------------------------------------------

FringeMetrics fringe_metrics(const Histogram& hist, const std::optional<Histogram>& reference,
                             double central_window_s) {
    FringeMetrics metrics;
    const auto peaks = find_local_maxima(hist.bin_centers_s, hist.counts);
    if (peaks.size() < 2) {
        throw std::invalid_argument("fringe_metrics: fewer than two resolvable maxima");
    }
    for (const auto& p : peaks) metrics.peak_positions_s.push_back(p.position);

    std::vector<double> spacings;
    for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
        spacings.push_back(peaks[i + 1].position - peaks[i].position);
    }
    std::sort(spacings.begin(), spacings.end());
    const std::size_t mid = spacings.size() / 2;
    metrics.period_s = spacings.size() % 2 == 1
                           ? spacings[mid]
                           : 0.5 * (spacings[mid - 1] + spacings[mid]);

    if (reference) {
        if (reference->bin_centers_s.size() != hist.bin_centers_s.size() ||
            std::abs(reference->bin_width_s - hist.bin_width_s) > 1e-15) {
            throw std::invalid_argument("fringe_metrics: reference bin grid mismatch");
        }
        metrics.shift_s =
            cross_correlation_shift(hist.counts, reference->counts, hist.bin_width_s);
    }

    double window_max = 0.0, window_min = std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        if (central_window_s > 0.0 && std::abs(hist.bin_centers_s[i]) > central_window_s) continue;
        any = true;
        window_max = std::max(window_max, hist.counts[i]);
        window_min = std::min(window_min, hist.counts[i]);
    }
    if (!any) throw std::invalid_argument("fringe_metrics: central window excludes all bins");
    metrics.contrast = (window_max + window_min) > 0.0
                           ? (window_max - window_min) / (window_max + window_min)
                           : 0.0;
    return metrics;
}

// ---------------------------------------------------------------------------
// Model comparison
// ---------------------------------------------------------------------------

ResidualReport compare_to_model(const Histogram& hist, const ShaperConfig& config,
                                const ImpulseResponse& h) {
    // Predicted curve on a fine grid covering the data plus kernel margins.
    const double w = hist.bin_width_s;
    double step = w / 4.0;
    while (step > h.fwhm_s / 8.0) step *= 0.5;
    const double margin = h.support_half_width_s() + 4.0 * step;
    TauGrid grid{hist.bin_centers_s.front() - 0.5 * w - margin,
                 hist.bin_centers_s.back() + 0.5 * w + margin, step};
    const Wavepacket model_g2 = wavepacket_closed_form(config, grid);
    const Wavepacket convolved = convolve_response(model_g2, h);
    Histogram model = bin_and_sample(convolved, w, 1000000, 0, /*noisy=*/false);

    if (model.counts.size() != hist.counts.size()) {
        // Binning from the widened grid can produce extra edge bins; align by
        // trimming to the data's centers.
        std::vector<double> centers, counts;
        for (std::size_t i = 0; i < model.counts.size(); ++i) {
            if (model.bin_centers_s[i] < hist.bin_centers_s.front() - 0.5 * w) continue;
            if (model.bin_centers_s[i] > hist.bin_centers_s.back() + 0.5 * w) continue;
            centers.push_back(model.bin_centers_s[i]);
            counts.push_back(model.counts[i]);
        }
        model.bin_centers_s = std::move(centers);
        model.counts = std::move(counts);
    }
    if (model.counts.size() != hist.counts.size()) {
        throw std::invalid_argument("compare_to_model: incompatible grids after resampling");
    }
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        if (std::abs(model.bin_centers_s[i] - hist.bin_centers_s[i]) > 0.5 * w) {
            throw std::invalid_argument("compare_to_model: incompatible grids after resampling");
        }
        model.bin_centers_s[i] = hist.bin_centers_s[i];
    }
    model.bin_width_s = hist.bin_width_s;

    auto family = normalize_family({hist, model});
    ResidualReport report;
    report.residuals.resize(hist.counts.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double r = family[0].counts[i] - family[1].counts[i];
        report.residuals[i] = r;
        ss += r * r;
        report.max_abs = std::max(report.max_abs, std::abs(r));
    }
    report.rms = std::sqrt(ss / static_cast<double>(hist.counts.size()));
    return report;
}

void write_fit_report_csv(std::ostream& out, const FitResult& fit) {
    out << "quantity,value\n";
    out << "gamma_hz," << csv::format_double(rad_to_hz(fit.gamma_rad_s)) << "\n";
    out << "gamma_rad_s," << csv::format_double(fit.gamma_rad_s) << "\n";
    out << "scale," << csv::format_double(fit.scale) << "\n";
    out << "center_offset_s," << csv::format_double(fit.center_offset_s) << "\n";
    out << "residual_rms," << csv::format_double(fit.residual_rms) << "\n";
    out << "converged," << (fit.converged ? 1 : 0) << "\n";
}

void write_metrics_report_csv(std::ostream& out, const FringeMetrics& metrics) {
    out << "quantity,value\n";
    out << "period_s," << csv::format_double(metrics.period_s) << "\n";
    out << "shift_s," << csv::format_double(metrics.shift_s) << "\n";
    out << "contrast," << csv::format_double(metrics.contrast) << "\n";
    for (std::size_t i = 0; i < metrics.peak_positions_s.size(); ++i) {
        out << "peak_" << i + 1 << "_s," << csv::format_double(metrics.peak_positions_s[i]) << "\n";
    }
}

} // namespace bfc
