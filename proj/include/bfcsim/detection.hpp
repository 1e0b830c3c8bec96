// detection.hpp — from ideal G2(tau) to measured coincidence histograms.
//
// The detection chain applies, in order: convolution with the system impulse
// response h(tau) (detectors + timing electronics, Gaussian with 80 ps FWHM by
// default), integration into fixed-width histogram bins, optional Poissonian
// count sampling, and the area/peak normalization convention used for
// comparing curve families.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bfcsim/wavepacket.hpp"

namespace bfc {

inline constexpr double kDefaultResponseFwhmS = 80e-12;
inline constexpr double kDefaultBinWidthS = 20e-12;

// Timing-jitter kernel. Nonnegative and unit-area by construction; discrete
// kernels are truncated at +/-5 sigma (or the tabulated support) and
// renormalized.
struct ImpulseResponse {
    enum class Shape { Gaussian, Tabulated };

    Shape shape = Shape::Gaussian;
    double fwhm_s = kDefaultResponseFwhmS;
    std::vector<std::pair<double, double>> samples;  // (tau, weight), Tabulated only

    static ImpulseResponse gaussian(double fwhm_s = kDefaultResponseFwhmS);
    static ImpulseResponse tabulated(std::vector<std::pair<double, double>> samples);

    // Half-width of the discrete kernel support.
    double support_half_width_s() const;
    // Unit-sum weights sampled on the given step; odd length, centered.
    std::vector<double> kernel(double step_s) const;
};

struct Histogram {
    double bin_width_s = 0.0;
    std::vector<double> bin_centers_s;
    std::vector<double> counts;  // integers when noisy, expectations otherwise
    bool noisy = false;
    std::uint64_t seed = 0;

    double area() const;
    double peak() const;
};

// C(tau) = (G2 * h)(tau) on the same grid. Linear, positivity-preserving and
// area-preserving; the input is treated as zero outside its grid, so curves
// must carry enough margin (>= kernel half-width of near-zero tail) for the
// edges to be meaningful. Throws if the grid undersamples the kernel
// (step > fwhm/8).
Wavepacket convolve_response(const Wavepacket& g2, const ImpulseResponse& h);

// Integrate C(tau) over contiguous bins of the given width, scale so the
// expected total equals total_counts, then (noisy) draw per-bin Poisson
// counts with the given seed or (noisy = false) return the expectations.
Histogram bin_and_sample(const Wavepacket& c, double bin_width_s, long long total_counts,
                         std::uint64_t seed, bool noisy = true);

// Family normalization: every histogram is scaled to the same area, then the
// whole family is scaled so its global maximum is 1. same_dimension documents
// the caller's assertion that the curves differ only in spectral phase.
std::vector<Histogram> normalize_family(std::vector<Histogram> histograms,
                                        bool same_dimension = true);

// Correlation of a pair of matched rectangular filters of the given width:
// psi(tau) = W sinc(W tau / 2), i.e. |psi|^2 has a 2 pi * 2.7831/W FWHM. With
// a response h the result is the simulated impulse-response measurement; with
// nullopt the bare sinc^2 curve is returned.
Wavepacket rect_filter_reference(double width_rad_s, const std::optional<ImpulseResponse>& h,
                                 const TauGrid& grid);

// ---------------------------------------------------------------------------
// Histogram CSV: header comment with bin width / seed / scenario id, then
// tau_s,counts rows. Floats use shortest round-trip formatting.
// ---------------------------------------------------------------------------

void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         std::string_view scenario_id);
Histogram read_histogram_csv(std::istream& in, std::string* scenario_id = nullptr);

} // namespace bfc
