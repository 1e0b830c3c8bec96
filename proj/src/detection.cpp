#include "bfcsim/detection.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "bfcsim/csv.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// ImpulseResponse
// ---------------------------------------------------------------------------

ImpulseResponse ImpulseResponse::gaussian(double fwhm_s) {
    if (fwhm_s <= 0.0) throw std::invalid_argument("ImpulseResponse: fwhm must be positive");
    ImpulseResponse h;
    h.shape = Shape::Gaussian;
    h.fwhm_s = fwhm_s;
    return h;
}

ImpulseResponse ImpulseResponse::tabulated(std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 3) {
        throw std::invalid_argument("ImpulseResponse: tabulated response needs >= 3 samples");
    }
    std::sort(samples.begin(), samples.end());
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        if (samples[i].second < 0.0) {
            throw std::invalid_argument("ImpulseResponse: tabulated weights must be nonnegative");
        }
        area += 0.5 * (samples[i].second + samples[i + 1].second) *
                (samples[i + 1].first - samples[i].first);
    }
    if (samples.back().second < 0.0) {
        throw std::invalid_argument("ImpulseResponse: tabulated weights must be nonnegative");
    }
    if (area <= 0.0) throw std::invalid_argument("ImpulseResponse: tabulated response has zero area");
    for (auto& s : samples) s.second /= area;

    ImpulseResponse h;
    h.shape = Shape::Tabulated;
    h.samples = std::move(samples);
    // Effective width for undersampling checks: FWHM of the tabulated curve.
    double peak = 0.0;
    for (const auto& s : h.samples) peak = std::max(peak, s.second);
    double lo = h.samples.front().first, hi = h.samples.back().first;
    for (std::size_t i = 0; i + 1 < h.samples.size(); ++i) {
        const bool up = h.samples[i].second < 0.5 * peak && h.samples[i + 1].second >= 0.5 * peak;
        const bool down = h.samples[i].second >= 0.5 * peak && h.samples[i + 1].second < 0.5 * peak;
        const double t0 = h.samples[i].first, t1 = h.samples[i + 1].first;
        const double v0 = h.samples[i].second, v1 = h.samples[i + 1].second;
        const double tc = t0 + (0.5 * peak - v0) / (v1 - v0) * (t1 - t0);
        if (up) lo = tc;
        if (down) { hi = tc; break; }
    }
    h.fwhm_s = std::max(hi - lo, 0.0);
    if (h.fwhm_s <= 0.0) {
        throw std::invalid_argument("ImpulseResponse: tabulated response has no resolvable FWHM");
    }
    return h;
}

double ImpulseResponse::support_half_width_s() const {
    if (shape == Shape::Gaussian) return 5.0 * fwhm_to_sigma(fwhm_s);
    return std::max(std::abs(samples.front().first), std::abs(samples.back().first));
}

std::vector<double> ImpulseResponse::kernel(double step_s) const {
    if (step_s <= 0.0) throw std::invalid_argument("ImpulseResponse::kernel: step must be positive");
    const auto half = static_cast<std::size_t>(std::ceil(support_half_width_s() / step_s));
    std::vector<double> k(2 * half + 1, 0.0);
    if (shape == Shape::Gaussian) {
        const double sigma = fwhm_to_sigma(fwhm_s);
        for (std::size_t j = 0; j < k.size(); ++j) {
            const double t = (static_cast<double>(j) - static_cast<double>(half)) * step_s;
            k[j] = std::exp(-0.5 * (t / sigma) * (t / sigma));
        }
    } else {
        for (std::size_t j = 0; j < k.size(); ++j) {
            const double t = (static_cast<double>(j) - static_cast<double>(half)) * step_s;
            // Piecewise-linear interpolation of the table; zero outside.
            auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                       [](const auto& s, double x) { return s.first < x; });
            if (it == samples.begin() || it == samples.end()) continue;
            const auto& [t1, v1] = *it;
            const auto& [t0, v0] = *(it - 1);
            k[j] = v0 + (v1 - v0) * (t - t0) / (t1 - t0);
        }
    }
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    if (sum <= 0.0) throw std::runtime_error("ImpulseResponse::kernel: empty kernel");
    for (auto& v : k) v /= sum;
    return k;
}

// ---------------------------------------------------------------------------
// Histogram
// ---------------------------------------------------------------------------

double Histogram::area() const {
    return std::accumulate(counts.begin(), counts.end(), 0.0) * bin_width_s;
}

double Histogram::peak() const {
    return counts.empty() ? 0.0 : *std::max_element(counts.begin(), counts.end());
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Wavepacket convolve_response(const Wavepacket& g2, const ImpulseResponse& h) {
    const double step = g2.grid.step_s;
    if (step > h.fwhm_s / 8.0) {
        throw std::invalid_argument(
            "convolve_response: grid step undersamples the response (step > fwhm/8)");
    }
    const std::vector<double> kernel = h.kernel(step);
    const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto n = static_cast<std::ptrdiff_t>(g2.g2.size());

    std::vector<double> out(g2.g2.size(), 0.0);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t m = -half; m <= half; ++m) {
            const std::ptrdiff_t src = j - m;
            if (src < 0 || src >= n) continue;  // zero outside the grid
            acc += kernel[static_cast<std::size_t>(m + half)] * g2.g2[static_cast<std::size_t>(src)];
        }
        out[static_cast<std::size_t>(j)] = acc;
    }
    return Wavepacket::from_intensity(g2.grid, std::move(out), g2.method);
}

Histogram bin_and_sample(const Wavepacket& c, double bin_width_s, long long total_counts,
                         std::uint64_t seed, bool noisy) {
    if (bin_width_s < c.grid.step_s) {
        throw std::invalid_argument("bin_and_sample: bin width must be >= the grid step");
    }
    if (total_counts <= 0) {
        throw std::invalid_argument("bin_and_sample: total counts must be positive");
    }
    const double span = c.grid.stop_s - c.grid.start_s;
    const auto n_bins = static_cast<std::size_t>(std::floor(span / bin_width_s + 1e-9));
    if (n_bins == 0) {
        throw std::invalid_argument("bin_and_sample: no histogram bin overlaps the tau grid");
    }

    Histogram hist;
    hist.bin_width_s = bin_width_s;
    hist.noisy = noisy;
    hist.seed = seed;
    hist.bin_centers_s.resize(n_bins);
    hist.counts.assign(n_bins, 0.0);
    for (std::size_t i = 0; i < n_bins; ++i) {
        hist.bin_centers_s[i] = c.grid.start_s + (static_cast<double>(i) + 0.5) * bin_width_s;
    }

    // Integrate the curve over each bin; samples past the last full bin are dropped.
    for (std::size_t j = 0; j < c.g2.size(); ++j) {
        const double t = c.grid.tau(j);
        const auto bin = static_cast<std::ptrdiff_t>(
            std::floor((t - c.grid.start_s) / bin_width_s + 1e-12));
        if (bin < 0 || bin >= static_cast<std::ptrdiff_t>(n_bins)) continue;
        hist.counts[static_cast<std::size_t>(bin)] += c.g2[j] * c.grid.step_s;
    }

    const double total = std::accumulate(hist.counts.begin(), hist.counts.end(), 0.0);
    if (total <= 0.0) {
        throw std::invalid_argument("bin_and_sample: curve has zero mass over the bins");
    }
    const double scale = static_cast<double>(total_counts) / total;
    for (auto& v : hist.counts) v *= scale;

    if (noisy) {
        std::mt19937_64 rng(seed);
        for (auto& v : hist.counts) {
            std::poisson_distribution<long long> poisson(v);
            v = static_cast<double>(poisson(rng));
        }
    }
    return hist;
}

std::vector<Histogram> normalize_family(std::vector<Histogram> histograms,
                                        bool /*same_dimension*/) {
    if (histograms.empty()) {
        throw std::invalid_argument("normalize_family: empty family");
    }
    const Histogram& ref = histograms.front();
    for (const Histogram& h : histograms) {
        if (h.bin_centers_s.size() != ref.bin_centers_s.size() ||
            std::abs(h.bin_width_s - ref.bin_width_s) > 1e-15) {
            throw std::invalid_argument("normalize_family: histograms must share the bin grid");
        }
        for (std::size_t i = 0; i < h.bin_centers_s.size(); ++i) {
            if (std::abs(h.bin_centers_s[i] - ref.bin_centers_s[i]) > 1e-12 * ref.bin_width_s) {
                throw std::invalid_argument("normalize_family: histograms must share the bin grid");
            }
        }
    }

    // Equal areas first, then one global peak of 1 across the family.
    for (Histogram& h : histograms) {
        const double area = h.area();
        if (area <= 0.0) throw std::invalid_argument("normalize_family: zero-area histogram");
        const double s = 1.0 / area;
        for (auto& v : h.counts) v *= s;
    }
    double global_max = 0.0;
    for (const Histogram& h : histograms) global_max = std::max(global_max, h.peak());
    for (Histogram& h : histograms) {
        for (auto& v : h.counts) v /= global_max;
        h.noisy = false;  // counts are dimensionless after normalization
    }
    return histograms;
}

Wavepacket rect_filter_reference(double width_rad_s, const std::optional<ImpulseResponse>& h,
                                 const TauGrid& grid) {
    if (width_rad_s <= 0.0) {
        throw std::invalid_argument("rect_filter_reference: width must be positive");
    }
    grid.validate();
    const std::size_t n = grid.size();
    std::vector<std::complex<double>> psi(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = 0.5 * width_rad_s * grid.tau(j);
        const double sinc = std::abs(x) < 1e-12 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
        psi[j] = width_rad_s * sinc;
    }
    Wavepacket raw = Wavepacket::from_psi(grid, std::move(psi), WavepacketMethod::ClosedForm);
    if (!h) return raw;
    return convolve_response(raw, *h);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                         std::string_view scenario_id) {
    out << "# bin_width_s=" << csv::format_double(histogram.bin_width_s)
        << " seed=" << histogram.seed << " noisy=" << (histogram.noisy ? 1 : 0)
        << " scenario=" << scenario_id << "\n";
    out << "tau_s,counts\n";
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        out << csv::format_double(histogram.bin_centers_s[i]) << ",";
        if (histogram.noisy) {
            out << csv::format_int(static_cast<std::int64_t>(std::llround(histogram.counts[i])));
        } else {
            out << csv::format_double(histogram.counts[i]);
        }
        out << "\n";
    }
}

Histogram read_histogram_csv(std::istream& in, std::string* scenario_id) {
    Histogram hist;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw std::runtime_error("read_histogram_csv: missing header comment");
    }
    for (const auto& field : csv::split(line.substr(2), ' ')) {
        const auto kv = csv::split(field, '=');
        if (kv.size() != 2) continue;
        if (kv[0] == "bin_width_s") hist.bin_width_s = csv::parse_double(kv[1]);
        else if (kv[0] == "seed") hist.seed = static_cast<std::uint64_t>(csv::parse_double(kv[1]));
        else if (kv[0] == "noisy") hist.noisy = kv[1] == "1";
        else if (kv[0] == "scenario" && scenario_id) *scenario_id = kv[1];
    }
    if (!std::getline(in, line) || csv::trim(line) != "tau_s,counts") {
        throw std::runtime_error("read_histogram_csv: missing column header");
    }
    while (std::getline(in, line)) {
        const auto t = csv::trim(line);
        if (t.empty()) continue;
        const auto cols = csv::split(t, ',');
        if (cols.size() != 2) throw std::runtime_error("read_histogram_csv: malformed row");
        hist.bin_centers_s.push_back(csv::parse_double(cols[0]));
        hist.counts.push_back(csv::parse_double(cols[1]));
    }
    if (hist.bin_width_s <= 0.0 || hist.counts.empty()) {
        throw std::runtime_error("read_histogram_csv: empty or invalid histogram");
    }
    return hist;
}

} // namespace bfc
