#include "bfcsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "bfcsim/csv.hpp"

namespace bfc {

// ---------------------------------------------------------------------------
// EOComb
// ---------------------------------------------------------------------------

EOComb EOComb::flat(double rep_rate_hz, std::vector<int> line_indices, double amplitude) {
    EOComb comb;
    comb.rep_rate_hz = rep_rate_hz;
    comb.line_amplitudes.assign(line_indices.size(), amplitude);
    comb.line_phases.assign(line_indices.size(), 0.0);
    comb.line_indices = std::move(line_indices);
    comb.validate();
    return comb;
}

void EOComb::validate() const {
    if (rep_rate_hz <= 0.0) throw std::invalid_argument("EOComb: rep rate must be positive");
    if (line_indices.size() != line_amplitudes.size() ||
        line_indices.size() != line_phases.size()) {
        throw std::invalid_argument("EOComb: line arrays must have equal length");
    }
    for (double a : line_amplitudes) {
        if (a < 0.0) throw std::invalid_argument("EOComb: line amplitudes must be nonnegative");
    }
}

// ---------------------------------------------------------------------------
// BeatSpectrum / PhaseActuator
// ---------------------------------------------------------------------------

std::complex<double> BeatSpectrum::at(int label) const {
    for (std::size_t i = 0; i < beat_labels.size(); ++i) {
        if (beat_labels[i] == label) return amplitudes[i];
    }
    throw std::out_of_range("BeatSpectrum: missing beat label " + std::to_string(label));
}

void PhaseActuator::set_target(double phase_rad) {
    if (gain <= 0.0) throw std::invalid_argument("PhaseActuator: gain must be positive");
    drive = std::sqrt(wrap_two_pi(phase_rad - offset) / gain);
}

// ---------------------------------------------------------------------------
// ChannelMap
// ---------------------------------------------------------------------------

ChannelMap ChannelMap::shared(int dimension) {
    if (dimension < 1) throw std::invalid_argument("ChannelMap: dimension must be >= 1");
    return ChannelMap{CalibrationLayout::Shared, dimension};
}

ChannelMap ChannelMap::distinct(int dimension) {
    if (dimension < 1) throw std::invalid_argument("ChannelMap: dimension must be >= 1");
    return ChannelMap{CalibrationLayout::Distinct, dimension};
}

int ChannelMap::channel_count() const {
    return layout == CalibrationLayout::Shared ? dimension : 2 * dimension;
}

int ChannelMap::line_index(int channel) const {
    if (channel < 1 || channel > channel_count()) {
        throw std::out_of_range("ChannelMap: channel out of range");
    }
    if (layout == CalibrationLayout::Shared) {
        return -(channel + 1);  // lines 2..d+1 on the low-frequency side
    }
    if (channel <= dimension) {
        return channel + 1;  // signal bins: lines 2..d+1 on the high side
    }
    return -((channel - dimension) + dimension + 1);  // idler bins: lines d+2..2d+1, low side
}

std::vector<int> ChannelMap::line_indices() const {
    std::vector<int> out(static_cast<std::size_t>(channel_count()));
    for (int c = 1; c <= channel_count(); ++c) out[static_cast<std::size_t>(c - 1)] = line_index(c);
    return out;
}

std::vector<int> ChannelMap::beat_labels() const {
    std::vector<int> out(static_cast<std::size_t>(channel_count()));
    for (int c = 1; c <= channel_count(); ++c) out[static_cast<std::size_t>(c - 1)] = beat_label(c);
    return out;
}

std::string ChannelMap::channel_name(int channel) const {
    if (layout == CalibrationLayout::Shared) {
        return "ch" + std::to_string(channel);
    }
    if (channel <= dimension) return "s" + std::to_string(channel);
    return "i" + std::to_string(channel - dimension);
}

std::vector<double> ChannelMap::channel_phases(const ShaperConfig& config) const {
    if (config.dimension() != dimension) {
        throw std::invalid_argument("ChannelMap: config dimension mismatch");
    }
    std::vector<double> out(static_cast<std::size_t>(channel_count()));
    if (layout == CalibrationLayout::Shared) {
        // Probe lines ascend toward lower frequency, matching idler-bin order.
        for (int j = 1; j <= dimension; ++j) {
            out[static_cast<std::size_t>(j - 1)] = config.phase(Side::Idler, j);
        }
    } else {
        for (int k = 1; k <= dimension; ++k) {
            out[static_cast<std::size_t>(k - 1)] = config.phase(Side::Signal, k);
            out[static_cast<std::size_t>(dimension + k - 1)] = config.phase(Side::Idler, k);
        }
    }
    return out;
}

ShaperConfig ChannelMap::apply_channel_phases(const ShaperConfig& config,
                                              std::span<const double> phases_rad) const {
    if (static_cast<int>(phases_rad.size()) != channel_count()) {
        throw std::invalid_argument("ChannelMap: phase vector length mismatch");
    }
    const auto d = static_cast<std::size_t>(dimension);
    std::vector<double> signal(d), idler(d);
    if (layout == CalibrationLayout::Shared) {
        for (std::size_t j = 0; j < d; ++j) {
            idler[j] = phases_rad[j];
            signal[d - 1 - j] = phases_rad[j];  // shared-filter constraint
        }
    } else {
        for (std::size_t k = 0; k < d; ++k) {
            signal[k] = phases_rad[k];
            idler[k] = phases_rad[d + k];
        }
    }
    return apply_phases(config, signal, idler);
}

std::pair<int, int> ChannelMap::default_reference() const {
    if (layout == CalibrationLayout::Distinct) {
        return {1, dimension + 1};  // s1 and i1
    }
    return {1, channel_count() == 1 ? 1 : channel_count()};
}

// ---------------------------------------------------------------------------
// PD record synthesis
// ---------------------------------------------------------------------------

namespace {

struct Tone {
    double frequency_hz = 0.0;  // >= 0
    std::complex<double> amplitude;  // tone = Re(amplitude * exp(i 2 pi f t))
};

struct Line {
    double offset_hz = 0.0;  // from the common comb center
    std::complex<double> field;
};

}  // namespace

std::vector<double> synthesize_pd_signal(
    const EOComb& probe, const EOComb& reference,
    const std::optional<std::pair<ShaperConfig, ChannelMap>>& shaper, double sample_rate_hz,
    double duration_s, double noise_rms_rel, std::uint64_t noise_seed) {
    probe.validate();
    reference.validate();
    const double delta_f_rep = reference.rep_rate_hz - probe.rep_rate_hz;
    if (delta_f_rep <= 0.0) {
        throw std::invalid_argument(
            "synthesize_pd_signal: reference rep rate must exceed the probe's");
    }
    int max_abs_line = 0;
    for (int n : probe.line_indices) max_abs_line = std::max(max_abs_line, std::abs(n));
    const double max_beat_hz = max_abs_line * delta_f_rep;
    if (sample_rate_hz <= 4.0 * max_beat_hz) {
        throw std::invalid_argument("synthesize_pd_signal: sample rate too low (aliasing)");
    }
    const double periods = duration_s * delta_f_rep;
    if (std::abs(periods - std::round(periods)) > 1e-6 * std::max(1.0, periods)) {
        throw std::invalid_argument(
            "synthesize_pd_signal: duration must span whole offset periods (spectral leakage)");
    }

    // Probe lines after the shaper: wired lines acquire the channel phase with
    // unit (peak-normalized) amplitude, others are blocked.
    std::vector<double> wired_phases;
    if (shaper) wired_phases = shaper->second.channel_phases(shaper->first);
    std::vector<Line> probe_lines;
    for (std::size_t i = 0; i < probe.line_indices.size(); ++i) {
        const int n = probe.line_indices[i];
        std::complex<double> field =
            std::polar(probe.line_amplitudes[i], probe.line_phases[i]);
        if (shaper) {
            const ChannelMap& map = shaper->second;
            bool wired = false;
            for (int c = 1; c <= map.channel_count(); ++c) {
                if (map.line_index(c) == n) {
                    field *= std::polar(1.0, wired_phases[static_cast<std::size_t>(c - 1)]);
                    wired = true;
                    break;
                }
            }
            if (!wired) continue;
        }
        probe_lines.push_back({n * probe.rep_rate_hz, field});
    }
    std::vector<Line> reference_lines;
    for (std::size_t i = 0; i < reference.line_indices.size(); ++i) {
        reference_lines.push_back(
            {reference.line_indices[i] * reference.rep_rate_hz,
             std::polar(reference.line_amplitudes[i], reference.line_phases[i])});
    }

    // Intensity of the combined field is a sum of cosine tones at all pairwise
    // line separations. The acquisition front end removes everything at or
    // above Nyquist, which in the intended operating point leaves only the DC
    // terms and the matched-index beats at multiples of the offset.
    const double nyquist_hz = 0.5 * sample_rate_hz;
    double dc = 0.0;
    std::vector<Tone> tones;
    auto add_pairs = [&](const std::vector<Line>& a, const std::vector<Line>& b, bool cross) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::size_t j0 = cross ? 0 : i;
            for (std::size_t j = j0; j < b.size(); ++j) {
                if (!cross && j == i) {
                    dc += std::norm(a[i].field);
                    continue;
                }
                const double f = a[i].offset_hz - b[j].offset_hz;
                // Each unordered line pair contributes E_a E_b* + c.c.
                const std::complex<double> amp = 2.0 * a[i].field * std::conj(b[j].field);
                const double f_abs = std::abs(f);
                if (f_abs >= nyquist_hz) continue;
                if (f_abs == 0.0) {
                    dc += amp.real();
                    continue;
                }
                // Fold negative separations into positive-frequency tones.
                tones.push_back({f_abs, f > 0.0 ? amp : std::conj(amp)});
            }
        }
    };
    add_pairs(probe_lines, probe_lines, false);
    add_pairs(reference_lines, reference_lines, false);
    add_pairs(probe_lines, reference_lines, true);

    const auto n_samples = static_cast<std::size_t>(std::round(duration_s * sample_rate_hz));
    std::vector<double> signal(n_samples, dc);
    for (const Tone& tone : tones) {
        const double w = kTwoPi * tone.frequency_hz / sample_rate_hz;
        for (std::size_t t = 0; t < n_samples; ++t) {
            signal[t] += (tone.amplitude * std::polar(1.0, w * static_cast<double>(t))).real();
        }
    }

    if (noise_rms_rel > 0.0) {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> noise(0.0, noise_rms_rel * std::abs(dc));
        for (auto& v : signal) v += noise(rng);
    }
    return signal;
}

// ---------------------------------------------------------------------------
// Beat extraction
// ---------------------------------------------------------------------------

BeatSpectrum extract_beat_phases(std::span<const double> signal, double sample_rate_hz,
                                 double delta_f_rep_hz, std::span<const int> beat_labels) {
    if (signal.size() < 2) throw std::invalid_argument("extract_beat_phases: empty record");
    if (delta_f_rep_hz <= 0.0) {
        throw std::invalid_argument("extract_beat_phases: offset must be positive");
    }
    const auto n = signal.size();
    const double duration = static_cast<double>(n) / sample_rate_hz;
    const double periods = duration * delta_f_rep_hz;
    if (std::abs(periods - std::round(periods)) > 1e-6 * std::max(1.0, periods)) {
        throw std::invalid_argument(
            "extract_beat_phases: record length must be a whole number of offset periods");
    }
    const double resolution_hz = 1.0 / duration;

    // One-sided DFT magnitudes across all bins, for the noise-floor check.
    const std::size_t n_bins = n / 2;
    std::vector<std::complex<double>> spectrum(n_bins + 1);
    for (std::size_t m = 0; m <= n_bins; ++m) {
        std::complex<double> acc{0.0, 0.0};
        const double w = -kTwoPi * static_cast<double>(m) / static_cast<double>(n);
        std::complex<double> rot{1.0, 0.0};
        const std::complex<double> step = std::polar(1.0, w);
        for (std::size_t t = 0; t < n; ++t) {
            acc += signal[t] * rot;
            rot *= step;
        }
        spectrum[m] = 2.0 * acc / static_cast<double>(n);
    }
    std::vector<double> mags;
    mags.reserve(n_bins);
    for (std::size_t m = 1; m <= n_bins; ++m) mags.push_back(std::abs(spectrum[m]));
    std::vector<double> sorted = mags;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double floor = sorted[sorted.size() / 2];

    BeatSpectrum out;
    out.delta_f_rep_hz = delta_f_rep_hz;
    out.record_length_s = duration;
    out.sample_rate_hz = sample_rate_hz;
    for (int label : beat_labels) {
        const double f = std::abs(label) * delta_f_rep_hz;
        if (f < resolution_hz - 1e-9) {
            throw std::invalid_argument("extract_beat_phases: beat below the FFT resolution");
        }
        const double bin_exact = f / resolution_hz;
        const auto bin = static_cast<std::size_t>(std::llround(bin_exact));
        if (bin > n_bins) {
            throw std::invalid_argument("extract_beat_phases: beat above Nyquist");
        }
        std::complex<double> amp = spectrum[bin];
        if (std::abs(amp) < 10.0 * floor) {
            throw std::runtime_error("extract_beat_phases: beat amplitude below the noise floor");
        }
        if (label < 0) amp = std::conj(amp);
        out.beat_labels.push_back(label);
        out.amplitudes.push_back(amp);
    }
    return out;
}

std::vector<double> map_beats_to_channels(const BeatSpectrum& spectrum, const ChannelMap& map) {
    std::vector<double> phases(static_cast<std::size_t>(map.channel_count()));
    for (int c = 1; c <= map.channel_count(); ++c) {
        phases[static_cast<std::size_t>(c - 1)] = std::arg(spectrum.at(map.beat_label(c)));
    }
    return phases;
}

// ---------------------------------------------------------------------------
// Linear reference subtraction
// ---------------------------------------------------------------------------

std::vector<double> subtract_linear_reference(std::span<const double> raw_phases_rad,
                                              std::span<const double> coordinates,
                                              std::pair<int, int> reference_ids) {
    const auto n = raw_phases_rad.size();
    if (coordinates.size() != n) {
        throw std::invalid_argument("subtract_linear_reference: coordinate length mismatch");
    }
    const auto [ra, rb] = reference_ids;
    if (ra < 1 || rb < 1 || ra > static_cast<int>(n) || rb > static_cast<int>(n) || ra == rb) {
        throw std::invalid_argument("subtract_linear_reference: invalid reference pair");
    }
    const double xa = coordinates[static_cast<std::size_t>(ra - 1)];
    const double xb = coordinates[static_cast<std::size_t>(rb - 1)];
    if (xa == xb) {
        throw std::invalid_argument("subtract_linear_reference: degenerate reference pair");
    }
    const double ya = raw_phases_rad[static_cast<std::size_t>(ra - 1)];
    const double yb = raw_phases_rad[static_cast<std::size_t>(rb - 1)];
    const double slope = (yb - ya) / (xb - xa);

    std::vector<double> corrected(n);
    for (std::size_t i = 0; i < n; ++i) {
        corrected[i] = wrap_pi(raw_phases_rad[i] - (ya + slope * (coordinates[i] - xa)));
    }
    corrected[static_cast<std::size_t>(ra - 1)] = 0.0;
    corrected[static_cast<std::size_t>(rb - 1)] = 0.0;
    return corrected;
}

// ---------------------------------------------------------------------------
// CalibrationBench
// ---------------------------------------------------------------------------

std::pair<int, int> CalibrationBench::effective_reference() const {
    if (reference_ids.first >= 1 && reference_ids.second >= 1 &&
        reference_ids.first != reference_ids.second) {
        return reference_ids;
    }
    return map.default_reference();
}

CalibrationBench::Measurement CalibrationBench::measure(const ShaperConfig& config,
                                                        double phase_noise_rms_rad,
                                                        std::uint64_t noise_seed) const {
    EOComb probe = EOComb::flat(probe_rep_rate_hz, map.line_indices());
    EOComb reference = EOComb::flat(reference_rep_rate_hz, map.line_indices());
    if (!comb_common_phases.empty()) {
        if (comb_common_phases.size() != probe.line_phases.size()) {
            throw std::invalid_argument("CalibrationBench: common phase profile length mismatch");
        }
        probe.line_phases = comb_common_phases;
        reference.line_phases = comb_common_phases;
    }

    const std::vector<double> record = synthesize_pd_signal(
        probe, reference, std::make_pair(config, map), sample_rate_hz, duration_s,
        pd_noise_rms_rel, noise_seed);
    const auto labels = map.beat_labels();
    const BeatSpectrum spectrum =
        extract_beat_phases(record, sample_rate_hz, delta_f_rep_hz(), labels);

    Measurement m;
    m.raw_phases = map_beats_to_channels(spectrum, map);
    if (phase_noise_rms_rad > 0.0) {
        std::mt19937_64 rng(noise_seed ^ 0x9e3779b97f4a7c15ull);
        std::normal_distribution<double> noise(0.0, phase_noise_rms_rad);
        for (auto& p : m.raw_phases) p += noise(rng);
    }
    const auto lines = map.line_indices();
    std::vector<double> coords(lines.begin(), lines.end());
    m.corrected_phases = subtract_linear_reference(m.raw_phases, coords, effective_reference());
    return m;
}

// ---------------------------------------------------------------------------
// Closed-loop programming
// ---------------------------------------------------------------------------

CalibrationRecord program_phases(const CalibrationBench& bench,
                                 std::span<const double> target_phases_rad,
                                 std::vector<PhaseActuator>& actuators,
                                 const ProgramOptions& options) {
    const int channels = bench.map.channel_count();
    if (static_cast<int>(target_phases_rad.size()) != channels ||
        static_cast<int>(actuators.size()) != channels) {
        throw std::invalid_argument("program_phases: target/actuator length mismatch");
    }
    if (options.tolerance_rad <= 0.0) {
        throw std::invalid_argument("program_phases: tolerance must be positive");
    }

    // Target in the reference-subtracted gauge.
    const auto lines = bench.map.line_indices();
    const std::vector<double> coords(lines.begin(), lines.end());
    const auto reference = bench.effective_reference();
    const std::vector<double> target =
        subtract_linear_reference(target_phases_rad, coords, reference);

    CalibrationRecord record;
    record.layout = bench.map.layout;
    record.reference_channel_ids = reference;
    record.target_phases.assign(target_phases_rad.begin(), target_phases_rad.end());

    std::uint64_t draw = 0;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        std::vector<double> realized(static_cast<std::size_t>(channels));
        for (int c = 0; c < channels; ++c) realized[static_cast<std::size_t>(c)] =
            actuators[static_cast<std::size_t>(c)].realized_phase();
        const ShaperConfig applied = bench.map.apply_channel_phases(bench.shaper, realized);
        const auto m = bench.measure(applied, options.noise_rms_rad,
                                     options.noise_seed + draw++);

        double max_error = 0.0;
        std::vector<double> errors(static_cast<std::size_t>(channels));
        for (int c = 0; c < channels; ++c) {
            const auto i = static_cast<std::size_t>(c);
            errors[i] = wrap_pi(target[i] - m.corrected_phases[i]);
            max_error = std::max(max_error, std::abs(errors[i]));
        }
        record.raw_phases = m.raw_phases;
        record.corrected_phases = m.corrected_phases;
        record.iterations = iter;
        record.residual_rad = max_error;
        record.residual_history.push_back(max_error);
        if (max_error < options.tolerance_rad) {
            record.converged = true;
            break;
        }
        for (int c = 0; c < channels; ++c) {
            const auto i = static_cast<std::size_t>(c);
            actuators[i].set_target(actuators[i].realized_phase() + options.damping * errors[i]);
        }
    }
    return record;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

void write_calibration_report_csv(std::ostream& out, const CalibrationRecord& record,
                                  const ChannelMap& map) {
    out << "channel,name,target_rad,measured_rad,corrected_rad,residual_rad\n";
    const auto lines = map.line_indices();
    const std::vector<double> coords(lines.begin(), lines.end());
    const std::vector<double> target = subtract_linear_reference(
        record.target_phases, coords, record.reference_channel_ids);
    for (std::size_t c = 0; c < record.corrected_phases.size(); ++c) {
        const double residual = wrap_pi(target[c] - record.corrected_phases[c]);
        out << c + 1 << "," << map.channel_name(static_cast<int>(c) + 1) << ","
            << csv::format_double(record.target_phases[c]) << ","
            << csv::format_double(record.raw_phases[c]) << ","
            << csv::format_double(record.corrected_phases[c]) << ","
            << csv::format_double(residual) << "\n";
    }
}

void write_calibration_loop_csv(std::ostream& out, const CalibrationRecord& record) {
    out << "iteration,residual_rad\n";
    for (std::size_t i = 0; i < record.residual_history.size(); ++i) {
        out << i + 1 << "," << csv::format_double(record.residual_history[i]) << "\n";
    }
}

} // namespace bfc
