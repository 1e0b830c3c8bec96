// calibration.hpp — dual-comb heterodyne phase measurement and closed-loop
// phase programming for the microring shaper.
//
// A probe electro-optic comb (repetition rate equal to the channel spacing,
// 3 GHz) passes through the shaper; each used comb line is centered on one
// channel and therefore picks up that channel's phase. A reference comb at a
// slightly higher repetition rate (3.05 GHz) bypasses the shaper. On a
// photodetector the matched line pairs beat at multiples of the 50 MHz
// repetition-rate offset; an FFT of the record yields each beat's complex
// amplitude, whose phase encodes the channel phase.
//
// Beat labels are signed. A probe line at index n (n times the probe rate
// from the comb center) meets its reference partner at |n| times the offset;
// the physical tone's cosine phase is sgn(b)(phi_probe - phi_reference) with
// b = -n, so the extraction conjugates negative-label beats to always return
// phi_probe - phi_reference.
//
// Channel wiring (the line-to-channel incidence set by tuning the comb
// center):
//   Shared, d channels: probe lines -(j+1) -> channel j, beats at
//     (100 + 50 (j-1)) MHz for j = 1..d. Channel j carries the phase of
//     idler bin j (equivalently signal bin d-j+1).
//   Distinct, 2d channels ordered s1..sd, i1..id: lines +(k+1) -> signal
//     bin k, lines -(k+d+1) -> idler bin k; for d = 3 the beats
//     -200, -150, -100, +250, +300, +350 MHz map to s3, s2, s1, i1, i2, i3.
//
// A linear phase ramp across optical frequency is an overall delay and is
// unobservable in the biphoton correlation, so two reference channels define
// a line (in line-index coordinates, affine in optical frequency) that is
// subtracted from every measured phase.

#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bfcsim/comb_model.hpp"

namespace bfc {

inline constexpr double kDefaultProbeRepRateHz = 3.0e9;
inline constexpr double kDefaultReferenceRepRateHz = 3.05e9;
inline constexpr double kDefaultSampleRateHz = 2.0e9;
inline constexpr double kDefaultRecordDurationS = 400e-9;  // 20 offset periods
inline constexpr double kDefaultEoCombCenterHz = 193.2e12;

// Electro-optic frequency comb: line n sits at center + n * rep_rate.
struct EOComb {
    double center_frequency_hz = kDefaultEoCombCenterHz;
    double rep_rate_hz = kDefaultProbeRepRateHz;
    std::vector<int> line_indices;
    std::vector<double> line_amplitudes;  // >= 0
    std::vector<double> line_phases;      // rad

    static EOComb flat(double rep_rate_hz, std::vector<int> line_indices,
                       double amplitude = 1.0);
    void validate() const;
};

struct BeatSpectrum {
    double delta_f_rep_hz = 0.0;
    std::vector<int> beat_labels;  // signed
    std::vector<std::complex<double>> amplitudes;  // one-sided; conjugated for b < 0
    double record_length_s = 0.0;
    double sample_rate_hz = 0.0;

    std::complex<double> at(int label) const;
    double frequency_hz(std::size_t i) const {
        return std::abs(beat_labels[i]) * delta_f_rep_hz;
    }
};

// Thermal phase shifter model: realized phase = offset + gain * drive^2,
// wrapped to [0, 2pi).
struct PhaseActuator {
    double gain = kTwoPi;  // rad per unit drive^2
    double offset = 0.0;   // rad
    double drive = 0.0;

    double realized_phase() const { return wrap_two_pi(offset + gain * drive * drive); }
    // Set the drive so the realized phase equals the target (mod 2pi).
    void set_target(double phase_rad);
};

enum class CalibrationLayout { Shared, Distinct };

// Wiring table between probe comb lines, beat labels and shaper channels.
struct ChannelMap {
    CalibrationLayout layout = CalibrationLayout::Shared;
    int dimension = 0;

    static ChannelMap shared(int dimension);
    static ChannelMap distinct(int dimension);

    int channel_count() const;
    int line_index(int channel) const;  // channel = 1..channel_count
    int beat_label(int channel) const { return -line_index(channel); }
    std::vector<int> line_indices() const;
    std::vector<int> beat_labels() const;
    std::string channel_name(int channel) const;

    // Phase the probe line through each channel acquires from the config.
    std::vector<double> channel_phases(const ShaperConfig& config) const;
    // Inverse: store a per-channel phase vector into the config.
    ShaperConfig apply_channel_phases(const ShaperConfig& config,
                                      std::span<const double> phases_rad) const;
    // Channels fixed as the linear-phase reference, 1-based.
    std::pair<int, int> default_reference() const;
};

struct CalibrationRecord {
    CalibrationLayout layout = CalibrationLayout::Shared;
    std::vector<double> raw_phases;
    std::pair<int, int> reference_channel_ids{1, 2};
    std::vector<double> corrected_phases;
    std::vector<double> target_phases;
    int iterations = 0;
    double residual_rad = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Photodetector record of the combined combs. When a shaper configuration is
// supplied, probe lines are filtered: lines wired to channels take the
// channel's peak-normalized on-resonance response (phase phi, unit
// amplitude), all other probe lines are blocked. Tones above the Nyquist
// frequency are removed by the modeled anti-aliasing front end. Optional
// additive white Gaussian noise (RMS relative to the mean intensity).
std::vector<double> synthesize_pd_signal(
    const EOComb& probe, const EOComb& reference,
    const std::optional<std::pair<ShaperConfig, ChannelMap>>& shaper, double sample_rate_hz,
    double duration_s, double noise_rms_rel = 0.0, std::uint64_t noise_seed = 0);

// Complex beat amplitudes at the requested signed labels from a DFT of the
// record (one-sided cosine convention, negative labels conjugated). Throws if
// a beat falls below the spectral resolution or under the noise floor.
BeatSpectrum extract_beat_phases(std::span<const double> signal, double sample_rate_hz,
                                 double delta_f_rep_hz, std::span<const int> beat_labels);

// Order the beat phases into channel order per the layout table.
std::vector<double> map_beats_to_channels(const BeatSpectrum& spectrum, const ChannelMap& map);

// Subtract the line through the two reference channels' (coordinate, phase)
// points; coordinates must be affine in optical frequency (line indices).
// Reference ids are 1-based channel numbers.
std::vector<double> subtract_linear_reference(std::span<const double> raw_phases_rad,
                                              std::span<const double> coordinates,
                                              std::pair<int, int> reference_ids);

// One full measurement chain: synthesize -> extract -> map -> subtract.
struct CalibrationBench {
    ChannelMap map;
    ShaperConfig shaper;  // grid/linewidth template; phases overwritten per call
    double probe_rep_rate_hz = kDefaultProbeRepRateHz;
    double reference_rep_rate_hz = kDefaultReferenceRepRateHz;
    double sample_rate_hz = kDefaultSampleRateHz;
    double duration_s = kDefaultRecordDurationS;
    std::vector<double> comb_common_phases;  // optional shared spectral profile
    double pd_noise_rms_rel = 0.0;           // time-series noise for robustness runs
    std::pair<int, int> reference_ids{0, 0};  // 0,0 = layout default

    double delta_f_rep_hz() const { return reference_rep_rate_hz - probe_rep_rate_hz; }
    std::pair<int, int> effective_reference() const;

    struct Measurement {
        std::vector<double> raw_phases;
        std::vector<double> corrected_phases;
    };
    // Measure the phases currently applied to `config`; phase_noise_rms adds
    // independent Gaussian noise (rad) to each raw phase before correction.
    Measurement measure(const ShaperConfig& config, double phase_noise_rms_rad = 0.0,
                        std::uint64_t noise_seed = 0) const;
};

// Closed-loop programming: iteratively measure, compare against the target in
// the reference-subtracted gauge, and update the actuator drives by damped
// inversion of the quadratic actuator model. Targets are per-channel, given
// modulo the linear-reference equivalence class. Non-convergence is reported
// through the record (converged = false), never silently.
struct ProgramOptions {
    double tolerance_rad = 1e-3;
    int max_iterations = 20;
    double damping = 0.7;
    double noise_rms_rad = 0.0;  // per-measurement phase noise
    std::uint64_t noise_seed = 0;
};

CalibrationRecord program_phases(const CalibrationBench& bench,
                                 std::span<const double> target_phases_rad,
                                 std::vector<PhaseActuator>& actuators,
                                 const ProgramOptions& options = {});

// Report CSV: channel id, name, target, measured (raw), corrected, residual.
void write_calibration_report_csv(std::ostream& out, const CalibrationRecord& record,
                                  const ChannelMap& map);
void write_calibration_loop_csv(std::ostream& out, const CalibrationRecord& record);

} // namespace bfc
