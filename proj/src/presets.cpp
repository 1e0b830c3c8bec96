#include "bfcsim/scenario.hpp"

namespace bfc {

namespace {

// Phase values written out in full so configs stay plain numeric text.
//   pi/4 = 0.7853981633974483   pi/2 = 1.5707963267948966
//   3pi/4 = 2.356194490192345   pi   = 3.141592653589793
//   3pi/2 = 4.71238898038469    2pi  = 6.283185307179586
//   3pi  = 9.42477796076938

std::string shared_dimension_preset(const std::string& name, int d) {
    std::string text =
        "kind = correlation\n"
        "name = " + name + "\n"
        "mode = shared\n"
        "dimension = " + std::to_string(d) + "\n"
        "bin_spacing_hz = 3e9\n"
        "gamma_hz = 1.3e9\n"
        "fsr_hz = 115e9\n"
        "method = closed\n"
        "total_counts = 100000\n"
        "seed = 20\n"
        "noisy = true\n";
    if (d > 1) text += "plot_envelope = true\n";
    return text;
}

std::vector<Preset> build_presets() {
    std::vector<Preset> list;

    for (int d : {1, 2, 3, 6}) {
        list.push_back({"fig2c_d" + std::to_string(d),
                        "shared filters, zero phase, d = " + std::to_string(d) +
                            " correlation histogram",
                        shared_dimension_preset("fig2c_d" + std::to_string(d), d)});
    }

    list.push_back({"fig3c_family",
                    "distinct filters, linear idler phase family (slope 0..3pi/2)",
                    "kind = correlation\n"
                    "name = fig3c_family\n"
                    "mode = distinct\n"
                    "dimension = 3\n"
                    "bin_spacing_hz = 3e9\n"
                    "subcomb_separation_hz = 27e9\n"
                    "gamma_hz = 1.3e9\n"
                    "fsr_hz = 115e9\n"
                    "method = closed\n"
                    "total_counts = 100000\n"
                    "seed = 30\n"
                    "noisy = true\n"
                    "curve.1.label = dphi_i_0\n"
                    "curve.1.signal_phases_rad = 0,0,0\n"
                    "curve.1.idler_phases_rad = 0,0,0\n"
                    "curve.2.label = dphi_i_pi2\n"
                    "curve.2.signal_phases_rad = 0,0,0\n"
                    "curve.2.idler_phases_rad = 0,1.5707963267948966,3.141592653589793\n"
                    "curve.3.label = dphi_i_pi\n"
                    "curve.3.signal_phases_rad = 0,0,0\n"
                    "curve.3.idler_phases_rad = 0,3.141592653589793,6.283185307179586\n"
                    "curve.4.label = dphi_i_3pi2\n"
                    "curve.4.signal_phases_rad = 0,0,0\n"
                    "curve.4.idler_phases_rad = 0,4.71238898038469,9.42477796076938\n"});

    list.push_back({"fig3d_family",
                    "distinct filters, equal signal/idler linear phases (slope 0..3pi/4)",
                    "kind = correlation\n"
                    "name = fig3d_family\n"
                    "mode = distinct\n"
                    "dimension = 3\n"
                    "bin_spacing_hz = 3e9\n"
                    "subcomb_separation_hz = 27e9\n"
                    "gamma_hz = 1.3e9\n"
                    "fsr_hz = 115e9\n"
                    "method = closed\n"
                    "total_counts = 100000\n"
                    "seed = 31\n"
                    "noisy = true\n"
                    "curve.1.label = dphi_0\n"
                    "curve.1.signal_phases_rad = 0,0,0\n"
                    "curve.1.idler_phases_rad = 0,0,0\n"
                    "curve.2.label = dphi_pi4\n"
                    "curve.2.signal_phases_rad = 0,0.7853981633974483,1.5707963267948966\n"
                    "curve.2.idler_phases_rad = 0,0.7853981633974483,1.5707963267948966\n"
                    "curve.3.label = dphi_pi2\n"
                    "curve.3.signal_phases_rad = 0,1.5707963267948966,3.141592653589793\n"
                    "curve.3.idler_phases_rad = 0,1.5707963267948966,3.141592653589793\n"
                    "curve.4.label = dphi_3pi4\n"
                    "curve.4.signal_phases_rad = 0,2.356194490192345,4.71238898038469\n"
                    "curve.4.idler_phases_rad = 0,2.356194490192345,4.71238898038469\n"});

    list.push_back({"fig4_family",
                    "distinct filters, nonlinear middle-bin phases and conjugate cancellation",
                    "kind = correlation\n"
                    "name = fig4_family\n"
                    "mode = distinct\n"
                    "dimension = 3\n"
                    "bin_spacing_hz = 3e9\n"
                    "subcomb_separation_hz = 27e9\n"
                    "gamma_hz = 1.3e9\n"
                    "fsr_hz = 115e9\n"
                    "method = closed\n"
                    "total_counts = 100000\n"
                    "seed = 32\n"
                    "noisy = true\n"
                    "curve.1.label = s2_pi2\n"
                    "curve.1.signal_phases_rad = 0,1.5707963267948966,0\n"
                    "curve.1.idler_phases_rad = 0,0,0\n"
                    "curve.2.label = i2_pi2\n"
                    "curve.2.signal_phases_rad = 0,0,0\n"
                    "curve.2.idler_phases_rad = 0,1.5707963267948966,0\n"
                    "curve.3.label = both_pi2\n"
                    "curve.3.signal_phases_rad = 0,1.5707963267948966,0\n"
                    "curve.3.idler_phases_rad = 0,1.5707963267948966,0\n"
                    "curve.4.label = conjugate\n"
                    "curve.4.signal_phases_rad = 0,-1.5707963267948966,0\n"
                    "curve.4.idler_phases_rad = 0,1.5707963267948966,0\n"});

    list.push_back({"appendixA",
                    "system impulse response via 50 GHz rectangular filters",
                    "kind = impulse_reference\n"
                    "name = appendixA\n"
                    "filter_width_hz = 50e9\n"
                    "response_fwhm_s = 80e-12\n"
                    "tau_half_range_s = 1e-9\n"
                    "tau_step_s = 5e-13\n"});

    list.push_back({"figS2_shared_zero",
                    "dual-comb calibration, shared layout, zero-phase target",
                    "kind = calibration\n"
                    "name = figS2_shared_zero\n"
                    "layout = shared\n"
                    "dimension = 6\n"
                    "bin_spacing_hz = 3e9\n"
                    "gamma_hz = 1.3e9\n"
                    "fsr_hz = 115e9\n"
                    "target_signal_phases_rad = 0,0,0,0,0,0\n"
                    "tolerance_rad = 1e-3\n"
                    "max_iterations = 20\n"
                    "seed = 40\n"});

    list.push_back({"figS4a_dphi_i_pi",
                    "dual-comb calibration, distinct layout, idler slope pi target",
                    "kind = calibration\n"
                    "name = figS4a_dphi_i_pi\n"
                    "layout = distinct\n"
                    "dimension = 3\n"
                    "bin_spacing_hz = 3e9\n"
                    "subcomb_separation_hz = 27e9\n"
                    "gamma_hz = 1.3e9\n"
                    "fsr_hz = 115e9\n"
                    "target_signal_phases_rad = 0,0,0\n"
                    "target_idler_phases_rad = 0,3.141592653589793,6.283185307179586\n"
                    "tolerance_rad = 1e-3\n"
                    "max_iterations = 20\n"
                    "seed = 41\n"});

    return list;
}

}  // namespace

const std::vector<Preset>& presets() {
    static const std::vector<Preset> list = build_presets();
    return list;
}

const Preset* find_preset(std::string_view name) {
    for (const Preset& p : presets()) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

} // namespace bfc
