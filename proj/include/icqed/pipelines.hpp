#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icqed/cqed.hpp"
#include "icqed/expsim.hpp"

// End-to-end synthetic-experiment recipes: generate data with known injected
// parameters, run the matching estimation, and report injected vs recovered.

namespace icqed::sim {

enum class PipelineName { fig4, fig5a, fig5b, fig6, fig7, fig8, fig9a, fig9b, fig10 };

PipelineName pipeline_from_string(const std::string& name);
std::string to_string(PipelineName name);
std::vector<std::string> pipeline_names();

struct PipelineConfig {
    CavityParams cavity{11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9};
    double gamma = constants::ca40::p12_dipole_decay;  // natural dipole decay
    double gamma_eff = constants::two_pi * 11.9e6;     // broadened value used in generation
    double g_single = constants::two_pi * 0.53e6;
    double n_eff = 520;

    // absorption/dispersion detuning grid, 2pi MHz
    std::vector<double> detunings_mhz = {-54.3, -40.3, -30.3, -24.3, -18.3, -14.3, -10.3,
                                         -6.3,  -2.3,  0.3,   4.3,   8.3,   12.3,  16.3,
                                         22.3,  28.3,  38.3,  52.3};
    // crystal sizes for the scaling measurements
    std::vector<double> n_values = {150, 300, 450, 600, 800, 1000, 1250, 1523};

    double locked_half_span_mhz = 40;  // normal-mode grid half-width
    int locked_points = 161;
    int locked_sequences = 2000;

    // Larmor section
    double bx_gauss = 0.15;
    double bz_gauss = 0.15;
    double g_factor = constants::ca40::d32_lande_g;
    double coherence_time = 1.7e-3;  // injected tau_e
    larmor::DecayModel::Kind decay_kind = larmor::DecayModel::Kind::exponential;
    double tau_max = 120e-6;
    double tau_step = 1e-6;
    double halfint_coupling_ratio = 0.57735026918962576;  // g_{1/2}/g_{3/2}

    // calibration line
    std::vector<double> currents_ma = {5, 10, 16, 20, 26, 30, 36, 40};
    double omega_z_cal = constants::two_pi * 150e3;    // rad/s
    double slope_per_ma = constants::two_pi * 5.5e3;   // rad/s per mA

    bool normalize_oscillation = false;  // divide by one-period rolling mean first
    NoiseModel noise;
    ScanConfig scan{160e6, 30, 100, 321};
    SequenceTiming timing;
};

struct PipelineEstimate {
    double injected = 0;
    double recovered = 0;
    double std_error = 0;
};

struct TraceProduct {
    std::string label;     // file stem
    std::string x_header;
    std::string y_header;
    double x_scale = 1.0;  // multiply trace.x by this for CSV output
    ScanTrace trace;
};

struct PipelineResult {
    std::string name;
    std::vector<TraceProduct> traces;
    std::vector<std::pair<std::string, PipelineEstimate>> estimates;
    std::vector<std::string> notes;

    const PipelineEstimate& estimate(const std::string& key) const;
};

PipelineResult run_pipeline(PipelineName name, const PipelineConfig& config,
                            std::uint64_t seed);

}  // namespace icqed::sim
