#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icqed/cqed.hpp"
#include "icqed/larmor.hpp"
#include "icqed/trace.hpp"

// Synthetic-experiment generator: probe sequences, cavity scans, photon shot
// noise, detection efficiency, drift, reference compensation, postselection.

namespace icqed::sim {

struct SequenceTiming {
    double cool = 5e-6;       // s
    double pump = 12e-6;      // s
    double probe = 1.4e-6;    // s
    double apd_delay = 0.1e-6;  // s
    double total = 20e-6;     // s

    double detection_window() const { return probe - apd_delay; }
    void validate() const;
};

struct ScanConfig {
    double span_hz = 1.3e9;     // scan span (ordinary Hz, not angular)
    double rate_hz = 30;        // scan repetition rate
    int n_average = 100;        // scans averaged per trace
    int samples_per_scan = 321;

    void validate() const;
};

struct NoiseModel {
    double mean_photon_rate = 1e8;     // counts/s at the detector for unit reflectivity
    double detection_efficiency = 0.16;
    double drift_step = 0;             // rad/s per scan: resonance random-walk increment;
                                       // doubles as the per-sequence lock jitter when locked
    double reference_threshold = 0;    // postselection threshold on reference transmission
    double reference_noise_rel = 0.02; // relative readout noise of the reference channel
    std::uint64_t rng_seed = 1;
    bool noiseless = false;            // analytic means, no draws, no drift

    void validate() const;
};

// Sweeps the cavity detuning across the span at fixed probe detuning; Poisson
// counts per sample, reference-based drift compensation, n_average scans
// averaged. Deterministic for a fixed seed.
ScanTrace simulate_scan(const CoupledSystem& sys, double delta, const ScanConfig& scan,
                        const NoiseModel& noise, const SequenceTiming& timing = {});

// Cavity locked on atomic resonance: one point per grid detuning
// (Delta = Delta_c), n_sequences probe windows with postselection against the
// reference transmission. Returns normalized reflectivity.
ScanTrace simulate_locked(const CoupledSystem& sys, std::span<const double> grid,
                          const SequenceTiming& timing, const NoiseModel& noise,
                          int n_sequences = 20000);

// Free Larmor evolution followed by a probe of the +1/2 and +3/2 transitions:
// C(tau) = (kappa'(tau)/kappa - 1)/2 with the decay envelope applied to the
// oscillating part and measurement noise on kappa'.
ScanTrace simulate_larmor(std::span<const larmor::WeightedSpinState> initial,
                          const larmor::FieldConfig& field,
                          const larmor::TwoTransitionConfig& transitions,
                          const larmor::DecayModel& decay, std::span<const double> taus,
                          const NoiseModel& noise, double kappa, int n_average = 100,
                          const SequenceTiming& timing = {});

ScanTrace simulate_larmor(const larmor::SpinState& initial, const larmor::FieldConfig& field,
                          const larmor::TwoTransitionConfig& transitions,
                          const larmor::DecayModel& decay, std::span<const double> taus,
                          const NoiseModel& noise, double kappa, int n_average = 100,
                          const SequenceTiming& timing = {});

// Mean intracavity photon number at the scan point of strongest buildup,
// for the probe power implied by the noise model. Saturation diagnostic.
double mean_intracavity_photons(const CoupledSystem& sys, double delta, double delta_c,
                                const NoiseModel& noise);

// deterministic per-index substream seeds
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);

}  // namespace icqed::sim
