#include "icqed/expsim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"

namespace icqed::sim {

namespace c = constants;

void SequenceTiming::validate() const {
    if (!(cool >= 0) || !(pump >= 0) || !(probe > 0) || !(apd_delay >= 0) || !(total > 0))
        throw std::domain_error("sequence timing values must be positive");
    if (cool + pump + probe > total)
        throw std::domain_error("sequence phases exceed the total sequence length");
    if (!(apd_delay < probe))
        throw std::domain_error("APD delay must be shorter than the probe pulse");
}

void ScanConfig::validate() const {
    if (!(span_hz > 0) || !(rate_hz > 0) || n_average < 1 || samples_per_scan < 2)
        throw std::domain_error("scan configuration values must be positive");
}

void NoiseModel::validate() const {
    if (!(detection_efficiency > 0) || detection_efficiency > 1)
        throw std::domain_error("detection efficiency must lie in (0,1]");
    if (!(mean_photon_rate >= 0) || !(drift_step >= 0) || !(reference_noise_rel >= 0))
        throw std::domain_error("noise model rates must be nonnegative");
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 over a counter keyed by the master seed
    std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace {

double reflectivity_at(const CoupledSystem& sys, double delta, double delta_c) {
    return reflectivity(sys.rates, effective_response(sys, delta, delta_c));
}

}  // namespace

double mean_intracavity_photons(const CoupledSystem& sys, double delta, double delta_c,
                                const NoiseModel& noise) {
    // photon flux incident on the cavity, inferred from the detected rate at
    // unit reflectivity
    double flux_in = noise.mean_photon_rate / noise.detection_efficiency;
    auto resp = effective_response(sys, delta, delta_c);
    double denom = resp.kappa_prime * resp.kappa_prime + resp.delta_c_prime * resp.delta_c_prime;
    return 2.0 * sys.rates.kappa1 * flux_in / denom;
}

ScanTrace simulate_scan(const CoupledSystem& sys, double delta, const ScanConfig& scan,
                        const NoiseModel& noise, const SequenceTiming& timing) {
    scan.validate();
    noise.validate();
    timing.validate();
    if (!(noise.mean_photon_rate > 0))
        throw DataError("degenerate trace: zero photon rate");

    const int n = scan.samples_per_scan;
    const double span = c::two_pi * scan.span_hz;
    std::vector<double> grid(n);
    for (int j = 0; j < n; ++j)
        grid[j] = -0.5 * span + span * j / (n - 1);

    const double counts_scale =
        noise.mean_photon_rate * timing.detection_window() * noise.detection_efficiency;

    ScanTrace trace;
    trace.kind = TraceKind::counts;
    trace.seed = noise.rng_seed;
    trace.provenance = "simulate_scan";
    trace.x = grid;
    trace.y.assign(n, 0.0);

    if (noise.noiseless) {
        for (int j = 0; j < n; ++j)
            trace.y[j] = counts_scale * reflectivity_at(sys, delta, grid[j]);
        return trace;
    }

    // reference readout error grows with |delta|: the probe and reference
    // resonances separate on the scan and their drifts decorrelate
    const double ref_sigma = noise.reference_noise_rel * sys.rates.kappa *
                             (1.0 + std::abs(delta) / (c::two_pi * 50e6));

    std::vector<double> shifted(n);
    std::vector<double> counts(n);
    double drift = 0.0;
    for (int s = 0; s < scan.n_average; ++s) {
        std::mt19937_64 rng(substream_seed(noise.rng_seed, static_cast<std::uint64_t>(s)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        drift += noise.drift_step * gauss(rng);
        double drift_estimate = drift + ref_sigma * gauss(rng);

        for (int j = 0; j < n; ++j) {
            double mu = counts_scale * reflectivity_at(sys, delta, grid[j] + drift);
            std::poisson_distribution<long> poisson(mu);
            counts[j] = static_cast<double>(poisson(rng));
            // shift-align using the reference estimate of the resonance drift
            shifted[j] = grid[j] + drift_estimate;
        }
        // linear interpolation of the aligned scan back onto the common grid
        for (int j = 0; j < n; ++j) {
            double xq = grid[j];
            if (xq <= shifted.front()) {
                trace.y[j] += counts.front();
            } else if (xq >= shifted.back()) {
                trace.y[j] += counts.back();
            } else {
                auto it = std::upper_bound(shifted.begin(), shifted.end(), xq);
                std::size_t hi = static_cast<std::size_t>(it - shifted.begin());
                std::size_t lo = hi - 1;
                double t = (xq - shifted[lo]) / (shifted[hi] - shifted[lo]);
                trace.y[j] += (1.0 - t) * counts[lo] + t * counts[hi];
            }
        }
    }
    for (double& y : trace.y)
        y /= scan.n_average;
    return trace;
}

ScanTrace simulate_locked(const CoupledSystem& sys, std::span<const double> grid,
                          const SequenceTiming& timing, const NoiseModel& noise,
                          int n_sequences) {
    noise.validate();
    timing.validate();
    if (grid.size() < 2)
        throw std::domain_error("simulate_locked needs at least 2 grid points");
    if (n_sequences < 1)
        throw std::domain_error("simulate_locked needs at least one sequence");
    if (!(noise.mean_photon_rate > 0))
        throw DataError("degenerate trace: zero photon rate");

    const double counts_per_seq =
        noise.mean_photon_rate * timing.detection_window() * noise.detection_efficiency;

    ScanTrace trace;
    trace.kind = TraceKind::normalized;
    trace.seed = noise.rng_seed;
    trace.provenance = "simulate_locked";
    trace.x.assign(grid.begin(), grid.end());
    trace.y.assign(grid.size(), 0.0);

    if (noise.noiseless) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            trace.y[i] = reflectivity_at(sys, grid[i], grid[i]);
        return trace;
    }

    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::mt19937_64 rng(substream_seed(noise.rng_seed, i));
        std::normal_distribution<double> gauss(0.0, 1.0);

        // fast path: no lock jitter and no postselection, so the per-sequence
        // Poisson draws aggregate into a single draw
        if (noise.drift_step == 0.0 && noise.reference_threshold <= 0.0) {
            double mu = counts_per_seq * reflectivity_at(sys, grid[i], grid[i]);
            std::poisson_distribution<long long> poisson(mu * n_sequences);
            trace.y[i] = static_cast<double>(poisson(rng)) /
                         (counts_per_seq * n_sequences);
            continue;
        }

        long long kept = 0;
        double total_counts = 0;
        for (int s = 0; s < n_sequences; ++s) {
            double jitter = noise.drift_step * gauss(rng);
            // reference transmission through the jittered cavity, with its
            // own readout noise; the probe counts never enter this decision
            double ref = 1.0 / (1.0 + (jitter / sys.rates.kappa) * (jitter / sys.rates.kappa));
            double ref_measured = ref * (1.0 + noise.reference_noise_rel * gauss(rng));
            if (ref_measured < noise.reference_threshold)
                continue;
            double mu = counts_per_seq * reflectivity_at(sys, grid[i], grid[i] + jitter);
            std::poisson_distribution<long> poisson(mu);
            total_counts += static_cast<double>(poisson(rng));
            ++kept;
        }
        if (kept == 0)
            throw DataError("empty trace: all sequences were postselected away");
        trace.y[i] = total_counts / (static_cast<double>(kept) * counts_per_seq);
    }
    return trace;
}

ScanTrace simulate_larmor(std::span<const larmor::WeightedSpinState> initial,
                          const larmor::FieldConfig& field,
                          const larmor::TwoTransitionConfig& transitions,
                          const larmor::DecayModel& decay, std::span<const double> taus,
                          const NoiseModel& noise, double kappa, int n_average,
                          const SequenceTiming& timing) {
    noise.validate();
    if (!(kappa > 0))
        throw std::domain_error("simulate_larmor needs kappa > 0");
    if (taus.size() < 8)
        throw std::domain_error("simulate_larmor needs at least 8 delays");

    // natural gamma for the probe Lorentzians: the transition parameters
    // carry the detunings, the decay envelope models decoherence
    const double gamma = constants::ca40::p12_dipole_decay;

    auto traces = larmor::populations_trace(initial, field, taus);

    // noiseless cooperativity trace and its two-harmonic decomposition
    std::vector<double> coop(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        larmor::TwoTransitionConfig at_tau = transitions;
        at_tau.n_half = transitions.n_half * traces.populations[i][2];
        at_tau.n_threehalf = transitions.n_threehalf * traces.populations[i][3];
        double kp = larmor::kappa_prime_two_transition(at_tau, gamma, kappa);
        coop[i] = 0.5 * (kp / kappa - 1.0);
    }

    // apply the decay to the oscillating part only: C = (a cos + b cos2)*env + c
    const auto& h_half = traces.harmonics[2];
    const auto& h_threehalf = traces.harmonics[3];
    double gh2 = transitions.g_half * transitions.g_half * transitions.n_half * gamma /
                 (gamma * gamma + transitions.delta_half * transitions.delta_half);
    double gt2 = transitions.g_threehalf * transitions.g_threehalf * transitions.n_threehalf *
                 gamma / (gamma * gamma + transitions.delta_threehalf * transitions.delta_threehalf);
    double a = 0.5 * (gh2 * h_half.a + gt2 * h_threehalf.a) / kappa;
    double b = 0.5 * (gh2 * h_half.b + gt2 * h_threehalf.b) / kappa;
    double c_ = 0.5 * (gh2 * h_half.c + gt2 * h_threehalf.c) / kappa;

    ScanTrace trace;
    trace.kind = TraceKind::normalized;
    trace.seed = noise.rng_seed;
    trace.provenance = "simulate_larmor";
    trace.x.assign(taus.begin(), taus.end());
    trace.y = larmor::cooperativity_trace(a, b, c_, traces.omega_fitted, decay, taus);

    if (noise.noiseless)
        return trace;

    double counts = noise.mean_photon_rate * timing.detection_window() *
                    noise.detection_efficiency * n_average;
    double rel_sigma = 1.0 / std::sqrt(std::max(counts, 1.0));
    for (std::size_t i = 0; i < taus.size(); ++i) {
        std::mt19937_64 rng(substream_seed(noise.rng_seed, i));
        std::normal_distribution<double> gauss(0.0, 1.0);
        double kp = kappa * (1.0 + 2.0 * trace.y[i]);
        double kp_measured = kp * (1.0 + rel_sigma * gauss(rng));
        trace.y[i] = 0.5 * (kp_measured / kappa - 1.0);
    }
    return trace;
}

ScanTrace simulate_larmor(const larmor::SpinState& initial, const larmor::FieldConfig& field,
                          const larmor::TwoTransitionConfig& transitions,
                          const larmor::DecayModel& decay, std::span<const double> taus,
                          const NoiseModel& noise, double kappa, int n_average,
                          const SequenceTiming& timing) {
    larmor::WeightedSpinState ws{initial, 1.0};
    return simulate_larmor(std::span<const larmor::WeightedSpinState>(&ws, 1), field,
                           transitions, decay, taus, noise, kappa, n_average, timing);
}

}  // namespace icqed::sim
