#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "icqed/trace.hpp"

// Closed-form steady-state response of N effective two-level ions coupled to
// a single cavity mode: rates, coupling, absorption/dispersion, reflectivity.

namespace icqed {

struct CavityParams {
    double length_l = 0;    // m
    double t1 = 0;          // intensity transmission, PT mirror
    double t2 = 0;          // intensity transmission, HR mirror
    double losses_L = 0;    // round-trip intensity loss
    double waist_w0 = 0;    // m
    double wavelength = 0;  // m

    void validate() const;  // throws std::domain_error
};

struct CavityRates {
    double tau = 0;          // round-trip time 2l/c, s
    double kappa1 = 0;       // rad/s
    double kappa2 = 0;       // rad/s
    double kappa_loss = 0;   // rad/s
    double kappa = 0;        // rad/s, kappa1 + kappa2 + kappa_loss
    double fsr_hz = 0;       // Hz (not angular)
    double finesse = 0;
    double rayleigh_z0 = 0;  // m
};

struct TransitionParams {
    double gamma = 0;                     // dipole decay rate, rad/s
    double wavelength = 0;                // m
    std::optional<double> dipole_moment;  // C m
    double atomic_frequency = 0;          // rad/s; 2*pi*c/wavelength when 0
};

struct CoupledSystem {
    double g = 0;          // single-ion coupling, rad/s
    double n_eff = 0;      // effective ion number
    double gamma_eff = 0;  // effective dipole decay rate gamma', rad/s
    CavityRates rates;

    double g_collective() const;  // g*sqrt(n_eff)
};

// (kappa', delta_c') at one probe detuning
struct CoupledResponse {
    double kappa_prime = 0;    // rad/s
    double delta_c_prime = 0;  // rad/s
};

CavityRates derive_cavity_rates(const CavityParams& p);

// g = mu*E0/hbar with E0 the maximum field of the fundamental mode,
// mode volume pi*w0^2*l/4. Throws std::invalid_argument without a dipole.
double single_ion_coupling(const TransitionParams& t, const CavityParams& p);

double collective_coupling(double g, double n_eff);

CoupledResponse effective_response(const CoupledSystem& sys, double delta, double delta_c);

std::complex<double> intracavity_amplitude(const CoupledResponse& resp,
                                           const CavityRates& rates,
                                           std::complex<double> a_in);

// |(2*kappa1 - kappa' - i*delta_c') / (kappa' + i*delta_c')|^2
double reflectivity(const CavityRates& rates, const CoupledResponse& resp);

// C = gN^2 / (2*kappa*gamma'); on resonance kappa'(0) = kappa*(1 + 2C)
double cooperativity(const CoupledSystem& sys);

// Reflectivity along the delta = delta_c diagonal (normal-mode spectrum).
ScanTrace rabi_spectrum(const CoupledSystem& sys, std::span<const double> grid);

// Field and collective-polarization build-up from vacuum under constant drive.
struct BuildupTrace {
    std::vector<double> t;                          // s
    std::vector<std::complex<double>> field;        // a(t)
    std::vector<std::complex<double>> polarization; // S(t)
};

BuildupTrace transient_buildup(const CoupledSystem& sys, double delta, double delta_c,
                               std::complex<double> a_in, double t_end, double dt);

}  // namespace icqed
