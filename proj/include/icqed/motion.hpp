#pragma once

#include <span>

#include "icqed/cqed.hpp"

// Finite-temperature corrections to the cavity response: velocity averaging
// of the two standing-wave Doppler classes over a Maxwell-Boltzmann
// distribution along the cavity axis.

namespace icqed::motion {

struct ThermalConfig {
    double temperature = 0;  // K
    double ion_mass = 0;     // kg
    double wavenumber = 0;   // rad/m

    // mean Doppler velocity sqrt(kB*T/m)
    double doppler_velocity() const;
};

// xi(v): absorption kernel averaging the +/- running-wave components,
// (g^2 + D^2 + (kv)^2) / ((g^2 + D^2)^2 + 2(g^2 - D^2)(kv)^2 + (kv)^4).
double doppler_kernel(double v, double gamma, double delta, double wavenumber);

// Velocity-averaged (kappa', delta_c'). sys.gamma_eff is treated as the
// zero-velocity dipole decay rate. Gauss-Hermite quadrature, node count
// doubled from 64 until successive levels agree to relative 1e-8.
CoupledResponse thermal_response(const CoupledSystem& sys, double delta, double delta_c,
                                 const ThermalConfig& th);

struct EffectiveGamma {
    double fitted = 0;       // gamma' from a Lorentzian fit to the thermal curve, rad/s
    double closed_form = 0;  // gamma + k*vD/sqrt(2), rad/s
};

// Fits kappa'(Delta) = kappa + g^2 N gamma'/(gamma'^2 + Delta^2) to the
// exact thermal response over fit_grid.
EffectiveGamma effective_gamma(const CoupledSystem& sys, const ThermalConfig& th,
                               std::span<const double> fit_grid);

struct ValidityReport {
    double doppler_shift = 0;    // k*vD, rad/s
    double min_system_rate = 0;  // min(kappa + g^2N/gamma, gamma + g^2N/kappa), rad/s
    double margin = 0;           // min_system_rate / doppler_shift
    bool valid = false;          // doppler_shift < min_system_rate
    bool strict = false;         // margin >= 10
};

ValidityReport validity_check(const CoupledSystem& sys, const ThermalConfig& th);

}  // namespace icqed::motion
