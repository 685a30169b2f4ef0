#pragma once

#include <optional>

// Spheroidal ion Coulomb crystals: density, mode overlap, effective and total
// ion numbers, and uncertainty propagation.

namespace icqed::crystal {

struct TrapParams {
    double r0 = 0;        // center-to-electrode distance, m
    double omega_rf = 0;  // RF drive, rad/s
    double u_rf = 0;      // RF amplitude, V
    double ion_mass = 0;  // kg
    // Calibrated density coefficient in cm^-3 V^-2; when absent the density
    // is computed from first principles.
    std::optional<double> density_coefficient;
};

struct CrystalSpec {
    double half_length_L = 0;        // m
    double radius_R = 0;             // m
    double density_rho = 0;          // m^-3
    double pump_efficiency_eta = 1;  // (0,1]
    double offset_x0 = 0;            // m, cavity axis offset from crystal axis
    double offset_y0 = 0;            // m

    void validate() const;
};

struct ModeGeometry {
    double waist_w0 = 0;    // m
    double wavelength = 0;  // m
    double rayleigh_z0 = 0; // m, pi*w0^2/lambda

    static ModeGeometry make(double waist_w0, double wavelength);
    double beam_radius(double z) const;  // w(z)
};

// rho = coeff*U^2 when calibrated, else eps0*U^2/(M r0^4 Omega^2). m^-3.
double ion_density(const TrapParams& t);

// TEM00 intensity mode weight at (x, y, z). The full form carries the
// standing-wave factor; the axially averaged form replaces it by 1/2.
double mode_weight(const ModeGeometry& mode, double x, double y, double z,
                   bool axially_averaged);

// N = eta*(rho/2) * integral over the spheroid of the transverse Gaussian
// weight, by deterministic adaptive quadrature (relative 1e-4).
double effective_ion_count(const CrystalSpec& c, const ModeGeometry& m);

// Thin-crystal closed form N ~ rho*pi*w0^2*L/4, valid for R >> w0, L << z0.
double effective_ion_count_thin(double rho, double half_length_L, double waist_w0);

// Spheroid volume times uniform density.
double total_ion_count(const CrystalSpec& c);

// dN/N = sqrt((drho/rho)^2 + (dV/V)^2 + (deta/eta)^2),
// dV/V = dx*sqrt(16 L^2 + R^2)/(2 R L).
double count_uncertainty(double rel_drho, double imaging_dx, const CrystalSpec& c,
                         double rel_deta);

}  // namespace icqed::crystal
