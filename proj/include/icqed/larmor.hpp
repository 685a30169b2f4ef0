#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <span>
#include <vector>

#include "icqed/constants.hpp"

// Spin-3/2 Zeeman dynamics of the metastable D manifold: Larmor Hamiltonian,
// exact unitary evolution, populations, the two-transition cavity response
// and the oscillation/decay model of the coherence-time measurements.

namespace icqed::larmor {

// substate order: index 0..3 <-> m_J = -3/2, -1/2, +1/2, +3/2
inline constexpr std::array<double, 4> mj_values = {-1.5, -0.5, 0.5, 1.5};

struct SpinState {
    std::array<std::complex<double>, 4> amplitudes{};

    static SpinState basis(int index);  // unit population in one substate
    double norm_error() const;          // | sum |amp|^2 - 1 |
    void renormalize();
};

double gyromagnetic_ratio(double g_factor);  // muB*g/hbar, rad/(s T)

struct FieldConfig {
    double omega_x = 0;  // rad/s
    double omega_z = 0;  // rad/s

    static FieldConfig from_fields(double bx_tesla, double bz_tesla,
                                   double g_factor = constants::ca40::d32_lande_g);
};

struct DecayModel {
    enum class Kind { none, exponential, gaussian };
    Kind kind = Kind::none;
    double timescale = 0;  // s

    double envelope(double tau) const;
};

struct TwoTransitionConfig {
    double g_half = 0;        // rad/s, m=+1/2 transition coupling
    double g_threehalf = 0;   // rad/s, m=+3/2 transition coupling
    double delta_half = 0;    // rad/s
    double delta_threehalf = 0;
    double n_half = 0;        // effective ions addressing the +1/2 transition
    double n_threehalf = 0;
};

// H/hbar = omega_z*diag(m) + (omega_x/2)*(nearest-neighbor couplings
// sqrt(15/4 - m(m+-1))); traceless and Hermitian by construction.
Eigen::Matrix4cd hamiltonian(const FieldConfig& f);

// exp(-i H tau) via exact 4x4 Hermitian eigendecomposition
SpinState evolve(const SpinState& s, const FieldConfig& f, double tau);

std::array<double, 4> populations(const SpinState& s);

// omega_L = sqrt(omega_z^2 + omega_x^2)
double larmor_frequency(const FieldConfig& f);

// kappa + one Lorentzian absorption term per addressed Zeeman transition
double kappa_prime_two_transition(const TwoTransitionConfig& cfg, double gamma, double kappa);

// C(tau) = (a cos(wL tau) + b cos(2 wL tau))*env(tau) + c
std::vector<double> cooperativity_trace(double a, double b, double c, double omega_l,
                                        const DecayModel& decay, std::span<const double> taus);

struct WeightedSpinState {
    SpinState state;
    double weight = 1.0;
};

struct HarmonicComponents {
    double a = 0;  // cos(w tau) amplitude
    double b = 0;  // cos(2 w tau) amplitude
    double c = 0;  // constant
};

struct PopulationsTrace {
    std::vector<std::array<double, 4>> populations;  // one entry per tau
    std::array<HarmonicComponents, 4> harmonics;
    double omega_fitted = 0;   // rad/s
    double max_residual = 0;   // rms residual relative to trace range
};

// Evolves and projects, then verifies the two-harmonic structure by fitting
// a shared oscillation frequency. Throws NumericError when the trace cannot
// be represented as a cos(w t) + b cos(2 w t) + c (model violation) or the
// fitted frequency disagrees with larmor_frequency(f).
PopulationsTrace populations_trace(std::span<const WeightedSpinState> initial,
                                   const FieldConfig& f, std::span<const double> taus,
                                   double tolerance = 1e-8);
PopulationsTrace populations_trace(const SpinState& initial, const FieldConfig& f,
                                   std::span<const double> taus, double tolerance = 1e-8);

}  // namespace icqed::larmor
