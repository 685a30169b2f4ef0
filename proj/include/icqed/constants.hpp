#pragma once

// Physical constants (CODATA 2018) and the 40Ca+ values used as defaults
// throughout the toolkit. All frequencies are angular (rad/s) unless a
// name says otherwise.

namespace icqed::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double speed_of_light = 299792458.0;          // m/s
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double epsilon0 = 8.8541878128e-12;           // F/m
inline constexpr double boltzmann = 1.380649e-23;              // J/K
inline constexpr double bohr_magneton = 9.2740100783e-24;      // J/T
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg

namespace ca40 {

inline constexpr double ion_mass = 6.6358529e-26;              // kg

// 3d2D3/2 <-> 4p2P1/2 transition
inline constexpr double d32_p12_wavelength = 866e-9;           // m
inline constexpr double p12_dipole_decay = two_pi * 11.2e6;    // rad/s

// sigma- component m_J=+3/2 -> m_J=+1/2 of the 866 nm line
inline constexpr double d32_p12_sigma_dipole = 1.0991e-29;     // C m

// Lande factor of the D3/2 manifold
inline constexpr double d32_lande_g = 0.8;

}  // namespace ca40

}  // namespace icqed::constants
