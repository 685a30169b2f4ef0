#pragma once

// Independent oracles for the test suite. These deliberately use different
// algorithms from the library paths they check: Monte-Carlo volume sampling
// against the deterministic quadrature, Romberg integration against
// Gauss-Hermite, a direct DFT projection against the harmonic fits, and the
// closed-form spin-coherent rotation law against the matrix evolution.

#include <cstdint>
#include <functional>
#include <span>

#include "icqed/crystal.hpp"

namespace oracles {

// uniform rejection sampling over the spheroid; n_samples weighted mode
// evaluations with the axially averaged weight
double mc_effective_count(const icqed::crystal::CrystalSpec& spec,
                          const icqed::crystal::ModeGeometry& mode, std::size_t n_samples,
                          std::uint64_t seed);

// Romberg integration on [a, b]
double romberg(const std::function<double(double)>& f, double a, double b, int max_level = 22,
               double rel_tol = 1e-12);

// Maxwell-Boltzmann velocity average of h(v) by Romberg over +-12 vD
double maxwell_average(const std::function<double(double)>& h, double doppler_velocity);

// amplitude of the cosine component at angular frequency omega in y(t),
// sampled on a uniform grid covering an integer number of periods
double cosine_amplitude(std::span<const double> t, std::span<const double> y, double omega);

// populations of |m> after rotating the stretched spin-3/2 state by angle
// phi about a transverse axis: binomial in p = sin^2(phi/2)
double binomial_population(int k_flips, double phi);

}  // namespace oracles
