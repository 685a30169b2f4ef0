#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "icqed/cqed.hpp"
#include "icqed/trace.hpp"

// Nonlinear least-squares estimation: a Levenberg-Marquardt core plus the
// named fits used by the synthetic-experiment pipelines (Lorentzian dips,
// absorption/dispersion curves, normal-mode spectra, Larmor traces,
// calibration lines, sqrt(N) scaling).

namespace icqed::fit {

struct FitProblem {
    std::function<double(double x, std::span<const double> params)> model;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> weights;                    // empty -> uniform
    std::vector<double> initial;
    std::vector<std::pair<double, double>> bounds;  // empty -> unbounded
    std::vector<bool> fixed;                        // empty -> all free
};

struct FitResult {
    std::vector<double> params;
    std::vector<double> std_errors;  // curvature errors scaled by residual variance
    double chi2_reduced = 0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0;
    std::vector<double> cost_history;  // accepted costs, nonincreasing
};

// Levenberg-Marquardt with central-difference Jacobian. Terminates when the
// relative cost change drops below 1e-10 or the gradient infinity-norm below
// 1e-8; gives up (converged = false) after 500 iterations. Deterministic.
FitResult fit_nls(const FitProblem& problem);

// The central-difference Jacobian fit_nls uses, exposed for verification.
// Row i holds d model(x_i)/d params_j.
std::vector<std::vector<double>> numeric_jacobian(
    const std::function<double(double, std::span<const double>)>& model,
    std::span<const double> x, std::span<const double> params);

struct LorentzianDip {
    double center = 0;  // rad/s
    double hwhm = 0;    // rad/s, identified with kappa'
    double depth = 0;   // in y units
    double offset = 0;  // in y units
    FitResult fit;
};

// Fits offset - depth*h^2/(h^2 + (x - c)^2). Counts traces get Poisson
// weights, normalized traces uniform. Throws EstimationError when the trace
// is flat or the fitted depth is consistent with zero.
LorentzianDip fit_lorentzian_dip(const ScanTrace& trace);

struct AbsorptionFit {
    double g_collective = 0;  // rad/s
    double gamma_eff = 0;     // rad/s
    double kappa = 0;         // rad/s
    bool gamma_identifiable = true;
    FitResult fit;
};

// kappa'(Delta) = kappa + gN^2 gamma'/(gamma'^2 + Delta^2). Fixing the
// coupling to zero reduces to a mean and flags gamma' as unidentifiable.
AbsorptionFit fit_absorption(std::span<const double> delta,
                             std::span<const double> kappa_prime,
                             std::optional<double> fixed_g_collective = {});

struct DispersionFit {
    double g_collective = 0;  // rad/s
    double gamma_eff = 0;     // rad/s
    FitResult fit;
};

// shift(Delta) = -gN^2 Delta/(gamma'^2 + Delta^2)
DispersionFit fit_dispersion(std::span<const double> delta, std::span<const double> shift);

struct RabiFit {
    double g_collective = 0;  // rad/s
    double scale = 0;         // y units per unit reflectivity
    FitResult fit;
};

// Full reflectivity model along the Delta = Delta_c diagonal with gamma'
// held fixed; only the collective coupling and an overall scale are free.
RabiFit fit_rabi(const ScanTrace& trace, const CavityRates& rates, double gamma_eff);

struct SqrtNFit {
    double g_single = 0;  // rad/s
    FitResult fit;
};

SqrtNFit fit_sqrtN(std::span<const double> n_eff, std::span<const double> g_collective);

struct LarmorEnvelopeFit {
    double a = 0, b = 0, c = 0;
    double omega = 0;             // rad/s
    double timescale = 0;         // s
    double timescale_lower = 0;   // profiled 1-sigma bound, s
    double timescale_upper = 0;   // profiled 1-sigma bound, s (may be +inf)
    double chi2_reduced = 0;
    FitResult fit;
};

struct LarmorFit {
    LarmorEnvelopeFit exponential;
    LarmorEnvelopeFit gaussian;
};

// (a cos(w tau) + b cos(2 w tau))*env + c with exponential and Gaussian
// envelopes fitted side by side; no model selection is performed. Profiled
// timescale bounds can be skipped when only the frequency matters.
LarmorFit fit_larmor(std::span<const double> tau, std::span<const double> coop,
                     bool profile_timescale = true);

struct CalibrationFit {
    double omega_z = 0;  // rad/s
    double slope = 0;    // rad/s per ampere
    FitResult fit;
    double bz_tesla(double g_factor) const;
    double bx_tesla_per_amp(double g_factor) const;
};

// omega_L(I) = sqrt(omega_z^2 + slope^2 I^2)
CalibrationFit fit_calibration(std::span<const double> current_amp,
                               std::span<const double> omega_l);

}  // namespace icqed::fit
