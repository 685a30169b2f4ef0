#include "icqed/motion.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"
#include "icqed/fit.hpp"

namespace icqed::motion {

namespace c = constants;

double ThermalConfig::doppler_velocity() const {
    if (temperature < 0 || !(ion_mass > 0))
        throw std::domain_error("thermal config needs T >= 0 and positive mass");
    return std::sqrt(c::boltzmann * temperature / ion_mass);
}

double doppler_kernel(double v, double gamma, double delta, double wavenumber) {
    double g2 = gamma * gamma, d2 = delta * delta;
    double kv2 = wavenumber * v * wavenumber * v;
    double num = g2 + d2 + kv2;
    double den = (g2 + d2) * (g2 + d2) + 2.0 * (g2 - d2) * kv2 + kv2 * kv2;
    return num / den;
}

namespace {

struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;  // include the 1/sqrt(pi) Gaussian-average factor
};

// Golub-Welsch on the Hermite Jacobi matrix; weights normalized so that
// sum(w_i * h(x_i)) approximates the Gaussian average of h.
const GaussHermite& gauss_hermite(int n) {
    static std::map<int, GaussHermite> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;

    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 1; i < n; ++i)
        sub(i - 1) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub);
    if (solver.info() != Eigen::Success)
        throw NumericError("Gauss-Hermite node computation failed");

    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        gh.nodes[i] = solver.eigenvalues()(i);
        double q0 = solver.eigenvectors()(0, i);
        gh.weights[i] = q0 * q0;  // mu0 = sqrt(pi) cancels against the average
    }
    return cache.emplace(n, std::move(gh)).first->second;
}

struct ThermalIntegrals {
    double absorption = 0;  // Gaussian average of gamma*xi(v)
    double dispersion = 0;  // Gaussian average of (Delta - kv)*xi(v)
};

ThermalIntegrals integrate_at(int n, double v_scale, double gamma, double delta,
                              double wavenumber) {
    const auto& gh = gauss_hermite(n);
    ThermalIntegrals out;
    for (int i = 0; i < n; ++i) {
        double v = v_scale * gh.nodes[i];
        double xi = doppler_kernel(v, gamma, delta, wavenumber);
        out.absorption += gh.weights[i] * gamma * xi;
        out.dispersion += gh.weights[i] * (delta - wavenumber * v) * xi;
    }
    return out;
}

}  // namespace

CoupledResponse thermal_response(const CoupledSystem& sys, double delta, double delta_c,
                                 const ThermalConfig& th) {
    if (!(th.wavenumber > 0))
        throw std::domain_error("thermal config needs a positive wavenumber");
    double vd = th.doppler_velocity();
    if (vd == 0.0)
        return effective_response(sys, delta, delta_c);

    const double v_scale = std::sqrt(2.0) * vd;  // f(v) dv -> exp(-u^2)/sqrt(pi) du
    const double gamma = sys.gamma_eff;

    ThermalIntegrals prev = integrate_at(64, v_scale, gamma, delta, th.wavenumber);
    for (int n = 128; n <= 4096; n *= 2) {
        ThermalIntegrals cur = integrate_at(n, v_scale, gamma, delta, th.wavenumber);
        // dispersion vanishes by parity at Delta = 0; use a mixed criterion
        double scale = std::max(std::abs(cur.absorption), std::abs(cur.dispersion));
        double diff = std::max(std::abs(cur.absorption - prev.absorption),
                               std::abs(cur.dispersion - prev.dispersion));
        if (diff <= 1e-8 * scale) {
            double g2n = sys.g * sys.g * sys.n_eff;
            CoupledResponse resp;
            resp.kappa_prime = sys.rates.kappa + g2n * cur.absorption;
            resp.delta_c_prime = delta_c - g2n * cur.dispersion;
            return resp;
        }
        prev = cur;
    }
    throw NumericError("thermal_response Gauss-Hermite quadrature did not converge at 4096 nodes");
}

EffectiveGamma effective_gamma(const CoupledSystem& sys, const ThermalConfig& th,
                               std::span<const double> fit_grid) {
    if (fit_grid.size() < 3)
        throw std::domain_error("effective_gamma needs at least 3 detuning points");
    std::vector<double> deltas(fit_grid.begin(), fit_grid.end());
    std::vector<double> kappas;
    kappas.reserve(deltas.size());
    for (double d : deltas)
        kappas.push_back(thermal_response(sys, d, 0.0, th).kappa_prime);

    EffectiveGamma out;
    out.closed_form = sys.gamma_eff + th.wavenumber * th.doppler_velocity() / std::sqrt(2.0);
    if (th.doppler_velocity() == 0.0) {
        out.fitted = sys.gamma_eff;
        return out;
    }

    // one-parameter Lorentzian fit in 2pi MHz units
    const double mhz = c::two_pi * 1e6;
    double g2n_mhz = sys.g * sys.g * sys.n_eff / (mhz * mhz);
    double kappa_mhz = sys.rates.kappa / mhz;
    fit::FitProblem problem;
    problem.model = [g2n_mhz, kappa_mhz](double x, std::span<const double> p) {
        double gp = p[0];
        return kappa_mhz + g2n_mhz * gp / (gp * gp + x * x);
    };
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        problem.x.push_back(deltas[i] / mhz);
        problem.y.push_back(kappas[i] / mhz);
        problem.weights.push_back(1.0);
    }
    problem.initial = {sys.gamma_eff / mhz};
    problem.bounds = {{1e-6, 1e6}};
    auto result = fit::fit_nls(problem);
    if (!result.converged)
        throw EstimationError("effective_gamma Lorentzian fit did not converge");
    out.fitted = result.params[0] * mhz;
    return out;
}

ValidityReport validity_check(const CoupledSystem& sys, const ThermalConfig& th) {
    ValidityReport rep;
    double g2n = sys.g * sys.g * sys.n_eff;
    double gamma = sys.gamma_eff;
    double kappa = sys.rates.kappa;
    rep.doppler_shift = th.wavenumber * th.doppler_velocity();
    rep.min_system_rate = std::min(kappa + g2n / gamma, gamma + g2n / kappa);
    rep.margin = rep.doppler_shift == 0.0
                     ? std::numeric_limits<double>::infinity()
                     : rep.min_system_rate / rep.doppler_shift;
    rep.valid = rep.doppler_shift < rep.min_system_rate;
    rep.strict = rep.margin >= 10.0;
    return rep;
}

}  // namespace icqed::motion
