#include "icqed/cqed.hpp"

#include <cmath>
#include <stdexcept>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"

namespace icqed {

namespace c = constants;

void CavityParams::validate() const {
    if (!(length_l > 0))
        throw std::domain_error("cavity length must be positive");
    // t2 and the losses may vanish (ideal HR mirror, clean cavity)
    if (!(t1 > 0 && t1 < 1) || !(t2 >= 0 && t2 < 1) || !(losses_L >= 0 && losses_L < 1))
        throw std::domain_error("mirror transmissions and losses must lie in [0,1)");
    if (!(t1 > t2))
        throw std::domain_error("single-ended convention requires t1 > t2");
    if (!(waist_w0 > 0))
        throw std::domain_error("waist must be positive");
    if (!(wavelength > 0))
        throw std::domain_error("wavelength must be positive");
}

double CoupledSystem::g_collective() const {
    return collective_coupling(g, n_eff);
}

CavityRates derive_cavity_rates(const CavityParams& p) {
    p.validate();
    CavityRates r;
    r.tau = 2.0 * p.length_l / c::speed_of_light;
    r.kappa1 = p.t1 / (2.0 * r.tau);
    r.kappa2 = p.t2 / (2.0 * r.tau);
    r.kappa_loss = p.losses_L / (2.0 * r.tau);
    r.kappa = r.kappa1 + r.kappa2 + r.kappa_loss;
    r.fsr_hz = c::speed_of_light / (2.0 * p.length_l);
    // FWHM linewidth in Hz is kappa/pi
    r.finesse = r.fsr_hz / (r.kappa / c::pi);
    r.rayleigh_z0 = c::pi * p.waist_w0 * p.waist_w0 / p.wavelength;
    return r;
}

double single_ion_coupling(const TransitionParams& t, const CavityParams& p) {
    p.validate();
    if (!t.dipole_moment)
        throw std::invalid_argument("single_ion_coupling requires a dipole moment");
    if (!(t.wavelength > 0))
        throw std::domain_error("transition wavelength must be positive");
    double omega = t.atomic_frequency > 0
                       ? t.atomic_frequency
                       : c::two_pi * c::speed_of_light / t.wavelength;
    double mode_volume = c::pi * p.waist_w0 * p.waist_w0 * p.length_l / 4.0;
    double e0 = std::sqrt(c::hbar * omega / (2.0 * c::epsilon0 * mode_volume));
    return *t.dipole_moment * e0 / c::hbar;
}

double collective_coupling(double g, double n_eff) {
    if (g < 0 || n_eff < 0)
        throw std::domain_error("coupling rate and ion number must be nonnegative");
    return g * std::sqrt(n_eff);
}

CoupledResponse effective_response(const CoupledSystem& sys, double delta, double delta_c) {
    double g2n = sys.g * sys.g * sys.n_eff;
    double denom = sys.gamma_eff * sys.gamma_eff + delta * delta;
    CoupledResponse resp;
    resp.kappa_prime = sys.rates.kappa + g2n * sys.gamma_eff / denom;
    resp.delta_c_prime = delta_c - g2n * delta / denom;
    return resp;
}

std::complex<double> intracavity_amplitude(const CoupledResponse& resp,
                                           const CavityRates& rates,
                                           std::complex<double> a_in) {
    std::complex<double> pole(resp.kappa_prime, resp.delta_c_prime);
    return std::sqrt(2.0 * rates.kappa1 / rates.tau) * a_in / pole;
}

double reflectivity(const CavityRates& rates, const CoupledResponse& resp) {
    std::complex<double> pole(resp.kappa_prime, resp.delta_c_prime);
    std::complex<double> num = 2.0 * rates.kappa1 - pole;
    return std::norm(num / pole);
}

double cooperativity(const CoupledSystem& sys) {
    double g2n = sys.g * sys.g * sys.n_eff;
    return g2n / (2.0 * sys.rates.kappa * sys.gamma_eff);
}

ScanTrace rabi_spectrum(const CoupledSystem& sys, std::span<const double> grid) {
    if (grid.empty())
        throw std::domain_error("rabi_spectrum needs a nonempty grid");
    ScanTrace trace;
    trace.kind = TraceKind::normalized;
    trace.provenance = "rabi_spectrum model";
    trace.x.reserve(grid.size());
    trace.y.reserve(grid.size());
    double prev = grid.front();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0 && !(grid[i] > prev))
            throw std::domain_error("rabi_spectrum grid must be sorted and strictly increasing");
        prev = grid[i];
        auto resp = effective_response(sys, grid[i], grid[i]);
        trace.x.push_back(grid[i]);
        trace.y.push_back(reflectivity(sys.rates, resp));
    }
    return trace;
}

BuildupTrace transient_buildup(const CoupledSystem& sys, double delta, double delta_c,
                               std::complex<double> a_in, double t_end, double dt) {
    if (!(dt > 0) || !(t_end >= 0))
        throw std::domain_error("transient_buildup needs dt > 0 and t_end >= 0");
    double gn = sys.g_collective();
    auto resp = effective_response(sys, delta, delta_c);
    double rate_scale = std::max(resp.kappa_prime, sys.gamma_eff) +
                        std::max(std::abs(delta), std::abs(delta_c)) + gn;
    if (dt * rate_scale > 0.8)
        throw NumericError("transient_buildup step size too large for system rates");

    const std::complex<double> i1(0.0, 1.0);
    const std::complex<double> pole_a(sys.rates.kappa, delta_c);
    const std::complex<double> pole_s(sys.gamma_eff, delta);
    const std::complex<double> drive = std::sqrt(2.0 * sys.rates.kappa1 / sys.rates.tau) * a_in;

    auto deriv = [&](std::complex<double> a, std::complex<double> s,
                     std::complex<double>& da, std::complex<double>& ds) {
        da = -pole_a * a + i1 * gn * s + drive;
        ds = -pole_s * s + i1 * gn * a;
    };

    std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt));
    BuildupTrace out;
    out.t.reserve(steps + 1);
    out.field.reserve(steps + 1);
    out.polarization.reserve(steps + 1);

    std::complex<double> a = 0.0, s = 0.0;
    out.t.push_back(0.0);
    out.field.push_back(a);
    out.polarization.push_back(s);

    for (std::size_t n = 0; n < steps; ++n) {
        double h = std::min(dt, t_end - static_cast<double>(n) * dt);
        std::complex<double> k1a, k1s, k2a, k2s, k3a, k3s, k4a, k4s;
        deriv(a, s, k1a, k1s);
        deriv(a + 0.5 * h * k1a, s + 0.5 * h * k1s, k2a, k2s);
        deriv(a + 0.5 * h * k2a, s + 0.5 * h * k2s, k3a, k3s);
        deriv(a + h * k3a, s + h * k3s, k4a, k4s);
        a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        if (!std::isfinite(std::abs(a)) || !std::isfinite(std::abs(s)))
            throw NumericError("transient_buildup integration diverged");
        out.t.push_back(std::min(static_cast<double>(n + 1) * dt, t_end));
        out.field.push_back(a);
        out.polarization.push_back(s);
    }
    return out;
}

}  // namespace icqed
