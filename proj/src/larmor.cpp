#include "icqed/larmor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "icqed/errors.hpp"

namespace icqed::larmor {

namespace c = constants;

SpinState SpinState::basis(int index) {
    if (index < 0 || index > 3)
        throw std::domain_error("spin basis index must be 0..3");
    SpinState s;
    s.amplitudes[static_cast<std::size_t>(index)] = 1.0;
    return s;
}

double SpinState::norm_error() const {
    double n = 0;
    for (const auto& a : amplitudes)
        n += std::norm(a);
    return std::abs(n - 1.0);
}

void SpinState::renormalize() {
    double n = 0;
    for (const auto& a : amplitudes)
        n += std::norm(a);
    if (!(n > 0))
        throw std::domain_error("cannot normalize the zero spin state");
    double inv = 1.0 / std::sqrt(n);
    for (auto& a : amplitudes)
        a *= inv;
}

double gyromagnetic_ratio(double g_factor) {
    return c::bohr_magneton * g_factor / c::hbar;
}

FieldConfig FieldConfig::from_fields(double bx_tesla, double bz_tesla, double g_factor) {
    double gm = gyromagnetic_ratio(g_factor);
    return {gm * bx_tesla, gm * bz_tesla};
}

double DecayModel::envelope(double tau) const {
    switch (kind) {
        case Kind::none:
            return 1.0;
        case Kind::exponential:
            return std::exp(-tau / timescale);
        case Kind::gaussian:
            return std::exp(-tau * tau / (timescale * timescale));
    }
    return 1.0;
}

Eigen::Matrix4cd hamiltonian(const FieldConfig& f) {
    Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 4; ++i)
        h(i, i) = f.omega_z * mj_values[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) {
        double m = mj_values[static_cast<std::size_t>(i)];
        double coupling = 0.5 * f.omega_x * std::sqrt(15.0 / 4.0 - m * (m + 1.0));
        h(i, i + 1) += coupling;
        h(i + 1, i) += coupling;
    }
    return h;
}

namespace {

struct EigenBasis {
    Eigen::Vector4d values;
    Eigen::Matrix4cd vectors;
};

EigenBasis diagonalize(const FieldConfig& f) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(hamiltonian(f));
    if (solver.info() != Eigen::Success)
        throw NumericError("spin Hamiltonian diagonalization failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::Vector4cd to_vector(const SpinState& s) {
    Eigen::Vector4cd v;
    for (int i = 0; i < 4; ++i)
        v(i) = s.amplitudes[static_cast<std::size_t>(i)];
    return v;
}

SpinState propagate(const EigenBasis& basis, const Eigen::Vector4cd& coeffs, double tau) {
    Eigen::Vector4cd phased;
    for (int i = 0; i < 4; ++i)
        phased(i) = std::exp(std::complex<double>(0.0, -basis.values(i) * tau)) * coeffs(i);
    Eigen::Vector4cd out = basis.vectors * phased;
    SpinState s;
    for (int i = 0; i < 4; ++i)
        s.amplitudes[static_cast<std::size_t>(i)] = out(i);
    s.renormalize();
    return s;
}

}  // namespace

SpinState evolve(const SpinState& s, const FieldConfig& f, double tau) {
    if (s.norm_error() > 1e-9)
        throw std::domain_error("evolve requires a normalized spin state");
    EigenBasis basis = diagonalize(f);
    Eigen::Vector4cd coeffs = basis.vectors.adjoint() * to_vector(s);
    return propagate(basis, coeffs, tau);
}

std::array<double, 4> populations(const SpinState& s) {
    std::array<double, 4> p{};
    for (std::size_t i = 0; i < 4; ++i)
        p[i] = std::norm(s.amplitudes[i]);
    return p;
}

double larmor_frequency(const FieldConfig& f) {
    return std::hypot(f.omega_z, f.omega_x);
}

double kappa_prime_two_transition(const TwoTransitionConfig& cfg, double gamma, double kappa) {
    if (!(gamma > 0))
        throw std::domain_error("two-transition response needs gamma > 0");
    if (cfg.g_half < 0 || cfg.g_threehalf < 0 || cfg.n_half < 0 || cfg.n_threehalf < 0)
        throw std::domain_error("couplings and ion numbers must be nonnegative");
    double term_half = cfg.g_half * cfg.g_half * cfg.n_half * gamma /
                       (gamma * gamma + cfg.delta_half * cfg.delta_half);
    double term_threehalf = cfg.g_threehalf * cfg.g_threehalf * cfg.n_threehalf * gamma /
                            (gamma * gamma + cfg.delta_threehalf * cfg.delta_threehalf);
    return kappa + term_half + term_threehalf;
}

std::vector<double> cooperativity_trace(double a, double b, double c_, double omega_l,
                                        const DecayModel& decay, std::span<const double> taus) {
    if (decay.kind != DecayModel::Kind::none && !(decay.timescale > 0))
        throw std::domain_error("decay model needs a positive timescale");
    std::vector<double> out;
    out.reserve(taus.size());
    double prev = 0.0;
    for (double tau : taus) {
        if (!(tau >= 0))
            throw std::domain_error("cooperativity_trace delays must be nonnegative");
        if (tau < prev)
            throw std::domain_error("cooperativity_trace delays must be sorted");
        prev = tau;
        double env = decay.envelope(tau);
        out.push_back((a * std::cos(omega_l * tau) + b * std::cos(2.0 * omega_l * tau)) * env + c_);
    }
    return out;
}

namespace {

// For one candidate frequency, solve the linear least squares
// a cos(w t) + b cos(2 w t) + c for each substate and return the total SSR.
double harmonics_ssr(const std::vector<std::array<double, 4>>& traces,
                     std::span<const double> taus, double omega,
                     std::array<HarmonicComponents, 4>* components) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    std::array<Eigen::Vector3d, 4> aty;
    aty.fill(Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        double basis[3] = {std::cos(omega * taus[i]), std::cos(2.0 * omega * taus[i]), 1.0};
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s)
                ata(r, s) += basis[r] * basis[s];
        for (std::size_t m = 0; m < 4; ++m)
            for (int r = 0; r < 3; ++r)
                aty[m](r) += basis[r] * traces[i][m];
    }
    auto solver = ata.ldlt();
    double ssr = 0;
    for (std::size_t m = 0; m < 4; ++m) {
        Eigen::Vector3d sol = solver.solve(aty[m]);
        if (components) {
            (*components)[m].a = sol(0);
            (*components)[m].b = sol(1);
            (*components)[m].c = sol(2);
        }
        for (std::size_t i = 0; i < taus.size(); ++i) {
            double f = sol(0) * std::cos(omega * taus[i]) +
                       sol(1) * std::cos(2.0 * omega * taus[i]) + sol(2);
            double r = traces[i][m] - f;
            ssr += r * r;
        }
    }
    return ssr;
}

}  // namespace

PopulationsTrace populations_trace(std::span<const WeightedSpinState> initial,
                                   const FieldConfig& f, std::span<const double> taus,
                                   double tolerance) {
    if (initial.empty())
        throw std::domain_error("populations_trace needs at least one initial state");
    if (taus.size() < 8)
        throw std::domain_error("populations_trace needs at least 8 delays");
    double total_weight = 0;
    for (const auto& ws : initial) {
        if (!(ws.weight >= 0))
            throw std::domain_error("initial state weights must be nonnegative");
        if (ws.state.norm_error() > 1e-9)
            throw std::domain_error("initial spin states must be normalized");
        total_weight += ws.weight;
    }
    if (!(total_weight > 0))
        throw std::domain_error("initial state weights must not all vanish");

    EigenBasis basis = diagonalize(f);

    PopulationsTrace out;
    out.populations.assign(taus.size(), {0.0, 0.0, 0.0, 0.0});
    for (const auto& ws : initial) {
        Eigen::Vector4cd coeffs = basis.vectors.adjoint() * to_vector(ws.state);
        for (std::size_t i = 0; i < taus.size(); ++i) {
            SpinState evolved = propagate(basis, coeffs, taus[i]);
            auto p = populations(evolved);
            for (std::size_t m = 0; m < 4; ++m)
                out.populations[i][m] += ws.weight / total_weight * p[m];
        }
    }

    // temporal variation per substate decides whether anything oscillates
    double range = 0;
    for (std::size_t m = 0; m < 4; ++m) {
        double lo = 1.0, hi = 0.0;
        for (const auto& p : out.populations) {
            lo = std::min(lo, p[m]);
            hi = std::max(hi, p[m]);
        }
        range = std::max(range, hi - lo);
    }

    double omega_l = larmor_frequency(f);
    if (range < 1e-12 || omega_l == 0.0) {
        // stationary populations (e.g. omega_x = 0 and diagonal initial states)
        for (std::size_t m = 0; m < 4; ++m) {
            double mean = 0;
            for (const auto& p : out.populations)
                mean += p[m];
            out.harmonics[m] = {0.0, 0.0, mean / static_cast<double>(taus.size())};
        }
        out.omega_fitted = omega_l;
        out.max_residual = 0.0;
        return out;
    }

    // Verification fit of the shared frequency around omega_L. Long windows
    // make the residual highly multimodal in omega (one sidelobe per beat
    // period), so scan densely enough to isolate the global basin, then
    // refine by golden section inside it.
    const double window = taus.back() - taus.front();
    const double lo_w = 0.75 * omega_l, hi_w = 1.25 * omega_l;
    const double basin = c::two_pi / std::max(window, 1.0 / omega_l);
    const int n_scan = std::max(64, static_cast<int>(std::ceil((hi_w - lo_w) / (basin / 8.0))));
    double best_omega = omega_l, best_ssr = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= n_scan; ++s) {
        double w = lo_w + (hi_w - lo_w) * s / n_scan;
        double ssr = harmonics_ssr(out.populations, taus, w, nullptr);
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best_omega = w;
        }
    }
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double step = (hi_w - lo_w) / n_scan;
    double a = best_omega - step, b = best_omega + step;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = harmonics_ssr(out.populations, taus, x1, nullptr);
    double f2 = harmonics_ssr(out.populations, taus, x2, nullptr);
    for (int it = 0; it < 120; ++it) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a);
            f1 = harmonics_ssr(out.populations, taus, x1, nullptr);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a);
            f2 = harmonics_ssr(out.populations, taus, x2, nullptr);
        }
    }
    out.omega_fitted = 0.5 * (a + b);
    double ssr = harmonics_ssr(out.populations, taus, out.omega_fitted, &out.harmonics);
    out.max_residual = std::sqrt(ssr / (4.0 * static_cast<double>(taus.size()))) / range;

    if (out.max_residual > tolerance)
        throw NumericError(
            "populations deviate from the two-harmonic form (rms residual " +
            std::to_string(out.max_residual) + "); initial state outside the model class");
    if (std::abs(out.omega_fitted - omega_l) > 1e-6 * omega_l)
        throw NumericError("fitted oscillation frequency disagrees with the Larmor frequency");
    return out;
}

PopulationsTrace populations_trace(const SpinState& initial, const FieldConfig& f,
                                   std::span<const double> taus, double tolerance) {
    WeightedSpinState ws{initial, 1.0};
    return populations_trace(std::span<const WeightedSpinState>(&ws, 1), f, taus, tolerance);
}

}  // namespace icqed::larmor
