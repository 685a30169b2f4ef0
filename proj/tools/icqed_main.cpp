// Command-line front end: compute, simulate, fit and pipeline commands with
// reproducible configuration and CSV/JSON outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "icqed/config.hpp"
#include "icqed/constants.hpp"
#include "icqed/cqed.hpp"
#include "icqed/crystal.hpp"
#include "icqed/errors.hpp"
#include "icqed/expsim.hpp"
#include "icqed/fit.hpp"
#include "icqed/larmor.hpp"
#include "icqed/motion.hpp"
#include "icqed/pipelines.hpp"
#include "icqed/trace.hpp"
#include "icqed/units.hpp"

namespace ic = icqed;
namespace c = icqed::constants;
namespace fs = std::filesystem;
using nlohmann::json;
using ic::units::Dimension;

namespace {

struct Global {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;  // 0: keep the config/default seed
    bool angular = false;

    ic::cfg::RunConfig config;
    std::vector<std::string> outputs;
    std::string command;
    json parameters;
};

double parse(const Global& g, const std::string& text, Dimension dim) {
    return ic::units::parse_quantity(text, dim, g.angular);
}

void load_config(Global& g) {
    if (!g.config_path.empty())
        g.config = ic::cfg::parse_config_file(g.config_path, g.angular);
    if (g.seed != 0)
        g.config.noise.rng_seed = g.seed;
    else
        g.seed = g.config.noise.rng_seed;
    if (g.out_dir.empty()) {
        const char* env = std::getenv("ICQED_OUTDIR");
        g.out_dir = env && *env ? env : ".";
    }
    fs::create_directories(g.out_dir);
}

fs::path out_path(Global& g, const std::string& name) {
    fs::path p = fs::path(g.out_dir) / name;
    g.outputs.push_back(p.string());
    return p;
}

void write_trace_csv(Global& g, const std::string& name, const ic::ScanTrace& trace,
                     const std::string& xh, const std::string& yh, double x_scale) {
    std::ofstream os(out_path(g, name));
    ic::ScanTrace scaled = trace;
    for (double& x : scaled.x)
        x *= x_scale;
    ic::write_csv(os, scaled, xh, yh);
}

void write_json_file(Global& g, const std::string& name, const json& j) {
    std::ofstream os(out_path(g, name));
    os << j.dump(2) << '\n';
}

void write_manifest(Global& g) {
    json manifest;
    manifest["command"] = g.command;
    manifest["parameters"] = g.parameters;
    manifest["seed"] = g.seed;
    manifest["outputs"] = g.outputs;
    manifest["version"] = "0.1.0";
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["generated_at"] = stamp;
    std::ofstream os(fs::path(g.out_dir) / "manifest.json");
    os << manifest.dump(2) << '\n';
}

std::string mhz(double angular) {
    return ic::format_double(ic::units::to_mhz(angular)) + " MHz (2pi convention)";
}

// --- command implementations -------------------------------------------------

struct RatesArgs {
    std::string length, t1, t2, loss, waist, wavelength;
};

void cmd_rates(Global& g, const RatesArgs& a) {
    ic::CavityParams p;
    if (!a.length.empty()) {
        p.length_l = parse(g, a.length, Dimension::length);
        p.t1 = parse(g, a.t1, Dimension::dimensionless);
        p.t2 = parse(g, a.t2, Dimension::dimensionless);
        p.losses_L = parse(g, a.loss, Dimension::dimensionless);
        p.waist_w0 = a.waist.empty() ? 37e-6 : parse(g, a.waist, Dimension::length);
        p.wavelength =
            a.wavelength.empty() ? c::ca40::d32_p12_wavelength
                                 : parse(g, a.wavelength, Dimension::length);
    } else {
        p = g.config.require_cavity();
    }
    auto r = ic::derive_cavity_rates(p);

    std::cout << "round-trip time tau : " << ic::format_double(r.tau * 1e9) << " ns\n"
              << "kappa_1             : " << mhz(r.kappa1) << "\n"
              << "kappa_2             : " << mhz(r.kappa2) << "\n"
              << "kappa_loss          : " << mhz(r.kappa_loss) << "\n"
              << "kappa (total)       : " << mhz(r.kappa) << "\n"
              << "free spectral range : " << ic::format_double(r.fsr_hz / 1e9) << " GHz\n"
              << "finesse             : " << ic::format_double(r.finesse) << "\n"
              << "Rayleigh range z0   : " << ic::format_double(r.rayleigh_z0 * 1e3) << " mm\n";

    json j{{"tau_s", r.tau},
           {"kappa1_mhz", ic::units::to_mhz(r.kappa1)},
           {"kappa2_mhz", ic::units::to_mhz(r.kappa2)},
           {"kappa_loss_mhz", ic::units::to_mhz(r.kappa_loss)},
           {"kappa_mhz", ic::units::to_mhz(r.kappa)},
           {"fsr_ghz", r.fsr_hz / 1e9},
           {"finesse", r.finesse},
           {"rayleigh_z0_m", r.rayleigh_z0}};
    write_json_file(g, "rates.json", j);
}

struct CouplingArgs {
    std::string g_rate, kappa, gamma, gamma_eff;
    double n_eff = 0;
};

void cmd_coupling(Global& g, const CouplingArgs& a) {
    double g_single;
    ic::CavityRates rates{};
    if (!a.g_rate.empty()) {
        g_single = parse(g, a.g_rate, Dimension::frequency);
    } else {
        auto t = g.config.require_transition();
        if (!t.dipole_moment)
            t.dipole_moment = c::ca40::d32_p12_sigma_dipole;
        g_single = ic::single_ion_coupling(t, g.config.require_cavity());
    }
    if (!a.kappa.empty())
        rates.kappa = parse(g, a.kappa, Dimension::frequency);
    else if (g.config.cavity)
        rates = ic::derive_cavity_rates(*g.config.cavity);
    else
        rates.kappa = c::two_pi * 2.1e6;
    double gamma = a.gamma.empty() ? c::ca40::p12_dipole_decay
                                   : parse(g, a.gamma, Dimension::frequency);
    double gamma_eff = a.gamma_eff.empty() ? gamma : parse(g, a.gamma_eff, Dimension::frequency);

    double gn = ic::collective_coupling(g_single, a.n_eff);
    ic::CoupledSystem sys{g_single, a.n_eff, gamma_eff, rates};
    double coop = ic::cooperativity(sys);
    bool strong = gn > rates.kappa && gn > gamma;

    std::cout << "single-ion g        : " << mhz(g_single) << "\n"
              << "effective ions N    : " << ic::format_double(a.n_eff) << "\n"
              << "collective g_N      : " << mhz(gn) << "\n"
              << "cooperativity C     : " << ic::format_double(coop) << "\n"
              << "kappa'(0) = kappa(1+2C) : " << mhz(rates.kappa * (1.0 + 2.0 * coop)) << "\n"
              << "collective strong coupling (g_N > kappa, gamma): "
              << (strong ? "yes" : "no") << "\n";

    json j{{"g_mhz", ic::units::to_mhz(g_single)},
           {"n_eff", a.n_eff},
           {"g_collective_mhz", ic::units::to_mhz(gn)},
           {"cooperativity", coop},
           {"strong_coupling", strong}};
    write_json_file(g, "coupling.json", j);
}

struct EffnArgs {
    std::string drho_rel, dx, deta_rel;
};

void cmd_effn(Global& g, const EffnArgs& a) {
    const auto& cs = g.config.require_crystal();
    const auto& cav = g.config.require_cavity();
    auto mode = ic::crystal::ModeGeometry::make(cav.waist_w0, cav.wavelength);

    double n_eff = ic::crystal::effective_ion_count(cs, mode);
    double n_thin =
        ic::crystal::effective_ion_count_thin(cs.density_rho, cs.half_length_L, cav.waist_w0) *
        cs.pump_efficiency_eta;
    double n_tot = ic::crystal::total_ion_count(cs);

    std::cout << "effective N (quadrature)   : " << ic::format_double(n_eff) << "\n"
              << "effective N (thin formula) : " << ic::format_double(n_thin) << "\n"
              << "total ions N_tot           : " << ic::format_double(n_tot) << "\n";

    json j{{"n_eff", n_eff}, {"n_eff_thin", n_thin}, {"n_total", n_tot}};

    if (!a.drho_rel.empty() || !a.dx.empty() || !a.deta_rel.empty()) {
        double drho = a.drho_rel.empty() ? 0 : parse(g, a.drho_rel, Dimension::dimensionless);
        double dx = a.dx.empty() ? 0 : parse(g, a.dx, Dimension::length);
        double deta = a.deta_rel.empty() ? 0 : parse(g, a.deta_rel, Dimension::dimensionless);
        double rel = ic::crystal::count_uncertainty(drho, dx, cs, deta);
        std::cout << "relative uncertainty dN/N  : " << ic::format_double(rel * 100) << " %\n"
                  << "N = " << ic::format_double(n_eff) << " +- "
                  << ic::format_double(rel * n_eff) << "\n";
        j["rel_uncertainty"] = rel;
        j["abs_uncertainty"] = rel * n_eff;
    }
    write_json_file(g, "effn.json", j);
}

struct SpectrumArgs {
    double n_eff = 0;
    std::string gamma_eff, g_rate, span;
    int points = 401;
};

void cmd_spectrum(Global& g, const SpectrumArgs& a) {
    auto rates = ic::derive_cavity_rates(g.config.require_cavity());
    double g_single = a.g_rate.empty() ? c::two_pi * 0.53e6
                                       : parse(g, a.g_rate, Dimension::frequency);
    double gamma_eff = a.gamma_eff.empty() ? c::two_pi * 11.9e6
                                           : parse(g, a.gamma_eff, Dimension::frequency);
    double span = a.span.empty() ? c::two_pi * 80e6 : parse(g, a.span, Dimension::frequency);

    ic::CoupledSystem sys{g_single, a.n_eff, gamma_eff, rates};
    std::vector<double> grid(a.points);
    for (int i = 0; i < a.points; ++i)
        grid[i] = -0.5 * span + span * i / (a.points - 1);
    auto trace = ic::rabi_spectrum(sys, grid);

    // local reflectivity minima mark the normal modes
    std::vector<double> minima;
    for (std::size_t i = 1; i + 1 < trace.y.size(); ++i)
        if (trace.y[i] < trace.y[i - 1] && trace.y[i] < trace.y[i + 1])
            minima.push_back(trace.x[i]);
    std::cout << "normal-mode minima:";
    for (double m : minima)
        std::cout << ' ' << ic::format_double(ic::units::to_mhz(m)) << " MHz";
    std::cout << "\n";
    if (minima.size() == 2)
        std::cout << "splitting/2 = " << mhz(0.5 * (minima[1] - minima[0]))
                  << " (compare g_N = " << mhz(sys.g_collective()) << ")\n";

    write_trace_csv(g, "spectrum.csv", trace, "detuning_mhz", "reflectivity",
                    1.0 / (c::two_pi * 1e6));
}

struct ThermalArgs {
    double n_eff = 520;
    std::string g_rate, gamma, span;
    int points = 81;
};

void cmd_thermal(Global& g, const ThermalArgs& a) {
    auto rates = ic::derive_cavity_rates(g.config.require_cavity());
    const auto& th = g.config.require_thermal();
    double g_single = a.g_rate.empty() ? c::two_pi * 0.53e6
                                       : parse(g, a.g_rate, Dimension::frequency);
    double gamma = a.gamma.empty() ? c::ca40::p12_dipole_decay
                                   : parse(g, a.gamma, Dimension::frequency);
    double span = a.span.empty() ? c::two_pi * 160e6 : parse(g, a.span, Dimension::frequency);

    ic::CoupledSystem sys{g_single, a.n_eff, gamma, rates};

    std::vector<double> grid(a.points);
    for (int i = 0; i < a.points; ++i)
        grid[i] = -0.5 * span + span * i / (a.points - 1);

    std::ofstream os(out_path(g, "thermal.csv"));
    os << "delta_mhz,kappa_prime_mhz,kappa_prime_t0_mhz,shift_mhz\n";
    for (double d : grid) {
        auto warm = ic::motion::thermal_response(sys, d, 0.0, th);
        auto cold = ic::effective_response(sys, d, 0.0);
        os << ic::format_double(ic::units::to_mhz(d)) << ','
           << ic::format_double(ic::units::to_mhz(warm.kappa_prime)) << ','
           << ic::format_double(ic::units::to_mhz(cold.kappa_prime)) << ','
           << ic::format_double(ic::units::to_mhz(warm.delta_c_prime)) << '\n';
    }

    auto eg = ic::motion::effective_gamma(sys, th, grid);
    auto validity = ic::motion::validity_check(sys, th);
    std::cout << "gamma (input)          : " << mhz(gamma) << "\n"
              << "gamma' (Lorentzian fit): " << mhz(eg.fitted) << "\n"
              << "gamma' (closed form)   : " << mhz(eg.closed_form) << "\n"
              << "Doppler shift k*vD     : " << mhz(validity.doppler_shift) << "\n"
              << "min system rate        : " << mhz(validity.min_system_rate) << "\n"
              << "margin                 : " << ic::format_double(validity.margin) << "\n"
              << "slow-motion treatment valid: " << (validity.valid ? "yes" : "no")
              << (validity.strict ? " (10x margin)" : "") << "\n";

    json j{{"gamma_mhz", ic::units::to_mhz(gamma)},
           {"gamma_eff_fit_mhz", ic::units::to_mhz(eg.fitted)},
           {"gamma_eff_closed_form_mhz", ic::units::to_mhz(eg.closed_form)},
           {"doppler_shift_mhz", ic::units::to_mhz(validity.doppler_shift)},
           {"margin", validity.margin},
           {"valid", validity.valid}};
    write_json_file(g, "thermal.json", j);
}

struct LarmorArgs {
    std::string bx, bz, g_factor, tau_max, tau_step;
    std::string initial = "symmetric";
};

void cmd_larmor(Global& g, const LarmorArgs& a) {
    double g_factor = a.g_factor.empty() ? g.config.larmor_g_factor
                                         : parse(g, a.g_factor, Dimension::dimensionless);
    ic::larmor::FieldConfig field;
    if (!a.bx.empty() || !a.bz.empty()) {
        field = ic::larmor::FieldConfig::from_fields(
            a.bx.empty() ? 0.0 : parse(g, a.bx, Dimension::magnetic_field),
            a.bz.empty() ? 0.0 : parse(g, a.bz, Dimension::magnetic_field), g_factor);
    } else {
        field = g.config.require_larmor();
    }
    double tau_max = a.tau_max.empty() ? 120e-6 : parse(g, a.tau_max, Dimension::time);
    double tau_step = a.tau_step.empty() ? 1e-6 : parse(g, a.tau_step, Dimension::time);

    std::vector<double> taus;
    for (double t = 0; t <= tau_max * (1 + 1e-12); t += tau_step)
        taus.push_back(t);

    std::vector<ic::larmor::WeightedSpinState> initial;
    if (a.initial == "symmetric") {
        initial = {{ic::larmor::SpinState::basis(0), 0.5},
                   {ic::larmor::SpinState::basis(3), 0.5}};
    } else if (a.initial == "plus32") {
        initial = {{ic::larmor::SpinState::basis(3), 1.0}};
    } else {
        throw ic::DataError("unknown initial state '" + a.initial +
                            "' (expected symmetric or plus32)");
    }

    auto trace = ic::larmor::populations_trace(initial, field, taus);

    std::ofstream os(out_path(g, "populations.csv"));
    os << "tau_us,p_minus32,p_minus12,p_plus12,p_plus32\n";
    for (std::size_t i = 0; i < taus.size(); ++i) {
        os << ic::format_double(taus[i] * 1e6);
        for (int m = 0; m < 4; ++m)
            os << ',' << ic::format_double(trace.populations[i][static_cast<std::size_t>(m)]);
        os << '\n';
    }

    double wl = ic::larmor::larmor_frequency(field);
    std::cout << "omega_L : 2pi x " << ic::format_double(wl / (c::two_pi * 1e3)) << " kHz"
              << "  (period " << ic::format_double(c::two_pi / wl * 1e6) << " us)\n"
              << "fitted  : 2pi x "
              << ic::format_double(trace.omega_fitted / (c::two_pi * 1e3)) << " kHz\n";
    static const char* labels[4] = {"m=-3/2", "m=-1/2", "m=+1/2", "m=+3/2"};
    for (int m = 0; m < 4; ++m) {
        const auto& h = trace.harmonics[static_cast<std::size_t>(m)];
        std::cout << labels[m] << " : " << ic::format_double(h.a) << " cos(wt) + "
                  << ic::format_double(h.b) << " cos(2wt) + " << ic::format_double(h.c) << "\n";
    }
}

struct SimulateArgs {
    std::string mode;  // scan, locked, larmor
    double n_eff = 520;
    std::string g_rate, gamma_eff, delta, span;
    int points = 161;
    int sequences = 20000;
    std::string bx, bz, tau_max, tau_step, decay = "none", coherence_time;
};

void cmd_simulate(Global& g, const SimulateArgs& a) {
    auto noise = g.config.noise;
    if (a.mode == "scan" || a.mode == "locked") {
        auto rates = ic::derive_cavity_rates(g.config.require_cavity());
        double g_single = a.g_rate.empty() ? c::two_pi * 0.53e6
                                           : parse(g, a.g_rate, Dimension::frequency);
        double gamma_eff = a.gamma_eff.empty() ? c::two_pi * 11.9e6
                                               : parse(g, a.gamma_eff, Dimension::frequency);
        ic::CoupledSystem sys{g_single, a.n_eff, gamma_eff, rates};
        if (a.mode == "scan") {
            double delta = a.delta.empty() ? 0.0 : parse(g, a.delta, Dimension::frequency);
            auto trace = ic::sim::simulate_scan(sys, delta, g.config.scan, noise, g.config.timing);
            write_trace_csv(g, "scan.csv", trace, "detuning_mhz", "counts",
                            1.0 / (c::two_pi * 1e6));
            double photons = ic::sim::mean_intracavity_photons(sys, delta, 0.0, noise);
            if (photons >= 1.0)
                std::cerr << "warning: mean intracavity photon number "
                          << ic::format_double(photons) << " >= 1, outside the low-saturation regime\n";
            std::cout << "wrote scan.csv (" << trace.x.size() << " samples)\n";
        } else {
            double span = a.span.empty() ? c::two_pi * 80e6 : parse(g, a.span, Dimension::frequency);
            std::vector<double> grid(a.points);
            for (int i = 0; i < a.points; ++i)
                grid[i] = -0.5 * span + span * i / (a.points - 1);
            auto trace = ic::sim::simulate_locked(sys, grid, g.config.timing, noise, a.sequences);
            write_trace_csv(g, "locked.csv", trace, "detuning_mhz", "reflectivity",
                            1.0 / (c::two_pi * 1e6));
            std::cout << "wrote locked.csv (" << trace.x.size() << " points)\n";
        }
        return;
    }
    if (a.mode == "larmor") {
        auto rates = ic::derive_cavity_rates(g.config.require_cavity());
        double g_factor = g.config.larmor_g_factor;
        ic::larmor::FieldConfig field =
            (!a.bx.empty() || !a.bz.empty())
                ? ic::larmor::FieldConfig::from_fields(
                      a.bx.empty() ? 0.0 : parse(g, a.bx, Dimension::magnetic_field),
                      a.bz.empty() ? 0.0 : parse(g, a.bz, Dimension::magnetic_field), g_factor)
                : g.config.require_larmor();
        double tau_max = a.tau_max.empty() ? 120e-6 : parse(g, a.tau_max, Dimension::time);
        double tau_step = a.tau_step.empty() ? 1e-6 : parse(g, a.tau_step, Dimension::time);
        std::vector<double> taus;
        for (double t = 0; t <= tau_max * (1 + 1e-12); t += tau_step)
            taus.push_back(t);

        ic::larmor::DecayModel decay;
        if (a.decay == "none") decay.kind = ic::larmor::DecayModel::Kind::none;
        else if (a.decay == "exp") decay.kind = ic::larmor::DecayModel::Kind::exponential;
        else if (a.decay == "gauss") decay.kind = ic::larmor::DecayModel::Kind::gaussian;
        else throw ic::DataError("unknown decay kind '" + a.decay + "'");
        if (decay.kind != ic::larmor::DecayModel::Kind::none)
            decay.timescale = a.coherence_time.empty()
                                  ? 1.7e-3
                                  : parse(g, a.coherence_time, Dimension::time);

        double g_single = a.g_rate.empty() ? c::two_pi * 0.53e6
                                           : parse(g, a.g_rate, Dimension::frequency);
        ic::larmor::TwoTransitionConfig transitions;
        transitions.g_threehalf = g_single;
        transitions.g_half = g_single / std::sqrt(3.0);
        transitions.n_half = a.n_eff;
        transitions.n_threehalf = a.n_eff;

        std::vector<ic::larmor::WeightedSpinState> mixture = {
            {ic::larmor::SpinState::basis(0), 0.5}, {ic::larmor::SpinState::basis(3), 0.5}};
        auto trace = ic::sim::simulate_larmor(mixture, field, transitions, decay, taus, noise,
                                              rates.kappa);
        ic::ScanTrace scaled = trace;
        for (double& x : scaled.x)
            x *= 1e6;
        std::ofstream os(out_path(g, "larmor.csv"));
        ic::write_csv(os, scaled, "tau_us", "cooperativity");
        std::cout << "wrote larmor.csv (" << trace.x.size() << " delays)\n";
        return;
    }
    throw ic::DataError("unknown simulate mode '" + a.mode + "' (scan, locked, larmor)");
}

struct FitArgs {
    std::string model, input;
    std::string gamma_eff, kappa, kappa1;
};

void cmd_fit(Global& g, const FitArgs& a) {
    std::ifstream in(a.input);
    if (!in)
        throw ic::DataError("cannot open input CSV: " + a.input);
    auto table = ic::read_csv(in);
    const double mhz_scale = c::two_pi * 1e6;

    json j;
    j["model"] = a.model;
    if (a.model == "lorentzian" || a.model == "rabi") {
        ic::ScanTrace trace;
        const auto& x = table.column("detuning_mhz");
        trace.x.reserve(x.size());
        for (double v : x)
            trace.x.push_back(v * mhz_scale);
        if (std::find(table.header.begin(), table.header.end(), std::string("counts")) !=
            table.header.end()) {
            trace.y = table.column("counts");
            trace.kind = ic::TraceKind::counts;
        } else {
            trace.y = table.column("reflectivity");
            trace.kind = ic::TraceKind::normalized;
        }
        if (a.model == "lorentzian") {
            auto dip = ic::fit::fit_lorentzian_dip(trace);
            std::cout << "center : " << mhz(dip.center) << "\n"
                      << "kappa' (HWHM): " << mhz(dip.hwhm) << " +- "
                      << ic::format_double(dip.fit.std_errors[1]) << " MHz\n"
                      << "depth  : " << ic::format_double(dip.depth) << "\n"
                      << "offset : " << ic::format_double(dip.offset) << "\n";
            j["center_mhz"] = ic::units::to_mhz(dip.center);
            j["kappa_prime_mhz"] = ic::units::to_mhz(dip.hwhm);
            j["depth"] = dip.depth;
            j["offset"] = dip.offset;
            j["converged"] = dip.fit.converged;
        } else {
            if (a.gamma_eff.empty() || a.kappa.empty() || a.kappa1.empty())
                throw ic::DataError("fit rabi needs --gamma-eff, --kappa and --kappa1");
            ic::CavityRates rates{};
            rates.kappa = parse(g, a.kappa, Dimension::frequency);
            rates.kappa1 = parse(g, a.kappa1, Dimension::frequency);
            auto fit = ic::fit::fit_rabi(trace, rates, parse(g, a.gamma_eff, Dimension::frequency));
            std::cout << "g_N : " << mhz(fit.g_collective) << " +- "
                      << ic::format_double(fit.fit.std_errors[0]) << " MHz\n";
            j["g_collective_mhz"] = ic::units::to_mhz(fit.g_collective);
            j["g_collective_se_mhz"] = fit.fit.std_errors[0];
            j["converged"] = fit.fit.converged;
        }
    } else if (a.model == "absorption") {
        std::vector<double> deltas, kappas;
        for (double v : table.column("delta_mhz"))
            deltas.push_back(v * mhz_scale);
        for (double v : table.column("kappa_prime_mhz"))
            kappas.push_back(v * mhz_scale);
        auto fit = ic::fit::fit_absorption(deltas, kappas);
        std::cout << "g_N    : " << mhz(fit.g_collective) << " +- "
                  << ic::format_double(fit.fit.std_errors[0]) << " MHz\n"
                  << "gamma' : " << mhz(fit.gamma_eff) << " +- "
                  << ic::format_double(fit.fit.std_errors[1]) << " MHz\n"
                  << "kappa  : " << mhz(fit.kappa) << " +- "
                  << ic::format_double(fit.fit.std_errors[2]) << " MHz\n";
        j["g_collective_mhz"] = ic::units::to_mhz(fit.g_collective);
        j["gamma_eff_mhz"] = ic::units::to_mhz(fit.gamma_eff);
        j["kappa_mhz"] = ic::units::to_mhz(fit.kappa);
        j["converged"] = fit.fit.converged;
    } else if (a.model == "dispersion") {
        std::vector<double> deltas, shifts;
        for (double v : table.column("delta_mhz"))
            deltas.push_back(v * mhz_scale);
        for (double v : table.column("shift_mhz"))
            shifts.push_back(v * mhz_scale);
        auto fit = ic::fit::fit_dispersion(deltas, shifts);
        std::cout << "g_N    : " << mhz(fit.g_collective) << " +- "
                  << ic::format_double(fit.fit.std_errors[0]) << " MHz\n"
                  << "gamma' : " << mhz(fit.gamma_eff) << " +- "
                  << ic::format_double(fit.fit.std_errors[1]) << " MHz\n";
        j["g_collective_mhz"] = ic::units::to_mhz(fit.g_collective);
        j["gamma_eff_mhz"] = ic::units::to_mhz(fit.gamma_eff);
        j["converged"] = fit.fit.converged;
    } else if (a.model == "sqrtn") {
        const auto& n = table.column("n_eff");
        std::vector<double> gn;
        for (double v : table.column("g_n_mhz"))
            gn.push_back(v * mhz_scale);
        auto fit = ic::fit::fit_sqrtN(n, gn);
        std::cout << "g : " << mhz(fit.g_single) << " +- "
                  << ic::format_double(fit.fit.std_errors[0]) << " MHz\n";
        j["g_single_mhz"] = ic::units::to_mhz(fit.g_single);
        j["converged"] = fit.fit.converged;
    } else if (a.model == "larmor") {
        std::vector<double> taus;
        for (double v : table.column("tau_us"))
            taus.push_back(v * 1e-6);
        const auto& coop = table.column("cooperativity");
        auto fit = ic::fit::fit_larmor(taus, coop);
        auto report = [&](const char* label, const ic::fit::LarmorEnvelopeFit& f) {
            std::cout << label << ": omega_L = 2pi x "
                      << ic::format_double(f.omega / (c::two_pi * 1e3)) << " kHz, timescale = "
                      << ic::format_double(f.timescale * 1e3) << " ms, profiled ["
                      << ic::format_double(f.timescale_lower * 1e3) << ", "
                      << ic::format_double(f.timescale_upper * 1e3) << "] ms, chi2_red = "
                      << ic::format_double(f.chi2_reduced) << "\n";
        };
        report("exponential", fit.exponential);
        report("gaussian   ", fit.gaussian);
        j["exponential"] = {{"omega_l_khz", fit.exponential.omega / (c::two_pi * 1e3)},
                            {"timescale_ms", fit.exponential.timescale * 1e3},
                            {"chi2_reduced", fit.exponential.chi2_reduced}};
        j["gaussian"] = {{"omega_l_khz", fit.gaussian.omega / (c::two_pi * 1e3)},
                         {"timescale_ms", fit.gaussian.timescale * 1e3},
                         {"chi2_reduced", fit.gaussian.chi2_reduced}};
    } else if (a.model == "calibration") {
        std::vector<double> currents;
        for (double v : table.column("current_ma"))
            currents.push_back(v * 1e-3);
        std::vector<double> omegas;
        for (double v : table.column("omega_l_khz"))
            omegas.push_back(v * c::two_pi * 1e3);
        auto fit = ic::fit::fit_calibration(currents, omegas);
        double g_factor = g.config.larmor_g_factor;
        std::cout << "omega_z : 2pi x " << ic::format_double(fit.omega_z / (c::two_pi * 1e3))
                  << " kHz\nslope   : 2pi x "
                  << ic::format_double(fit.slope / (c::two_pi * 1e3) * 1e-3)
                  << " kHz/mA\nB_z     : " << ic::format_double(fit.bz_tesla(g_factor) * 1e4)
                  << " G\nB_x/I   : " << ic::format_double(fit.bx_tesla_per_amp(g_factor) * 1e4)
                  << " G/A\n";
        j["omega_z_khz"] = fit.omega_z / (c::two_pi * 1e3);
        j["slope_khz_per_ma"] = fit.slope / (c::two_pi * 1e3) * 1e-3;
        j["bz_gauss"] = fit.bz_tesla(g_factor) * 1e4;
        j["converged"] = fit.fit.converged;
    } else {
        throw ic::DataError("unknown fit model '" + a.model + "'");
    }
    write_json_file(g, "fit.json", j);
}

struct PipelineArgs {
    std::string name;
    bool noiseless = false;
    bool normalize = false;
    double n_eff = 0;
    int sequences = 0;
};

void cmd_pipeline(Global& g, const PipelineArgs& a) {
    auto name = ic::sim::pipeline_from_string(a.name);
    ic::sim::PipelineConfig cfg;
    cfg.noise = g.config.noise;
    cfg.noise.noiseless = a.noiseless;
    cfg.normalize_oscillation = a.normalize;
    if (a.n_eff > 0)
        cfg.n_eff = a.n_eff;
    if (a.sequences > 0)
        cfg.locked_sequences = a.sequences;
    if (g.config.cavity)
        cfg.cavity = *g.config.cavity;

    auto result = ic::sim::run_pipeline(name, cfg, g.seed);

    json j;
    j["pipeline"] = result.name;
    std::cout << "pipeline " << result.name << " (seed " << g.seed << ")\n";
    for (const auto& [key, est] : result.estimates) {
        std::cout << "  " << key << ": injected " << ic::format_double(est.injected)
                  << ", recovered " << ic::format_double(est.recovered) << " +- "
                  << ic::format_double(est.std_error) << "\n";
        j["estimates"][key] = {{"injected", est.injected},
                               {"recovered", est.recovered},
                               {"std_error", est.std_error}};
    }
    for (const auto& note : result.notes) {
        std::cout << "  " << note << "\n";
        j["notes"].push_back(note);
    }
    for (const auto& product : result.traces) {
        std::string file = result.name + "_" + product.label + ".csv";
        write_trace_csv(g, file, product.trace, product.x_header, product.y_header,
                        product.x_scale);
    }
    write_json_file(g, result.name + "_summary.json", j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion Coulomb crystal cavity-QED toolkit"};
    app.require_subcommand(1);

    Global g;
    app.add_option("--config", g.config_path, "run configuration file");
    app.add_option("--out", g.out_dir, "output directory (default $ICQED_OUTDIR or .)");
    app.add_option("--seed", g.seed, "RNG seed override");
    app.add_flag("--angular", g.angular,
                 "frequency inputs are angular (rad/s scale) instead of 2pi x unit");

    RatesArgs rates_args;
    auto* rates_cmd = app.add_subcommand("rates", "cavity rates from mirror parameters");
    rates_cmd->add_option("--length", rates_args.length, "cavity length, e.g. 11.8mm");
    rates_cmd->add_option("--t1", rates_args.t1, "PT mirror transmission, e.g. 1500ppm");
    rates_cmd->add_option("--t2", rates_args.t2, "HR mirror transmission");
    rates_cmd->add_option("--loss", rates_args.loss, "round-trip losses");
    rates_cmd->add_option("--waist", rates_args.waist, "mode waist");
    rates_cmd->add_option("--wavelength", rates_args.wavelength, "wavelength");

    CouplingArgs coupling_args;
    auto* coupling_cmd = app.add_subcommand("coupling", "collective coupling and cooperativity");
    coupling_cmd->add_option("--g", coupling_args.g_rate, "single-ion coupling, e.g. 0.53MHz");
    coupling_cmd->add_option("--n", coupling_args.n_eff, "effective ion number")->required();
    coupling_cmd->add_option("--kappa", coupling_args.kappa, "cavity decay rate");
    coupling_cmd->add_option("--gamma", coupling_args.gamma, "natural dipole decay rate");
    coupling_cmd->add_option("--gamma-eff", coupling_args.gamma_eff, "effective dipole decay rate");

    EffnArgs effn_args;
    auto* effn_cmd = app.add_subcommand("effn", "effective ion number of a crystal");
    effn_cmd->add_option("--drho", effn_args.drho_rel, "relative density uncertainty");
    effn_cmd->add_option("--dx", effn_args.dx, "imaging resolution, e.g. 1um");
    effn_cmd->add_option("--deta", effn_args.deta_rel, "relative pumping uncertainty");

    SpectrumArgs spectrum_args;
    auto* spectrum_cmd = app.add_subcommand("spectrum", "model normal-mode spectrum");
    spectrum_cmd->add_option("--n", spectrum_args.n_eff, "effective ion number")->required();
    spectrum_cmd->add_option("--g", spectrum_args.g_rate, "single-ion coupling");
    spectrum_cmd->add_option("--gamma-eff", spectrum_args.gamma_eff, "effective dipole decay");
    spectrum_cmd->add_option("--span", spectrum_args.span, "scan span");
    spectrum_cmd->add_option("--points", spectrum_args.points, "grid points");

    ThermalArgs thermal_args;
    auto* thermal_cmd = app.add_subcommand("thermal", "Doppler-averaged cavity response");
    thermal_cmd->add_option("--n", thermal_args.n_eff, "effective ion number");
    thermal_cmd->add_option("--g", thermal_args.g_rate, "single-ion coupling");
    thermal_cmd->add_option("--gamma", thermal_args.gamma, "natural dipole decay");
    thermal_cmd->add_option("--span", thermal_args.span, "detuning span for the fit grid");
    thermal_cmd->add_option("--points", thermal_args.points, "grid points");

    LarmorArgs larmor_args;
    auto* larmor_cmd = app.add_subcommand("larmor", "Zeeman populations under Larmor precession");
    larmor_cmd->add_option("--bx", larmor_args.bx, "transverse field, e.g. 0.15G");
    larmor_cmd->add_option("--bz", larmor_args.bz, "longitudinal field");
    larmor_cmd->add_option("--g-factor", larmor_args.g_factor, "Lande g factor");
    larmor_cmd->add_option("--tau-max", larmor_args.tau_max, "maximum delay");
    larmor_cmd->add_option("--tau-step", larmor_args.tau_step, "delay step");
    larmor_cmd->add_option("--initial", larmor_args.initial, "symmetric or plus32");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "synthetic measurement traces");
    sim_cmd->add_option("mode", sim_args.mode, "scan, locked or larmor")->required();
    sim_cmd->add_option("--n", sim_args.n_eff, "effective ion number");
    sim_cmd->add_option("--g", sim_args.g_rate, "single-ion coupling");
    sim_cmd->add_option("--gamma-eff", sim_args.gamma_eff, "effective dipole decay");
    sim_cmd->add_option("--delta", sim_args.delta, "probe detuning (scan mode)");
    sim_cmd->add_option("--span", sim_args.span, "grid span (locked mode)");
    sim_cmd->add_option("--points", sim_args.points, "grid points (locked mode)");
    sim_cmd->add_option("--sequences", sim_args.sequences, "sequences per point (locked mode)");
    sim_cmd->add_option("--bx", sim_args.bx, "transverse field (larmor mode)");
    sim_cmd->add_option("--bz", sim_args.bz, "longitudinal field (larmor mode)");
    sim_cmd->add_option("--tau-max", sim_args.tau_max, "maximum delay (larmor mode)");
    sim_cmd->add_option("--tau-step", sim_args.tau_step, "delay step (larmor mode)");
    sim_cmd->add_option("--decay", sim_args.decay, "none, exp or gauss (larmor mode)");
    sim_cmd->add_option("--coherence-time", sim_args.coherence_time, "decay timescale");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "fit a model to CSV data");
    fit_cmd->add_option("--model", fit_args.model,
                        "lorentzian, absorption, dispersion, rabi, sqrtn, larmor, calibration")
        ->required();
    fit_cmd->add_option("--input", fit_args.input, "input CSV file")->required();
    fit_cmd->add_option("--gamma-eff", fit_args.gamma_eff, "fixed gamma' (rabi model)");
    fit_cmd->add_option("--kappa", fit_args.kappa, "cavity decay rate (rabi model)");
    fit_cmd->add_option("--kappa1", fit_args.kappa1, "input-mirror decay rate (rabi model)");

    PipelineArgs pipe_args;
    auto* pipe_cmd = app.add_subcommand("pipeline", "figure-reproduction pipelines");
    pipe_cmd->add_option("name", pipe_args.name, "fig4 fig5a fig5b fig6 fig7 fig8 fig9a fig9b fig10")
        ->required();
    pipe_cmd->add_flag("--noiseless", pipe_args.noiseless, "disable all noise sources");
    pipe_cmd->add_flag("--normalize", pipe_args.normalize,
                       "normalize oscillation traces to the one-period rolling mean");
    pipe_cmd->add_option("--n", pipe_args.n_eff, "effective ion number override");
    pipe_cmd->add_option("--sequences", pipe_args.sequences, "locked sequences per point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        load_config(g);
        if (rates_cmd->parsed()) {
            g.command = "rates";
            cmd_rates(g, rates_args);
        } else if (coupling_cmd->parsed()) {
            g.command = "coupling";
            cmd_coupling(g, coupling_args);
        } else if (effn_cmd->parsed()) {
            g.command = "effn";
            cmd_effn(g, effn_args);
        } else if (spectrum_cmd->parsed()) {
            g.command = "spectrum";
            cmd_spectrum(g, spectrum_args);
        } else if (thermal_cmd->parsed()) {
            g.command = "thermal";
            cmd_thermal(g, thermal_args);
        } else if (larmor_cmd->parsed()) {
            g.command = "larmor";
            cmd_larmor(g, larmor_args);
        } else if (sim_cmd->parsed()) {
            g.command = "simulate " + sim_args.mode;
            cmd_simulate(g, sim_args);
        } else if (fit_cmd->parsed()) {
            g.command = "fit " + fit_args.model;
            cmd_fit(g, fit_args);
        } else if (pipe_cmd->parsed()) {
            g.command = "pipeline " + pipe_args.name;
            cmd_pipeline(g, pipe_args);
        }
        write_manifest(g);
    } catch (const ic::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const ic::DataError& e) {
        std::cerr << "data error";
        if (e.line > 0)
            std::cerr << " (line " << e.line << ", column " << e.column << ")";
        std::cerr << ": " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
