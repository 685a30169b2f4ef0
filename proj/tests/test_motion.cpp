#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "icqed/constants.hpp"
#include "icqed/cqed.hpp"
#include "icqed/errors.hpp"
#include "icqed/motion.hpp"
#include "oracles.hpp"

using namespace icqed;
using namespace icqed::motion;
namespace c = constants;

namespace {

CoupledSystem paper_system(double n_eff, double gamma = c::ca40::p12_dipole_decay) {
    CoupledSystem sys;
    sys.g = c::two_pi * 0.53e6;
    sys.n_eff = n_eff;
    sys.gamma_eff = gamma;
    sys.rates = derive_cavity_rates({11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9});
    return sys;
}

ThermalConfig paper_thermal(double temperature) {
    return {temperature, c::ca40::ion_mass, c::two_pi / 866e-9};
}

CoupledResponse oracle_response(const CoupledSystem& sys, double delta, double delta_c,
                                const ThermalConfig& th) {
    double vd = th.doppler_velocity();
    double gamma = sys.gamma_eff;
    double g2n = sys.g * sys.g * sys.n_eff;
    double abs_avg = oracles::maxwell_average(
        [&](double v) { return gamma * doppler_kernel(v, gamma, delta, th.wavenumber); }, vd);
    double disp_avg = oracles::maxwell_average(
        [&](double v) {
            return (delta - th.wavenumber * v) * doppler_kernel(v, gamma, delta, th.wavenumber);
        },
        vd);
    return {sys.rates.kappa + g2n * abs_avg, delta_c - g2n * disp_avg};
}

}  // namespace

TEST_CASE("velocity kernel") {
    double gamma = c::two_pi * 11.2e6;
    double k = c::two_pi / 866e-9;

    SUBCASE("at rest it reduces to the Lorentzian denominator") {
        double delta = c::two_pi * 3e6;
        CHECK(doppler_kernel(0, gamma, delta, k) ==
              doctest::Approx(1.0 / (gamma * gamma + delta * delta)).epsilon(1e-14));
    }
    SUBCASE("even in velocity") {
        for (double v : {0.3, 1.7, 9.2})
            CHECK(doppler_kernel(v, gamma, c::two_pi * 5e6, k) ==
                  doctest::Approx(doppler_kernel(-v, gamma, c::two_pi * 5e6, k)).epsilon(1e-14));
    }
    SUBCASE("resonant ion moving one linewidth") {
        double v = gamma / k;
        CHECK(doppler_kernel(v, gamma, 0, k) ==
              doctest::Approx(1.0 / (2.0 * gamma * gamma)).epsilon(1e-14));
    }
}

TEST_CASE("zero temperature reduces to the static response") {
    auto sys = paper_system(520);
    auto th = paper_thermal(0.0);
    for (double delta_mhz : {-20.0, -5.0, 0.0, 3.0, 40.0}) {
        double delta = c::two_pi * delta_mhz * 1e6;
        auto warm = thermal_response(sys, delta, c::two_pi * 1e6, th);
        auto cold = effective_response(sys, delta, c::two_pi * 1e6);
        CHECK(warm.kappa_prime == doctest::Approx(cold.kappa_prime).epsilon(1e-10));
        CHECK(warm.delta_c_prime == doctest::Approx(cold.delta_c_prime).epsilon(1e-10));
    }
}

TEST_CASE("thermal response at the measured temperature") {
    auto sys = paper_system(520);
    sys.rates.kappa = c::two_pi * 2.1e6;  // the measured width rather than the mirror budget
    auto th = paper_thermal(0.024);

    auto resp = thermal_response(sys, 0.0, 0.0, th);
    // independently cross-checked velocity average
    CHECK(resp.kappa_prime / (c::two_pi * 1e6) == doctest::Approx(14.538).epsilon(0.001));

    auto oracle = oracle_response(sys, 0.0, 0.0, th);
    CHECK(std::abs(resp.kappa_prime - oracle.kappa_prime) <= 1e-6 * oracle.kappa_prime);
}

TEST_CASE("Gauss-Hermite matches the adaptive oracle on random configurations") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = paper_system(50 + 1500 * uni(rng),
                                c::two_pi * (6.0 + 12.0 * uni(rng)) * 1e6);
        ThermalConfig th{0.002 + 0.1 * uni(rng), c::ca40::ion_mass, c::two_pi / 866e-9};
        double delta = c::two_pi * (uni(rng) - 0.5) * 60e6;
        double delta_c = c::two_pi * (uni(rng) - 0.5) * 5e6;

        auto gh = thermal_response(sys, delta, delta_c, th);
        auto oracle = oracle_response(sys, delta, delta_c, th);
        double scale = std::max(std::abs(oracle.kappa_prime), std::abs(oracle.delta_c_prime));
        CHECK(std::abs(gh.kappa_prime - oracle.kappa_prime) <= 1e-6 * scale);
        CHECK(std::abs(gh.delta_c_prime - oracle.delta_c_prime) <= 1e-6 * scale);
    }
}

TEST_CASE("thermal parity in the probe detuning") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto sys = paper_system(10 + 1000 * uni(rng),
                                c::two_pi * (5.0 + 15.0 * uni(rng)) * 1e6);
        ThermalConfig th{0.2 * uni(rng), c::ca40::ion_mass, c::two_pi / 866e-9};
        double delta = c::two_pi * (0.1 + 50.0 * uni(rng)) * 1e6;
        double delta_c = c::two_pi * (uni(rng) - 0.5) * 4e6;
        auto plus = thermal_response(sys, delta, delta_c, th);
        auto minus = thermal_response(sys, -delta, delta_c, th);
        CHECK(plus.kappa_prime == doctest::Approx(minus.kappa_prime).epsilon(1e-10));
        CHECK(plus.delta_c_prime - delta_c ==
              doctest::Approx(-(minus.delta_c_prime - delta_c)).epsilon(1e-10));
    }
}

TEST_CASE("absorption area is conserved under motional averaging") {
    auto sys = paper_system(520);
    auto integrate_excess = [&](double temperature) {
        auto th = paper_thermal(temperature);
        // trapezoid over a wide symmetric grid; the truncated tails agree
        // between temperatures to higher order than the tolerance
        const int n = 4000;
        const double half = 80.0 * sys.gamma_eff;
        double sum = 0;
        double prev = thermal_response(sys, -half, 0, th).kappa_prime - sys.rates.kappa;
        for (int i = 1; i <= n; ++i) {
            double d = -half + 2 * half * i / n;
            double cur = thermal_response(sys, d, 0, th).kappa_prime - sys.rates.kappa;
            sum += 0.5 * (prev + cur) * (2 * half / n);
            prev = cur;
        }
        return sum;
    };
    double cold = integrate_excess(0.0);
    double warm = integrate_excess(0.024);
    double expected = c::pi * sys.g * sys.g * sys.n_eff;
    CHECK(cold == doctest::Approx(expected).epsilon(0.01));
    CHECK(std::abs(warm - cold) / cold < 2e-4);
}

TEST_CASE("effective gamma") {
    auto sys = paper_system(520);
    std::vector<double> grid;
    for (int i = -40; i <= 40; ++i)
        grid.push_back(c::two_pi * 2.25e6 * i);

    SUBCASE("zero temperature returns the input gamma") {
        auto eg = effective_gamma(sys, paper_thermal(0.0), grid);
        CHECK(eg.fitted == doctest::Approx(sys.gamma_eff).epsilon(1e-12));
        CHECK(eg.closed_form == doctest::Approx(sys.gamma_eff).epsilon(1e-12));
    }
    SUBCASE("measured-temperature broadening is plausible") {
        auto eg = effective_gamma(sys, paper_thermal(0.024), grid);
        double broadening_mhz = (eg.fitted - sys.gamma_eff) / (c::two_pi * 1e6);
        CHECK(broadening_mhz > 0.1);
        CHECK(broadening_mhz < 1.8);
        // the printed closed form, read with the gamma normalization
        CHECK(eg.closed_form / (c::two_pi * 1e6) == doctest::Approx(13.02).epsilon(0.005));
    }
    SUBCASE("strictly increasing with temperature") {
        double last = 0;
        for (double t_mk : {0.0, 10.0, 24.0, 50.0, 100.0}) {
            auto eg = effective_gamma(sys, paper_thermal(t_mk * 1e-3), grid);
            CHECK(eg.fitted > last);
            last = eg.fitted;
        }
    }
}

TEST_CASE("validity check") {
    auto sys = paper_system(520);

    SUBCASE("zero temperature is always valid") {
        auto rep = validity_check(sys, paper_thermal(0.0));
        CHECK(rep.valid);
        CHECK(std::isinf(rep.margin));
    }
    SUBCASE("paper parameters pass with a one-digit margin") {
        auto rep = validity_check(sys, paper_thermal(0.024));
        CHECK(rep.doppler_shift / (c::two_pi * 1e6) == doctest::Approx(2.58).epsilon(0.02));
        CHECK(rep.valid);
        CHECK(rep.margin > 4.0);
        CHECK(rep.margin < 7.0);
        CHECK_FALSE(rep.strict);
    }
    SUBCASE("hot ions break the slow-motion treatment") {
        auto rep = validity_check(sys, paper_thermal(10.0));
        CHECK_FALSE(rep.valid);
    }
}
