#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "icqed/constants.hpp"
#include "icqed/cqed.hpp"
#include "icqed/errors.hpp"

using namespace icqed;
namespace c = constants;

namespace {

const CavityParams kPaperCavity{11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9};

CoupledSystem paper_system(double n_eff, double gamma_eff = c::two_pi * 11.9e6) {
    CoupledSystem sys;
    sys.g = c::two_pi * 0.53e6;
    sys.n_eff = n_eff;
    sys.gamma_eff = gamma_eff;
    sys.rates = derive_cavity_rates(kPaperCavity);
    return sys;
}

}  // namespace

TEST_CASE("cavity rates from the measured mirror set") {
    auto r = derive_cavity_rates(kPaperCavity);
    CHECK(r.fsr_hz == doctest::Approx(12.7e9).epsilon(0.01));
    CHECK(r.kappa / (c::two_pi * 1e6) == doctest::Approx(2.18).epsilon(0.01));
    CHECK(r.finesse == doctest::Approx(2915).epsilon(0.01));
    CHECK(r.kappa == doctest::Approx(r.kappa1 + r.kappa2 + r.kappa_loss));
    CHECK(r.kappa1 / (c::two_pi * 1e6) == doctest::Approx(1.51).epsilon(0.02));
    CHECK(r.tau == doctest::Approx(2 * 11.8e-3 / c::speed_of_light));
    CHECK(r.rayleigh_z0 == doctest::Approx(4.966e-3).epsilon(1e-3));
}

TEST_CASE("single loss channel: kappa equals kappa1") {
    CavityParams p = kPaperCavity;
    p.t2 = 0.0;
    p.losses_L = 0.0;
    auto r = derive_cavity_rates(p);
    CHECK(r.kappa == doctest::Approx(r.kappa1).epsilon(1e-15));
}

TEST_CASE("cavity parameter validation") {
    CavityParams p = kPaperCavity;
    p.length_l = -1;
    CHECK_THROWS_AS(derive_cavity_rates(p), std::domain_error);
    p = kPaperCavity;
    p.t1 = 0;
    CHECK_THROWS_AS(derive_cavity_rates(p), std::domain_error);
    p = kPaperCavity;
    p.t2 = p.t1 + 1e-4;  // violates the single-ended convention
    CHECK_THROWS_AS(derive_cavity_rates(p), std::domain_error);
    p = kPaperCavity;
    p.waist_w0 = 0;
    CHECK_THROWS_AS(derive_cavity_rates(p), std::domain_error);
}

TEST_CASE("single-ion coupling reproduces the expected rate") {
    TransitionParams t;
    t.gamma = c::ca40::p12_dipole_decay;
    t.wavelength = c::ca40::d32_p12_wavelength;
    t.dipole_moment = c::ca40::d32_p12_sigma_dipole;

    double g = single_ion_coupling(t, kPaperCavity);
    CHECK(g / (c::two_pi * 1e6) == doctest::Approx(0.53).epsilon(0.005));

    // implied maximum field, evaluated from first principles
    double e0 = g * c::hbar / *t.dipole_moment;
    double omega = c::two_pi * c::speed_of_light / t.wavelength;
    double mode_volume = c::pi * 37e-6 * 37e-6 * 11.8e-3 / 4.0;
    double e0_direct = std::sqrt(c::hbar * omega / (2.0 * c::epsilon0 * mode_volume));
    CHECK(e0 == doctest::Approx(e0_direct).epsilon(1e-12));
    CHECK(e0 == doctest::Approx(31.95).epsilon(0.005));

    SUBCASE("quadrupling the mode volume halves g") {
        CavityParams big = kPaperCavity;
        big.length_l *= 4.0;
        CHECK(single_ion_coupling(t, big) == doctest::Approx(0.5 * g).epsilon(1e-12));
    }
    SUBCASE("missing dipole moment is an unsupported input") {
        t.dipole_moment.reset();
        CHECK_THROWS_AS(single_ion_coupling(t, kPaperCavity), std::invalid_argument);
    }
}

TEST_CASE("collective coupling") {
    double g = c::two_pi * 0.53e6;
    CHECK(collective_coupling(g, 520) / (c::two_pi * 1e6) ==
          doctest::Approx(12.09).epsilon(0.01));
    CHECK(collective_coupling(g, 0) == 0.0);
    CHECK_THROWS_AS(collective_coupling(-g, 10), std::domain_error);
    CHECK_THROWS_AS(collective_coupling(g, -1), std::domain_error);
}

TEST_CASE("largest crystal cooperativity matches the measurement") {
    auto sys = paper_system(1523, c::two_pi * 12.7e6);
    sys.rates.kappa = c::two_pi * 2.1e6;
    double coop = cooperativity(sys);
    CHECK(coop == doctest::Approx(7.9).epsilon(0.10));
}

TEST_CASE("effective response against hand-evaluated values") {
    CoupledSystem sys;
    sys.g = c::two_pi * 12.2e6;  // collective rate folded into g with N = 1
    sys.n_eff = 1.0;
    sys.gamma_eff = c::two_pi * 11.9e6;
    sys.rates.kappa = c::two_pi * 2.1e6;

    SUBCASE("on resonance") {
        auto resp = effective_response(sys, 0.0, 0.0);
        // kappa + gN^2/gamma' = 2.1 + 148.84/11.9
        CHECK(resp.kappa_prime / (c::two_pi * 1e6) ==
              doctest::Approx(14.6075630252101).epsilon(1e-9));
        CHECK(resp.delta_c_prime == 0.0);
    }
    SUBCASE("at Delta = gamma' the pull is -gN^2/(2 gamma')") {
        auto resp = effective_response(sys, sys.gamma_eff, 0.0);
        CHECK(resp.delta_c_prime / (c::two_pi * 1e6) ==
              doctest::Approx(-6.25378151260504).epsilon(1e-9));
    }
    SUBCASE("far detuned the ions decouple") {
        // the residual pull decays as gN^2/Delta
        auto resp = effective_response(sys, c::two_pi * 1e12, c::two_pi * 3e6);
        CHECK(resp.kappa_prime == doctest::Approx(sys.rates.kappa).epsilon(1e-9));
        CHECK(resp.delta_c_prime == doctest::Approx(c::two_pi * 3e6).epsilon(1e-4));
    }
}

TEST_CASE("intracavity amplitude") {
    auto sys = paper_system(520);
    auto resp0 = effective_response(paper_system(0), 0.0, 0.0);

    SUBCASE("no drive, no field") {
        CHECK(std::abs(intracavity_amplitude(resp0, sys.rates, 0.0)) == 0.0);
    }
    SUBCASE("empty cavity on resonance") {
        auto a = intracavity_amplitude(resp0, sys.rates, 1.0);
        double expected = 2.0 * sys.rates.kappa1 /
                          (sys.rates.tau * sys.rates.kappa * sys.rates.kappa);
        CHECK(std::norm(a) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("coupled suppression ratio (kappa/kappa')^2") {
        auto resp = effective_response(sys, 0.0, 0.0);
        auto a_coupled = intracavity_amplitude(resp, sys.rates, 1.0);
        auto a_empty = intracavity_amplitude(resp0, sys.rates, 1.0);
        double ratio = std::norm(a_coupled) / std::norm(a_empty);
        double expected = std::pow(sys.rates.kappa / resp.kappa_prime, 2);
        CHECK(ratio == doctest::Approx(expected).epsilon(1e-12));
        CHECK(ratio == doctest::Approx(0.021).epsilon(0.10));
    }
}

TEST_CASE("reflectivity values") {
    CavityRates rates{};
    rates.kappa1 = c::two_pi * 1.5e6;
    rates.kappa = c::two_pi * 2.1e6;

    SUBCASE("empty cavity on resonance") {
        CHECK(reflectivity(rates, {rates.kappa, 0.0}) ==
              doctest::Approx(std::pow(0.9 / 2.1, 2)).epsilon(1e-12));
    }
    SUBCASE("far off resonance everything reflects") {
        CHECK(reflectivity(rates, {rates.kappa, c::two_pi * 1e13}) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("coupled on resonance") {
        CHECK(reflectivity(rates, {c::two_pi * 14.6e6, 0.0}) ==
              doctest::Approx(std::pow(11.6 / 14.6, 2)).epsilon(1e-9));
    }
}

TEST_CASE("reflectivity stays in [0,1] for a passive single-ended cavity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        CoupledSystem sys;
        sys.rates.kappa = c::two_pi * (0.5 + 5.0 * uni(rng)) * 1e6;
        sys.rates.kappa1 = sys.rates.kappa * uni(rng);
        sys.g = c::two_pi * uni(rng) * 1e6;
        sys.n_eff = 2000 * uni(rng);
        sys.gamma_eff = c::two_pi * (1.0 + 20.0 * uni(rng)) * 1e6;
        double delta = c::two_pi * (uni(rng) - 0.5) * 80e6;
        double delta_c = c::two_pi * (uni(rng) - 0.5) * 80e6;
        auto resp = effective_response(sys, delta, delta_c);
        double r = reflectivity(sys.rates, resp);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0 + 1e-12);
    }
}

TEST_CASE("response parity and broadening invariants") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto sys = paper_system(1 + 1500 * uni(rng), c::two_pi * (5 + 15 * uni(rng)) * 1e6);
        double delta = c::two_pi * (uni(rng) - 0.5) * 100e6;
        double delta_c = c::two_pi * (uni(rng) - 0.5) * 10e6;
        auto plus = effective_response(sys, delta, delta_c);
        auto minus = effective_response(sys, -delta, delta_c);
        CHECK(plus.kappa_prime == doctest::Approx(minus.kappa_prime).epsilon(1e-12));
        CHECK(plus.delta_c_prime - delta_c ==
              doctest::Approx(-(minus.delta_c_prime - delta_c)).epsilon(1e-12));
        CHECK(plus.kappa_prime >= sys.rates.kappa);
    }
    SUBCASE("equality holds only without coupling") {
        auto sys = paper_system(0);
        auto resp = effective_response(sys, 0.0, 0.0);
        CHECK(resp.kappa_prime == sys.rates.kappa);
    }
}

TEST_CASE("cooperativity identities") {
    auto sys = paper_system(520);
    double coop = cooperativity(sys);
    auto resp = effective_response(sys, 0.0, 0.0);
    // kappa'(0) = kappa (1 + 2C) exactly
    CHECK(resp.kappa_prime ==
          doctest::Approx(sys.rates.kappa * (1.0 + 2.0 * coop)).epsilon(1e-14));

    SUBCASE("no ions, no cooperativity") {
        auto empty = paper_system(0);
        CHECK(cooperativity(empty) == 0.0);
        CHECK(effective_response(empty, 0.0, 0.0).kappa_prime == empty.rates.kappa);
    }
    SUBCASE("C/N scaling against the measured slope") {
        auto one = paper_system(1);
        one.rates.kappa = c::two_pi * 2.1e6;
        double per_ion = cooperativity(one);
        CHECK(per_ion == doctest::Approx(5.6e-3).epsilon(0.02));
        CHECK(std::abs(per_ion - 5.1e-3) / 5.1e-3 < 0.15);
    }
    SUBCASE("unit cooperativity boundary") {
        auto sys1 = paper_system(1);
        sys1.g = std::sqrt(2.0 * sys1.rates.kappa * sys1.gamma_eff);
        CHECK(cooperativity(sys1) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("rabi spectrum minima") {
    SUBCASE("empty cavity gives a single dip") {
        auto sys = paper_system(0);
        std::vector<double> grid;
        for (int i = 0; i <= 800; ++i)
            grid.push_back(c::two_pi * (-40e6 + 80e6 * i / 800.0));
        auto trace = rabi_spectrum(sys, grid);
        int minima = 0;
        for (std::size_t i = 1; i + 1 < trace.y.size(); ++i)
            if (trace.y[i] < trace.y[i - 1] && trace.y[i] < trace.y[i + 1])
                ++minima;
        CHECK(minima == 1);
    }
    SUBCASE("coupled spectrum has exactly two symmetric minima") {
        auto sys = paper_system(520);
        std::vector<double> grid;
        for (int i = 0; i <= 1600; ++i)
            grid.push_back(c::two_pi * (-40e6 + 80e6 * i / 1600.0));
        auto trace = rabi_spectrum(sys, grid);
        std::vector<double> minima;
        for (std::size_t i = 1; i + 1 < trace.y.size(); ++i)
            if (trace.y[i] < trace.y[i - 1] && trace.y[i] < trace.y[i + 1])
                minima.push_back(trace.x[i]);
        REQUIRE(minima.size() == 2);
        CHECK(minima[0] == doctest::Approx(-minima[1]).epsilon(1e-9));

        // brute-force scan of the reflectivity formula on a 10x denser grid
        double g2n = sys.g * sys.g * sys.n_eff;
        auto model = [&](double d) {
            double denom = sys.gamma_eff * sys.gamma_eff + d * d;
            double kp = sys.rates.kappa + g2n * sys.gamma_eff / denom;
            double dcp = d - g2n * d / denom;
            std::complex<double> pole(kp, dcp);
            return std::norm((2.0 * sys.rates.kappa1 - pole) / pole);
        };
        std::vector<double> dense_minima;
        int n_dense = 16000;
        double prev2 = model(-c::two_pi * 40e6), prev1 = 0;
        for (int i = 1; i <= n_dense; ++i) {
            double x = c::two_pi * (-40e6 + 80e6 * i / static_cast<double>(n_dense));
            double v = model(x);
            if (i >= 2 && prev1 < prev2 && prev1 < v)
                dense_minima.push_back(c::two_pi *
                                       (-40e6 + 80e6 * (i - 1) / static_cast<double>(n_dense)));
            prev2 = prev1;
            prev1 = v;
        }
        REQUIRE(dense_minima.size() == 2);
        double grid_step = c::two_pi * 80e6 / 1600.0;
        CHECK(std::abs(minima[0] - dense_minima[0]) <= grid_step);
        CHECK(std::abs(minima[1] - dense_minima[1]) <= grid_step);
    }
    SUBCASE("spectrum is symmetric under detuning reversal") {
        auto sys = paper_system(520);
        std::vector<double> grid;
        for (int i = 0; i <= 200; ++i)
            grid.push_back(c::two_pi * (-30e6 + 60e6 * i / 200.0));
        auto trace = rabi_spectrum(sys, grid);
        for (std::size_t i = 0; i < trace.y.size(); ++i)
            CHECK(trace.y[i] == doctest::Approx(trace.y[trace.y.size() - 1 - i]).epsilon(1e-12));
    }
    SUBCASE("unsorted grid rejected") {
        auto sys = paper_system(0);
        std::vector<double> bad = {1.0, 0.5, 2.0};
        CHECK_THROWS_AS(rabi_spectrum(sys, bad), std::domain_error);
    }
}

TEST_CASE("transient buildup") {
    auto sys = paper_system(520);
    double dt = 0.002 / std::max(sys.gamma_eff, sys.rates.kappa);

    SUBCASE("converges to the steady state") {
        double t_end = 20.0 / std::min(sys.rates.kappa, sys.gamma_eff);
        auto trace = transient_buildup(sys, 0.0, 0.0, 1.0, t_end, dt);
        auto steady = intracavity_amplitude(effective_response(sys, 0.0, 0.0), sys.rates, 1.0);
        CHECK(std::abs(trace.field.back() - steady) / std::abs(steady) < 1e-6);
    }
    SUBCASE("field reaches quasi-steady state within the APD delay") {
        auto trace = transient_buildup(sys, 0.0, 0.0, 1.0, 0.1e-6, dt);
        auto steady = intracavity_amplitude(effective_response(sys, 0.0, 0.0), sys.rates, 1.0);
        double ratio = std::abs(trace.field.back()) / std::abs(steady);
        CHECK(ratio >= 0.95);
        CHECK(ratio <= 1.05);
    }
    SUBCASE("uncoupled ring-up matches the closed form") {
        auto empty = paper_system(0);
        double delta_c = c::two_pi * 1.3e6;
        double t_end = 4.0 / empty.rates.kappa;
        auto trace = transient_buildup(empty, 0.0, delta_c, 1.0, t_end, dt);
        std::complex<double> pole(empty.rates.kappa, delta_c);
        std::complex<double> steady =
            std::sqrt(2.0 * empty.rates.kappa1 / empty.rates.tau) / pole;
        for (std::size_t i = 0; i < trace.t.size(); i += 50) {
            std::complex<double> expected =
                steady * (1.0 - std::exp(-pole * trace.t[i]));
            CHECK(std::abs(trace.field[i] - expected) <= 1e-6 * std::abs(steady));
        }
    }
    SUBCASE("oversized steps are rejected") {
        CHECK_THROWS_AS(transient_buildup(sys, 0.0, 0.0, 1.0, 1e-6, 1e-7), NumericError);
    }
}
