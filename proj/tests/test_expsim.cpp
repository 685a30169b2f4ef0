#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "icqed/constants.hpp"
#include "icqed/cqed.hpp"
#include "icqed/errors.hpp"
#include "icqed/expsim.hpp"
#include "icqed/fit.hpp"
#include "icqed/pipelines.hpp"

using namespace icqed;
using namespace icqed::sim;
namespace c = constants;

namespace {

CoupledSystem paper_system(double n_eff) {
    CoupledSystem sys;
    sys.g = c::two_pi * 0.53e6;
    sys.n_eff = n_eff;
    sys.gamma_eff = c::two_pi * 11.9e6;
    sys.rates = derive_cavity_rates({11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9});
    return sys;
}

}  // namespace

TEST_CASE("scan simulation") {
    auto sys = paper_system(520);
    ScanConfig scan{160e6, 30, 10, 161};
    NoiseModel noise;
    noise.rng_seed = 42;

    SUBCASE("fixed seed reproduces the trace bit for bit") {
        auto a = simulate_scan(sys, 0.0, scan, noise);
        auto b = simulate_scan(sys, 0.0, scan, noise);
        REQUIRE(a.y.size() == b.y.size());
        for (std::size_t i = 0; i < a.y.size(); ++i)
            CHECK(a.y[i] == b.y[i]);
    }
    SUBCASE("noiseless mode equals the reflectivity curve") {
        NoiseModel quiet = noise;
        quiet.noiseless = true;
        auto trace = simulate_scan(sys, 0.0, scan, quiet);
        double counts_scale = quiet.mean_photon_rate * (1.4e-6 - 0.1e-6) *
                              quiet.detection_efficiency;
        for (std::size_t i = 0; i < trace.x.size(); ++i) {
            double r = reflectivity(sys.rates, effective_response(sys, 0.0, trace.x[i]));
            CHECK(trace.y[i] == doctest::Approx(counts_scale * r).epsilon(1e-12));
        }
    }
    SUBCASE("high-rate averages converge to the analytic mean") {
        NoiseModel bright = noise;
        bright.mean_photon_rate = 6e12;  // >1e6 counts per sample
        bright.drift_step = 0;
        bright.reference_noise_rel = 0;
        ScanConfig one{160e6, 30, 1, 41};
        auto trace = simulate_scan(sys, 0.0, one, bright);
        double counts_scale = bright.mean_photon_rate * 1.3e-6 * bright.detection_efficiency;
        for (std::size_t i = 0; i < trace.x.size(); ++i) {
            double r = reflectivity(sys.rates, effective_response(sys, 0.0, trace.x[i]));
            CHECK(trace.y[i] / counts_scale == doctest::Approx(r).epsilon(0.005));
        }
    }
    SUBCASE("raw counts are Poisson: variance tracks the mean") {
        // flat reflectivity region far from resonance, one draw per sample
        NoiseModel flat_noise;
        flat_noise.rng_seed = 7;
        flat_noise.drift_step = 0;
        flat_noise.reference_noise_rel = 0;
        ScanConfig wide{1e6, 30, 1, 10000};
        auto sys0 = paper_system(0);
        auto trace = simulate_scan(sys0, c::two_pi * 500e6, wide, flat_noise);
        double mean = std::accumulate(trace.y.begin(), trace.y.end(), 0.0) / trace.y.size();
        double var = 0;
        for (double v : trace.y)
            var += (v - mean) * (v - mean);
        var /= (trace.y.size() - 1.0);
        CHECK(var / mean == doctest::Approx(1.0).epsilon(0.05));
    }
    SUBCASE("zero photon rate is a degenerate trace") {
        NoiseModel dark = noise;
        dark.mean_photon_rate = 0;
        CHECK_THROWS_AS(simulate_scan(sys, 0.0, scan, dark), DataError);
    }
}

TEST_CASE("locked simulation") {
    auto sys = paper_system(520);
    std::vector<double> grid;
    for (int i = 0; i <= 120; ++i)
        grid.push_back(c::two_pi * (-40e6 + 80e6 * i / 120.0));
    SequenceTiming timing;
    NoiseModel noise;
    noise.rng_seed = 5;

    SUBCASE("threshold zero keeps every sequence") {
        auto trace = simulate_locked(sys, grid, timing, noise, 400);
        CHECK(trace.y.size() == grid.size());
        for (double v : trace.y)
            CHECK(v >= 0.0);
    }
    SUBCASE("empty cavity reproduces the model dip within statistics") {
        auto sys0 = paper_system(0);
        auto trace = simulate_locked(sys0, grid, timing, noise, 4000);
        for (std::size_t i = 0; i < grid.size(); i += 8) {
            double r = reflectivity(sys0.rates, effective_response(sys0, grid[i], grid[i]));
            CHECK(trace.y[i] == doctest::Approx(r).epsilon(0.12));
        }
    }
    SUBCASE("coupled spectrum shows the two normal-mode dips") {
        NoiseModel quiet = noise;
        quiet.noiseless = true;
        auto trace = simulate_locked(sys, grid, timing, quiet, 1);
        int minima = 0;
        for (std::size_t i = 1; i + 1 < trace.y.size(); ++i)
            if (trace.y[i] < trace.y[i - 1] && trace.y[i] < trace.y[i + 1])
                ++minima;
        CHECK(minima == 2);
    }
    SUBCASE("postselection on the reference does not bias the mean") {
        NoiseModel strict = noise;
        strict.drift_step = 0;
        strict.reference_threshold = 0.5;
        std::vector<double> point = {0.0, c::two_pi * 1e6};
        auto kept = simulate_locked(sys, point, timing, strict, 20000);
        NoiseModel open = noise;
        open.drift_step = 0;
        open.reference_threshold = 0;
        auto all = simulate_locked(sys, point, timing, open, 20000);
        double r_model = reflectivity(sys.rates, effective_response(sys, 0.0, 0.0));
        CHECK(kept.y[0] == doctest::Approx(r_model).epsilon(0.10));
        CHECK(all.y[0] == doctest::Approx(r_model).epsilon(0.10));
    }
    SUBCASE("an impossible threshold empties the trace") {
        NoiseModel impossible = noise;
        impossible.reference_threshold = 3.0;
        CHECK_THROWS_AS(simulate_locked(sys, grid, timing, impossible, 50), DataError);
    }
}

TEST_CASE("Larmor trace simulation") {
    auto rates = derive_cavity_rates({11.8e-3, 1500e-6, 5e-6, 650e-6, 37e-6, 866e-9});
    std::vector<larmor::WeightedSpinState> mixture = {{larmor::SpinState::basis(0), 0.5},
                                                      {larmor::SpinState::basis(3), 0.5}};
    larmor::TwoTransitionConfig transitions;
    transitions.g_threehalf = c::two_pi * 0.53e6;
    transitions.g_half = transitions.g_threehalf / std::sqrt(3.0);
    transitions.n_half = 520;
    transitions.n_threehalf = 520;
    auto field = larmor::FieldConfig::from_fields(0.15e-4, 0.15e-4);
    std::vector<double> taus;
    for (int i = 0; i <= 120; ++i)
        taus.push_back(1e-6 * i);

    NoiseModel quiet;
    quiet.noiseless = true;

    SUBCASE("noiseless trace has the exact two-harmonic Eq form") {
        larmor::DecayModel none{};
        auto trace = simulate_larmor(mixture, field, transitions, none, taus, quiet, rates.kappa);
        // linear least squares at the known frequency: the residual measures
        // any content beyond the two-harmonic model
        double wl = larmor::larmor_frequency(field);
        double sxx[3][3] = {};
        double sxy[3] = {};
        for (std::size_t i = 0; i < taus.size(); ++i) {
            double basis[3] = {std::cos(wl * taus[i]), std::cos(2 * wl * taus[i]), 1.0};
            for (int r = 0; r < 3; ++r) {
                sxy[r] += basis[r] * trace.y[i];
                for (int s = 0; s < 3; ++s)
                    sxx[r][s] += basis[r] * basis[s];
            }
        }
        // solve the 3x3 normal equations by Cramer's rule
        auto det3 = [](double m[3][3]) {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        };
        double d0 = det3(sxx);
        double coef[3];
        for (int j = 0; j < 3; ++j) {
            double m[3][3];
            for (int r = 0; r < 3; ++r)
                for (int s = 0; s < 3; ++s)
                    m[r][s] = s == j ? sxy[r] : sxx[r][s];
            coef[j] = det3(m) / d0;
        }
        double rms = 0;
        for (std::size_t i = 0; i < taus.size(); ++i) {
            double model = coef[0] * std::cos(wl * taus[i]) +
                           coef[1] * std::cos(2 * wl * taus[i]) + coef[2];
            rms += (trace.y[i] - model) * (trace.y[i] - model);
        }
        rms = std::sqrt(rms / taus.size());
        CHECK(rms < 1e-9);

        auto fits = fit::fit_larmor(taus, trace.y, false);
        CHECK(fits.exponential.omega == doctest::Approx(wl).epsilon(1e-6));
    }
    SUBCASE("zero delay equals the static two-transition cooperativity") {
        larmor::DecayModel decay{larmor::DecayModel::Kind::exponential, 1.7e-3};
        auto trace = simulate_larmor(mixture, field, transitions, decay, taus, quiet, rates.kappa);
        larmor::TwoTransitionConfig at_zero = transitions;
        at_zero.n_half = transitions.n_half * 0.0;   // pumped mixture: +1/2 empty
        at_zero.n_threehalf = transitions.n_threehalf * 0.5;
        double kp = larmor::kappa_prime_two_transition(at_zero, c::ca40::p12_dipole_decay,
                                                       rates.kappa);
        CHECK(trace.y.front() == doctest::Approx(0.5 * (kp / rates.kappa - 1.0)).epsilon(1e-9));
    }
    SUBCASE("no transverse field: constant trace") {
        larmor::FieldConfig longitudinal{0.0, field.omega_z};
        larmor::DecayModel none{};
        auto trace = simulate_larmor(mixture, longitudinal, transitions, none, taus, quiet,
                                     rates.kappa);
        for (double v : trace.y)
            CHECK(v == doctest::Approx(trace.y.front()).epsilon(1e-12));
    }
    SUBCASE("seeded noise is reproducible") {
        larmor::DecayModel none{};
        NoiseModel noisy;
        noisy.rng_seed = 77;
        auto a = simulate_larmor(mixture, field, transitions, none, taus, noisy, rates.kappa);
        auto b = simulate_larmor(mixture, field, transitions, none, taus, noisy, rates.kappa);
        for (std::size_t i = 0; i < a.y.size(); ++i)
            CHECK(a.y[i] == b.y[i]);
    }
}

TEST_CASE("saturation diagnostic") {
    auto sys = paper_system(520);
    NoiseModel weak;
    weak.mean_photon_rate = 1e6;
    NoiseModel strong;
    strong.mean_photon_rate = 1e12;
    double n_weak = mean_intracavity_photons(sys, 0.0, 0.0, weak);
    double n_strong = mean_intracavity_photons(sys, 0.0, 0.0, strong);
    CHECK(n_weak < 1.0);
    CHECK(n_strong > 1.0);
    CHECK(n_strong / n_weak == doctest::Approx(1e6).epsilon(1e-9));
}

TEST_CASE("pipelines") {
    PipelineConfig cfg;
    cfg.locked_sequences = 1500;

    SUBCASE("noiseless runs recover the injected parameters exactly") {
        PipelineConfig quiet = cfg;
        quiet.noise.noiseless = true;
        for (auto name : {PipelineName::fig4, PipelineName::fig5a, PipelineName::fig5b,
                          PipelineName::fig7, PipelineName::fig9a, PipelineName::fig10}) {
            auto result = run_pipeline(name, quiet, 1);
            for (const auto& [key, est] : result.estimates) {
                INFO(result.name, " ", key);
                CHECK(std::abs(est.recovered - est.injected) <=
                      1e-6 * std::max(std::abs(est.injected), 1e-30));
            }
        }
    }
    SUBCASE("fig5a at paper-level noise recovers the coupling within 2%") {
        auto result = run_pipeline(PipelineName::fig5a, cfg, 7);
        const auto& est = result.estimate("g_collective");
        CHECK(std::abs(est.recovered - est.injected) / est.injected < 0.02);
    }
    SUBCASE("fig6 slope round trip within 5%") {
        auto result = run_pipeline(PipelineName::fig6, cfg, 11);
        const auto& est = result.estimate("cooperativity_per_ion");
        CHECK(std::abs(est.recovered - est.injected) / est.injected < 0.05);
    }
    SUBCASE("fig8 recovers the single-ion coupling") {
        auto result = run_pipeline(PipelineName::fig8, cfg, 3);
        const auto& est = result.estimate("g_single");
        CHECK(std::abs(est.recovered - est.injected) / est.injected < 0.03);
    }
    SUBCASE("fig9b stays constant") {
        auto result = run_pipeline(PipelineName::fig9b, cfg, 5);
        const auto& est = result.estimate("mean_cooperativity");
        CHECK(std::abs(est.recovered - est.injected) / est.injected < 0.05);
    }
    SUBCASE("fig10 recovers the axial frequency within 2%") {
        auto result = run_pipeline(PipelineName::fig10, cfg, 13);
        const auto& est = result.estimate("omega_z");
        CHECK(std::abs(est.recovered - est.injected) / est.injected < 0.02);
    }
    SUBCASE("identical seeds give identical results") {
        auto a = run_pipeline(PipelineName::fig4, cfg, 21);
        auto b = run_pipeline(PipelineName::fig4, cfg, 21);
        REQUIRE(a.estimates.size() == b.estimates.size());
        for (std::size_t i = 0; i < a.estimates.size(); ++i)
            CHECK(a.estimates[i].second.recovered == b.estimates[i].second.recovered);
        // and byte-identical CSV bodies
        std::ostringstream sa, sb;
        write_csv(sa, a.traces.front().trace, "x", "y");
        write_csv(sb, b.traces.front().trace, "x", "y");
        CHECK(sa.str() == sb.str());
    }
}
