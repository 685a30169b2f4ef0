#include "oracles.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracles {

double mc_effective_count(const icqed::crystal::CrystalSpec& spec,
                          const icqed::crystal::ModeGeometry& mode, std::size_t n_samples,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const double L = spec.half_length_L, R = spec.radius_R;
    const double volume = 4.0 / 3.0 * M_PI * R * R * L;

    double sum = 0;
    std::size_t accepted = 0;
    while (accepted < n_samples) {
        double x = uni(rng) * R, y = uni(rng) * R, z = uni(rng) * L;
        if ((x * x + y * y) / (R * R) + (z * z) / (L * L) > 1.0)
            continue;
        ++accepted;
        double w = mode.beam_radius(z);
        double dx = x - spec.offset_x0, dy = y - spec.offset_y0;
        sum += std::exp(-2.0 * (dx * dx + dy * dy) / (w * w));
    }
    double mean_weight = sum / static_cast<double>(n_samples);
    return spec.pump_efficiency_eta * spec.density_rho / 2.0 * volume * mean_weight;
}

double romberg(const std::function<double(double)>& f, double a, double b, int max_level,
               double rel_tol) {
    std::vector<std::vector<double>> table(static_cast<std::size_t>(max_level));
    double h = b - a;
    table[0] = {0.5 * h * (f(a) + f(b))};
    for (int level = 1; level < max_level; ++level) {
        h *= 0.5;
        long points = 1L << (level - 1);
        double sum = 0;
        for (long i = 0; i < points; ++i)
            sum += f(a + h * static_cast<double>(2 * i + 1));
        auto& row = table[static_cast<std::size_t>(level)];
        row.resize(static_cast<std::size_t>(level) + 1);
        row[0] = 0.5 * table[static_cast<std::size_t>(level - 1)][0] + h * sum;
        double factor = 1.0;
        for (int k = 1; k <= level; ++k) {
            factor *= 4.0;
            row[static_cast<std::size_t>(k)] =
                (factor * row[static_cast<std::size_t>(k - 1)] -
                 table[static_cast<std::size_t>(level - 1)][static_cast<std::size_t>(k - 1)]) /
                (factor - 1.0);
        }
        double current = row.back();
        double previous = table[static_cast<std::size_t>(level - 1)].back();
        if (level > 3 && std::abs(current - previous) <=
                             rel_tol * std::max(std::abs(current), 1e-300))
            return current;
    }
    return table.back().back();
}

double maxwell_average(const std::function<double(double)>& h, double doppler_velocity) {
    if (doppler_velocity == 0.0)
        return h(0.0);
    const double vd = doppler_velocity;
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * vd * vd);
    auto integrand = [&](double v) {
        return norm * std::exp(-v * v / (2.0 * vd * vd)) * h(v);
    };
    return romberg(integrand, -12.0 * vd, 12.0 * vd);
}

double cosine_amplitude(std::span<const double> t, std::span<const double> y, double omega) {
    double acc_cos = 0, acc_sin = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        acc_cos += y[i] * std::cos(omega * t[i]);
        acc_sin += y[i] * std::sin(omega * t[i]);
    }
    double n = static_cast<double>(t.size());
    return 2.0 / n * std::hypot(acc_cos, acc_sin);
}

double binomial_population(int k_flips, double phi) {
    if (k_flips < 0 || k_flips > 3)
        throw std::out_of_range("spin-3/2 has at most 3 flips");
    double p = std::sin(0.5 * phi) * std::sin(0.5 * phi);
    static const double choose[4] = {1, 3, 3, 1};
    return choose[k_flips] * std::pow(p, k_flips) * std::pow(1.0 - p, 3 - k_flips);
}

}  // namespace oracles
