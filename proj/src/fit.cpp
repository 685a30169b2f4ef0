#include "icqed/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"

namespace icqed::fit {

namespace c = constants;

namespace {

constexpr double kRelCostTol = 1e-10;
constexpr double kGradTol = 1e-8;
constexpr int kMaxIterations = 500;
const double kFdStep = std::cbrt(std::numeric_limits<double>::epsilon());

double clampd(double v, const std::pair<double, double>& b) {
    return std::min(std::max(v, b.first), b.second);
}

struct Prepared {
    std::vector<double> weights;
    std::vector<std::size_t> free_idx;
    std::vector<std::pair<double, double>> bounds;
};

Prepared prepare(const FitProblem& p) {
    if (!p.model)
        throw std::invalid_argument("fit_nls: missing model");
    if (p.x.size() != p.y.size())
        throw std::invalid_argument("fit_nls: x/y size mismatch");
    if (p.initial.empty())
        throw std::invalid_argument("fit_nls: empty parameter vector");

    Prepared prep;
    prep.weights = p.weights;
    if (prep.weights.empty())
        prep.weights.assign(p.x.size(), 1.0);
    if (prep.weights.size() != p.x.size())
        throw std::invalid_argument("fit_nls: weight size mismatch");
    for (double w : prep.weights)
        if (!(w >= 0))
            throw std::invalid_argument("fit_nls: weights must be nonnegative");

    std::vector<bool> fixed = p.fixed;
    if (fixed.empty())
        fixed.assign(p.initial.size(), false);
    if (fixed.size() != p.initial.size())
        throw std::invalid_argument("fit_nls: fixed mask size mismatch");
    for (std::size_t j = 0; j < p.initial.size(); ++j)
        if (!fixed[j])
            prep.free_idx.push_back(j);
    if (prep.free_idx.empty())
        throw std::invalid_argument("fit_nls: no free parameters");
    if (p.x.size() < prep.free_idx.size())
        throw EstimationError("degenerate fit: fewer data points than free parameters");

    prep.bounds = p.bounds;
    if (prep.bounds.empty())
        prep.bounds.assign(p.initial.size(),
                           {-std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity()});
    if (prep.bounds.size() != p.initial.size())
        throw std::invalid_argument("fit_nls: bounds size mismatch");
    for (std::size_t j = 0; j < p.initial.size(); ++j)
        if (p.initial[j] < prep.bounds[j].first || p.initial[j] > prep.bounds[j].second)
            throw std::invalid_argument("fit_nls: initial parameters outside bounds");
    return prep;
}

double eval_cost(const FitProblem& p, const std::vector<double>& w,
                 const std::vector<double>& params) {
    double cost = 0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        double r = p.y[i] - p.model(p.x[i], params);
        cost += w[i] * r * r;
    }
    return cost;
}

}  // namespace

std::vector<std::vector<double>> numeric_jacobian(
    const std::function<double(double, std::span<const double>)>& model,
    std::span<const double> x, std::span<const double> params) {
    std::vector<double> p(params.begin(), params.end());
    std::vector<std::vector<double>> jac(x.size(), std::vector<double>(p.size(), 0.0));
    for (std::size_t j = 0; j < p.size(); ++j) {
        double h = kFdStep * std::max(std::abs(p[j]), 1.0);
        double saved = p[j];
        p[j] = saved + h;
        std::vector<double> hi(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            hi[i] = model(x[i], p);
        p[j] = saved - h;
        for (std::size_t i = 0; i < x.size(); ++i)
            jac[i][j] = (hi[i] - model(x[i], p)) / (2.0 * h);
        p[j] = saved;
    }
    return jac;
}

FitResult fit_nls(const FitProblem& p) {
    Prepared prep = prepare(p);
    const std::size_t n = p.x.size();
    const std::size_t nf = prep.free_idx.size();

    std::vector<double> params = p.initial;
    double cost = eval_cost(p, prep.weights, params);

    FitResult result;
    result.cost_history.push_back(cost);

    auto jacobian_free = [&](const std::vector<double>& at) {
        Eigen::MatrixXd jac(n, nf);
        std::vector<double> probe = at;
        for (std::size_t jj = 0; jj < nf; ++jj) {
            std::size_t j = prep.free_idx[jj];
            double h = kFdStep * std::max(std::abs(at[j]), 1.0);
            double saved = probe[j];
            probe[j] = saved + h;
            std::vector<double> hi(n);
            for (std::size_t i = 0; i < n; ++i)
                hi[i] = p.model(p.x[i], probe);
            probe[j] = saved - h;
            for (std::size_t i = 0; i < n; ++i)
                jac(i, jj) = (hi[i] - p.model(p.x[i], probe)) / (2.0 * h);
            probe[j] = saved;
        }
        return jac;
    };

    double lambda = 1e-4;
    bool converged = false;
    int iter = 0;
    for (; iter < kMaxIterations && !converged; ++iter) {
        Eigen::MatrixXd jac = jacobian_free(params);
        Eigen::VectorXd resid(n);
        for (std::size_t i = 0; i < n; ++i)
            resid(i) = std::sqrt(prep.weights[i]) * (p.y[i] - p.model(p.x[i], params));
        Eigen::MatrixXd jw = jac;
        for (std::size_t i = 0; i < n; ++i)
            jw.row(i) *= std::sqrt(prep.weights[i]);

        Eigen::MatrixXd curvature = jw.transpose() * jw;
        Eigen::VectorXd gradient = jw.transpose() * resid;
        result.gradient_norm = 2.0 * gradient.lpNorm<Eigen::Infinity>();
        if (result.gradient_norm < kGradTol) {
            converged = true;
            break;
        }
        if (iter == 0 && curvature.diagonal().maxCoeff() <= 0.0)
            throw EstimationError("degenerate fit: singular curvature at the initial point");

        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = curvature;
            for (std::size_t jj = 0; jj < nf; ++jj)
                damped(jj, jj) += lambda * std::max(curvature(jj, jj), 1e-30);
            Eigen::VectorXd step = damped.ldlt().solve(gradient);
            if (!step.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            std::vector<double> trial = params;
            for (std::size_t jj = 0; jj < nf; ++jj) {
                std::size_t j = prep.free_idx[jj];
                trial[j] = clampd(params[j] + step(jj), prep.bounds[j]);
            }
            double trial_cost = eval_cost(p, prep.weights, trial);
            if (trial_cost < cost) {
                double rel_change = (cost - trial_cost) / std::max(cost, 1e-300);
                params = trial;
                cost = trial_cost;
                result.cost_history.push_back(cost);
                lambda = std::max(lambda * 0.25, 1e-14);
                accepted = true;
                if (rel_change < kRelCostTol)
                    converged = true;
            } else {
                lambda *= 4.0;
                if (lambda > 1e14)
                    break;
            }
        }
        if (!accepted)
            break;  // no descent direction left; gradient check above decides
    }

    // curvature errors at the solution
    Eigen::MatrixXd jac = jacobian_free(params);
    Eigen::MatrixXd jw = jac;
    for (std::size_t i = 0; i < n; ++i)
        jw.row(i) *= std::sqrt(prep.weights[i]);
    Eigen::MatrixXd curvature = jw.transpose() * jw;
    double chi2_red = cost / static_cast<double>(std::max<std::size_t>(1, n - nf));

    result.params = params;
    result.std_errors.assign(params.size(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(curvature);
    if (es.info() == Eigen::Success) {
        double lam_max = es.eigenvalues().maxCoeff();
        for (std::size_t jj = 0; jj < nf; ++jj) {
            double var = 0;
            bool singular = false;
            for (std::size_t kk = 0; kk < nf; ++kk) {
                double lam = es.eigenvalues()(kk);
                double v = es.eigenvectors()(jj, kk);
                if (lam <= lam_max * 1e-14 || lam <= 0) {
                    if (v * v > 1e-20)
                        singular = true;
                    continue;
                }
                var += v * v / lam;
            }
            result.std_errors[prep.free_idx[jj]] =
                singular ? std::numeric_limits<double>::infinity()
                         : std::sqrt(var * chi2_red);
        }
    }
    result.chi2_reduced = chi2_red;
    result.converged = converged;
    result.iterations = iter;
    return result;
}

// ---------------------------------------------------------------------------
// named fits; frequencies are handled internally in 2pi MHz units

namespace {

constexpr double kMHz = c::two_pi * 1e6;

std::vector<double> default_weights(const ScanTrace& trace) {
    std::vector<double> w(trace.y.size(), 1.0);
    if (trace.kind == TraceKind::counts)
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = 1.0 / std::max(trace.y[i], 1.0);
    return w;
}

}  // namespace

LorentzianDip fit_lorentzian_dip(const ScanTrace& trace) {
    trace.validate();
    if (trace.x.size() < 5)
        throw EstimationError("lorentzian dip fit needs at least 5 samples");

    std::vector<double> xm(trace.x.size());
    for (std::size_t i = 0; i < xm.size(); ++i)
        xm[i] = trace.x[i] / kMHz;

    const auto [ymin_it, ymax_it] = std::minmax_element(trace.y.begin(), trace.y.end());
    double ymin = *ymin_it, ymax = *ymax_it;
    double range = ymax - ymin;
    if (range <= 1e-12 * std::max(1.0, std::abs(ymax)))
        throw EstimationError("flat signal: no dip to fit");

    std::size_t imin = static_cast<std::size_t>(ymin_it - trace.y.begin());
    double span = xm.back() - xm.front();
    double half_level = ymax - 0.5 * range;
    double left = xm[imin], right = xm[imin];
    for (std::size_t i = imin; i-- > 0;)
        if (trace.y[i] >= half_level) { left = xm[i]; break; }
    for (std::size_t i = imin + 1; i < xm.size(); ++i)
        if (trace.y[i] >= half_level) { right = xm[i]; break; }
    double hwhm0 = std::max(0.5 * (right - left), span / 200.0);

    FitProblem problem;
    problem.model = [](double x, std::span<const double> q) {
        double cdiff = x - q[0], h = q[1];
        return q[3] - q[2] * h * h / (h * h + cdiff * cdiff);
    };
    problem.x = xm;
    problem.y = trace.y;
    problem.weights = default_weights(trace);
    problem.initial = {xm[imin], hwhm0, range, ymax};
    problem.bounds = {{xm.front() - span, xm.back() + span},
                      {span * 1e-6, span * 100.0},
                      {0.0, std::numeric_limits<double>::infinity()},
                      {-std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()}};
    auto fitres = fit_nls(problem);

    LorentzianDip dip;
    dip.center = fitres.params[0] * kMHz;
    dip.hwhm = fitres.params[1] * kMHz;
    dip.depth = fitres.params[2];
    dip.offset = fitres.params[3];
    dip.fit = std::move(fitres);
    if (dip.depth <= 2.0 * dip.fit.std_errors[2])
        throw EstimationError("flat signal: fitted dip depth is consistent with zero");
    return dip;
}

AbsorptionFit fit_absorption(std::span<const double> delta,
                             std::span<const double> kappa_prime,
                             std::optional<double> fixed_g_collective) {
    if (delta.size() != kappa_prime.size())
        throw std::invalid_argument("fit_absorption: size mismatch");
    if (delta.size() < 3)
        throw EstimationError("fit_absorption needs at least 3 detuning points");

    AbsorptionFit out;
    if (fixed_g_collective && *fixed_g_collective == 0.0) {
        // kappa'(Delta) = kappa: gamma' drops out of the model entirely
        double mean = std::accumulate(kappa_prime.begin(), kappa_prime.end(), 0.0) /
                      static_cast<double>(kappa_prime.size());
        double ss = 0;
        for (double k : kappa_prime)
            ss += (k - mean) * (k - mean);
        out.g_collective = 0.0;
        out.gamma_eff = 0.0;
        out.gamma_identifiable = false;
        out.kappa = mean;
        out.fit.params = {0.0, 0.0, mean / kMHz};
        std::size_t n = kappa_prime.size();
        double se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * (n - 1))) : 0.0;
        out.fit.std_errors = {0.0, std::numeric_limits<double>::infinity(), se / kMHz};
        out.fit.chi2_reduced = n > 1 ? ss / (n - 1) : 0.0;
        out.fit.converged = true;
        return out;
    }

    std::vector<double> xm(delta.size()), ym(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        xm[i] = delta[i] / kMHz;
        ym[i] = kappa_prime[i] / kMHz;
    }
    double kmin = *std::min_element(ym.begin(), ym.end());
    double peak = *std::max_element(ym.begin(), ym.end()) - kmin;
    double gamma0 = 0;
    for (std::size_t i = 0; i < xm.size(); ++i)
        if (ym[i] - kmin >= 0.5 * peak)
            gamma0 = std::max(gamma0, std::abs(xm[i]));
    if (gamma0 <= 0)
        gamma0 = *std::max_element(xm.begin(), xm.end(),
                                   [](double a, double b) { return std::abs(a) < std::abs(b); });
    gamma0 = std::max(std::abs(gamma0), 1e-3);
    double g0 = std::sqrt(std::max(peak, 1e-6) * gamma0);

    FitProblem problem;
    problem.model = [](double x, std::span<const double> q) {
        double gn = q[0], gp = q[1];
        return q[2] + gn * gn * gp / (gp * gp + x * x);
    };
    problem.x = xm;
    problem.y = ym;
    problem.initial = {fixed_g_collective ? *fixed_g_collective / kMHz : g0, gamma0, kmin};
    problem.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                      {1e-6, 1e6},
                      {-std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()}};
    if (fixed_g_collective)
        problem.fixed = {true, false, false};
    auto fitres = fit_nls(problem);

    out.g_collective = fitres.params[0] * kMHz;
    out.gamma_eff = fitres.params[1] * kMHz;
    out.kappa = fitres.params[2] * kMHz;
    out.gamma_identifiable = std::isfinite(fitres.std_errors[1]);
    out.fit = std::move(fitres);
    return out;
}

DispersionFit fit_dispersion(std::span<const double> delta, std::span<const double> shift) {
    if (delta.size() != shift.size())
        throw std::invalid_argument("fit_dispersion: size mismatch");
    if (delta.size() < 2)
        throw EstimationError("fit_dispersion needs at least 2 points");
    bool has_pos = false, has_neg = false;
    for (double d : delta) {
        has_pos |= d > 0;
        has_neg |= d < 0;
    }
    if (!has_pos || !has_neg)
        throw EstimationError("fit_dispersion needs detunings of both signs");

    std::vector<double> xm(delta.size()), ym(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        xm[i] = delta[i] / kMHz;
        ym[i] = shift[i] / kMHz;
    }
    std::size_t iext = 0;
    for (std::size_t i = 1; i < ym.size(); ++i)
        if (std::abs(ym[i]) > std::abs(ym[iext]))
            iext = i;
    double gamma0 = std::max(std::abs(xm[iext]), 1e-3);
    double g0 = std::sqrt(std::max(2.0 * gamma0 * std::abs(ym[iext]), 1e-6));

    FitProblem problem;
    problem.model = [](double x, std::span<const double> q) {
        double gn = q[0], gp = q[1];
        return -gn * gn * x / (gp * gp + x * x);
    };
    problem.x = xm;
    problem.y = ym;
    problem.initial = {g0, gamma0};
    problem.bounds = {{0.0, std::numeric_limits<double>::infinity()}, {1e-6, 1e6}};
    auto fitres = fit_nls(problem);

    DispersionFit out;
    out.g_collective = fitres.params[0] * kMHz;
    out.gamma_eff = fitres.params[1] * kMHz;
    out.fit = std::move(fitres);
    return out;
}

RabiFit fit_rabi(const ScanTrace& trace, const CavityRates& rates, double gamma_eff) {
    trace.validate();
    if (!(gamma_eff > 0))
        throw std::invalid_argument("fit_rabi needs a positive fixed gamma'");
    if (trace.x.size() < 5)
        throw EstimationError("fit_rabi needs at least 5 samples");

    const double kappa = rates.kappa / kMHz;
    const double kappa1 = rates.kappa1 / kMHz;
    const double gp = gamma_eff / kMHz;

    std::vector<double> xm(trace.x.size());
    for (std::size_t i = 0; i < xm.size(); ++i)
        xm[i] = trace.x[i] / kMHz;

    // edge samples approximate the off-resonant level (R -> 1)
    double scale0 = 0.5 * (trace.y.front() + trace.y.back());
    if (!(scale0 > 0))
        scale0 = std::max(*std::max_element(trace.y.begin(), trace.y.end()), 1e-12);

    // two-dip initialization: deepest sample on each side of zero
    double best_neg = 0, best_pos = 0, yneg = std::numeric_limits<double>::infinity(),
           ypos = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xm.size(); ++i) {
        if (xm[i] < 0 && trace.y[i] < yneg) { yneg = trace.y[i]; best_neg = xm[i]; }
        if (xm[i] > 0 && trace.y[i] < ypos) { ypos = trace.y[i]; best_pos = xm[i]; }
    }
    double g0 = 0.5 * (best_pos - best_neg);
    if (!(g0 > 0.25 * kappa))
        g0 = 0.25 * kappa;  // single-dip traces start near zero coupling

    FitProblem problem;
    problem.model = [kappa, kappa1, gp](double x, std::span<const double> q) {
        double g2n = q[0] * q[0];
        double denom = gp * gp + x * x;
        double kp = kappa + g2n * gp / denom;
        double dcp = x - g2n * x / denom;
        double num = (2.0 * kappa1 - kp) * (2.0 * kappa1 - kp) + dcp * dcp;
        return q[1] * num / (kp * kp + dcp * dcp);
    };
    problem.x = xm;
    problem.y = trace.y;
    problem.weights = default_weights(trace);
    problem.initial = {g0, scale0};
    problem.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                      {1e-12, std::numeric_limits<double>::infinity()}};
    auto fitres = fit_nls(problem);

    RabiFit out;
    out.g_collective = fitres.params[0] * kMHz;
    out.scale = fitres.params[1];
    out.fit = std::move(fitres);
    return out;
}

SqrtNFit fit_sqrtN(std::span<const double> n_eff, std::span<const double> g_collective) {
    if (n_eff.size() != g_collective.size())
        throw std::invalid_argument("fit_sqrtN: size mismatch");
    if (n_eff.empty())
        throw EstimationError("fit_sqrtN needs at least one point");

    double g0 = 0;
    int used = 0;
    for (std::size_t i = 0; i < n_eff.size(); ++i) {
        if (n_eff[i] > 0) {
            g0 += g_collective[i] / kMHz / std::sqrt(n_eff[i]);
            ++used;
        }
    }
    if (used == 0)
        throw EstimationError("fit_sqrtN: all ion numbers are zero");
    g0 /= used;

    FitProblem problem;
    problem.model = [](double x, std::span<const double> q) { return q[0] * std::sqrt(x); };
    problem.x.assign(n_eff.begin(), n_eff.end());
    for (double g : g_collective)
        problem.y.push_back(g / kMHz);
    problem.initial = {g0};
    problem.bounds = {{0.0, std::numeric_limits<double>::infinity()}};
    auto fitres = fit_nls(problem);

    SqrtNFit out;
    out.g_single = fitres.params[0] * kMHz;
    out.fit = std::move(fitres);
    return out;
}

// ---------------------------------------------------------------------------
// Larmor trace fit

namespace {

enum class Envelope { exponential, gaussian };

double envelope_value(Envelope kind, double t, double ts) {
    if (kind == Envelope::exponential)
        return std::exp(-t / ts);
    return std::exp(-t * t / (ts * ts));
}

// linear LSQ of a cos(w t) + b cos(2 w t) + c for fixed omega and envelope
double linear_harmonics(std::span<const double> t, std::span<const double> y, double omega,
                        Envelope kind, double ts, double coeffs[3]) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < t.size(); ++i) {
        double env = envelope_value(kind, t[i], ts);
        double basis[3] = {std::cos(omega * t[i]) * env, std::cos(2.0 * omega * t[i]) * env, 1.0};
        for (int r = 0; r < 3; ++r) {
            aty(r) += basis[r] * y[i];
            for (int s = 0; s < 3; ++s)
                ata(r, s) += basis[r] * basis[s];
        }
    }
    Eigen::Vector3d sol = ata.ldlt().solve(aty);
    double ssr = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double env = envelope_value(kind, t[i], ts);
        double f = sol(0) * std::cos(omega * t[i]) * env +
                   sol(1) * std::cos(2.0 * omega * t[i]) * env + sol(2);
        ssr += (y[i] - f) * (y[i] - f);
    }
    coeffs[0] = sol(0);
    coeffs[1] = sol(1);
    coeffs[2] = sol(2);
    return ssr;
}

LarmorEnvelopeFit fit_larmor_envelope(std::span<const double> tu, std::span<const double> y,
                                      Envelope kind, double omega0, double window,
                                      bool profile_timescale) {
    const double ts0 = 4.0 * window;
    double coeffs[3];
    linear_harmonics(tu, y, omega0, kind, ts0, coeffs);

    auto model = [kind](double t, std::span<const double> q) {
        double env = envelope_value(kind, t, q[4]);
        return (q[0] * std::cos(q[3] * t) + q[1] * std::cos(2.0 * q[3] * t)) * env + q[2];
    };

    FitProblem problem;
    problem.model = model;
    problem.x.assign(tu.begin(), tu.end());
    problem.y.assign(y.begin(), y.end());
    problem.initial = {coeffs[0], coeffs[1], coeffs[2], omega0, ts0};
    const double inf = std::numeric_limits<double>::infinity();
    problem.bounds = {{-inf, inf},
                      {-inf, inf},
                      {-inf, inf},
                      {omega0 * 0.5, omega0 * 1.5},
                      {window * 1e-3, window * 1e6}};
    auto fitres = fit_nls(problem);

    LarmorEnvelopeFit out;
    out.a = fitres.params[0];
    out.b = fitres.params[1];
    out.c = fitres.params[2];
    out.omega = fitres.params[3];
    out.timescale = fitres.params[4];
    out.chi2_reduced = fitres.chi2_reduced;

    out.timescale_lower = 0.0;
    out.timescale_upper = inf;
    if (profile_timescale) {
        // profiled bounds on the timescale: refit the other parameters with
        // the timescale pinned, walk out until the cost crosses the 1-sigma
        // level chi2_min*(1 + 1/(n-p))
        const std::size_t n = tu.size();
        const double cost_min = fitres.cost_history.back();
        const double threshold =
            cost_min + std::max(cost_min / static_cast<double>(std::max<std::size_t>(1, n - 5)),
                                1e-12 * std::max(cost_min, 1e-300));
        auto profiled_cost = [&](double ts) {
            FitProblem sub = problem;
            sub.initial = fitres.params;
            sub.initial[4] = ts;
            sub.bounds[4] = {std::min(ts, problem.bounds[4].first),
                             std::max(ts, problem.bounds[4].second)};
            sub.fixed = {false, false, false, false, true};
            auto r = fit_nls(sub);
            return r.cost_history.back();
        };
        double upper = out.timescale;
        bool unbounded_up = true;
        for (int k = 1; k <= 24; ++k) {
            double ts = out.timescale * std::pow(2.0, k);
            if (profiled_cost(ts) > threshold) {
                upper = ts;
                unbounded_up = false;
                break;
            }
        }
        out.timescale_upper = unbounded_up ? inf : upper;
        double lower = out.timescale;
        bool unbounded_down = true;
        for (int k = 1; k <= 24; ++k) {
            double ts = out.timescale * std::pow(0.5, k);
            if (ts < window * 1e-4 || profiled_cost(ts) > threshold) {
                lower = ts;
                unbounded_down = false;
                break;
            }
        }
        out.timescale_lower = unbounded_down ? 0.0 : lower;
    }
    out.fit = std::move(fitres);
    return out;
}

}  // namespace

LarmorFit fit_larmor(std::span<const double> tau, std::span<const double> coop,
                     bool profile_timescale) {
    if (tau.size() != coop.size())
        throw std::invalid_argument("fit_larmor: size mismatch");
    if (tau.size() < 8)
        throw EstimationError("fit_larmor needs at least 8 samples");

    // internal units: microseconds
    std::vector<double> tu(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i)
        tu[i] = tau[i] * 1e6;
    double window = tu.back() - tu.front();
    if (!(window > 0))
        throw std::invalid_argument("fit_larmor: delays must be increasing");

    double mean = std::accumulate(coop.begin(), coop.end(), 0.0) / coop.size();
    double range = *std::max_element(coop.begin(), coop.end()) -
                   *std::min_element(coop.begin(), coop.end());
    if (range <= 1e-12 * std::max(1.0, std::abs(mean)))
        throw EstimationError("fit_larmor: no oscillation in the trace");

    // coarse frequency scan with the envelope frozen flat
    double dt_min = window;
    for (std::size_t i = 1; i < tu.size(); ++i)
        dt_min = std::min(dt_min, tu[i] - tu[i - 1]);
    double omega_lo = c::two_pi * 1.5 / window;
    double omega_hi = c::two_pi * 0.45 / dt_min;
    if (!(omega_hi > omega_lo))
        throw EstimationError("fit_larmor: window too short to resolve oscillations");
    double best_omega = omega_lo, best_ssr = std::numeric_limits<double>::infinity();
    const int n_scan = 600;
    for (int s = 0; s <= n_scan; ++s) {
        double omega = omega_lo + (omega_hi - omega_lo) * s / n_scan;
        double coeffs[3];
        double ssr = linear_harmonics(tu, coop, omega, Envelope::exponential,
                                      window * 1e6, coeffs);
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best_omega = omega;
        }
    }

    LarmorFit out;
    out.exponential =
        fit_larmor_envelope(tu, coop, Envelope::exponential, best_omega, window, profile_timescale);
    out.gaussian =
        fit_larmor_envelope(tu, coop, Envelope::gaussian, best_omega, window, profile_timescale);
    // back to SI, including the reported uncertainties
    for (LarmorEnvelopeFit* f : {&out.exponential, &out.gaussian}) {
        f->omega *= 1e6;
        f->timescale *= 1e-6;
        f->timescale_lower *= 1e-6;
        f->timescale_upper *= 1e-6;
        if (f->fit.std_errors.size() == 5) {
            f->fit.std_errors[3] *= 1e6;
            f->fit.std_errors[4] *= 1e-6;
            f->fit.params[3] *= 1e6;
            f->fit.params[4] *= 1e-6;
        }
    }
    return out;
}

CalibrationFit fit_calibration(std::span<const double> current_amp,
                               std::span<const double> omega_l) {
    if (current_amp.size() != omega_l.size())
        throw std::invalid_argument("fit_calibration: size mismatch");
    if (current_amp.size() < 2)
        throw EstimationError("fit_calibration needs at least 2 currents");

    // internal units: mA and 2pi kHz
    const double kKHz = c::two_pi * 1e3;
    std::vector<double> xi(current_amp.size()), yi(current_amp.size());
    for (std::size_t i = 0; i < xi.size(); ++i) {
        xi[i] = current_amp[i] * 1e3;
        yi[i] = omega_l[i] / kKHz;
    }
    double wz0 = *std::min_element(yi.begin(), yi.end());
    double imax = 0, ymax = wz0;
    for (std::size_t i = 0; i < xi.size(); ++i)
        if (std::abs(xi[i]) > imax) {
            imax = std::abs(xi[i]);
            ymax = yi[i];
        }
    double slope0 = imax > 0 ? std::sqrt(std::max(ymax * ymax - wz0 * wz0, 1e-12)) / imax : 1.0;

    FitProblem problem;
    problem.model = [](double x, std::span<const double> q) {
        return std::sqrt(q[0] * q[0] + q[1] * q[1] * x * x);
    };
    problem.x = xi;
    problem.y = yi;
    problem.initial = {std::max(wz0, 1e-6), slope0};
    problem.bounds = {{0.0, std::numeric_limits<double>::infinity()},
                      {0.0, std::numeric_limits<double>::infinity()}};
    auto fitres = fit_nls(problem);

    CalibrationFit out;
    out.omega_z = fitres.params[0] * kKHz;
    out.slope = fitres.params[1] * kKHz * 1e3;  // per ampere
    out.fit = std::move(fitres);
    return out;
}

double CalibrationFit::bz_tesla(double g_factor) const {
    return omega_z * c::hbar / (c::bohr_magneton * g_factor);
}

double CalibrationFit::bx_tesla_per_amp(double g_factor) const {
    return slope * c::hbar / (c::bohr_magneton * g_factor);
}

}  // namespace icqed::fit
