#include "icqed/crystal.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "icqed/constants.hpp"
#include "icqed/errors.hpp"

namespace icqed::crystal {

namespace c = constants;

void CrystalSpec::validate() const {
    if (!(half_length_L > 0) || !(radius_R > 0) || !(density_rho >= 0))
        throw std::domain_error("crystal dimensions must be positive");
    if (!(pump_efficiency_eta > 0 && pump_efficiency_eta <= 1))
        throw std::domain_error("pump efficiency must lie in (0,1]");
}

ModeGeometry ModeGeometry::make(double waist_w0, double wavelength) {
    if (!(waist_w0 > 0) || !(wavelength > 0))
        throw std::domain_error("mode geometry needs positive waist and wavelength");
    return {waist_w0, wavelength, c::pi * waist_w0 * waist_w0 / wavelength};
}

double ModeGeometry::beam_radius(double z) const {
    return waist_w0 * std::sqrt(1.0 + (z / rayleigh_z0) * (z / rayleigh_z0));
}

double ion_density(const TrapParams& t) {
    if (!(t.u_rf >= 0))
        throw std::domain_error("RF amplitude must be nonnegative");
    if (t.density_coefficient) {
        // calibrated coefficient is quoted in cm^-3 V^-2
        return *t.density_coefficient * t.u_rf * t.u_rf * 1e6;
    }
    if (!(t.r0 > 0) || !(t.omega_rf > 0) || !(t.ion_mass > 0))
        throw std::domain_error("trap parameters must be positive");
    double r04 = std::pow(t.r0, 4);
    return c::epsilon0 * t.u_rf * t.u_rf /
           (t.ion_mass * r04 * t.omega_rf * t.omega_rf);
}

double mode_weight(const ModeGeometry& mode, double x, double y, double z,
                   bool axially_averaged) {
    double w = mode.beam_radius(z);
    double r2 = x * x + y * y;
    double envelope = (mode.waist_w0 / w) * (mode.waist_w0 / w) * std::exp(-2.0 * r2 / (w * w));
    if (axially_averaged)
        return 0.5 * envelope;
    double k = c::two_pi / mode.wavelength;
    double gouy = std::atan(z / mode.rayleigh_z0);
    // wavefront curvature term kr^2/2R(z) -> 0 on axis and at z = 0
    double curvature = z == 0.0 ? 0.0 : k * r2 * z / (2.0 * (z * z + mode.rayleigh_z0 * mode.rayleigh_z0));
    double s = std::sin(k * z - gouy + curvature);
    return envelope * s * s;
}

namespace {

// Adaptive Simpson with fixed tolerance; deterministic.
double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                            double fa, double fm, double fb, double whole, double tol,
                            int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0)
        throw NumericError("adaptive quadrature failed to converge (max depth)");
    if (std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double scale_hint) {
    double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double tol = rel_tol * std::max(std::abs(whole), scale_hint);
    if (tol == 0.0)
        return 0.0;
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

struct GaussLegendre {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

const GaussLegendre& gauss_legendre(int n) {
    static std::map<int, GaussLegendre> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end())
        return it->second;

    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 1; i < n; ++i)
        sub(i - 1) = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub);
    if (solver.info() != Eigen::Success)
        throw NumericError("Gauss-Legendre node computation failed");
    GaussLegendre gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        gl.nodes[i] = solver.eigenvalues()(i);
        double q0 = solver.eigenvectors()(0, i);
        gl.weights[i] = 2.0 * q0 * q0;
    }
    return cache.emplace(n, std::move(gl)).first->second;
}

// Transverse integral at axial position z: Gaussian of width w(z) centered
// a distance d off the disk center, over the disk of radius Rz. The offset
// is rotated onto the x axis (the slice is rotationally symmetric) and the
// y integral is analytic, leaving one smooth 1-D integral over the chord.
// The substitution x = Rz sin(theta) removes the sqrt endpoint singularity
// and the domain is clamped to the Gaussian support. Fixed-order
// Gauss-Legendre keeps the result smooth in z, so the outer adaptive
// quadrature never chases inner-grid jitter.
double transverse_overlap(double rz, double w, double d, int order) {
    if (rz <= 0.0)
        return 0.0;
    double lo = std::max(-rz, d - 7.5 * w);
    double hi = std::min(rz, d + 7.5 * w);
    if (lo >= hi)
        return 0.0;
    double theta_lo = std::asin(std::max(-1.0, lo / rz));
    double theta_hi = std::asin(std::min(1.0, hi / rz));
    const double s = std::sqrt(2.0) / w;
    const auto& gl = gauss_legendre(order);
    const double mid = 0.5 * (theta_lo + theta_hi), half = 0.5 * (theta_hi - theta_lo);
    double sum = 0;
    for (int i = 0; i < order; ++i) {
        double theta = mid + half * gl.nodes[i];
        double x = rz * std::sin(theta);
        double yext = rz * std::cos(theta);  // chord half-height, also the Jacobian/rz
        double gauss = std::exp(-2.0 * (x - d) * (x - d) / (w * w));
        sum += gl.weights[i] * yext * gauss * std::erf(s * yext);
    }
    return sum * half * w * std::sqrt(c::pi / 2.0);
}

double effective_count_at_tol(const CrystalSpec& cs, const ModeGeometry& m, double rel_tol,
                              int inner_order) {
    const double d = std::hypot(cs.offset_x0, cs.offset_y0);
    const double L = cs.half_length_L;
    auto slice = [&](double z) {
        double frac = 1.0 - (z / L) * (z / L);
        double rz = cs.radius_R * std::sqrt(std::max(0.0, frac));
        return transverse_overlap(rz, m.beam_radius(z), d, inner_order);
    };
    double hint = c::pi * m.waist_w0 * m.waist_w0 / 2.0 * 2.0 * L;
    double integral = adaptive_simpson(slice, -L, L, rel_tol, hint * 1e-3);
    return cs.pump_efficiency_eta * cs.density_rho / 2.0 * integral;
}

}  // namespace

double effective_ion_count(const CrystalSpec& cs, const ModeGeometry& m) {
    cs.validate();
    if (cs.density_rho == 0.0)
        return 0.0;
    double coarse = effective_count_at_tol(cs, m, 1e-6, 80);
    double fine = effective_count_at_tol(cs, m, 1e-7, 120);
    double scale = std::max(std::abs(fine), 1e-300);
    if (std::abs(fine - coarse) / scale > 1e-4)
        throw NumericError(
            "effective_ion_count quadrature did not converge to 1e-4: levels differ by " +
            std::to_string(std::abs(fine - coarse) / scale));
    return fine;
}

double effective_ion_count_thin(double rho, double half_length_L, double waist_w0) {
    if (!(rho >= 0) || !(half_length_L > 0) || !(waist_w0 >= 0))
        throw std::domain_error("thin-crystal estimate needs nonnegative inputs");
    return rho * c::pi * waist_w0 * waist_w0 / 4.0 * half_length_L;
}

double total_ion_count(const CrystalSpec& cs) {
    cs.validate();
    return cs.density_rho * 4.0 / 3.0 * c::pi * cs.radius_R * cs.radius_R * cs.half_length_L;
}

double count_uncertainty(double rel_drho, double imaging_dx, const CrystalSpec& cs,
                         double rel_deta) {
    if (rel_drho < 0 || imaging_dx < 0 || rel_deta < 0)
        throw std::domain_error("uncertainties must be nonnegative");
    cs.validate();
    double L = cs.half_length_L, R = cs.radius_R;
    double rel_dv = imaging_dx * std::sqrt(16.0 * L * L + R * R) / (2.0 * R * L);
    return std::sqrt(rel_drho * rel_drho + rel_dv * rel_dv + rel_deta * rel_deta);
}

}  // namespace icqed::crystal
