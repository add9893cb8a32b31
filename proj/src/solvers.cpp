#include "mcno/solvers.hpp"

#include "mcno/error.hpp"
#include "mcno/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace mcno {

using cplx = std::complex<double>;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_grid(const GridFunction& u0, const char* who) {
    if (!is_power_of_two(u0.resolution()) || u0.resolution() < 4) {
        throw ConfigError(std::string(who) + ": resolution must be a power of two, got " +
                          std::to_string(u0.resolution()));
    }
    if (!u0.all_finite()) throw NumericalError(std::string(who) + ": non-finite initial data");
}

// Evaluates -coef * d/dx (u^2) in Fourier space, with the 2/3 rule applied to
// the input and the product. Returns max|u| of the physical-space field.
class QuadraticFlux {
public:
    QuadraticFlux(std::size_t n, double coef, bool dealias)
        : n_(n), fft_(n), coef_(coef), work_(n / 2 + 1), phys_(n) {
        keep_.resize(n / 2 + 1);
        for (std::size_t k = 0; k <= n / 2; ++k) {
            keep_[k] = dealias ? (3 * k < n) : (k < n / 2);
        }
    }

    double operator()(const std::vector<cplx>& uh, std::vector<cplx>& out) {
        for (std::size_t k = 0; k < work_.size(); ++k) work_[k] = keep_[k] ? uh[k] : cplx{};
        fft_.inverse(work_, phys_);
        const double inv_n = 1.0 / static_cast<double>(n_);
        double umax = 0.0;
        for (double& v : phys_) {
            v *= inv_n;
            umax = std::max(umax, std::abs(v));
            v = v * v;
        }
        fft_.forward(phys_, out);
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = keep_[k] ? cplx{0.0, -coef_ * two_pi * static_cast<double>(k)} * out[k] : cplx{};
        }
        return umax;
    }

    RealFft& fft() { return fft_; }

private:
    std::size_t n_;
    RealFft fft_;
    double coef_;
    std::vector<bool> keep_;
    std::vector<cplx> work_;
    std::vector<double> phys_;
};

GridFunction to_physical(RealFft& fft, const std::vector<cplx>& uh) {
    std::vector<double> u(fft.size());
    fft.inverse(uh, u);
    const double inv_n = 1.0 / static_cast<double>(fft.size());
    for (double& v : u) v *= inv_n;
    return GridFunction(std::move(u));
}

}  // namespace

std::size_t step_count(double final_time, double dt) {
    if (!(dt > 0.0) || !(final_time >= 0.0)) throw ConfigError("time step must be positive");
    const double ratio = final_time / dt;
    const double steps = std::round(ratio);
    if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("dt = " + std::to_string(dt) + " does not divide T = " +
                          std::to_string(final_time));
    }
    return static_cast<std::size_t>(steps);
}

BurgersResult burgers_evolve(const GridFunction& u0, const BurgersParams& p) {
    check_grid(u0, "burgers_evolve");
    if (!(p.nu > 0.0)) throw ConfigError("burgers_evolve: nu must be positive");
    const std::size_t steps = step_count(p.final_time, p.dt);
    const std::size_t n = u0.resolution();
    const std::size_t m = n / 2 + 1;

    // (u^2 / 2)_x moved to the right-hand side: coefficient 1/2.
    QuadraticFlux flux(n, 0.5, p.dealias);
    std::vector<cplx> uh(m);
    flux.fft().forward(u0.values(), uh);

    std::vector<double> half_decay(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double w = two_pi * static_cast<double>(k);
        half_decay[k] = std::exp(-p.nu * w * w * 0.5 * p.dt);
    }

    BurgersResult result;
    const double h = 1.0 / static_cast<double>(n);
    std::vector<cplx> k1(m), k2(m), stage(m);
    for (std::size_t step = 0; step < steps; ++step) {
        for (std::size_t k = 0; k < m; ++k) uh[k] *= half_decay[k];
        if (p.nonlinear) {
            const double umax = flux(uh, k1);
            if (!std::isfinite(umax)) {
                throw NumericalError("burgers_evolve: non-finite state at step " + std::to_string(step));
            }
            const double cfl = umax * p.dt / h;
            if (cfl > result.max_cfl) result.max_cfl = cfl;
            if (cfl > p.cfl_limit) {
                const std::string msg = "CFL number " + std::to_string(cfl) + " exceeds limit " +
                                        std::to_string(p.cfl_limit) + " at step " + std::to_string(step);
                if (p.cfl_is_error) throw NumericalError("burgers_evolve: " + msg);
                if (!result.warning) result.warning = msg;
            }
            for (std::size_t k = 0; k < m; ++k) stage[k] = uh[k] + p.dt * k1[k];
            flux(stage, k2);
            for (std::size_t k = 0; k < m; ++k) uh[k] += 0.5 * p.dt * (k1[k] + k2[k]);
        }
        for (std::size_t k = 0; k < m; ++k) uh[k] *= half_decay[k];
    }
    result.solution = to_physical(flux.fft(), uh);
    if (!result.solution.all_finite()) throw NumericalError("burgers_evolve: non-finite result");
    return result;
}

GridFunction kdv_evolve(const GridFunction& u0, const KdvParams& p) {
    check_grid(u0, "kdv_evolve");
    const std::size_t steps = step_count(p.final_time, p.dt);
    const std::size_t n = u0.resolution();
    const std::size_t m = n / 2 + 1;
    const double h = p.dt;

    // -0.5 u u_x = -0.25 (u^2)_x
    QuadraticFlux flux(n, 0.25, p.dealias);

    // Linear operator -d^3/dx^3 has symbol -(i w)^3 = i w^3.
    std::vector<cplx> E(m), E2(m), Q(m), f1(m), f2(m), f3(m);
    constexpr int contour_points = 64;
    for (std::size_t k = 0; k < m; ++k) {
        double w = two_pi * static_cast<double>(k);
        if (k == n / 2) w = 0.0;  // Nyquist mode carries no odd derivative
        const cplx lh{0.0, w * w * w * h};
        E[k] = std::exp(lh);
        E2[k] = std::exp(lh / 2.0);
        // Full circle of radius 1 around lh; lh is complex, so the real-part
        // shortcut for real spectra does not apply.
        cplx q{}, a{}, b{}, c{};
        for (int j = 0; j < contour_points; ++j) {
            const double theta = 2.0 * std::numbers::pi * (j + 0.5) / contour_points;
            const cplx z = lh + std::polar(1.0, theta);
            const cplx ez = std::exp(z);
            const cplx z3 = z * z * z;
            q += (std::exp(z / 2.0) - 1.0) / z;
            a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
            b += (2.0 + z + ez * (-2.0 + z)) / z3;
            c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
        }
        const double inv = 1.0 / contour_points;
        Q[k] = h * q * inv;
        f1[k] = h * a * inv;
        f2[k] = h * b * inv;
        f3[k] = h * c * inv;
    }

    std::vector<cplx> v(m), Nv(m), Na(m), Nb(m), Nc(m), a(m), b(m), c(m);
    flux.fft().forward(u0.values(), v);

    const double bound = p.blowup_factor * std::max(u0.max_abs(), 1e-12);
    for (std::size_t step = 0; step < steps; ++step) {
        if (!p.nonlinear) {
            for (std::size_t k = 0; k < m; ++k) v[k] *= E[k];
            continue;
        }
        const double umax = flux(v, Nv);
        if (!std::isfinite(umax) || umax > bound) {
            throw NumericalError("kdv_evolve: blow-up detected at step " + std::to_string(step) +
                                 " (max|u| = " + std::to_string(umax) + ")");
        }
        for (std::size_t k = 0; k < m; ++k) a[k] = E2[k] * v[k] + Q[k] * Nv[k];
        flux(a, Na);
        for (std::size_t k = 0; k < m; ++k) b[k] = E2[k] * v[k] + Q[k] * Na[k];
        flux(b, Nb);
        for (std::size_t k = 0; k < m; ++k) c[k] = E2[k] * a[k] + Q[k] * (2.0 * Nb[k] - Nv[k]);
        flux(c, Nc);
        for (std::size_t k = 0; k < m; ++k) {
            v[k] = E[k] * v[k] + Nv[k] * f1[k] + 2.0 * (Na[k] + Nb[k]) * f2[k] + Nc[k] * f3[k];
        }
    }
    GridFunction out = to_physical(flux.fft(), v);
    if (!out.all_finite() || out.max_abs() > bound) {
        throw NumericalError("kdv_evolve: blow-up detected at final step " + std::to_string(steps));
    }
    return out;
}

}  // namespace mcno
