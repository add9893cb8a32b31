#pragma once

// Fourier pseudo-spectral solvers on the periodic unit interval.

#include "mcno/grid_function.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace mcno {

// u_t + (u^2 / 2)_x = nu u_xx
struct BurgersParams {
    double nu = 0.1;
    double final_time = 1.0;
    double dt = 1e-4;
    bool dealias = true;
    // Heuristic bound on max|u| * dt / h. Spectral viscous damping keeps the
    // scheme stable well past the classical advective limit, so the default
    // only flags clearly runaway states.
    double cfl_limit = 4.0;
    bool cfl_is_error = false;
    // Test hook: drop the flux term and integrate the heat equation only.
    bool nonlinear = true;
};

struct BurgersResult {
    GridFunction solution;
    double max_cfl = 0.0;
    std::optional<std::string> warning;
};

// Strang splitting per step: exact diffusion half step in Fourier space, one
// Heun (RK2) step of the dealiased pseudo-spectral flux, exact diffusion half
// step. Second order in dt.
[[nodiscard]] BurgersResult burgers_evolve(const GridFunction& u0, const BurgersParams& params);

// u_t = -0.5 u u_x - u_xxx
struct KdvParams {
    double final_time = 1.0;
    double dt = 1e-5;
    bool dealias = true;
    // Blow-up is declared when max|u| exceeds this multiple of max|u0|.
    double blowup_factor = 10.0;
    // Test hook: integrate the linear dispersive part only.
    bool nonlinear = true;
};

// ETDRK4 with the dispersive term integrated exactly in Fourier space. The
// phi-function coefficients are evaluated by contour averaging to avoid
// cancellation for small |L dt|.
[[nodiscard]] GridFunction kdv_evolve(const GridFunction& u0, const KdvParams& params);

// Number of steps for final_time / dt; throws ConfigError unless dt divides
// final_time (relative tolerance 1e-9).
[[nodiscard]] std::size_t step_count(double final_time, double dt);

}  // namespace mcno
