#pragma once

// Bias and variance of grid and Monte Carlo quadrature of kernel integrals
//   (K v)(x) = int_{[0,1]^d} kappa(x, y) v(y) dy
// on closed-form synthetic kernels, d = 1..3.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mcno::mc {

using Point = std::span<const double>;

struct SyntheticKernel {
    std::string id;
    std::size_t dim = 1;
    std::function<double(Point x, Point y)> eval;
    // sup |kappa| and the Euclidean Lipschitz constant in y, both derived by hand.
    double sup_bound = 0.0;
    double lipschitz = 0.0;
    std::string description;
};

struct TestFunction {
    std::string id;
    std::function<double(Point y)> eval;
    double sup_bound = 0.0;
    double lipschitz = 0.0;
};

// Kernel ids: zero, const, sin, gauss, trig. Each is defined for any d.
[[nodiscard]] SyntheticKernel make_kernel(std::string_view id, std::size_t dim);
[[nodiscard]] std::vector<std::string> kernel_ids();
// Test function ids: one, wave.
[[nodiscard]] TestFunction make_test_function(std::string_view id, std::size_t dim);

// Bounds for the integrand y -> kappa(x, y) v(y).
[[nodiscard]] double integrand_sup(const SyntheticKernel& k, const TestFunction& v);
[[nodiscard]] double integrand_lipschitz(const SyntheticKernel& k, const TestFunction& v);

// Tensor-product composite Gauss-Legendre, doubling the panel count until two
// successive results differ by less than tol. Throws NumericalError when that
// does not happen within the refinement budget.
[[nodiscard]] double true_integral(const SyntheticKernel& k, const TestFunction& v, Point x,
                                   double tol = 1e-10);

// Where the node sits inside each of the N_grid hypercubes of side h.
enum class Placement { corner, midpoint };

[[nodiscard]] std::string_view placement_name(Placement p);

// Uniform tensor grid with m points per axis: node j sits at j*h (corner) or
// (j + 1/2)*h (midpoint), h = 1/m.
[[nodiscard]] std::vector<std::vector<double>> grid_nodes(std::size_t per_axis, std::size_t dim, Placement p);

// Equal-weight average of kappa(x, y_j) v(y_j) over an m^d grid.
[[nodiscard]] double grid_quadrature(const SyntheticKernel& k, const TestFunction& v, Point x,
                                     std::size_t per_axis, Placement p);

// Fixed quasi-uniform probe set in [0,1)^d (Kronecker sequence built from the
// generalized golden ratio).
[[nodiscard]] std::vector<std::vector<double>> probe_points(std::size_t count, std::size_t dim);

// Least-squares slope of log(y) against log(x).
[[nodiscard]] double loglog_slope(std::span<const double> x, std::span<const double> y);

struct ScalingRow {
    double axis = 0.0;   // N_grid or N
    double error = 0.0;  // sup over probes (bias) or (1-delta)-quantile (variance)
    double bound = 0.0;  // C1 N_grid^{-1/d} or C2 sqrt(log(2 N_grid / delta) / N)
    std::size_t violations = 0;  // variance only: trials over the bound
};

struct ScalingReport {
    std::string kind;  // "bias" or "variance"
    std::string kernel;
    std::string test_function;
    std::size_t dim = 1;
    std::string mode;  // placement, or sampling mode for variance
    std::vector<ScalingRow> rows;
    double slope = 0.0;
    double theory_slope = 0.0;
    bool below_resolution = false;  // every error under 1e-14: no slope claim
    double constant = 0.0;           // C1 or C2
    double delta = 0.0;
    std::size_t trials = 0;
    std::size_t n_grid = 0;

    [[nodiscard]] std::size_t total_violations() const;
    // Binomial slack on the violation count: delta*T + 3 sqrt(delta(1-delta)T)
    // per row, applied row by row.
    [[nodiscard]] bool bound_holds() const;
};

// Per-axis counts m for the d-dimensional bias sweep: m^d stays within
// [2^4, 2^12].
[[nodiscard]] std::vector<std::size_t> default_bias_axes(std::size_t dim);

// Sup over the probe set of |grid_quadrature - true_integral| per grid size.
// Throws NumericalError on a degenerate fit unless every error is below 1e-14,
// which is reported as below_resolution.
[[nodiscard]] ScalingReport bias_curve(const SyntheticKernel& k, const TestFunction& v,
                                       std::span<const std::size_t> per_axis, Placement p,
                                       std::size_t probes = 64);

enum class Sampling { without_replacement, with_replacement };

[[nodiscard]] std::string_view sampling_name(Sampling s);

struct VarianceConfig {
    std::vector<std::size_t> sample_counts{16, 32, 64, 128, 256, 512};
    std::size_t trials = 400;
    std::size_t n_grid = 8192;  // 1-d corner grid
    double delta = 0.05;
    std::size_t probes = 64;
    std::uint64_t seed = 0;
    Sampling sampling = Sampling::without_replacement;
};

// d = 1 only. Each trial draws N grid nodes, forms the Monte Carlo average at
// every probe and records the sup error against grid_quadrature.
[[nodiscard]] ScalingReport variance_curve(const SyntheticKernel& k, const TestFunction& v,
                                           const VarianceConfig& cfg);

// Monte Carlo average over the chosen grid node indices of a 1-d corner grid.
[[nodiscard]] double mc_estimate(const SyntheticKernel& k, const TestFunction& v, Point x,
                                 std::span<const std::size_t> indices, std::size_t n_grid);

struct CostRow {
    double eps = 0.0;
    std::size_t dim = 1;
    std::size_t n_grid = 0;  // ceil(eps^-d)
    std::size_t n = 0;       // ceil(eps^-2 ln(eps^-d))
};

[[nodiscard]] std::vector<CostRow> cost_table(std::span<const double> eps_list, std::span<const std::size_t> dims);

struct TimingRow {
    std::size_t size = 0;
    double seconds = 0.0;
};

struct TimingScan {
    std::string stage;  // "aggregation" (vs N) or "reconstruction" (vs N_grid)
    std::vector<TimingRow> rows;
    double slope = 0.0;  // log-log
};

// Times the MCNO kernel stages: the per-sample mix over N samples, and
// interpolation of fixed samples onto N_grid points. Each entry is the best of
// several repeats.
[[nodiscard]] TimingScan time_aggregation(std::span<const std::size_t> sample_counts, std::size_t width);
[[nodiscard]] TimingScan time_reconstruction(std::span<const std::size_t> grid_sizes, std::size_t samples,
                                             std::size_t width);

// CSV writers (atomic). Columns:
//   scaling: kind,kernel,test_function,dim,mode,axis,error,bound,violations,trials,delta,constant,slope,theory_slope
//   cost:    eps,dim,n_grid,n
//   timing:  stage,size,seconds,slope
void write_scaling_csv(const ScalingReport& r, const std::filesystem::path& path);
void write_cost_csv(std::span<const CostRow> rows, const std::filesystem::path& path);
void write_timing_csv(std::span<const TimingScan> scans, const std::filesystem::path& path);

}  // namespace mcno::mc
