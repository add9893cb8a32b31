#include "mcno/mc_analysis.hpp"

#include "mcno/csv.hpp"
#include "mcno/error.hpp"
#include "mcno/model.hpp"
#include "mcno/tensor.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>

namespace mcno::mc {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_dim(std::size_t dim) {
    if (dim < 1 || dim > 3) throw ConfigError("dimension must be 1, 2 or 3, got " + std::to_string(dim));
}

void check_point(Point p, std::size_t dim, const char* what) {
    if (p.size() != dim) {
        throw ShapeError(std::string(what) + ": point has " + std::to_string(p.size()) + " coordinates, expected " +
                         std::to_string(dim));
    }
}

struct GaussRule {
    std::vector<double> nodes, weights;
};

// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
GaussRule gauss_legendre(std::size_t n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (std::size_t k = 2; k <= n; ++k) {
                const double dk = static_cast<double>(k);
                const double p2 = ((2.0 * dk - 1.0) * z * p1 - (dk - 1.0) * p0) / dk;
                p0 = p1;
                p1 = p2;
            }
            dp = dn * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.nodes[n - 1 - i] = z;
        r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

const GaussRule& rule8() {
    static const GaussRule r = gauss_legendre(8);
    return r;
}

double composite_gl(const SyntheticKernel& k, const TestFunction& v, Point x, std::size_t panels) {
    const std::size_t dim = k.dim;
    const auto& gl = rule8();
    const std::size_t q_count = gl.nodes.size();
    const std::size_t per_axis = panels * q_count;
    std::vector<double> nodes(per_axis), weights(per_axis);
    const double h = 1.0 / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        for (std::size_t q = 0; q < q_count; ++q) {
            nodes[p * q_count + q] = h * (static_cast<double>(p) + 0.5 * (gl.nodes[q] + 1.0));
            weights[p * q_count + q] = 0.5 * h * gl.weights[q];
        }
    }
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= per_axis;
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> y(dim);
    double acc = 0.0;
    for (std::size_t n = 0; n < total; ++n) {
        double w = 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
            y[d] = nodes[idx[d]];
            w *= weights[idx[d]];
        }
        acc += w * k.eval(x, y) * v.eval(y);
        for (std::size_t d = 0; d < dim; ++d) {
            if (++idx[d] < per_axis) break;
            idx[d] = 0;
        }
    }
    return acc;
}

std::size_t ipow(std::size_t base, std::size_t e) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < e; ++i) r *= base;
    return r;
}

double placement_offset(Placement p) { return p == Placement::corner ? 0.0 : 0.5; }

// Per-call seconds of each job. Repeat counts are calibrated to about 10 ms per
// job, then every job is timed once per round and the best round is kept, so
// slow drift in machine speed hits all sizes alike.
std::vector<double> interleaved_best(const std::vector<std::function<void()>>& jobs, int rounds = 7) {
    using clock = std::chrono::steady_clock;
    auto run = [](const std::function<void()>& f, std::size_t reps) {
        const auto t0 = clock::now();
        for (std::size_t r = 0; r < reps; ++r) f();
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    std::vector<std::size_t> reps(jobs.size(), 1);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        while (run(jobs[j], reps[j]) < 0.01 && reps[j] < (std::size_t{1} << 20)) reps[j] *= 2;
    }
    std::vector<double> best(jobs.size(), 1e300);
    for (int r = 0; r < rounds; ++r) {
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            best[j] = std::min(best[j], run(jobs[j], reps[j]) / static_cast<double>(reps[j]));
        }
    }
    return best;
}

TimingScan finish_scan(std::string stage, std::span<const std::size_t> sizes, const std::vector<double>& secs) {
    TimingScan scan;
    scan.stage = std::move(stage);
    std::vector<double> axis;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        scan.rows.push_back({sizes[i], secs[i]});
        axis.push_back(static_cast<double>(sizes[i]));
    }
    if (axis.size() >= 2) scan.slope = loglog_slope(axis, secs);
    return scan;
}

}  // namespace

SyntheticKernel make_kernel(std::string_view id, std::size_t dim) {
    check_dim(dim);
    SyntheticKernel k;
    k.id = std::string(id);
    k.dim = dim;
    const double sd = std::sqrt(static_cast<double>(dim));
    if (id == "zero") {
        k.eval = [](Point, Point) { return 0.0; };
        k.description = "kappa = 0";
    } else if (id == "const") {
        k.eval = [](Point, Point) { return 1.0; };
        k.sup_bound = 1.0;
        k.description = "kappa = 1";
    } else if (id == "sin") {
        k.eval = [](Point, Point y) { return std::sin(two_pi * y[0]); };
        k.sup_bound = 1.0;
        k.lipschitz = two_pi;
        k.description = "kappa = sin(2 pi y_1)";
    } else if (id == "gauss") {
        k.eval = [](Point x, Point y) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < x.size(); ++d) r2 += (x[d] - y[d]) * (x[d] - y[d]);
            return std::exp(-r2);
        };
        k.sup_bound = 1.0;
        // |grad_y| = 2 r exp(-r^2) <= sqrt(2) exp(-1/2)
        k.lipschitz = std::sqrt(2.0) * std::exp(-0.5);
        k.description = "kappa = exp(-|x - y|^2)";
    } else if (id == "trig") {
        k.eval = [](Point x, Point y) {
            double p = 1.0;
            for (std::size_t d = 0; d < x.size(); ++d) p *= 1.0 + 0.5 * std::sin(two_pi * x[d] + 3.0 * y[d]);
            return p;
        };
        // Each factor lies in [0.5, 1.5]; each partial derivative is at most 1.5^d.
        k.sup_bound = std::pow(1.5, static_cast<double>(dim));
        k.lipschitz = sd * std::pow(1.5, static_cast<double>(dim));
        k.description = "kappa = prod_k (1 + sin(2 pi x_k + 3 y_k) / 2)";
    } else {
        throw ConfigError("unknown kernel id '" + std::string(id) + "'");
    }
    return k;
}

std::vector<std::string> kernel_ids() { return {"zero", "const", "sin", "gauss", "trig"}; }

TestFunction make_test_function(std::string_view id, std::size_t dim) {
    check_dim(dim);
    TestFunction v;
    v.id = std::string(id);
    if (id == "one") {
        v.eval = [](Point) { return 1.0; };
        v.sup_bound = 1.0;
    } else if (id == "wave") {
        v.eval = [](Point y) {
            double s = 0.0;
            for (double c : y) s += c;
            return std::cos(std::numbers::pi * s);
        };
        v.sup_bound = 1.0;
        v.lipschitz = std::numbers::pi * std::sqrt(static_cast<double>(dim));
    } else {
        throw ConfigError("unknown test function id '" + std::string(id) + "'");
    }
    return v;
}

double integrand_sup(const SyntheticKernel& k, const TestFunction& v) { return k.sup_bound * v.sup_bound; }

double integrand_lipschitz(const SyntheticKernel& k, const TestFunction& v) {
    return k.lipschitz * v.sup_bound + k.sup_bound * v.lipschitz;
}

double true_integral(const SyntheticKernel& k, const TestFunction& v, Point x, double tol) {
    check_point(x, k.dim, "true_integral");
    constexpr std::size_t budget = std::size_t{1} << 22;
    double prev = composite_gl(k, v, x, 1);
    for (std::size_t panels = 2;; panels *= 2) {
        if (ipow(panels * rule8().nodes.size(), k.dim) > budget) break;
        const double cur = composite_gl(k, v, x, panels);
        if (std::abs(cur - prev) < tol) return cur;
        prev = cur;
    }
    throw NumericalError("true_integral: refinement did not converge to " + format_double(tol) + " for kernel " +
                         k.id);
}

std::string_view placement_name(Placement p) { return p == Placement::corner ? "corner" : "midpoint"; }

std::vector<std::vector<double>> grid_nodes(std::size_t per_axis, std::size_t dim, Placement p) {
    check_dim(dim);
    if (per_axis < 1) throw ConfigError("grid needs at least one node per axis");
    const double off = placement_offset(p);
    const double m = static_cast<double>(per_axis);
    const std::size_t total = ipow(per_axis, dim);
    std::vector<std::vector<double>> out;
    out.reserve(total);
    std::vector<std::size_t> idx(dim, 0);
    for (std::size_t n = 0; n < total; ++n) {
        std::vector<double> y(dim);
        for (std::size_t d = 0; d < dim; ++d) y[d] = (static_cast<double>(idx[d]) + off) / m;
        out.push_back(std::move(y));
        for (std::size_t d = 0; d < dim; ++d) {
            if (++idx[d] < per_axis) break;
            idx[d] = 0;
        }
    }
    return out;
}

double grid_quadrature(const SyntheticKernel& k, const TestFunction& v, Point x, std::size_t per_axis,
                       Placement p) {
    check_point(x, k.dim, "grid_quadrature");
    const auto nodes = grid_nodes(per_axis, k.dim, p);
    double acc = 0.0;
    for (const auto& y : nodes) acc += k.eval(x, y) * v.eval(y);
    return acc / static_cast<double>(nodes.size());
}

std::vector<std::vector<double>> probe_points(std::size_t count, std::size_t dim) {
    check_dim(dim);
    // phi_d solves t^(d+1) = t + 1.
    double phi = 2.0;
    for (int i = 0; i < 64; ++i) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dim + 1));
    std::vector<double> alpha(dim);
    for (std::size_t d = 0; d < dim; ++d) alpha[d] = std::fmod(std::pow(1.0 / phi, static_cast<double>(d + 1)), 1.0);
    std::vector<std::vector<double>> out(count, std::vector<double>(dim));
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double t = 0.5 + alpha[d] * static_cast<double>(i + 1);
            out[i][d] = t - std::floor(t);
        }
    }
    return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw NumericalError("loglog_slope: need at least two points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(x.size());
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw NumericalError("loglog_slope: non-positive value");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (!(sxx > 0.0)) throw NumericalError("loglog_slope: all axis values equal");
    return sxy / sxx;
}

std::size_t ScalingReport::total_violations() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.violations;
    return n;
}

bool ScalingReport::bound_holds() const {
    const double t = static_cast<double>(trials);
    const double allowed = delta * t + 3.0 * std::sqrt(delta * (1.0 - delta) * t);
    for (const auto& r : rows) {
        if (static_cast<double>(r.violations) > allowed) return false;
    }
    return true;
}

std::vector<std::size_t> default_bias_axes(std::size_t dim) {
    check_dim(dim);
    switch (dim) {
        case 1: return {16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
        case 2: return {4, 6, 8, 12, 16, 24, 32, 48, 64};
        default: return {3, 4, 6, 8, 11, 16};
    }
}

ScalingReport bias_curve(const SyntheticKernel& k, const TestFunction& v, std::span<const std::size_t> per_axis,
                         Placement p, std::size_t probes) {
    if (per_axis.size() < 4) throw ConfigError("bias_curve: need at least 4 grid sizes");
    ScalingReport r;
    r.kind = "bias";
    r.kernel = k.id;
    r.test_function = v.id;
    r.dim = k.dim;
    r.mode = std::string(placement_name(p));
    r.theory_slope = -1.0 / static_cast<double>(k.dim);
    // Corner nodes sit up to sqrt(d) h from any point of their cell, midpoints
    // sqrt(d) h / 2.
    const double reach = std::sqrt(static_cast<double>(k.dim)) * (p == Placement::corner ? 1.0 : 0.5);
    r.constant = integrand_lipschitz(k, v) * reach;

    const auto xs = probe_points(probes, k.dim);
    std::vector<double> truth;
    truth.reserve(xs.size());
    for (const auto& x : xs) truth.push_back(true_integral(k, v, x));

    double lo = 1e300, hi = 0.0;
    std::vector<double> axis, err;
    bool all_tiny = true;
    for (std::size_t m : per_axis) {
        ScalingRow row;
        row.axis = static_cast<double>(ipow(m, k.dim));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            row.error = std::max(row.error, std::abs(grid_quadrature(k, v, xs[i], m, p) - truth[i]));
        }
        row.bound = r.constant * std::pow(row.axis, r.theory_slope);
        lo = std::min(lo, row.axis);
        hi = std::max(hi, row.axis);
        if (row.error >= 1e-14) all_tiny = false;
        axis.push_back(row.axis);
        err.push_back(row.error);
        r.rows.push_back(row);
    }
    if (hi / lo < 100.0) throw ConfigError("bias_curve: grid sizes must span at least two decades");
    if (all_tiny) {
        r.below_resolution = true;
        return r;
    }
    if (std::any_of(err.begin(), err.end(), [](double e) { return e < 1e-14; })) {
        throw NumericalError("bias_curve: degenerate fit, some errors are below 1e-14 for kernel " + k.id);
    }
    r.slope = loglog_slope(axis, err);
    return r;
}

std::string_view sampling_name(Sampling s) {
    return s == Sampling::without_replacement ? "without_replacement" : "with_replacement";
}

double mc_estimate(const SyntheticKernel& k, const TestFunction& v, Point x, std::span<const std::size_t> indices,
                   std::size_t n_grid) {
    if (indices.empty()) throw ConfigError("mc_estimate: no samples");
    double acc = 0.0;
    std::array<double, 1> y{};
    for (std::size_t j : indices) {
        y[0] = (static_cast<double>(j) + 0.0) / static_cast<double>(n_grid);
        acc += k.eval(x, y) * v.eval(y);
    }
    return acc / static_cast<double>(indices.size());
}

ScalingReport variance_curve(const SyntheticKernel& k, const TestFunction& v, const VarianceConfig& cfg) {
    if (k.dim != 1) throw ConfigError("variance_curve: dimension 1 only");
    if (cfg.trials < 100) throw ConfigError("variance_curve: need at least 100 trials");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("variance_curve: delta must lie in (0, 1)");
    for (std::size_t n : cfg.sample_counts) {
        if (n < 1 || (cfg.sampling == Sampling::without_replacement && n > cfg.n_grid)) {
            throw ConfigError("variance_curve: sample count " + std::to_string(n) + " out of range");
        }
    }
    ScalingReport r;
    r.kind = "variance";
    r.kernel = k.id;
    r.test_function = v.id;
    r.dim = 1;
    r.mode = std::string(sampling_name(cfg.sampling));
    r.theory_slope = -0.5;
    r.constant = integrand_sup(k, v) * std::sqrt(2.0);
    r.delta = cfg.delta;
    r.trials = cfg.trials;
    r.n_grid = cfg.n_grid;

    // Integrand table f[p][j] = kappa(x_p, y_j) v(y_j), and the grid reference.
    const auto xs = probe_points(cfg.probes, 1);
    std::vector<std::vector<double>> f(xs.size(), std::vector<double>(cfg.n_grid));
    std::vector<double> reference(xs.size());
    std::array<double, 1> y{};
    for (std::size_t p = 0; p < xs.size(); ++p) {
        for (std::size_t j = 0; j < cfg.n_grid; ++j) {
            y[0] = (static_cast<double>(j) + 0.0) / static_cast<double>(cfg.n_grid);
            f[p][j] = k.eval(xs[p], y) * v.eval(y);
        }
        double acc = 0.0;
        for (double val : f[p]) acc += val;
        reference[p] = acc / static_cast<double>(cfg.n_grid);
    }

    std::vector<double> axis, quantiles;
    std::vector<std::size_t> pool(cfg.n_grid), picks;
    std::vector<double> trial_errors(cfg.trials);
    for (std::size_t n : cfg.sample_counts) {
        ScalingRow row;
        row.axis = static_cast<double>(n);
        row.bound = r.constant * std::sqrt(std::log(2.0 * static_cast<double>(cfg.n_grid) / cfg.delta) /
                                           static_cast<double>(n));
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            // Each (N, trial) pair has its own stream.
            std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                              static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(t)};
            std::mt19937_64 rng(seq);
            picks.resize(n);
            if (cfg.sampling == Sampling::without_replacement) {
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                for (std::size_t i = 0; i < n; ++i) {
                    std::uniform_int_distribution<std::size_t> pick(i, cfg.n_grid - 1);
                    std::swap(pool[i], pool[pick(rng)]);
                }
                std::copy_n(pool.begin(), n, picks.begin());
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, cfg.n_grid - 1);
                for (auto& j : picks) j = pick(rng);
            }
            std::sort(picks.begin(), picks.end());
            double sup = 0.0;
            for (std::size_t p = 0; p < xs.size(); ++p) {
                double acc = 0.0;
                for (std::size_t j : picks) acc += f[p][j];
                sup = std::max(sup, std::abs(acc / static_cast<double>(n) - reference[p]));
            }
            trial_errors[t] = sup;
            if (sup > row.bound) ++row.violations;
        }
        std::sort(trial_errors.begin(), trial_errors.end());
        const auto rank = static_cast<std::size_t>(std::ceil((1.0 - cfg.delta) * static_cast<double>(cfg.trials)));
        row.error = trial_errors[std::clamp<std::size_t>(rank, 1, cfg.trials) - 1];
        axis.push_back(row.axis);
        quantiles.push_back(row.error);
        r.rows.push_back(row);
    }
    if (std::all_of(quantiles.begin(), quantiles.end(), [](double e) { return e < 1e-14; })) {
        r.below_resolution = true;
    } else if (axis.size() >= 2) {
        r.slope = loglog_slope(axis, quantiles);
    }
    return r;
}

std::vector<CostRow> cost_table(std::span<const double> eps_list, std::span<const std::size_t> dims) {
    std::vector<CostRow> out;
    for (std::size_t d : dims) {
        check_dim(d);
        for (double eps : eps_list) {
            if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("cost_table: eps must lie in (0, 1)");
            CostRow row;
            row.eps = eps;
            row.dim = d;
            const double dd = static_cast<double>(d);
            row.n_grid = static_cast<std::size_t>(std::ceil(std::pow(eps, -dd) - 1e-9));
            row.n = static_cast<std::size_t>(std::ceil(std::pow(eps, -2.0) * std::log(std::pow(eps, -dd)) - 1e-9));
            out.push_back(row);
        }
    }
    return out;
}

TimingScan time_aggregation(std::span<const std::size_t> sample_counts, std::size_t width) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::pair<Tensor, Tensor>> inputs;
    std::vector<std::function<void()>> jobs;
    inputs.reserve(sample_counts.size());
    for (std::size_t n : sample_counts) {
        std::vector<double> phi(n * width * width), vals(n * width);
        for (double& x : phi) x = u(rng);
        for (double& x : vals) x = u(rng);
        inputs.emplace_back(Tensor::from({n, width, width}, std::move(phi)), Tensor::from({n, width}, std::move(vals)));
    }
    for (const auto& [tphi, tv] : inputs) {
        jobs.emplace_back([&tphi, &tv] {
            const Tensor w = kernel_estimate(tv, tphi, true);
            if (w.numel() == 0) throw NumericalError("empty aggregation");
        });
    }
    return finish_scan("aggregation", sample_counts, interleaved_best(jobs));
}

TimingScan time_reconstruction(std::span<const std::size_t> grid_sizes, std::size_t samples, std::size_t width) {
    const SampleSet set = sample_points(samples, samples * 16, 5);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> vals(samples * width);
    for (double& x : vals) x = u(rng);
    const Tensor w = Tensor::from({1, samples, width}, std::move(vals));
    std::vector<std::function<void()>> jobs;
    for (std::size_t g : grid_sizes) {
        jobs.emplace_back([&set, &w, g] {
            const Tensor out = interpolate_to_grid(set, w, g);
            if (out.numel() == 0) throw NumericalError("empty reconstruction");
        });
    }
    return finish_scan("reconstruction", grid_sizes, interleaved_best(jobs));
}

void write_scaling_csv(const ScalingReport& r, const std::filesystem::path& path) {
    CsvTable t({"kind", "kernel", "test_function", "dim", "mode", "axis", "error", "bound", "violations", "trials",
                "delta", "constant", "slope", "theory_slope"});
    for (const auto& row : r.rows) {
        t.cell(r.kind).cell(r.kernel).cell(r.test_function).cell(std::uint64_t{r.dim}).cell(r.mode);
        t.cell(row.axis).cell(row.error).cell(row.bound).cell(std::uint64_t{row.violations});
        t.cell(std::uint64_t{r.trials}).cell(r.delta).cell(r.constant);
        if (r.below_resolution) {
            t.cell("below_resolution");
        } else {
            t.cell(r.slope);
        }
        t.cell(r.theory_slope);
        t.end_row();
    }
    t.write(path);
}

void write_cost_csv(std::span<const CostRow> rows, const std::filesystem::path& path) {
    CsvTable t({"eps", "dim", "n_grid", "n"});
    for (const auto& r : rows) {
        t.cell(r.eps).cell(std::uint64_t{r.dim}).cell(std::uint64_t{r.n_grid}).cell(std::uint64_t{r.n});
        t.end_row();
    }
    t.write(path);
}

void write_timing_csv(std::span<const TimingScan> scans, const std::filesystem::path& path) {
    CsvTable t({"stage", "size", "seconds", "slope"});
    for (const auto& s : scans) {
        for (const auto& r : s.rows) {
            t.cell(s.stage).cell(std::uint64_t{r.size}).cell(r.seconds).cell(s.slope);
            t.end_row();
        }
    }
    t.write(path);
}

}  // namespace mcno::mc
