#include "mcno/binary_io.hpp"
#include "mcno/dataset.hpp"
#include "mcno/error.hpp"
#include "mcno/fft.hpp"
#include "mcno/grf.hpp"
#include "mcno/solvers.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace mcno;
namespace fs = std::filesystem;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

GridFunction from_fn(std::size_t s, const std::function<double(double)>& f) {
    std::vector<double> v(s);
    for (std::size_t j = 0; j < s; ++j) v[j] = f(static_cast<double>(j) / static_cast<double>(s));
    return GridFunction(std::move(v));
}

double max_diff(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.resolution(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("subsample keeps strided indices") {
    const GridFunction u(std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(subsample(u, 8) == u);
    const GridFunction h = subsample(u, 4);
    CHECK(h == GridFunction(std::vector<double>{0, 2, 4, 6}));
    CHECK(subsample(subsample(u, 4), 2) == subsample(u, 2));
    CHECK_THROWS_AS((void)subsample(u, 3), ConfigError);
    CHECK_THROWS_AS((void)subsample(u, 0), ConfigError);
}

TEST_CASE("subsample commutes with pointwise maps") {
    const auto vals = testutil::random_values(64, 3);
    GridFunction u(vals);
    std::vector<double> sq(vals);
    for (double& x : sq) x = x * x + 1.0;
    const GridFunction a = subsample(GridFunction(sq), 16);
    const GridFunction b = subsample(u, 16);
    for (std::size_t j = 0; j < 16; ++j) CHECK(a[j] == b[j] * b[j] + 1.0);
}

TEST_CASE("grid coordinates and summaries") {
    const GridFunction u(std::vector<double>{1, -3, 2, 0});
    CHECK(u.coordinate(1) == 0.25);
    CHECK(u.mean() == 0.0);
    CHECK(u.max_abs() == 3.0);
    CHECK(is_power_of_two(1024));
    CHECK_FALSE(is_power_of_two(96));
}

}  // TEST_SUITE

TEST_SUITE("fft") {

TEST_CASE("unnormalized round trip and a single mode") {
    const std::size_t n = 32;
    RealFft fft(n);
    const auto u = testutil::random_values(n, 9);
    std::vector<std::complex<double>> spec(fft.spectrum_size());
    std::vector<double> back(n);
    fft.forward(u, spec);
    fft.inverse(spec, back);
    for (std::size_t j = 0; j < n; ++j) CHECK(back[j] == doctest::Approx(n * u[j]).epsilon(1e-13));

    const GridFunction c = from_fn(n, [](double x) { return std::cos(two_pi * 3 * x); });
    fft.forward(c.values(), spec);
    CHECK(spec[3].real() == doctest::Approx(n / 2.0));
    CHECK(std::abs(spec[2]) < 1e-12);
}

}  // TEST_SUITE

TEST_SUITE("grf") {

TEST_CASE("eigenvalue formula and validation") {
    const CovarianceSpec burgers{625, 25, 2};
    CHECK(burgers.eigenvalue(1) == doctest::Approx(625.0 / std::pow(two_pi * two_pi + 25.0, 2)));
    CHECK(burgers.eigenvalue(1) == doctest::Approx(0.1503).epsilon(1e-3));
    CHECK_THROWS_AS((CovarianceSpec{1, 0, 2}.validate()), ConfigError);
    CHECK_THROWS_AS((CovarianceSpec{-1, 1, 2}.validate()), ConfigError);
}

TEST_CASE("zero amplitude gives the zero field; resolution checked") {
    std::mt19937_64 rng(1);
    const GridFunction u = grf_sample(CovarianceSpec{0, 25, 2}, 64, rng);
    CHECK(u.max_abs() == 0.0);
    CHECK_THROWS_AS((void)grf_sample(CovarianceSpec{}, 48, rng), ConfigError);
    CHECK_THROWS_AS((void)grf_sample(CovarianceSpec{}, 8, rng), ConfigError);
}

TEST_CASE("same seed, same field; mean zero") {
    std::mt19937_64 r1(42), r2(42);
    const GridFunction a = grf_sample(CovarianceSpec{}, 128, r1);
    const GridFunction b = grf_sample(CovarianceSpec{}, 128, r2);
    CHECK(a == b);
    CHECK(std::abs(a.mean()) < 1e-14);
}

TEST_CASE("k=1 coefficient variance matches the eigenvalue") {
    const CovarianceSpec spec{625, 25, 2};
    const std::size_t s = 32, draws = 10000;
    std::mt19937_64 rng(2024);
    RealFft fft(s);
    std::vector<std::complex<double>> c(fft.spectrum_size());
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        const GridFunction u = grf_sample(spec, s, rng);
        fft.forward(u.values(), c);
        const double p = std::norm(c[1] / static_cast<double>(s));
        acc += p;
        acc2 += p * p;
    }
    const double mean = acc / draws;
    const double se = std::sqrt((acc2 / draws - mean * mean) / draws);
    CHECK(std::abs(mean - spec.eigenvalue(1)) < 3.0 * se);
    CHECK(std::abs(mean / spec.eigenvalue(1) - 1.0) < 0.05);
}

}  // TEST_SUITE

TEST_SUITE("solvers") {

TEST_CASE("step_count requires dt to divide T") {
    CHECK(step_count(1.0, 1e-4) == 10000);
    CHECK(step_count(1.0, 0.25) == 4);
    CHECK_THROWS_AS((void)step_count(1.0, 0.3), ConfigError);
    CHECK_THROWS_AS((void)step_count(1.0, 0.0), ConfigError);
}

TEST_CASE("constants are fixed points") {
    const GridFunction c = GridFunction::constant(64, 0.75);
    BurgersParams bp;
    bp.dt = 1e-3;
    CHECK(max_diff(burgers_evolve(c, bp).solution, c) <= 1e-12);
    KdvParams kp;
    kp.dt = 1e-3;
    CHECK(max_diff(kdv_evolve(c, kp), c) <= 1e-12);
}

TEST_CASE("heat hook decays a single mode exactly") {
    const GridFunction u0 = from_fn(64, [](double x) { return std::cos(two_pi * x); });
    BurgersParams p;
    p.nonlinear = false;
    p.final_time = 0.5;
    p.dt = 1e-2;
    const GridFunction u = burgers_evolve(u0, p).solution;
    const double f = std::exp(-p.nu * two_pi * two_pi * p.final_time);
    for (std::size_t j = 0; j < 64; ++j) CHECK(u[j] == doctest::Approx(f * u0[j]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("linear KdV hook rotates the phase of each mode") {
    const double T = 0.01;
    const GridFunction u0 = from_fn(64, [](double x) { return std::cos(two_pi * x) + 0.5 * std::sin(two_pi * 2 * x); });
    KdvParams p;
    p.nonlinear = false;
    p.final_time = T;
    p.dt = 1e-3;
    const GridFunction u = kdv_evolve(u0, p);
    const double w1 = std::pow(two_pi, 3), w2 = std::pow(two_pi * 2, 3);
    const GridFunction exact = from_fn(64, [&](double x) {
        return std::cos(two_pi * x + w1 * T) + 0.5 * std::sin(two_pi * 2 * x + w2 * T);
    });
    CHECK(max_diff(u, exact) < 1e-10);
}

TEST_CASE("Burgers Strang splitting is second order") {
    const GridFunction u0 = from_fn(128, [](double x) { return 0.8 * std::sin(two_pi * x) + 0.3 * std::cos(two_pi * 3 * x); });
    auto run = [&](double dt) {
        BurgersParams p;
        p.final_time = 0.2;
        p.dt = dt;
        return burgers_evolve(u0, p).solution;
    };
    const GridFunction ref = run(0.01 / 8);
    const double e1 = max_diff(run(0.01), ref);
    const double e2 = max_diff(run(0.005), ref);
    const double order = std::log2(e1 / e2);
    CAPTURE(order);
    CHECK(order >= 1.9);
}

TEST_CASE("both solvers conserve the mean of GRF data") {
    auto rng = sample_rng(5, 0);
    const GridFunction b0 = grf_sample(default_covariance(Task::burgers), 256, rng);
    BurgersParams bp;
    bp.dt = 1e-3;
    CHECK(std::abs(burgers_evolve(b0, bp).solution.mean() - b0.mean()) <= 1e-8);

    const GridFunction k0 = grf_sample(default_covariance(Task::kdv), 128, rng);
    KdvParams kp;
    kp.dt = 1e-4;
    CHECK(std::abs(kdv_evolve(k0, kp).mean() - k0.mean()) <= 1e-8);
}

TEST_CASE("CFL heuristic warns, or throws when configured") {
    const GridFunction u0 = from_fn(64, [](double x) { return 50.0 * std::sin(two_pi * x); });
    BurgersParams p;
    p.final_time = 0.01;
    p.dt = 0.01;
    p.nu = 1.0;
    const BurgersResult r = burgers_evolve(u0, p);
    CHECK(r.warning.has_value());
    CHECK(r.max_cfl > p.cfl_limit);
    p.cfl_is_error = true;
    CHECK_THROWS_AS((void)burgers_evolve(u0, p), NumericalError);
}

TEST_CASE("bad inputs are rejected") {
    BurgersParams p;
    p.nu = 0.0;
    CHECK_THROWS_AS((void)burgers_evolve(GridFunction::constant(64, 1.0), p), ConfigError);
    CHECK_THROWS_AS((void)burgers_evolve(GridFunction::constant(48, 1.0), BurgersParams{}), ConfigError);
    KdvParams k;
    k.dt = 0.05;
    const GridFunction spike = from_fn(64, [](double x) { return 200.0 * std::sin(two_pi * x); });
    try {
        (void)kdv_evolve(spike, k);
        FAIL("expected blow-up");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

}  // TEST_SUITE

TEST_SUITE("dataset") {

TEST_CASE("task names and defaults") {
    CHECK(parse_task("burgers") == Task::burgers);
    CHECK(parse_task("kdv") == Task::kdv);
    CHECK(task_name(Task::kdv) == "kdv");
    CHECK_THROWS_AS((void)parse_task("heat"), ConfigError);
    CHECK(default_base_resolution(Task::burgers) == 8192);
    CHECK(default_base_resolution(Task::kdv) == 1024);
    CHECK(default_covariance(Task::kdv).amplitude == 2401.0);
    CHECK(default_covariance(Task::kdv).exponent == 2.5);
}

TEST_CASE("build is deterministic, mean-preserving and encodes round trip") {
    SolverParams sp = default_solver_params(Task::burgers);
    sp.dt = 1e-3;
    const Dataset a = build_dataset(Task::burgers, 2, 128, 7, sp);
    const Dataset b = build_dataset(Task::burgers, 2, 128, 7, sp);
    CHECK(a.inputs == b.inputs);
    CHECK(a.outputs == b.outputs);
    CHECK(a.nu == 0.1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.outputs[i].mean() - a.inputs[i].mean()) <= 1e-8);
    CHECK(a.inputs[0] != a.inputs[1]);

    const auto bytes = encode_dataset(a);
    CHECK(bytes.size() == 4 + 4 * 4 + 8 + 8 + 2 * 2 * 128 * 8);
    const Dataset c = decode_dataset(bytes, "mem");
    CHECK(c.inputs == a.inputs);
    CHECK(c.outputs == a.outputs);
    CHECK(c.seed == 7);
    CHECK(c.task == Task::burgers);
}

TEST_CASE("file round trip, bad magic, truncation and missing file") {
    const fs::path dir = testutil::temp_dir("dataset");
    SolverParams sp = default_solver_params(Task::kdv);
    sp.dt = 1e-3;
    const Dataset a = build_dataset(Task::kdv, 1, 64, 3, sp);
    write_dataset(a, dir / "k.mcno");
    CHECK(fs::exists(sidecar_path(dir / "k.mcno")));
    const Dataset r = read_dataset(dir / "k.mcno");
    CHECK(r.inputs == a.inputs);
    CHECK(r.solver.dt == 1e-3);
    CHECK(r.nu == 0.0);

    auto bytes = encode_dataset(a);
    bytes[0] = 'X';
    CHECK_THROWS_AS((void)decode_dataset(bytes, "bad"), IoError);
    bytes = encode_dataset(a);
    bytes.pop_back();
    CHECK_THROWS_AS((void)decode_dataset(bytes, "short"), IoError);
    try {
        (void)read_dataset(dir / "absent.mcno");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("absent.mcno") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("per-sample streams do not depend on count") {
    SolverParams sp = default_solver_params(Task::burgers);
    sp.dt = 1e-3;
    const Dataset one = build_dataset(Task::burgers, 1, 64, 11, sp);
    const Dataset three = build_dataset(Task::burgers, 3, 64, 11, sp);
    CHECK(one.inputs[0] == three.inputs[0]);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

}  // TEST_SUITE
