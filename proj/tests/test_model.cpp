#include "mcno/error.hpp"
#include "mcno/model.hpp"
#include "mcno/trainer.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace mcno;
using testutil::random_values;
namespace fs = std::filesystem;

namespace {

MCNOConfig small_config(std::size_t width, std::size_t layers, std::size_t samples, std::size_t s,
                        std::uint64_t seed = 1) {
    MCNOConfig c;
    c.width = width;
    c.layers = layers;
    c.samples = samples;
    c.train_resolution = s;
    c.sample_seed = seed;
    c.init_seed = seed;
    c.projection_hidden = 8;
    return c;
}

GridFunction random_field(std::size_t s, std::uint64_t seed) { return GridFunction(random_values(s, seed)); }

// Plain-loop reference for one layer on a single field v[s][c].
using Field = std::vector<std::vector<double>>;

std::vector<double> read_periodic(const Field& v, double y) {
    const std::size_t s = v.size();
    const double pos = y * static_cast<double>(s);
    const double fl = std::floor(pos);
    const double t = pos - fl;
    const std::size_t j0 = static_cast<std::size_t>(fl) % s, j1 = (j0 + 1) % s;
    std::vector<double> out(v[0].size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1 - t) * v[j0][c] + t * v[j1][c];
    return out;
}

std::vector<double> interp_periodic(const std::vector<double>& y, const Field& w, double x) {
    const std::size_t n = y.size();
    std::size_t a = n - 1, b = 0;
    double ya = y[n - 1] - 1.0, yb = y[0];
    if (x >= y[n - 1]) {
        ya = y[n - 1];
        yb = y[0] + 1.0;
    } else {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (x >= y[i] && x < y[i + 1]) {
                a = i;
                b = i + 1;
                ya = y[i];
                yb = y[i + 1];
            }
        }
    }
    const double t = (x - ya) / (yb - ya);
    std::vector<double> out(w[0].size());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1 - t) * w[a][c] + t * w[b][c];
    return out;
}

Field reference_layer(const Field& v, const std::vector<double>& wmat, const std::vector<double>& phi,
                      const std::vector<double>& y, bool activate) {
    const std::size_t s = v.size(), d = v[0].size(), n = y.size();
    Field w(n, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto vi = read_periodic(v, y[i]);
        for (std::size_t o = 0; o < d; ++o) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += phi[(i * d + o) * d + c] * vi[c];
            w[i][o] = acc / static_cast<double>(n);
        }
    }
    Field out(s, std::vector<double>(d, 0.0));
    for (std::size_t j = 0; j < s; ++j) {
        const auto k = interp_periodic(y, w, static_cast<double>(j) / static_cast<double>(s));
        for (std::size_t o = 0; o < d; ++o) {
            double acc = k[o];
            for (std::size_t c = 0; c < d; ++c) acc += v[j][c] * wmat[c * d + o];
            out[j][o] = activate ? std::max(acc, 0.0) : acc;
        }
    }
    return out;
}

Tensor field_tensor(const Field& v) {
    std::vector<double> flat;
    for (const auto& row : v) flat.insert(flat.end(), row.begin(), row.end());
    return Tensor::from({1, v.size(), v[0].size()}, flat);
}

void zero_all(MCNOModel& m) {
    for (Tensor t : m.parameters()) {
        for (double& x : t.mutable_data()) x = 0.0;
    }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("sample_points draws distinct grid points") {
    const SampleSet all = sample_points(16, 16, 3);
    for (std::size_t j = 0; j < 16; ++j) CHECK(all.coords[j] == static_cast<double>(j) / 16.0);

    const SampleSet a = sample_points(100, 256, 9), b = sample_points(100, 256, 9);
    CHECK(a.coords == b.coords);
    CHECK(a.coords != sample_points(100, 256, 10).coords);
    std::set<long> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scaled = a.coords[i] * 256.0;
        CHECK(scaled == std::round(scaled));
        CHECK(a.coords[i] >= 0.0);
        CHECK(a.coords[i] < 1.0);
        if (i > 0) CHECK(a.coords[i] > a.coords[i - 1]);
        seen.insert(std::lround(scaled));
    }
    CHECK(seen.size() == 100);
    CHECK_THROWS_AS((void)sample_points(17, 16, 1), ConfigError);
    CHECK_THROWS_AS((void)sample_points(0, 16, 1), ConfigError);
}

TEST_CASE("lift is a per-point affine map of [a; x]") {
    const GridFunction a(std::vector<double>{0.5, -1.0, 2.0, 0.25});
    const Tensor ch = input_channels(std::span(&a, 1), true);
    CHECK(ch.shape() == Shape{1, 4, 2});
    CHECK(ch.data()[3] == 0.25);

    const Tensor zero_w = Tensor::zeros({2, 3});
    const Tensor bias = Tensor::from({3}, {1, 2, 3});
    const Tensor v0 = lift(ch, zero_w, bias);
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(v0.data()[j * 3 + c] == bias.data()[c]);
    }

    const Tensor sel = lift(ch, Tensor::from({2, 1}, {1, 0}), Tensor::zeros({1}));
    for (std::size_t j = 0; j < 4; ++j) CHECK(sel.data()[j] == a[j]);

    const auto wv = random_values(2 * 5, 4), bv = random_values(5, 5);
    const Tensor r = lift(ch, Tensor::from({2, 5}, wv), Tensor::from({5}, bv));
    for (std::size_t j = 0; j < 4; ++j) {
        const double x = static_cast<double>(j) / 4.0;
        for (std::size_t c = 0; c < 5; ++c) {
            const double ref = a[j] * wv[c] + x * wv[5 + c] + bv[c];
            CHECK(r.data()[j * 5 + c] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
}

TEST_CASE("gather reads grid values by periodic linear interpolation") {
    const Tensor v = Tensor::from({1, 4, 1}, {5, 0, 7, 2});
    SampleSet on_grid{{0.0, 0.5}, 0};
    const Tensor g = gather_at_samples(v, on_grid);
    CHECK(g.data()[0] == 5.0);
    CHECK(g.data()[1] == 7.0);

    const Tensor mid = Tensor::from({1, 4, 1}, {0, 0, 2, 2});  // x = 0.25 -> 0, x = 0.5 -> 2
    SampleSet half{{0.375}, 0};
    CHECK(gather_at_samples(mid, half).data()[0] == doctest::Approx(1.0));

    SampleSet wrap{{0.875}, 0};  // halfway between x = 0.75 and x = 1 == 0
    CHECK(gather_at_samples(v, wrap).data()[0] == doctest::Approx(0.5 * 2 + 0.5 * 5));
    const auto map = gather_map(on_grid, 4);
    CHECK(map->offsets[1] == 1);
}

TEST_CASE("kernel_estimate applies phi_i and the 1/N factor") {
    const std::size_t n = 3, d = 2;
    std::vector<double> eye(n * d * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        eye[(i * d + 0) * d + 0] = static_cast<double>(n);
        eye[(i * d + 1) * d + 1] = static_cast<double>(n);
    }
    const auto vv = random_values(n * d, 7);
    const Tensor v = Tensor::from({1, n, d}, vv);
    const Tensor w = kernel_estimate(v, Tensor::from({n, d, d}, eye), true);
    for (std::size_t k = 0; k < n * d; ++k) CHECK(w.data()[k] == doctest::Approx(vv[k]).epsilon(1e-15));
    const Tensor z = kernel_estimate(Tensor::zeros({1, n, d}), Tensor::from({n, d, d}, eye), true);
    for (double x : z.data()) CHECK(x == 0.0);

    const auto pv = random_values(n * d * d, 8);
    const Tensor r = kernel_estimate(v, Tensor::from({n, d, d}, pv), true);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < d; ++o) {
            double ref = 0.0;
            for (std::size_t c = 0; c < d; ++c) ref += pv[(i * d + o) * d + c] * vv[i * d + c];
            CHECK(r.data()[i * d + o] == doctest::Approx(ref / 3.0).epsilon(1e-14));
        }
    }
}

TEST_CASE("interpolate_to_grid is periodic piecewise linear") {
    SampleSet two{{0.0, 0.5}, 0};
    const Tensor w = Tensor::from({1, 2, 1}, {0, 1});
    const Tensor g = interpolate_to_grid(two, w, 4);
    CHECK(g.data()[0] == 0.0);
    CHECK(g.data()[1] == doctest::Approx(0.5));
    CHECK(g.data()[2] == 1.0);
    CHECK(g.data()[3] == doctest::Approx(0.5));

    const SampleSet full = sample_points(8, 8, 1);
    const auto wv = random_values(8 * 3, 2);
    const Tensor id = interpolate_to_grid(full, Tensor::from({1, 8, 3}, wv), 8);
    for (std::size_t k = 0; k < wv.size(); ++k) CHECK(id.data()[k] == wv[k]);

    // affine values inside one interval
    SampleSet pts{{0.1, 0.7, 0.9}, 0};
    const Tensor aff = interpolate_to_grid(pts, Tensor::from({1, 3, 1}, {2 * 0.1 + 1, 2 * 0.7 + 1, 0.0}), 16);
    for (std::size_t j = 0; j < 16; ++j) {
        const double x = j / 16.0;
        if (x >= 0.1 && x <= 0.7) CHECK(aff.data()[j] == doctest::Approx(2 * x + 1).epsilon(1e-14));
    }

    // node property: each sample coordinate that is a grid point returns its value
    SampleSet nodes{{0.125, 0.5, 0.75}, 0};
    const Tensor nv = interpolate_to_grid(nodes, Tensor::from({1, 3, 1}, {3, -1, 4}), 8);
    CHECK(nv.data()[1] == 3.0);
    CHECK(nv.data()[4] == -1.0);
    CHECK(nv.data()[6] == 4.0);

    SampleSet one{{0.5}, 0};
    CHECK_THROWS_AS((void)interpolate_to_grid(one, Tensor::zeros({1, 1, 1}), 4), ConfigError);
}

TEST_CASE("full-grid samples without scaling reproduce phi_j v(y_j)") {
    const std::size_t s = 8, d = 2;
    const SampleSet full = sample_points(s, s, 4);
    const auto vv = random_values(s * d, 10), pv = random_values(s * d * d, 11);
    const Tensor v = Tensor::from({1, s, d}, vv);
    const Tensor out = interpolate_to_grid(full, kernel_estimate(gather_at_samples(v, full),
                                                                 Tensor::from({s, d, d}, pv), false), s);
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t o = 0; o < d; ++o) {
            double ref = 0.0;
            for (std::size_t c = 0; c < d; ++c) ref += pv[(j * d + o) * d + c] * vv[j * d + c];
            CHECK(out.data()[j * d + o] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
}

TEST_CASE("layer_forward matches a scalar reimplementation") {
    const std::size_t s = 8, d = 2;
    const std::vector<double> y{0.05, 0.4, 0.8125};
    const SampleSet samples{y, 0};
    Field v(s, std::vector<double>(d));
    const auto vv = random_values(s * d, 20);
    for (std::size_t j = 0; j < s; ++j) v[j] = {vv[j * d], vv[j * d + 1]};
    const auto wv = random_values(d * d, 21), pv = random_values(3 * d * d, 22, -3, 3);
    const LayerParams layer{Tensor::from({d, d}, wv), Tensor::from({3, d, d}, pv)};
    for (bool act : {true, false}) {
        const Tensor got = layer_forward(field_tensor(v), layer, samples, true, act);
        const Field ref = reference_layer(v, wv, pv, y, act);
        for (std::size_t j = 0; j < s; ++j) {
            for (std::size_t o = 0; o < d; ++o) CHECK(got.data()[j * d + o] == doctest::Approx(ref[j][o]).epsilon(1e-13));
        }
    }

    const LayerParams off{Tensor::from({d, d}, {1, 0, 0, 1}), Tensor::zeros({3, d, d})};
    const Tensor r = layer_forward(field_tensor(v), off, samples, true, true);
    for (std::size_t k = 0; k < s * d; ++k) CHECK(r.data()[k] == std::max(vv[k], 0.0));
    const LayerParams zero{Tensor::zeros({d, d}), Tensor::zeros({3, d, d})};
    const Tensor z = layer_forward(field_tensor(v), zero, samples, true, true);
    for (double x : z.data()) CHECK(x == 0.0);
}

TEST_CASE("initialization ranges and parameter shapes") {
    const MCNOConfig c = small_config(4, 2, 5, 16);
    const MCNOModel m = MCNOModel::initialize(c);
    const auto& p = m.params();
    CHECK(p.lift_weight.shape() == Shape{2, 4});
    CHECK(p.layers.size() == 2);
    CHECK(p.layers[0].phi.shape() == Shape{5, 4, 4});
    CHECK(p.proj_out_weight.shape() == Shape{8, 1});
    for (double x : p.lift_weight.data()) CHECK(std::abs(x) <= 1.0 / std::sqrt(2.0));
    for (double x : p.layers[1].w.data()) CHECK(std::abs(x) <= 0.5);
    double phi_max = 0.0;
    for (double x : p.layers[0].phi.data()) phi_max = std::max(phi_max, std::abs(x));
    CHECK(phi_max <= 5.0 / 4.0);
    CHECK(phi_max > 0.5);
    CHECK(m.sample_sets().size() == 1);
    CHECK(m.parameter_count() == 2 * 4 + 4 + 2 * (16 + 80) + 4 * 8 + 8 + 8 + 1);

    MCNOConfig per = c;
    per.per_layer_samples = true;
    const MCNOModel pm = MCNOModel::initialize(per);
    CHECK(pm.sample_sets().size() == 2);
    CHECK(pm.samples(0).coords != pm.samples(1).coords);

    MCNOConfig bad = c;
    bad.samples = 1;
    CHECK_THROWS_AS((void)MCNOModel::initialize(bad), ConfigError);
    bad = c;
    bad.width = 0;
    CHECK_THROWS_AS((void)MCNOModel::initialize(bad), ConfigError);
}

TEST_CASE("copies are deep") {
    const MCNOModel m = MCNOModel::initialize(small_config(4, 2, 5, 16));
    MCNOModel c = m;
    c.params().lift_bias.mutable_data()[0] += 1.0;
    CHECK(c.params().lift_bias.data()[0] != m.params().lift_bias.data()[0]);
}

TEST_CASE("forward keeps resolution, is deterministic and leaves parameters untouched") {
    const MCNOModel m = MCNOModel::initialize(small_config(6, 2, 10, 64));
    const auto before = parameter_bytes(m);
    for (std::size_t s : {64, 256, 8192}) {
        const GridFunction a = random_field(s, s);
        const GridFunction u = forward(m, a);
        CHECK(u.resolution() == s);
        CHECK(u.all_finite());
        CHECK(forward(m, a) == u);
    }
    CHECK(parameter_bytes(m) == before);
    CHECK_THROWS_AS((void)forward(m, GridFunction(std::vector<double>{1.0})), ShapeError);
}

TEST_CASE("zero parameters give the constant projection bias") {
    MCNOModel m = MCNOModel::initialize(small_config(4, 2, 5, 16));
    zero_all(m);
    const GridFunction u = forward(m, random_field(32, 3));
    for (double x : u.values()) CHECK(x == 0.0);
    m.params().proj_out_bias.mutable_data()[0] = 0.3;
    const GridFunction b = forward(m, random_field(32, 3));
    for (double x : b.values()) CHECK(x == 0.3);
}

TEST_CASE("trained-resolution model runs finite at twice the resolution") {
    MCNOModel m = MCNOModel::initialize(small_config(8, 2, 20, 32));
    std::vector<GridFunction> in, out;
    for (std::uint64_t i = 0; i < 8; ++i) {
        in.push_back(random_field(32, 100 + i));
        std::vector<double> t(in.back().values().begin(), in.back().values().end());
        for (double& x : t) x = 0.5 * x + 0.1;
        out.emplace_back(std::move(t));
    }
    SplitData d{in, out, in, out};
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.train_count = 8;
    tc.test_count = 8;
    tc.resolution = 32;
    (void)train(m, d, tc);
    CHECK(forward(m, random_field(64, 7)).all_finite());
}

TEST_CASE("full-model gradient matches central differences") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        MCNOConfig c = small_config(4, 2, 5, 16, seed);
        c.projection_hidden = 16;
        const MCNOModel m = MCNOModel::initialize(c);
        std::vector<GridFunction> in{random_field(16, seed * 10), random_field(16, seed * 10 + 1)};
        const Tensor target = Tensor::from({2, 16, 1}, random_values(32, seed * 10 + 2));
        const auto r = testutil::check_gradients([&] { return mean_relative_l2(forward_batch(m, in), target); },
                                                 m.parameters());
        CAPTURE(seed);
        CHECK(r.relative() < 1e-5);
    }
}

TEST_CASE("checkpoint round trip and validation") {
    const fs::path dir = testutil::temp_dir("ckpt");
    MCNOConfig c = small_config(4, 2, 5, 16);
    c.per_layer_samples = true;
    c.mc_scaling = false;
    const MCNOModel m = MCNOModel::initialize(c);
    const auto bytes = encode_checkpoint(m);
    const MCNOModel r = decode_checkpoint(bytes, "mem");
    CHECK(parameter_bytes(r) == parameter_bytes(m));
    CHECK(r.config().per_layer_samples);
    CHECK_FALSE(r.config().mc_scaling);
    CHECK(r.samples(1).coords == m.samples(1).coords);
    CHECK(encode_checkpoint(r) == bytes);

    save_checkpoint(m, dir / "m.mcnp");
    CHECK(parameter_bytes(load_checkpoint(dir / "m.mcnp")) == parameter_bytes(m));

    auto bad = bytes;
    bad[1] = 'x';
    CHECK_THROWS_AS((void)decode_checkpoint(bad, "bad"), IoError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS((void)decode_checkpoint(bad, "long"), IoError);
    bad = bytes;
    bad.resize(bad.size() / 2);
    CHECK_THROWS_AS((void)decode_checkpoint(bad, "short"), IoError);
    try {
        (void)load_checkpoint(dir / "none.mcnp");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("none.mcnp") != std::string::npos);
    }
    fs::remove_all(dir);
}

}  // TEST_SUITE
