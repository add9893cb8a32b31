#include "mcno/error.hpp"
#include "mcno/tensor.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mcno;
using testutil::check_gradients;
using testutil::random_param;
using testutil::random_values;

TEST_SUITE("tensor") {

TEST_CASE("factories and accessors") {
    const Tensor z = Tensor::zeros({2, 3});
    CHECK(z.rank() == 2);
    CHECK(z.numel() == 6);
    CHECK_FALSE(z.requires_grad());
    const Tensor s = Tensor::scalar(2.5);
    CHECK(s.rank() == 0);
    CHECK(s.item() == 2.5);
    CHECK_THROWS_AS((void)z.item(), ShapeError);
    const Tensor p = Tensor::parameter({2}, {1.0, 2.0});
    CHECK(p.requires_grad());
    CHECK_FALSE(p.has_grad());
    CHECK(shape_string({2, 3, 4}) == "[2,3,4]");
    CHECK(shape_numel({}) == 1);
}

TEST_CASE("clone is deep and detached") {
    Tensor p = Tensor::parameter({3}, {1, 2, 3});
    Tensor c = p.clone();
    c.mutable_data()[0] = 9.0;
    CHECK(p.data()[0] == 1.0);
    CHECK(c.requires_grad());
    CHECK(c.id() != p.id());
}

TEST_CASE("elementwise ops and scalar right-hand side") {
    const Tensor a = Tensor::from({3}, {1, 2, 3});
    const Tensor b = Tensor::from({3}, {4, 5, 6});
    CHECK(add(a, b).data()[2] == 9.0);
    CHECK(sub(a, b).data()[0] == -3.0);
    CHECK(mul(a, b).data()[1] == 10.0);
    CHECK(mul(a, Tensor::scalar(2.0)).data()[2] == 6.0);
    CHECK(scale(a, -1.0).data()[1] == -2.0);
    CHECK_THROWS_AS((void)add(a, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("matmul and pointwise_linear match naive loops") {
    const auto av = random_values(12, 1), bv = random_values(20, 2);
    const Tensor a = Tensor::from({3, 4}, av), b = Tensor::from({4, 5}, bv);
    const Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 4; ++k) ref += av[i * 4 + k] * bv[k * 5 + j];
            CHECK(c.data()[i * 5 + j] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
    const auto xv = random_values(2 * 3 * 4, 3);
    const Tensor x = Tensor::from({2, 3, 4}, xv);
    const Tensor y = pointwise_linear(x, b);
    CHECK(y.shape() == Shape{2, 3, 5});
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t j = 0; j < 5; ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < 4; ++k) ref += xv[r * 4 + k] * bv[k * 5 + j];
            CHECK(y.data()[r * 5 + j] == doctest::Approx(ref).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS((void)matmul(a, a), ShapeError);
}

TEST_CASE("batched_mix matches a hand loop, with and without batch axis") {
    const std::size_t n = 3, o = 2, c = 4, batch = 2;
    const auto pv = random_values(n * o * c, 4), vv = random_values(batch * n * c, 5);
    const Tensor phi = Tensor::from({n, o, c}, pv);
    const Tensor v3 = Tensor::from({batch, n, c}, vv);
    const Tensor out = batched_mix(phi, v3);
    CHECK(out.shape() == Shape{batch, n, o});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t oo = 0; oo < o; ++oo) {
                double ref = 0.0;
                for (std::size_t cc = 0; cc < c; ++cc) ref += pv[(i * o + oo) * c + cc] * vv[(b * n + i) * c + cc];
                CHECK(out.data()[(b * n + i) * o + oo] == doctest::Approx(ref).epsilon(1e-14));
            }
        }
    }
    const Tensor v2 = Tensor::from({n, c}, std::vector<double>(vv.begin(), vv.begin() + n * c));
    const Tensor out2 = batched_mix(phi, v2);
    CHECK(out2.shape() == Shape{n, o});
    for (std::size_t k = 0; k < n * o; ++k) CHECK(out2.data()[k] == out.data()[k]);
    CHECK_THROWS_AS((void)batched_mix(phi, Tensor::zeros({n + 1, c})), ShapeError);
}

TEST_CASE("row_combine applies the sparse map per batch and channel") {
    auto map = std::make_shared<RowMap>();
    map->rows_in = 3;
    map->add_row({{0, 0.5}, {2, 0.5}});
    map->add_row({{1, 2.0}});
    const Tensor x = Tensor::from({1, 3, 2}, {1, 10, 2, 20, 3, 30});
    const Tensor y = row_combine(x, map);
    CHECK(y.shape() == Shape{1, 2, 2});
    CHECK(y.data()[0] == 2.0);
    CHECK(y.data()[1] == 20.0);
    CHECK(y.data()[2] == 4.0);
    CHECK(y.data()[3] == 40.0);
}

TEST_CASE("mean_relative_l2 forward and zero-norm target") {
    const Tensor pred = Tensor::from({2, 2}, {1, 1, 1, 0.5});
    const Tensor tgt = Tensor::from({2, 2}, {1, 0, 1, 0});
    CHECK(mean_relative_l2(pred, tgt).item() == doctest::Approx(0.75));
    CHECK_THROWS_AS((void)mean_relative_l2(pred, Tensor::zeros({2, 2})), NumericalError);
}

TEST_CASE("ops outside a tape record nothing") {
    Tape tape;
    const Tensor p = Tensor::parameter({2}, {1, 2});
    (void)add(p, p);
    CHECK(tape.size() == 0);
    {
        TapeScope scope(tape);
        (void)add(p, p);
        (void)add(Tensor::zeros({2}), Tensor::zeros({2}));  // no grad inputs
    }
    CHECK(tape.size() == 1);
    CHECK(tape.node(0).op == OpKind::add);
    CHECK(tape.node(0).input_ids.size() == 2);
    CHECK(active_tape() == nullptr);
}

TEST_CASE("backward validates the loss and clears the tape") {
    Tape tape;
    TapeScope scope(tape);
    Tensor p = Tensor::parameter({2}, {1, 2});
    const Tensor y = mul(p, p);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
    const Tensor l = sum(y);
    tape.backward(l);
    CHECK(tape.size() == 0);
    CHECK(p.grad()[0] == 2.0);
    CHECK(p.grad()[1] == 4.0);
    Tape other;
    const Tensor l2 = sum(p);
    CHECK_THROWS_AS(other.backward(l2), Error);
}

TEST_CASE("leaf gradients accumulate until zero_grad") {
    Tensor p = Tensor::parameter({1}, {3.0});
    for (int k = 0; k < 2; ++k) {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(sum(scale(p, 2.0)));
    }
    CHECK(p.grad()[0] == 4.0);
    p.zero_grad();
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("reused tensors receive summed gradients") {
    Tensor p = Tensor::parameter({2}, {1.5, -2.0});
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(add(mul(p, p), p)));
    CHECK(p.grad()[0] == doctest::Approx(4.0));
    CHECK(p.grad()[1] == doctest::Approx(-3.0));
}

TEST_CASE("every op's gradient matches central differences") {
    Tensor a = random_param({2, 3, 4}, 10);
    Tensor b = random_param({2, 3, 4}, 11);
    Tensor w = random_param({4, 5}, 12);
    Tensor bias = random_param({4}, 13);
    Tensor s = Tensor::parameter({}, {0.7});
    Tensor m1 = random_param({3, 4}, 14);
    Tensor m2 = random_param({4, 2}, 15);
    Tensor phi = random_param({3, 5, 4}, 16);
    Tensor tgt = Tensor::from({2, 3, 5}, random_values(30, 17));
    auto map = std::make_shared<RowMap>();
    map->rows_in = 3;
    map->add_row({{0, 0.25}, {2, 0.75}});
    map->add_row({{1, 1.0}});
    map->add_row({{2, -0.5}, {0, 0.5}});
    map->add_row({{1, 0.3}, {2, 0.7}});

    SUBCASE("add/sub/mul") {
        const auto r = check_gradients([&] { return sum(mul(add(a, b), sub(a, b))); }, {a, b});
        CHECK(r.relative() < 1e-8);
    }
    SUBCASE("scalar rhs") {
        const auto r = check_gradients([&] { return sum(mul(sub(a, s), s)); }, {a, s});
        CHECK(r.relative() < 1e-8);
    }
    SUBCASE("scale and add_bias") {
        const auto r = check_gradients([&] { return sum(mul(add_bias(scale(a, -1.3), bias), a)); }, {a, bias});
        CHECK(r.relative() < 1e-8);
    }
    SUBCASE("matmul") {
        const auto r = check_gradients([&] {
            const Tensor c = matmul(m1, m2);
            return sum(mul(c, c));
        }, {m1, m2});
        CHECK(r.relative() < 1e-8);
    }
    SUBCASE("pointwise_linear, relu, row_combine, mean_relative_l2") {
        const auto r = check_gradients([&] {
            const Tensor h = relu(pointwise_linear(a, w));
            const Tensor g = row_combine(h, map);
            const Tensor gt = Tensor::from({2, 4, 5}, random_values(40, 18));
            return mean_relative_l2(g, gt);
        }, {a, w});
        CHECK(r.relative() < 1e-7);
    }
    SUBCASE("batched_mix with batch axis") {
        const auto r = check_gradients([&] { return mean_relative_l2(batched_mix(phi, a), tgt); }, {phi, a});
        CHECK(r.relative() < 1e-7);
    }
    SUBCASE("batched_mix without batch axis") {
        Tensor v = random_param({3, 4}, 19);
        const auto r = check_gradients([&] {
            const Tensor o = batched_mix(phi, v);
            return sum(mul(o, o));
        }, {phi, v});
        CHECK(r.relative() < 1e-8);
    }
}

TEST_CASE("relative-L2 gradient is zero at an exact match") {
    Tensor p = Tensor::parameter({1, 3}, {1, 2, 3});
    const Tensor t = Tensor::from({1, 3}, {1, 2, 3});
    Tape tape;
    TapeScope scope(tape);
    tape.backward(mean_relative_l2(p, t));
    for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("finite checks name the producing op") {
    const bool before = finite_checks();
    set_finite_checks(true);
    const Tensor a = Tensor::from({1}, {std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS((void)scale(a, 0.0), NumericalError);
    try {
        (void)scale(a, 0.0);
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("scale") != std::string::npos);
    }
    set_finite_checks(before);
}

}  // TEST_SUITE
