#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "bigat/gradcheck.hpp"
#include "bigat/graph.hpp"
#include "bigat/rng.hpp"

using namespace bigat;
using namespace bigat::ad;

namespace {

Tensor rand_tensor(Shape s, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t{std::move(s)};
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) return false;
    return std::memcmp(a.data(), b.data(), static_cast<size_t>(a.numel()) * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("softmax of equal inputs is uniform") {
    Graph g;
    Value x = g.constant(Tensor::from(Shape{2}, {0.0, 0.0}));
    Value y = g.softmax(x, 0);
    CHECK(y.data()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y.data()[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul of ones counts the inner dimension") {
    Graph g;
    Value a = g.constant(Tensor::full(Shape{2, 3}, 1.0));
    Value b = g.constant(Tensor::full(Shape{3, 1}, 1.0));
    Value c = g.matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 1});
    CHECK(c.data()[0] == 3.0);
    CHECK(c.data()[1] == 3.0);
}

TEST_CASE("leaky-relu slope applies on the negative side only") {
    Graph g;
    Value x = g.constant(Tensor::from(Shape{2}, {-1.0, 2.0}));
    Value y = g.leaky_relu(x, 0.2);
    CHECK(y.data()[0] == doctest::Approx(-0.2));
    CHECK(y.data()[1] == 2.0);
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Graph g;
        Value x = g.constant(rand_tensor(Shape{4, 5}, rng, -30.0, 30.0));
        Value y = g.softmax(x, 1);
        for (int64_t i = 0; i < 4; ++i) {
            double row = 0.0;
            for (int64_t j = 0; j < 5; ++j) {
                CHECK(y.data().at(i, j) >= 0.0);
                row += y.data().at(i, j);
            }
            CHECK(std::abs(row - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("backward of sum yields all-ones gradient") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2, 3}, {1, -2, 3, 4, -5, 6}), true);
    g.backward(g.sum(x));
    for (int64_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == 1.0);
}

TEST_CASE("backward of sum of squares is 2x") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2}, {3.0, 4.0}), true);
    g.backward(g.sum(g.mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("backward of sigmoid(w*x) at w=0, x=1 gives a quarter") {
    Graph g;
    Value w = g.leaf(Tensor::from(Shape{1, 1}, {0.0}), true);
    Value x = g.constant(Tensor::from(Shape{1, 1}, {1.0}));
    Value y = g.sigmoid(g.matmul(w, x));
    g.backward(g.sum(y));
    CHECK(w.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("a node feeding two consumers accumulates both contributions") {
    // z = sum(x*a + x*b) so dz/dx = a + b, derived by hand
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2}, {1.5, -0.5}), true);
    Value a = g.constant(Tensor::from(Shape{2}, {2.0, 3.0}));
    Value b = g.constant(Tensor::from(Shape{2}, {-1.0, 5.0}));
    g.backward(g.sum(g.add(g.mul(x, a), g.mul(x, b))));
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
}

TEST_CASE("repeated backward without reset accumulates gradients") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2}, {1.0, 2.0}), true);
    Value root = g.sum(x);
    g.backward(root);
    g.backward(root);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("gradients of non-ancestors stay untouched") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2}, {1.0, 2.0}), true);
    Value y = g.leaf(Tensor::from(Shape{2}, {5.0, 6.0}), true);
    g.backward(g.sum(x));
    CHECK(y.grad().empty());
}

TEST_CASE("backward requires a scalar root") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2}, {1.0, 2.0}), true);
    CHECK_THROWS_AS(g.backward(g.mul(x, x)), ContractError);
}

TEST_CASE("non-finite forward output aborts with the op named") {
    Graph g;
    Value x = g.constant(Tensor::from(Shape{1}, {0.0}));
    try {
        g.log(x);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("log") != std::string::npos);
    }
}

TEST_CASE("shape mismatch errors name the op and both shapes") {
    Graph g;
    Value a = g.constant(Tensor::full(Shape{2, 3}, 1.0));
    Value b = g.constant(Tensor::full(Shape{4, 1}, 1.0));
    try {
        g.matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,1]") != std::string::npos);
    }
}

TEST_CASE("identical seeds give bit-identical forwards and gradients") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Graph g;
        Value x = g.leaf(rand_tensor(Shape{3, 3}, rng), true);
        Value w = g.leaf(rand_tensor(Shape{3, 2}, rng), true);
        Value y = g.softmax(g.matmul(g.tanh(x), w), 1);
        Value root = g.l2_norm(y);
        g.backward(root);
        return std::tuple{root.data(), x.grad(), w.grad()};
    };
    auto [r1, gx1, gw1] = run(42);
    auto [r2, gx2, gw2] = run(42);
    CHECK(bit_equal(r1, r2));
    CHECK(bit_equal(gx1, gx2));
    CHECK(bit_equal(gw1, gw2));
}

TEST_CASE("concat and slice round-trip with gradients") {
    Graph g;
    Value a = g.leaf(Tensor::from(Shape{2, 2}, {1, 2, 3, 4}), true);
    Value b = g.leaf(Tensor::from(Shape{2, 1}, {5, 6}), true);
    std::vector<Value> parts{a, b};
    Value c = g.concat(parts, 1);
    REQUIRE(c.shape() == Shape{2, 3});
    CHECK(c.data().at(0, 2) == 5.0);
    Value back = g.slice(c, {0, 0}, {2, 2});
    g.backward(g.sum(back));
    CHECK(a.grad()[0] == 1.0);
    CHECK(b.grad()[0] == 0.0);
}

TEST_CASE("max over an axis routes gradient to the argmax") {
    Graph g;
    Value x = g.leaf(Tensor::from(Shape{2, 3}, {1, 9, 2, 8, 3, 4}), true);
    Value m = g.max(x, 1);
    CHECK(m.data()[0] == 9.0);
    CHECK(m.data()[1] == 8.0);
    g.backward(g.sum(m));
    CHECK(x.grad().at(0, 1) == 1.0);
    CHECK(x.grad().at(0, 0) == 0.0);
    CHECK(x.grad().at(1, 0) == 1.0);
}

TEST_CASE("broadcast prepends leading axes and reduces them on backward") {
    Graph g;
    Value b = g.leaf(Tensor::from(Shape{2}, {1.0, -1.0}), true);
    Value v = g.broadcast(b, Shape{3, 2});
    CHECK(v.data().at(2, 0) == 1.0);
    g.backward(g.sum(v));
    CHECK(b.grad()[0] == 3.0);
    CHECK(b.grad()[1] == 3.0);
}

TEST_CASE("gradient check: x squared at 3") {
    auto f = [](Graph& g, Value x) { return g.sum(g.mul(x, x)); };
    auto res = gradient_check(f, Tensor::from(Shape{1}, {3.0}), 1e-5, 1e-6);
    CHECK(res.pass);
    CHECK(res.max_rel_error <= 1e-6);
}

TEST_CASE("gradient check flags a non-deterministic function") {
    int calls = 0;
    auto f = [&calls](Graph& g, Value x) {
        ++calls;
        return g.scale(g.sum(x), calls % 2 ? 1.0 : 1.0 + 1e-12);
    };
    CHECK_THROWS_AS(gradient_check(f, Tensor::from(Shape{2}, {1.0, 2.0}), 1e-5, 1e-6),
                    ContractError);
}

// Every primitive against central finite differences at random points,
// entries in [-2, 2] (restricted to positive ranges where the domain needs
// it), step 1e-5, relative tolerance 1e-5.
TEST_CASE("all primitives pass central finite-difference checks") {
    Rng rng(2024);
    const double kStep = 1e-5, kTol = 1e-5;

    auto check = [&](const char* label, const PointFn& f, const Tensor& point) {
        auto res = gradient_check(f, point, kStep, kTol);
        INFO(label << " worst " << res.worst << " rel err " << res.max_rel_error);
        CHECK(res.pass);
    };

    Tensor m23 = rand_tensor(Shape{2, 3}, rng);
    Tensor m32 = rand_tensor(Shape{3, 2}, rng);
    Tensor v6 = rand_tensor(Shape{6}, rng);
    Tensor pos = rand_tensor(Shape{6}, rng, 0.3, 2.0);
    // keep clear of the relu/leaky/elu/l1 kinks at zero
    Tensor kinked = rand_tensor(Shape{6}, rng);
    for (int64_t i = 0; i < kinked.numel(); ++i)
        if (std::abs(kinked[i]) < 0.1) kinked[i] += 0.3;

    Tensor w23 = rand_tensor(Shape{2, 3}, rng);
    Tensor w26 = rand_tensor(Shape{2, 6}, rng);

    check("matmul", [&](Graph& g, Value x) {
        return g.l2_norm(g.matmul(x, g.constant(m32)));
    }, m23);
    check("matmul-sorted", [&](Graph& g, Value x) {
        return g.l2_norm(g.matmul(x, g.constant(m32), true));
    }, m23);
    check("add", [&](Graph& g, Value x) {
        return g.sum(g.mul(g.add(x, g.constant(m23)), g.constant(w23)));
    }, m23);
    check("sub", [&](Graph& g, Value x) {
        return g.sum(g.mul(g.sub(g.constant(m23), x), g.constant(w23)));
    }, m23);
    check("mul", [&](Graph& g, Value x) { return g.l2_norm(g.mul(x, g.constant(m23))); }, m23);
    check("concat+slice", [&](Graph& g, Value x) {
        std::vector<Value> parts{x, g.constant(m23)};
        Value c = g.concat(parts, 0);
        return g.l2_norm(g.slice(c, {1, 1}, {2, 2}));
    }, m23);
    check("sum-axis", [&](Graph& g, Value x) {
        return g.l2_norm(g.sum(x, 1));
    }, m23);
    check("max-axis", [&](Graph& g, Value x) { return g.sum(g.max(x, 0)); }, m23);
    check("exp", [&](Graph& g, Value x) { return g.sum(g.mul(g.exp(x), g.constant(v6))); }, v6);
    check("log", [&](Graph& g, Value x) { return g.sum(g.log(x)); }, pos);
    check("tanh", [&](Graph& g, Value x) { return g.l2_norm(g.tanh(x)); }, v6);
    check("sigmoid", [&](Graph& g, Value x) { return g.l2_norm(g.sigmoid(x)); }, v6);
    check("relu", [&](Graph& g, Value x) { return g.sum(g.relu(x)); }, kinked);
    check("leaky-relu", [&](Graph& g, Value x) { return g.sum(g.leaky_relu(x, 0.2)); }, kinked);
    check("elu", [&](Graph& g, Value x) { return g.sum(g.elu(x)); }, kinked);
    check("softplus", [&](Graph& g, Value x) { return g.l2_norm(g.softplus(x)); }, v6);
    check("sqrt", [&](Graph& g, Value x) { return g.sum(g.sqrt(x)); }, pos);
    check("softmax", [&](Graph& g, Value x) {
        return g.sum(g.mul(g.softmax(x, 1), g.constant(w23)));
    }, m23);
    check("l2-norm", [&](Graph& g, Value x) { return g.l2_norm(x); }, v6);
    check("l1-norm", [&](Graph& g, Value x) { return g.l1_norm(x); }, kinked);
    check("broadcast", [&](Graph& g, Value x) {
        return g.sum(g.mul(g.broadcast(x, Shape{2, 6}), g.constant(w26)));
    }, v6);
    Tensor w22 = rand_tensor(Shape{2, 2}, rng);
    check("reshape", [&](Graph& g, Value x) {
        return g.l2_norm(g.matmul(g.reshape(x, Shape{3, 2}), g.constant(w22)));
    }, v6);
    check("transpose", [&](Graph& g, Value x) {
        return g.l2_norm(g.matmul(g.transpose(x), g.constant(w26)));
    }, m23);
    check("scale", [&](Graph& g, Value x) { return g.l2_norm(g.scale(x, -1.7)); }, v6);
    check("add-scalar", [&](Graph& g, Value x) {
        return g.l2_norm(g.add_scalar(x, 0.9));
    }, v6);
}

TEST_CASE("sorted-accumulation matmul is invariant to row permutation of the inner axis") {
    Rng rng(11);
    Tensor alpha = rand_tensor(Shape{1, 4}, rng, 0.0, 1.0);
    Tensor feats = rand_tensor(Shape{4, 3}, rng);
    // permute the 4 inner entries consistently in both operands
    std::vector<int64_t> perm{2, 0, 3, 1};
    Tensor alpha_p{Shape{1, 4}};
    Tensor feats_p{Shape{4, 3}};
    for (int64_t j = 0; j < 4; ++j) {
        alpha_p.at(0, j) = alpha.at(0, perm[static_cast<size_t>(j)]);
        for (int64_t c = 0; c < 3; ++c)
            feats_p.at(j, c) = feats.at(perm[static_cast<size_t>(j)], c);
    }
    Graph g;
    Value r1 = g.matmul(g.constant(alpha), g.constant(feats), true);
    Value r2 = g.matmul(g.constant(alpha_p), g.constant(feats_p), true);
    CHECK(bit_equal(r1.data(), r2.data()));
}
