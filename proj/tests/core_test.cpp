#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdn/finite_diff.hpp"
#include "sdn/rng.hpp"
#include "sdn/tensor.hpp"

using namespace sdn;

TEST_CASE("tensor shape and data must agree") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), InvalidInput);
    CHECK_THROWS_AS(Tensor({0}), InvalidInput);
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
}

TEST_CASE("tensor finiteness guard") {
    Tensor t = Tensor::vector({1.0, 2.0});
    CHECK_NOTHROW(t.ensure_finite("test"));
    t[1] = std::nan("");
    CHECK_THROWS_AS(t.ensure_finite("test"), EvaluationError);
}

TEST_CASE("uniform tensors are deterministic per seed") {
    SeededRng a(7), b(7);
    const Tensor ta = a.uniform_tensor({3}, 0.0, 1.0);
    const Tensor tb = b.uniform_tensor({3}, 0.0, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ta[i] == tb[i]);

    SeededRng c(8);
    const Tensor tc = c.uniform_tensor({3}, 0.0, 1.0);
    bool same = true;
    for (std::size_t i = 0; i < 3; ++i) same = same && (ta[i] == tc[i]);
    CHECK_FALSE(same);
}

TEST_CASE("uniform range containment and degenerate range") {
    SeededRng rng(7);
    const Tensor t = rng.uniform_tensor({1000}, 0.0, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i] >= 0.0);
        CHECK(t[i] < 1.0);
    }
    const Tensor flat = rng.uniform_tensor({5}, 2.5, 2.5);
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == 2.5);
    CHECK_THROWS_AS(rng.uniform(1.0, 0.0), InvalidInput);
}

TEST_CASE("normal sampling") {
    SeededRng rng(3);
    const Tensor zero_sd = rng.normal_tensor({4}, 1.5, 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(zero_sd[i] == 1.5);
    CHECK_THROWS_AS(rng.normal(0.0, -1.0), InvalidInput);

    SeededRng a(11), b(11);
    const Tensor ta = a.normal_tensor({16}, 0.0, 1.0);
    const Tensor tb = b.normal_tensor({16}, 0.0, 1.0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(ta[i] == tb[i]);
}

TEST_CASE("normal sample mean obeys the law of large numbers") {
    SeededRng rng(123);
    const Tensor t = rng.normal_tensor({100000}, 0.5, 0.1);
    CHECK(std::abs(t.sum() / 100000.0 - 0.5) < 0.002);
}

TEST_CASE("seed splitting is deterministic and decorrelated") {
    SeededRng a(42), b(42);
    SeededRng ca = a.split(3), cb = b.split(3);
    CHECK(ca.next_u64() == cb.next_u64());
    SeededRng other = a.split(4);
    CHECK(ca.next_u64() != other.next_u64());
}

TEST_CASE("finite differences on simple functions") {
    const auto square = [](const Tensor& x) { return x[0] * x[0]; };
    const Tensor g = finite_diff_grad(square, Tensor::vector({1.0}), 1e-5);
    CHECK(std::abs(g[0] - 2.0) < 1e-6);

    const auto constant = [](const Tensor&) { return 4.0; };
    const Tensor gc = finite_diff_grad(constant, Tensor::vector({1.0, -2.0}), 1e-5);
    CHECK(gc[0] == 0.0);
    CHECK(gc[1] == 0.0);

    const auto product = [](const Tensor& x) { return x[0] * x[1]; };
    const Tensor gp = finite_diff_grad(product, Tensor::vector({2.0, 3.0}), 1e-5);
    CHECK(std::abs(gp[0] - 3.0) < 1e-6);
    CHECK(std::abs(gp[1] - 2.0) < 1e-6);
}

TEST_CASE("finite differences are near-exact on quadratics") {
    // q(x) = x^T M x / 2 has gradient Mx; central differences have no
    // truncation error on quadratics, so only rounding remains.
    SeededRng rng(5);
    const std::size_t n = 4;
    Tensor m = rng.uniform_tensor({n, n}, -1.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) m.at(i, j) = m.at(j, i);
    }
    const Tensor x = rng.uniform_tensor({n}, -1.0, 1.0);
    const auto quad = [&](const Tensor& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) acc += v[i] * m.at(i, j) * v[j];
        }
        return 0.5 * acc;
    };
    const double h = 1e-5;
    const Tensor g = finite_diff_grad(quad, x, h);
    for (std::size_t i = 0; i < n; ++i) {
        double exact = 0.0;
        for (std::size_t j = 0; j < n; ++j) exact += m.at(i, j) * x[j];
        CHECK(std::abs(g[i] - exact) <= 10.0 * h * h * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("finite differences surface non-finite evaluations") {
    const auto bad = [](const Tensor& x) { return std::log(x[0]); };
    CHECK_THROWS_AS(finite_diff_grad(bad, Tensor::vector({0.0}), 1e-3), EvaluationError);
}
