#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdn/transport.hpp"
#include "sdn/universal.hpp"
#include "test_oracles.hpp"

using namespace sdn;

namespace {

// Exact W1 between an empirical 1-D sample and the mixture law
// (1-eps) sum_j b_j delta_{y_j} + eps U[0,1], via the CDF-difference
// integral over the merged breakpoints (the uniform part integrates in
// closed form on each segment as |piecewise linear|).
double w1_sample_vs_mixture(const std::vector<double>& sample, const Tensor& b,
                            const GridSpec& grid, double eps) {
    struct Jump {
        double x;
        double mass;  // + for the sample CDF, - for the mixture atoms
    };
    std::vector<Jump> jumps;
    const double w = 1.0 / static_cast<double>(sample.size());
    for (double s : sample) jumps.push_back({s, w});
    for (std::size_t j = 0; j < b.size(); ++j) {
        jumps.push_back({static_cast<double>(j) * grid.spacing(), -(1.0 - eps) * b[j]});
    }
    jumps.push_back({0.0, 0.0});
    jumps.push_back({1.0, 0.0});
    std::sort(jumps.begin(), jumps.end(),
              [](const Jump& a, const Jump& bb) { return a.x < bb.x; });
    double total = 0.0, diff = 0.0;
    for (std::size_t k = 0; k + 1 < jumps.size(); ++k) {
        diff += jumps[k].mass;
        const double x0 = jumps[k].x, x1 = jumps[k + 1].x;
        if (x1 <= x0) continue;
        // On (x0, x1) the CDF difference is linear: d(t) = diff - eps * t.
        const double d0 = diff - eps * x0;
        const double d1 = diff - eps * x1;
        if (d0 * d1 >= 0.0) {
            total += 0.5 * std::abs(d0 + d1) * (x1 - x0);
        } else {
            const double root = x0 + d0 / eps;  // d(root) = 0
            total += 0.5 * std::abs(d0) * (root - x0) + 0.5 * std::abs(d1) * (x1 - root);
        }
    }
    return total;
}

}  // namespace

TEST_CASE("noise reshape: atoms absorb quantile intervals") {
    const GridSpec g(1, 5);
    Tensor b({5});
    b[2] = 1.0;  // all mass at y = 0.5
    // With small eps the mid quantile must land on the atom.
    CHECK(noise_reshape_1d(b, g, 0.5, 0.01) == doctest::Approx(0.5));
    CHECK(noise_reshape_1d(b, g, 0.9, 0.01) == doctest::Approx(0.5));
}

TEST_CASE("noise reshape: eps = 1 is the identity quantile") {
    const GridSpec g(1, 4);
    Tensor b = Tensor::full({4}, 0.25);
    for (double u : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0}) {
        CHECK(noise_reshape_1d(b, g, u, 1.0) == doctest::Approx(u).epsilon(1e-12));
    }
}

TEST_CASE("noise reshape is monotone and validates inputs") {
    SeededRng rng(61);
    const GridSpec g(1, 8);
    Tensor b({8});
    double sum = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        b[i] = rng.uniform(0.0, 1.0);
        sum += b[i];
    }
    b *= 1.0 / sum;
    double prev = -1.0;
    for (int k = 0; k <= 200; ++k) {
        const double u = static_cast<double>(k) / 200.0;
        const double t = noise_reshape_1d(b, g, u, 0.3);
        CHECK(t >= prev - 1e-12);
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
        prev = t;
    }
    CHECK_THROWS_AS(noise_reshape_1d(b, g, -0.1, 0.3), DomainError);
    CHECK_THROWS_AS(noise_reshape_1d(b, g, 0.5, 0.0), InvalidInput);
    CHECK_THROWS_AS(noise_reshape_1d(b, g, 0.5, 1.5), InvalidInput);
}

TEST_CASE("pushing uniform samples through the reshape recovers the mixture law") {
    SeededRng rng(62);
    const GridSpec g(1, 6);
    Tensor b({6});
    double sum = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        b[i] = rng.uniform(0.0, 1.0);
        sum += b[i];
    }
    b *= 1.0 / sum;
    const double eps = 0.2;
    const std::size_t n = 10000;
    std::vector<double> sample(n);
    for (std::size_t k = 0; k < n; ++k) {
        sample[k] = noise_reshape_1d(b, g, rng.uniform(0.0, 1.0), eps);
    }
    CHECK(w1_sample_vs_mixture(sample, b, g, eps) <= 0.02);
}

TEST_CASE("pipeline on the identity functional reproduces its input") {
    SeededRng rng(63);
    UniversalPipelineConfig cfg;
    cfg.input_dim = 1;
    cfg.input_grid_k = 64;
    cfg.output_grid_k = 64;
    cfg.eps = 0.01;
    cfg.noise_atoms = 1000;
    const UniversalPipeline pipeline([](const DiscreteMeasure& m) { return m; }, cfg);

    const DiscreteMeasure input = testing::random_uniform_measure(rng, 10, 1, 0.05, 0.95);
    const Tensor a = pipeline.discretize_input(input);
    CHECK(std::abs(a.sum() - 1.0) < 1e-10);

    SeededRng noise(7);
    const DiscreteMeasure out = pipeline(input, noise);
    CHECK(w1_between_laws(out, input) <= 0.1);
}

TEST_CASE("pipeline error shrinks under grid refinement for the squaring map") {
    SeededRng rng(64);
    const MeasureMap square = [](const DiscreteMeasure& m) {
        return push_forward(
            [](std::span<const double> x) { return std::vector<double>{x[0] * x[0]}; }, m);
    };
    std::vector<DiscreteMeasure> inputs;
    for (int t = 0; t < 5; ++t) {
        inputs.push_back(testing::random_uniform_measure(rng, 10, 1, 0.05, 0.95));
    }
    double prev_err = -1.0;
    for (std::size_t k : {16u, 64u}) {
        UniversalPipelineConfig cfg;
        cfg.input_dim = 1;
        cfg.input_grid_k = k;
        cfg.output_grid_k = k;
        cfg.eps = 0.01;
        cfg.noise_atoms = 1000;
        const UniversalPipeline pipeline(square, cfg);
        double err = 0.0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            SeededRng noise(100 + i);
            err += w1_between_laws(pipeline(inputs[i], noise), square(inputs[i]));
        }
        err /= static_cast<double>(inputs.size());
        if (prev_err >= 0.0) {
            CHECK(err < prev_err);
            CHECK(err <= 0.1);
        }
        prev_err = err;
    }
}

TEST_CASE("pipeline on a constant functional concentrates near the target") {
    SeededRng rng(65);
    const DiscreteMeasure target = DiscreteMeasure::dirac({0.5});
    UniversalPipelineConfig cfg;
    cfg.input_dim = 1;
    cfg.input_grid_k = 16;
    cfg.output_grid_k = 33;  // 0.5 is a node
    cfg.eps = 0.05;
    cfg.noise_atoms = 2000;
    const UniversalPipeline pipeline(
        [target](const DiscreteMeasure&) { return target; }, cfg);
    const DiscreteMeasure input = testing::random_uniform_measure(rng, 8, 1, 0.05, 0.95);
    SeededRng noise(3);
    const DiscreteMeasure out = pipeline(input, noise);
    // error sources: eps-mixing toward Uniform[0,1] plus the grid width and
    // the sampling error of the noise block
    const double w1_dirac_uniform = 0.25;  // integral of |x - 0.5| on [0,1]
    const double bound = cfg.eps * w1_dirac_uniform + 1.0 / 32.0 + 0.02;
    CHECK(w1_between_laws(out, target) <= bound);
}

TEST_CASE("pipeline rejects oracles that leave the unit interval") {
    UniversalPipelineConfig cfg;
    cfg.input_dim = 1;
    cfg.input_grid_k = 8;
    cfg.output_grid_k = 8;
    const UniversalPipeline bad(
        [](const DiscreteMeasure&) { return DiscreteMeasure::dirac({1.7}); }, cfg);
    SeededRng noise(4);
    const DiscreteMeasure input = uniform_on({{0.3}, {0.6}});
    CHECK_THROWS_AS(bad(input, noise), DomainError);
}

TEST_CASE("moment functional: normalization, hand values, multiplicativity") {
    SeededRng rng(66);
    const DiscreteMeasure m = testing::random_measure(rng, 4, 1);
    const auto one = [](std::span<const double>) { return 1.0; };
    CHECK(moment_functional(one, 1, m) == doctest::Approx(1.0).epsilon(1e-14));

    const DiscreteMeasure u01 = uniform_on({{0.0}, {1.0}});
    const auto xy = [](std::span<const double> v) { return v[0] * v[1]; };
    CHECK(moment_functional(xy, 2, u01) == doctest::Approx(0.25).epsilon(1e-14));

    // product over disjoint slots factorizes
    const auto phi1 = [](std::span<const double> v) { return v[0] + 0.3; };
    const auto phi2 = [](std::span<const double> v) { return v[0] * v[0] - v[1]; };
    const auto joint = [&](std::span<const double> v) {
        const double a = v[0] + 0.3;
        const double b = v[1] * v[1] - v[2];
        return a * b;
    };
    const double lhs = moment_functional(joint, 3, m);
    const double rhs = moment_functional(phi1, 1, m) * moment_functional(phi2, 2, m);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

    // linearity in phi
    const auto psi = [](std::span<const double> v) { return std::cos(v[0]); };
    const auto combo = [&](std::span<const double> v) { return 2.0 * xy(v) + 0.5 * psi(v); };
    CHECK(moment_functional(combo, 2, m) ==
          doctest::Approx(2.0 * moment_functional(xy, 2, m) +
                          0.5 * moment_functional(psi, 2, m)).epsilon(1e-10));

    const DiscreteMeasure big = testing::random_measure(rng, 40, 1);
    CHECK_THROWS_AS(moment_functional(one, 4, big), ResourceLimit);
}

TEST_CASE("lipschitz harness on identity and scaling maps") {
    SeededRng rng(67);
    const PairSampler sampler = [](SeededRng& r) {
        return std::make_pair(testing::random_uniform_measure(r, 5, 2),
                              testing::random_uniform_measure(r, 5, 2));
    };
    const MeasureMap identity = [](const DiscreteMeasure& m) { return m; };
    const auto id_report = lipschitz_harness("identity", identity, sampler, 1.0 + 1e-9, 20, rng);
    CHECK(id_report.pass);
    CHECK(id_report.max_ratio <= 1.0 + 1e-9);
    CHECK(id_report.max_ratio > 0.9);

    const MeasureMap doubler = [](const DiscreteMeasure& m) {
        return push_forward(
            [](std::span<const double> x) {
                std::vector<double> y(x.begin(), x.end());
                for (double& v : y) v *= 2.0;
                return y;
            },
            m);
    };
    const auto scale_report = lipschitz_harness("scale2", doubler, sampler, 2.0 + 1e-9, 20, rng);
    CHECK(scale_report.pass);
    CHECK(scale_report.max_ratio == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("lipschitz harness bounds a random elementary block by its norm product") {
    SeededRng rng(68);
    const InteractionMap f(Dependence::Both, 2, {4}, 2, OutputActivation::Relu, rng);
    const double bound = 2.0 * (f.lipschitz_bound_first() + f.lipschitz_bound_second());
    const MeasureMap block = [&f](const DiscreteMeasure& m) {
        return elementary_block_apply(m, f);
    };
    const PairSampler sampler = [](SeededRng& r) {
        return std::make_pair(testing::random_uniform_measure(r, 6, 2),
                              testing::random_uniform_measure(r, 6, 2));
    };
    const auto report = lipschitz_harness("random-block", block, sampler, bound + 1e-6, 20, rng);
    CHECK(report.pass);
    CHECK(report.trials == 20);
    CHECK(report.max_ratio > 0.0);
}
