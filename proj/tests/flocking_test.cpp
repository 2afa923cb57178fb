#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sdn/flocking.hpp"
#include "test_oracles.hpp"

using namespace sdn;

namespace {

FlockState random_state(SeededRng& rng, std::size_t n) {
    FlockState s{rng.uniform_tensor({n, 2}, -2.0, 2.0),
                 rng.uniform_tensor({n, 2}, -0.5, 0.5), Tensor({n}), 0.0};
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s.masses[i] = 0.1 + rng.uniform(0.0, 1.0);
        sum += s.masses[i];
    }
    s.masses *= 1.0 / sum;
    return s;
}

Tensor weighted_momentum(const FlockState& s) {
    Tensor p({s.dim()});
    for (std::size_t i = 0; i < s.count(); ++i) {
        for (std::size_t k = 0; k < s.dim(); ++k) {
            p[k] += s.masses[i] * s.velocities.at(i, k);
        }
    }
    return p;
}

}  // namespace

TEST_CASE("interaction weights: trivial cases and zero row sums") {
    CHECK(interaction_weights(Tensor({1, 2}), 0.6).at(0, 0) == 0.0);

    const Tensor coincident({2, 2}, {1.0, 1.0, 1.0, 1.0});
    const Tensor lap = interaction_weights(coincident, 0.6);
    CHECK(lap.at(0, 1) == doctest::Approx(1.0));
    CHECK(lap.at(0, 0) == doctest::Approx(-1.0));

    SeededRng rng(71);
    const Tensor p = rng.uniform_tensor({6, 2}, -3.0, 3.0);
    const Tensor l = interaction_weights(p, 0.6);
    for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 6; ++j) row += l.at(i, j);
        CHECK(std::abs(row) < 1e-12);
        for (std::size_t j = 0; j < 6; ++j) {
            if (j != i) {
                CHECK(l.at(i, j) > 0.0);
                CHECK(l.at(i, j) <= 1.0);
            }
        }
    }
}

TEST_CASE("single particle moves in a straight line") {
    FlockState s{Tensor({1, 2}, {0.0, 0.0}), Tensor({1, 2}, {1.0, -0.5}),
                 Tensor({1}, {1.0}), 0.0};
    FlockConfig cfg;
    const FlockState next = step(s, cfg);
    CHECK(next.positions.at(0, 0) == doctest::Approx(cfg.dt * 1.0));
    CHECK(next.positions.at(0, 1) == doctest::Approx(cfg.dt * -0.5));
    CHECK(next.velocities.at(0, 0) == 1.0);
    CHECK(next.velocities.at(0, 1) == -0.5);
}

TEST_CASE("aligned velocities are a fixed point of the velocity dynamics") {
    SeededRng rng(72);
    FlockState s = random_state(rng, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        s.velocities.at(i, 0) = 0.3;
        s.velocities.at(i, 1) = -0.2;
    }
    const FlockState next = step(s, FlockConfig{});
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(next.velocities.at(i, 0) == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(next.velocities.at(i, 1) == doctest::Approx(-0.2).epsilon(1e-15));
    }
}

TEST_CASE("weighted momentum is conserved per RK4 step") {
    SeededRng rng(73);
    FlockState s = random_state(rng, 8);
    const FlockConfig cfg;
    Tensor before = weighted_momentum(s);
    for (int k = 0; k < 200; ++k) {
        const FlockState next = step(s, cfg);
        const Tensor after = weighted_momentum(next);
        for (std::size_t d = 0; d < 2; ++d) {
            CHECK(std::abs(after[d] - before[d]) < 1e-9);
        }
        s = next;
        before = after;
    }
}

TEST_CASE("step is equivariant under translation and permutation") {
    SeededRng rng(74);
    const FlockState s = random_state(rng, 6);
    const FlockConfig cfg;
    const FlockState base = step(s, cfg);

    FlockState shifted = s;
    for (std::size_t i = 0; i < 6; ++i) {
        shifted.positions.at(i, 0) += 3.5;
        shifted.positions.at(i, 1) -= 1.25;
    }
    const FlockState shifted_next = step(shifted, cfg);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(shifted_next.positions.at(i, 0) ==
              doctest::Approx(base.positions.at(i, 0) + 3.5).epsilon(1e-12));
        CHECK(shifted_next.velocities.at(i, 1) ==
              doctest::Approx(base.velocities.at(i, 1)).epsilon(1e-12));
    }

    // permutation: swap particles 0 and 3
    FlockState swapped = s;
    for (std::size_t k = 0; k < 2; ++k) {
        std::swap(swapped.positions.at(0, k), swapped.positions.at(3, k));
        std::swap(swapped.velocities.at(0, k), swapped.velocities.at(3, k));
    }
    std::swap(swapped.masses[0], swapped.masses[3]);
    const FlockState swapped_next = step(swapped, cfg);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(swapped_next.positions.at(0, k) ==
              doctest::Approx(base.positions.at(3, k)).epsilon(1e-12));
        CHECK(swapped_next.positions.at(3, k) ==
              doctest::Approx(base.positions.at(0, k)).epsilon(1e-12));
    }
}

TEST_CASE("simulate returns immediately for an already-flocked state") {
    SeededRng rng(75);
    FlockState s = random_state(rng, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        s.velocities.at(i, 0) = 0.1;
        s.velocities.at(i, 1) = 0.1;
    }
    const FlockTrajectory t = simulate(s, FlockConfig{});
    CHECK(t.converged);
    CHECK(t.states.size() == 1);
}

TEST_CASE("two opposing particles align monotonically") {
    FlockState s{Tensor({2, 1}, {-1.0, 1.0}), Tensor({2, 1}, {0.5, -0.5}),
                 Tensor({2}, {0.5, 0.5}), 0.0};
    FlockConfig cfg;
    cfg.max_time = 400.0;
    const FlockTrajectory t = simulate(s, cfg);
    CHECK(t.converged);
    double prev = std::numeric_limits<double>::infinity();
    for (const FlockState& state : t.states) {
        const double d = velocity_dispersion(state);
        CHECK(d <= prev + 1e-9);
        prev = d;
    }
}

TEST_CASE("limit configuration merges two approaching groups") {
    // two tight groups thrown at each other
    FlockState s{Tensor({4, 2}, {-2.0, 0.0, -2.1, 0.1, 2.0, 0.0, 2.1, -0.1}),
                 Tensor({4, 2}, {0.2, 0.0, 0.2, 0.0, -0.2, 0.0, -0.2, 0.0}),
                 Tensor::full({4}, 0.25), 0.0};
    FlockConfig cfg;
    cfg.max_time = 500.0;
    const DiscreteMeasure limit = limit_configuration(s, cfg);
    double diameter = 0.0;
    for (std::size_t i = 0; i < limit.size(); ++i) {
        for (std::size_t j = 0; j < limit.size(); ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                const double diff = limit.point(i)[k] - limit.point(j)[k];
                sq += diff * diff;
            }
            diameter = std::max(diameter, std::sqrt(sq));
        }
    }
    CHECK(diameter < 4.0);  // initial group separation

    // translation of the initial state translates the limit
    FlockState shifted = s;
    for (std::size_t i = 0; i < 4; ++i) shifted.positions.at(i, 0) += 2.0;
    const DiscreteMeasure limit2 = limit_configuration(shifted, cfg);
    for (std::size_t i = 0; i < limit.size(); ++i) {
        CHECK(limit2.point(i)[0] == doctest::Approx(limit.point(i)[0] + 2.0).epsilon(1e-9));
        CHECK(limit2.point(i)[1] == doctest::Approx(limit.point(i)[1]).epsilon(1e-9));
    }
}

TEST_CASE("limit configuration reports non-convergence with the dispersion") {
    FlockState s{Tensor({2, 1}, {-1.0, 1.0}), Tensor({2, 1}, {0.5, -0.5}),
                 Tensor({2}, {0.5, 0.5}), 0.0};
    FlockConfig cfg;
    cfg.max_time = 0.05;  // far too short
    CHECK_THROWS_AS(limit_configuration(s, cfg), EvaluationError);
}

TEST_CASE("scenario sampling matches the stated family") {
    SeededRng rng(76);
    FlockScenario scenario;
    scenario.flock_sizes = {500, 500};
    const FlockState s = sample_initial_state(rng, scenario);
    REQUIRE(s.count() == 1000);

    // group means near the first two rectangle corners
    double mx0 = 0.0, my0 = 0.0, mx1 = 0.0, my1 = 0.0;
    for (std::size_t i = 0; i < 500; ++i) {
        mx0 += s.positions.at(i, 0);
        my0 += s.positions.at(i, 1);
        mx1 += s.positions.at(500 + i, 0);
        my1 += s.positions.at(500 + i, 1);
    }
    CHECK(std::abs(mx0 / 500.0 + 4.0) < 0.2);
    CHECK(std::abs(my0 / 500.0 - 2.0) < 0.2);
    CHECK(std::abs(mx1 / 500.0 + 4.0) < 0.2);
    CHECK(std::abs(my1 / 500.0 + 2.0) < 0.2);

    // quarter-disk velocities, shared within a group
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(s.velocities.at(i, 0) == s.velocities.at(0, 0));
        CHECK(s.velocities.at(i, 1) == s.velocities.at(0, 1));
    }
    const double vx = s.velocities.at(0, 0), vy = s.velocities.at(0, 1);
    CHECK(vx >= 0.0);
    CHECK(vy <= 0.0);
    CHECK(vx * vx + vy * vy <= 0.01 + 1e-15);

    // masses normalized and nonnegative
    double mass_sum = 0.0;
    for (std::size_t i = 0; i < s.count(); ++i) {
        CHECK(s.masses[i] >= 0.0);
        mass_sum += s.masses[i];
    }
    CHECK(std::abs(mass_sum - 1.0) < 1e-12);
}

TEST_CASE("dataset generation is deterministic and thread-invariant") {
    SeededRng rng(77);
    std::vector<FlockScenario> scenarios;
    for (int i = 0; i < 4; ++i) {
        scenarios.push_back(FlockScenario{{6, 6}});
    }
    FlockConfig cfg;
    cfg.max_time = 400.0;
    const auto a = generate_dataset(rng, scenarios, cfg, 1);
    const auto b = generate_dataset(rng, scenarios, cfg, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(measures_close(a[i].input, b[i].input, 0.0));
        CHECK(measures_close(a[i].target, b[i].target, 0.0));
        CHECK(a[i].input.dim() == 4);
        CHECK(a[i].target.dim() == 2);
        CHECK(a[i].target.is_uniform());
    }
}

TEST_CASE("dataset files round trip and are byte-identical per seed") {
    namespace fs = std::filesystem;
    SeededRng rng(78);
    std::vector<FlockScenario> scenarios{FlockScenario{{5, 5}}, FlockScenario{{4, 4, 4}}};
    FlockConfig cfg;
    cfg.max_time = 400.0;
    const auto samples = generate_dataset(rng, scenarios, cfg, 1);
    const fs::path p1 = fs::temp_directory_path() / "sdn_flock_a.jsonl";
    const fs::path p2 = fs::temp_directory_path() / "sdn_flock_b.jsonl";
    write_flock_dataset(p1, samples);
    const auto samples2 = generate_dataset(rng, scenarios, cfg, 2);
    write_flock_dataset(p2, samples2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    CHECK_FALSE(s1.empty());

    const auto back = read_flock_dataset(p1);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(measures_close(back[i].input, samples[i].input, 1e-12));
        CHECK(measures_close(back[i].target, samples[i].target, 1e-12));
    }
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("trajectory csv export") {
    namespace fs = std::filesystem;
    FlockState s{Tensor({2, 2}, {0.0, 0.0, 1.0, 0.0}),
                 Tensor({2, 2}, {0.1, 0.0, -0.1, 0.0}), Tensor::full({2}, 0.5), 0.0};
    FlockConfig cfg;
    cfg.max_time = 0.1;
    const FlockTrajectory t = simulate(s, cfg);
    const fs::path path = fs::temp_directory_path() / "sdn_traj.csv";
    write_trajectory_csv(path, t);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,id,p0,p1,v0,v1,mass");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == t.states.size() * 2);
    fs::remove(path);
}
