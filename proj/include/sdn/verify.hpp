#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdn/tensor.hpp"

namespace sdn {

// One property check: `max_ratio` is the worst observed statistic, normalized
// so that the check passes iff max_ratio <= bound.
struct CheckReport {
    std::string name;
    int trials = 0;
    double max_ratio = 0.0;
    double bound = 0.0;
    bool pass = false;
    double seconds = 0.0;
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckReport> checks;
    bool pass = false;
    double seconds = 0.0;
};

// --- robustness -----------------------------------------------------------
CheckReport check_permutation_invariance(std::uint64_t seed, int trials = 100);
CheckReport check_block_lipschitz(std::uint64_t seed, int trials = 50);
CheckReport check_tensorization_lipschitz(std::uint64_t seed, int trials = 50);
CheckReport check_pushforward_lipschitz(std::uint64_t seed, int trials = 50);
CheckReport check_composition_lipschitz(std::uint64_t seed, int trials = 25);

// --- discretization -------------------------------------------------------
CheckReport check_discretization(std::uint64_t seed, int trials = 100);

// --- sinkhorn -------------------------------------------------------------
CheckReport check_sinkhorn_oracle(std::uint64_t seed, int pairs = 20);
CheckReport check_sinkhorn_self_divergence(std::uint64_t seed, int trials = 20);

// --- gradients ------------------------------------------------------------
CheckReport check_classifier_gradients(std::uint64_t seed, int coords = 50);
CheckReport check_vae_gradients(std::uint64_t seed, int coords = 50);

// --- universality ---------------------------------------------------------
CheckReport check_universality_refinement(std::uint64_t seed);
CheckReport check_moment_functionals();
CheckReport check_noise_reshape_monotone(std::uint64_t seed, int trials = 20);

// --- flocking -------------------------------------------------------------
CheckReport check_flock_momentum(std::uint64_t seed, int steps = 10000, std::size_t n = 100);
CheckReport check_flock_dispersion(std::uint64_t seed, int scenarios = 10, std::size_t n = 100);
CheckReport check_gradient_flow_energy(std::uint64_t seed);

// --- experiments (slow; used by the acceptance gate and `eval`) ------------
// Blob-vs-ring classification: trains twice with the same seed, checks
// determinism and the accuracy target. max_ratio = 1 - accuracy.
CheckReport run_classification_experiment(std::uint64_t seed, int threads = 1);
// Flocking prediction: trained mean divergence must undercut the untrained
// model's by at least 50%. max_ratio = trained / untrained.
CheckReport run_prediction_experiment(std::uint64_t seed, int threads = 1);

// Named suites: lipschitz, discretization, sinkhorn, gradients, universality,
// flocking, all.
SuiteReport run_suite(const std::string& name, std::uint64_t seed, int threads = 1);
std::vector<std::string> suite_names();

void write_suite_json(const std::filesystem::path& path, const SuiteReport& report);

}  // namespace sdn
