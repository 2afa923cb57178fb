// Acceptance gate: every release-blocking property with its tolerance and
// runtime budget, one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "sdn/verify.hpp"

namespace {

struct Criterion {
    int id;
    std::string label;
    std::vector<sdn::CheckReport> checks;
    double time_limit;
};

bool report(const Criterion& c) {
    bool pass = true;
    double seconds = 0.0;
    for (const auto& check : c.checks) {
        pass = pass && check.pass;
        seconds += check.seconds;
    }
    pass = pass && seconds < c.time_limit;
    std::printf("%s  criterion %2d: %s  [", pass ? "PASS" : "FAIL", c.id, c.label.c_str());
    for (std::size_t i = 0; i < c.checks.size(); ++i) {
        const auto& check = c.checks[i];
        std::printf("%s%s observed %.3g vs bound %.3g", i ? "; " : "", check.name.c_str(),
                    check.max_ratio, check.bound);
    }
    std::printf("] (%.1f s < %.0f s)\n", seconds, c.time_limit);
    std::fflush(stdout);
    return pass;
}

int env_threads() {
    if (const char* env = std::getenv("SDN_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    return 2;
}

}  // namespace

int main() {
    const std::uint64_t seed = 2024;
    const int threads = env_threads();
    bool all_pass = true;
    const auto run = [&](Criterion c) { all_pass = report(c) && all_pass; };

    run({1, "permutation invariance of forward passes",
         {sdn::check_permutation_invariance(seed, 100)}, 10.0});
    run({2, "elementary-block Lipschitz bound",
         {sdn::check_block_lipschitz(seed + 1, 50)}, 30.0});
    run({3, "tensorization Lipschitz sum bound",
         {sdn::check_tensorization_lipschitz(seed + 2, 50)}, 30.0});
    run({4, "P1 discretization error bound",
         {sdn::check_discretization(seed + 3, 100)}, 30.0});
    run({5, "sinkhorn against the exact solver",
         {sdn::check_sinkhorn_oracle(seed + 4, 20),
          sdn::check_sinkhorn_self_divergence(seed + 5, 20)}, 10.0});
    run({6, "loss gradients against finite differences",
         {sdn::check_classifier_gradients(seed + 6, 50),
          sdn::check_vae_gradients(seed + 7, 50)}, 60.0});
    run({7, "flocking invariants (momentum, dispersion)",
         {sdn::check_flock_momentum(seed + 8, 10000, 100),
          sdn::check_flock_dispersion(seed + 9, 10, 100)}, 60.0});
    run({8, "gradient-flow block decreases the interaction energy",
         {sdn::check_gradient_flow_energy(seed + 10)}, 5.0});
    run({9, "universality pipeline refinement",
         {sdn::check_universality_refinement(seed + 11)}, 60.0});
    run({10, "tensorized moment functionals",
         {sdn::check_moment_functionals()}, 5.0});
    run({11, "desk-scale classification experiment",
         {sdn::run_classification_experiment(seed + 12, threads)}, 120.0});
    run({12, "desk-scale flocking prediction experiment",
         {sdn::run_prediction_experiment(seed + 13, threads)}, 600.0});

    std::printf("%s\n", all_pass ? "ACCEPTANCE: ALL CRITERIA PASS"
                                 : "ACCEPTANCE: FAILURES PRESENT");
    return all_pass ? 0 : 1;
}
