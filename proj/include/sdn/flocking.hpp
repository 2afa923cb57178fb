#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sdn/measure.hpp"
#include "sdn/rng.hpp"

namespace sdn {

// Weighted interacting particles: positions and velocities are n x d,
// masses lie on the simplex.
struct FlockState {
    Tensor positions;
    Tensor velocities;
    Tensor masses;
    double time = 0.0;

    std::size_t count() const { return positions.rows(); }
    std::size_t dim() const { return positions.cols(); }
    void check() const;
};

enum class Integrator { Euler, Rk4 };

struct FlockConfig {
    double m = 0.6;  // interaction decay exponent
    double dt = 0.01;
    Integrator integrator = Integrator::Rk4;
    double stop_tol = 1e-3;   // velocity-dispersion threshold
    double max_time = 200.0;

    void validate() const;
};

// Alignment Laplacian: off-diagonal 1/(1 + ||p_i - p_j||^m), diagonal the
// negated row sum, so rows sum to zero.
Tensor interaction_weights(const Tensor& positions, double m);

// One integrator step of dp = v, dv_i = sum_{j != i} mass_j a_ij (v_j - v_i)
// with a_ij = 1/(1 + ||p_i - p_j||^m). Mass-weighting the neighbor influence
// conserves the weighted momentum sum_i mass_i v_i exactly along the flow,
// and uniform masses recover the plain Laplacian dynamics up to time units.
FlockState step(const FlockState& state, const FlockConfig& cfg);

// Weighted mean velocity and the dispersion max_i ||v_i - vbar||.
Tensor mean_velocity(const FlockState& state);
double velocity_dispersion(const FlockState& state);

struct FlockTrajectory {
    std::vector<FlockState> states;  // sampled every record_every steps + final
    bool converged = false;
    double final_dispersion = 0.0;
};

// Integrates until the dispersion falls below stop_tol or max_time is hit.
// The weighted mean velocity is subtracted at t = 0, making the limit
// configuration stationary.
FlockTrajectory simulate(FlockState initial, const FlockConfig& cfg, int record_every = 1);

// Measure on the final positions weighted by the particle masses. Throws
// EvaluationError carrying the last dispersion when the run did not converge.
DiscreteMeasure limit_configuration(const FlockState& initial, const FlockConfig& cfg);

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

struct FlockScenario {
    std::vector<std::size_t> flock_sizes;  // 2 to 4 groups
};

struct FlockSample {
    DiscreteMeasure input;   // phase-space measure sum mass_i delta_{(p_i, v_i)}
    DiscreteMeasure target;  // limit positions with uniform weights
};

// Scenario family: group centers at the rectangle corners (-4,2), (-4,-2),
// (4,2), (4,-2) with unit position variance; one shared velocity per group
// drawn uniformly from the quarter disk v_x in [0, 0.1], v_y in [-0.1, 0];
// masses Gaussian(0.5, 0.1) clipped at zero and normalized (all-zero draws
// are redrawn, at most 100 times). Deterministic per seed: scenario i uses
// rng.split(i), independent of thread count.
FlockState sample_initial_state(SeededRng& rng, const FlockScenario& scenario);

std::vector<FlockSample> generate_dataset(const SeededRng& rng,
                                          std::span<const FlockScenario> scenarios,
                                          const FlockConfig& cfg, int threads = 1);

// CSV with one row per (snapshot, particle): t, id, p..., v..., mass.
void write_trajectory_csv(const std::filesystem::path& path, const FlockTrajectory& trajectory);

// Paired JSONL: even lines inputs, odd lines targets.
void write_flock_dataset(const std::filesystem::path& path, std::span<const FlockSample> samples);
std::vector<FlockSample> read_flock_dataset(const std::filesystem::path& path);

}  // namespace sdn
