#include "sdn/flocking.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <thread>

#include "sdn/measure_io.hpp"

namespace sdn {

void FlockState::check() const {
    if (positions.rank() != 2 || velocities.rank() != 2 || masses.rank() != 1) {
        throw InvalidInput("FlockState: positions/velocities must be n x d, masses n");
    }
    if (!positions.same_shape(velocities) || masses.size() != positions.rows()) {
        throw InvalidInput("FlockState: inconsistent particle counts");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (masses[i] < 0.0) throw InvalidInput("FlockState: negative mass");
        sum += masses[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidInput("FlockState: masses sum to " + std::to_string(sum));
    }
}

void FlockConfig::validate() const {
    if (!(m > 0.0)) throw InvalidInput("FlockConfig: interaction exponent must be positive");
    if (!(dt > 0.0)) throw InvalidInput("FlockConfig: dt must be positive");
    if (!(stop_tol > 0.0)) throw InvalidInput("FlockConfig: stop_tol must be positive");
}

Tensor interaction_weights(const Tensor& positions, double m) {
    if (positions.rank() != 2) throw InvalidInput("interaction_weights: positions must be n x d");
    positions.ensure_finite("interaction_weights");
    const std::size_t n = positions.rows(), d = positions.cols();
    Tensor lap({n, n});
    const double half_m = 0.5 * m;
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = positions.at(i, k) - positions.at(j, k);
                sq += diff * diff;
            }
            const double a = 1.0 / (1.0 + std::pow(sq, half_m));
            lap.at(i, j) = a;
            row_sum += a;
        }
        lap.at(i, i) = -row_sum;
    }
    return lap;
}

namespace {

// dv_i = sum_{j != i} mass_j a_ij (v_j - v_i); dp = v.
void acceleration(const Tensor& p, const Tensor& v, const Tensor& masses, double m,
                  Tensor& dv) {
    const std::size_t n = p.rows(), d = p.cols();
    dv.fill(0.0);
    const double half_m = 0.5 * m;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = p.at(i, k) - p.at(j, k);
                sq += diff * diff;
            }
            // ||p_i - p_j||^m computed as (sq)^(m/2)
            const double a = masses[j] / (1.0 + std::pow(sq, half_m));
            for (std::size_t k = 0; k < d; ++k) {
                dv.at(i, k) += a * (v.at(j, k) - v.at(i, k));
            }
        }
    }
}

struct Derivative {
    Tensor dp;
    Tensor dv;
};

Derivative derivative(const Tensor& p, const Tensor& v, const Tensor& masses, double m) {
    Derivative out{v, Tensor(p.shape())};
    acceleration(p, v, masses, m, out.dv);
    return out;
}

}  // namespace

FlockState step(const FlockState& state, const FlockConfig& cfg) {
    cfg.validate();
    state.check();
    if (!state.positions.all_finite() || !state.velocities.all_finite()) {
        throw EvaluationError("flocking step: non-finite state");
    }
    const double dt = cfg.dt;
    FlockState next = state;
    next.time = state.time + dt;

    if (cfg.integrator == Integrator::Euler) {
        const Derivative k = derivative(state.positions, state.velocities, state.masses, cfg.m);
        for (std::size_t i = 0; i < state.positions.size(); ++i) {
            next.positions[i] = state.positions[i] + dt * k.dp[i];
            next.velocities[i] = state.velocities[i] + dt * k.dv[i];
        }
        return next;
    }

    const Derivative k1 = derivative(state.positions, state.velocities, state.masses, cfg.m);
    Tensor p2 = state.positions, v2 = state.velocities;
    for (std::size_t i = 0; i < p2.size(); ++i) {
        p2[i] += 0.5 * dt * k1.dp[i];
        v2[i] += 0.5 * dt * k1.dv[i];
    }
    const Derivative k2 = derivative(p2, v2, state.masses, cfg.m);
    Tensor p3 = state.positions, v3 = state.velocities;
    for (std::size_t i = 0; i < p3.size(); ++i) {
        p3[i] += 0.5 * dt * k2.dp[i];
        v3[i] += 0.5 * dt * k2.dv[i];
    }
    const Derivative k3 = derivative(p3, v3, state.masses, cfg.m);
    Tensor p4 = state.positions, v4 = state.velocities;
    for (std::size_t i = 0; i < p4.size(); ++i) {
        p4[i] += dt * k3.dp[i];
        v4[i] += dt * k3.dv[i];
    }
    const Derivative k4 = derivative(p4, v4, state.masses, cfg.m);

    for (std::size_t i = 0; i < state.positions.size(); ++i) {
        next.positions[i] =
            state.positions[i] +
            dt / 6.0 * (k1.dp[i] + 2.0 * k2.dp[i] + 2.0 * k3.dp[i] + k4.dp[i]);
        next.velocities[i] =
            state.velocities[i] +
            dt / 6.0 * (k1.dv[i] + 2.0 * k2.dv[i] + 2.0 * k3.dv[i] + k4.dv[i]);
    }
    if (!next.positions.all_finite() || !next.velocities.all_finite()) {
        throw EvaluationError("flocking step: non-finite state after integration");
    }
    return next;
}

Tensor mean_velocity(const FlockState& state) {
    Tensor vbar({state.dim()});
    for (std::size_t i = 0; i < state.count(); ++i) {
        for (std::size_t k = 0; k < state.dim(); ++k) {
            vbar[k] += state.masses[i] * state.velocities.at(i, k);
        }
    }
    return vbar;
}

double velocity_dispersion(const FlockState& state) {
    const Tensor vbar = mean_velocity(state);
    double worst = 0.0;
    for (std::size_t i = 0; i < state.count(); ++i) {
        double sq = 0.0;
        for (std::size_t k = 0; k < state.dim(); ++k) {
            const double diff = state.velocities.at(i, k) - vbar[k];
            sq += diff * diff;
        }
        worst = std::max(worst, std::sqrt(sq));
    }
    return worst;
}

FlockTrajectory simulate(FlockState initial, const FlockConfig& cfg, int record_every) {
    cfg.validate();
    initial.check();
    if (record_every < 1) throw InvalidInput("simulate: record_every must be >= 1");

    // Center the momentum so the flock settles to stationary positions.
    const Tensor vbar = mean_velocity(initial);
    for (std::size_t i = 0; i < initial.count(); ++i) {
        for (std::size_t k = 0; k < initial.dim(); ++k) {
            initial.velocities.at(i, k) -= vbar[k];
        }
    }

    FlockTrajectory trajectory;
    trajectory.states.push_back(initial);
    FlockState state = std::move(initial);
    long step_index = 0;
    while (true) {
        const double dispersion = velocity_dispersion(state);
        trajectory.final_dispersion = dispersion;
        if (dispersion < cfg.stop_tol) {
            trajectory.converged = true;
            break;
        }
        if (state.time >= cfg.max_time) break;
        state = step(state, cfg);
        ++step_index;
        if (step_index % record_every == 0) trajectory.states.push_back(state);
    }
    if (trajectory.states.back().time != state.time) trajectory.states.push_back(state);
    return trajectory;
}

DiscreteMeasure limit_configuration(const FlockState& initial, const FlockConfig& cfg) {
    const FlockTrajectory trajectory = simulate(initial, cfg, 1 << 30);
    if (!trajectory.converged) {
        throw EvaluationError("limit_configuration: no convergence by t = " +
                              std::to_string(cfg.max_time) + " (dispersion " +
                              std::to_string(trajectory.final_dispersion) + ")");
    }
    const FlockState& last = trajectory.states.back();
    return DiscreteMeasure(last.positions, last.masses);
}

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

FlockState sample_initial_state(SeededRng& rng, const FlockScenario& scenario) {
    static constexpr double kCorners[4][2] = {{-4.0, 2.0}, {-4.0, -2.0}, {4.0, 2.0}, {4.0, -2.0}};
    const std::size_t groups = scenario.flock_sizes.size();
    if (groups < 2 || groups > 4) {
        throw InvalidInput("FlockScenario: need 2 to 4 groups");
    }
    std::size_t n = 0;
    for (std::size_t s : scenario.flock_sizes) {
        if (s == 0) throw InvalidInput("FlockScenario: empty group");
        n += s;
    }

    FlockState state{Tensor({n, 2}), Tensor({n, 2}), Tensor({n}), 0.0};
    std::size_t row = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        // One shared velocity per group from the quarter disk of radius 0.1
        // with v_x >= 0 and v_y <= 0 (rejection sampling).
        double vx = 0.0, vy = 0.0;
        do {
            vx = rng.uniform(0.0, 0.1);
            vy = rng.uniform(-0.1, 0.0);
        } while (vx * vx + vy * vy > 0.01);
        for (std::size_t i = 0; i < scenario.flock_sizes[g]; ++i, ++row) {
            state.positions.at(row, 0) = rng.normal(kCorners[g][0], 1.0);
            state.positions.at(row, 1) = rng.normal(kCorners[g][1], 1.0);
            state.velocities.at(row, 0) = vx;
            state.velocities.at(row, 1) = vy;
        }
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            state.masses[i] = std::max(0.0, rng.normal(0.5, 0.1));
            sum += state.masses[i];
        }
        if (sum > 0.0) {
            state.masses *= 1.0 / sum;
            return state;
        }
    }
    throw EvaluationError("sample_initial_state: all mass draws clipped to zero");
}

std::vector<FlockSample> generate_dataset(const SeededRng& rng,
                                          std::span<const FlockScenario> scenarios,
                                          const FlockConfig& cfg, int threads) {
    if (threads < 1) throw InvalidInput("generate_dataset: threads must be >= 1");
    std::vector<FlockSample> samples;
    samples.reserve(scenarios.size());

    const auto make_sample = [&](std::size_t index) {
        SeededRng local = rng.split(index);
        const FlockState initial = sample_initial_state(local, scenarios[index]);
        const std::size_t n = initial.count();

        Tensor phase({n, 4});
        for (std::size_t i = 0; i < n; ++i) {
            phase.at(i, 0) = initial.positions.at(i, 0);
            phase.at(i, 1) = initial.positions.at(i, 1);
            phase.at(i, 2) = initial.velocities.at(i, 0);
            phase.at(i, 3) = initial.velocities.at(i, 1);
        }
        DiscreteMeasure input(std::move(phase), initial.masses);

        const DiscreteMeasure limit = limit_configuration(initial, cfg);
        // The supervised target carries uniform weights on the limit support.
        DiscreteMeasure target = uniform_on(limit.points());
        return FlockSample{std::move(input), std::move(target)};
    };

    if (threads == 1 || scenarios.size() < 2) {
        for (std::size_t i = 0; i < scenarios.size(); ++i) samples.push_back(make_sample(i));
        return samples;
    }

    std::vector<std::optional<FlockSample>> slots(scenarios.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> cursor{0};
    const int workers = std::min<int>(threads, static_cast<int>(scenarios.size()));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= scenarios.size()) return;
                slots[i] = make_sample(i);
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& slot : slots) samples.push_back(std::move(*slot));
    return samples;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const FlockTrajectory& trajectory) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    if (trajectory.states.empty()) return;
    const std::size_t d = trajectory.states.front().dim();
    out << "t,id";
    for (std::size_t k = 0; k < d; ++k) out << ",p" << k;
    for (std::size_t k = 0; k < d; ++k) out << ",v" << k;
    out << ",mass\n";
    out.precision(17);
    for (const FlockState& s : trajectory.states) {
        for (std::size_t i = 0; i < s.count(); ++i) {
            out << s.time << ',' << i;
            for (std::size_t k = 0; k < d; ++k) out << ',' << s.positions.at(i, k);
            for (std::size_t k = 0; k < d; ++k) out << ',' << s.velocities.at(i, k);
            out << ',' << s.masses[i] << '\n';
        }
    }
}

void write_flock_dataset(const std::filesystem::path& path,
                         std::span<const FlockSample> samples) {
    std::vector<MeasureRecord> records;
    records.reserve(samples.size() * 2);
    for (const FlockSample& s : samples) {
        records.push_back({s.input, std::nullopt});
        records.push_back({s.target, std::nullopt});
    }
    write_measures_jsonl(path, records);
}

std::vector<FlockSample> read_flock_dataset(const std::filesystem::path& path) {
    const auto records = read_measures_jsonl(path);
    if (records.size() % 2 != 0) {
        throw InvalidInput(path.string() + ": expected paired input/target lines");
    }
    std::vector<FlockSample> samples;
    samples.reserve(records.size() / 2);
    for (std::size_t i = 0; i < records.size(); i += 2) {
        samples.push_back({records[i].measure, records[i + 1].measure});
    }
    return samples;
}

}  // namespace sdn
