#include "sdn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace sdn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lse(std::span<const double> v) {
    double m = -kInf;
    for (double x : v) m = std::max(m, x);
    if (m == -kInf) return -kInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void check_cost_exponent(int p) {
    if (p != 1 && p != 2) throw InvalidInput("cost exponent p must be 1 or 2");
}

}  // namespace

void SinkhornConfig::validate() const {
    check_cost_exponent(p);
    if (max_iter < 1) throw InvalidInput("SinkhornConfig: max_iter must be >= 1");
    if (!(tol > 0.0)) throw InvalidInput("SinkhornConfig: tol must be positive");
    if (unroll_iters < 1) throw InvalidInput("SinkhornConfig: unroll_iters must be >= 1");
}

double SinkhornConfig::resolve_epsilon(const Tensor& cost) const {
    if (epsilon > 0.0) return epsilon;
    return 0.01 * cost.sum() / static_cast<double>(cost.size());
}

Tensor cost_matrix(const DiscreteMeasure& alpha, const DiscreteMeasure& beta, int p) {
    check_cost_exponent(p);
    if (alpha.dim() != beta.dim()) {
        throw InvalidInput("cost_matrix: ambient dimensions differ (" +
                           std::to_string(alpha.dim()) + " vs " + std::to_string(beta.dim()) + ")");
    }
    const std::size_t n = alpha.size(), m = beta.size(), d = alpha.dim();
    Tensor c({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = alpha.point(i);
        for (std::size_t j = 0; j < m; ++j) {
            const auto yj = beta.point(j);
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                sq += diff * diff;
            }
            c.at(i, j) = (p == 2) ? sq : std::sqrt(sq);
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Exact solver for uniform equal-size instances
// ---------------------------------------------------------------------------

namespace {

double assignment_min_cost_exhaustive(const Tensor& c) {
    const std::size_t n = c.rows();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += c.at(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Hungarian algorithm, shortest augmenting path formulation with potentials.
double assignment_min_cost_hungarian(const Tensor& c) {
    const int n = static_cast<int>(c.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j (1-based)
    std::vector<int> way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) total += c.at(match[j] - 1, j - 1);
    return total;
}

}  // namespace

double exact_wasserstein(const DiscreteMeasure& alpha, const DiscreteMeasure& beta, int p) {
    check_cost_exponent(p);
    if (alpha.size() != beta.size()) {
        throw UnsupportedInstance("exact_wasserstein: support sizes differ");
    }
    if (!alpha.is_uniform() || !beta.is_uniform()) {
        throw UnsupportedInstance("exact_wasserstein: weights must be uniform");
    }
    const std::size_t n = alpha.size();
    if (n > 64) throw UnsupportedInstance("exact_wasserstein: support size above 64");
    const Tensor c = cost_matrix(alpha, beta, p);
    const double total = (n <= 8) ? assignment_min_cost_exhaustive(c)
                                  : assignment_min_cost_hungarian(c);
    const double wpp = total / static_cast<double>(n);
    return (p == 2) ? std::sqrt(wpp) : wpp;
}

// ---------------------------------------------------------------------------
// Log-domain Sinkhorn
// ---------------------------------------------------------------------------

OtResult sinkhorn_cost(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                       const SinkhornConfig& cfg) {
    cfg.validate();
    // Zero-weight atoms would put -inf in the log weights; drop them and
    // restore zero rows/columns at the end.
    std::vector<std::size_t> ia, jb;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha.weight(i) > 0.0) ia.push_back(i);
    }
    for (std::size_t j = 0; j < beta.size(); ++j) {
        if (beta.weight(j) > 0.0) jb.push_back(j);
    }
    if (ia.empty() || jb.empty()) throw InvalidInput("sinkhorn_cost: all weights are zero");

    const std::size_t n = ia.size(), m = jb.size(), d = alpha.dim();
    if (d != beta.dim()) throw InvalidInput("sinkhorn_cost: dimension mismatch");

    Tensor c({n, m});
    std::vector<double> a(n), b(m), loga(n), logb(m);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = alpha.weight(ia[i]);
        loga[i] = std::log(a[i]);
    }
    for (std::size_t j = 0; j < m; ++j) {
        b[j] = beta.weight(jb[j]);
        logb[j] = std::log(b[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = alpha.point(ia[i]);
        for (std::size_t j = 0; j < m; ++j) {
            const auto yj = beta.point(jb[j]);
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                sq += diff * diff;
            }
            c.at(i, j) = (cfg.p == 2) ? sq : std::sqrt(sq);
        }
    }

    OtResult result;
    result.plan = Tensor({alpha.size(), beta.size()});

    const double eps = cfg.resolve_epsilon(c);
    if (!(eps > 0.0)) {
        // All costs are zero (coincident supports): every coupling costs 0.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                result.plan.at(ia[i], jb[j]) = a[i] * b[j];
            }
        }
        result.converged = true;
        return result;
    }

    std::vector<double> f(n, 0.0), g(m, 0.0), row(m), col(n);
    Tensor logplan({n, m});
    const auto compute_plan = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                logplan.at(i, j) = (f[i] + g[j] - c.at(i, j)) / eps + loga[i] + logb[j];
            }
        }
    };

    int iter = 0;
    bool converged = false;
    for (; iter < cfg.max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) row[j] = (g[j] - c.at(i, j)) / eps + logb[j];
            f[i] = -eps * lse(row);
        }
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) col[i] = (f[i] - c.at(i, j)) / eps + loga[i];
            g[j] = -eps * lse(col);
        }
        // After the g-update column marginals are exact; track the row
        // violation of the current plan.
        compute_plan();
        double row_violation = 0.0, col_violation = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += std::exp(logplan.at(i, j));
            row_violation += std::abs(s - a[i]);
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += std::exp(logplan.at(i, j));
            col_violation += std::abs(s - b[j]);
        }
        if (row_violation < cfg.tol && col_violation < cfg.tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    compute_plan();
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double pij = std::exp(logplan.at(i, j));
            result.plan.at(ia[i], jb[j]) = pij;
            cost += pij * c.at(i, j);
        }
    }
    result.cost = cost;
    result.iterations = iter;
    result.converged = converged;
    return result;
}

double sinkhorn_divergence(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                           const SinkhornConfig& cfg) {
    cfg.validate();
    SinkhornConfig shared = cfg;
    if (shared.epsilon <= 0.0) {
        shared.epsilon = cfg.resolve_epsilon(cost_matrix(alpha, beta, cfg.p));
        if (!(shared.epsilon > 0.0)) return 0.0;  // coincident Diracs
    }
    const double cross = sinkhorn_cost(alpha, beta, shared).cost;
    const double self_a = sinkhorn_cost(alpha, alpha, shared).cost;
    const double self_b = sinkhorn_cost(beta, beta, shared).cost;
    return cross - 0.5 * (self_a + self_b);
}

// ---------------------------------------------------------------------------
// Exact W1 for general weighted measures (min-cost flow)
// ---------------------------------------------------------------------------

double w1_between_laws(const DiscreteMeasure& alpha, const DiscreteMeasure& beta) {
    const std::size_t n = alpha.size(), m = beta.size();
    if (n * m > 10'000) {
        throw ResourceLimit("w1_between_laws: instance size " + std::to_string(n * m) +
                            " exceeds 10^4");
    }
    const Tensor c = cost_matrix(alpha, beta, 1);

    std::vector<double> supply(alpha.weights().values());
    std::vector<double> demand(beta.weights().values());
    std::vector<double> flow(n * m, 0.0);
    std::vector<double> pot_src(n, 0.0), pot_dst(m, 0.0);

    // Successive shortest augmenting paths on the residual bipartite graph.
    // Forward arcs i->j are uncapacitated; backward arcs j->i carry flow_ij.
    // Potentials keep reduced costs nonnegative so plain Dijkstra applies.
    const double mass_tol = 1e-14;
    const std::size_t max_phases = 4 * (n + m) * (n + m) + 64;
    double cost = 0.0;
    for (std::size_t phase = 0; phase < max_phases; ++phase) {
        double remaining = 0.0;
        for (double s : supply) remaining += std::max(0.0, s);
        if (remaining <= mass_tol) break;

        // Dijkstra over n sources + m sinks, multi-source from positive supply.
        const std::size_t total = n + m;
        std::vector<double> dist(total, kInf);
        std::vector<int> prev(total, -1);  // previous node on the shortest path
        std::vector<char> done(total, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (supply[i] > mass_tol) dist[i] = 0.0;
        }
        for (std::size_t it = 0; it < total; ++it) {
            std::size_t best = total;
            double bd = kInf;
            for (std::size_t v = 0; v < total; ++v) {
                if (!done[v] && dist[v] < bd) {
                    bd = dist[v];
                    best = v;
                }
            }
            if (best == total) break;
            done[best] = 1;
            if (best < n) {
                const std::size_t i = best;
                for (std::size_t j = 0; j < m; ++j) {
                    const double rc = std::max(0.0, c.at(i, j) - pot_src[i] + pot_dst[j]);
                    if (dist[i] + rc < dist[n + j] - 1e-18) {
                        dist[n + j] = dist[i] + rc;
                        prev[n + j] = static_cast<int>(i);
                    }
                }
            } else {
                const std::size_t j = best - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (flow[i * m + j] <= mass_tol) continue;
                    const double rc = std::max(0.0, -c.at(i, j) + pot_src[i] - pot_dst[j]);
                    if (dist[n + j] + rc < dist[i] - 1e-18) {
                        dist[i] = dist[n + j] + rc;
                        prev[i] = static_cast<int>(n + j);
                    }
                }
            }
        }

        // Closest sink with residual demand.
        std::size_t sink = total;
        double sink_dist = kInf;
        for (std::size_t j = 0; j < m; ++j) {
            if (demand[j] > mass_tol && dist[n + j] < sink_dist) {
                sink_dist = dist[n + j];
                sink = n + j;
            }
        }
        if (sink == total) break;  // numerically exhausted

        // Bottleneck along the path: backward arcs cap at their flow, the
        // endpoints cap at remaining supply and demand.
        double delta = demand[sink - n];
        for (std::size_t v = sink; prev[v] >= 0; v = static_cast<std::size_t>(prev[v])) {
            const std::size_t u = static_cast<std::size_t>(prev[v]);
            if (u >= n) delta = std::min(delta, flow[v * m + (u - n)]);  // backward arc
        }
        {
            std::size_t v = sink;
            while (prev[v] >= 0) v = static_cast<std::size_t>(prev[v]);
            delta = std::min(delta, supply[v]);
        }
        if (delta <= mass_tol) break;

        for (std::size_t v = sink; prev[v] >= 0; v = static_cast<std::size_t>(prev[v])) {
            const std::size_t u = static_cast<std::size_t>(prev[v]);
            if (u < n) {
                flow[u * m + (v - n)] += delta;  // forward arc u -> v
            } else {
                flow[v * m + (u - n)] -= delta;  // backward arc over (v, u-n)
            }
        }
        {
            std::size_t v = sink;
            while (prev[v] >= 0) v = static_cast<std::size_t>(prev[v]);
            supply[v] -= delta;
        }
        demand[sink - n] -= delta;

        // Potential update pi(v) += min(d(v), d(sink)) keeps reduced costs
        // nonnegative; pot_* store -pi, hence the subtraction.
        for (std::size_t v = 0; v < total; ++v) {
            if (dist[v] == kInf) continue;
            const double adj = std::min(dist[v], sink_dist);
            if (v < n) {
                pot_src[v] -= adj;
            } else {
                pot_dst[v - n] -= adj;
            }
        }
    }

    double unrouted = 0.0;
    for (double s : supply) unrouted += std::max(0.0, s);
    if (unrouted > 1e-9) {
        throw EvaluationError("w1_between_laws: failed to route all mass (" +
                              std::to_string(unrouted) + " left)");
    }
    cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) cost += flow[i * m + j] * c.at(i, j);
    }
    return cost;
}

}  // namespace sdn
