#pragma once

// Test-only oracles, kept independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sdn/measure.hpp"
#include "sdn/rng.hpp"

namespace sdn::testing {

// Exact W1 between 1-D discrete measures as the integral of |F_alpha - F_beta|
// over the merged support breakpoints.
inline double w1_1d_cdf(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    struct Atom {
        double x;
        double da;  // CDF jump of alpha minus jump of beta
    };
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < a.size(); ++i) atoms.push_back({a.point(i)[0], a.weight(i)});
    for (std::size_t j = 0; j < b.size(); ++j) atoms.push_back({b.point(j)[0], -b.weight(j)});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& u, const Atom& v) { return u.x < v.x; });
    double total = 0.0, diff = 0.0;
    for (std::size_t k = 0; k + 1 < atoms.size(); ++k) {
        diff += atoms[k].da;
        total += std::abs(diff) * (atoms[k + 1].x - atoms[k].x);
    }
    return total;
}

// Direct double loop over the discrete definition y_i = sum_j w_j f(x_i, x_j).
template <typename PairFn>
inline std::vector<std::vector<double>> block_double_loop(const DiscreteMeasure& mu,
                                                          PairFn&& f) {
    std::vector<std::vector<double>> out(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < mu.size(); ++j) {
            auto y = f(mu.point(i), mu.point(j));
            if (out[i].empty()) out[i].assign(y.size(), 0.0);
            for (std::size_t k = 0; k < y.size(); ++k) out[i][k] += mu.weight(j) * y[k];
        }
    }
    return out;
}

// Random measure with positive weights summing to 1.
inline DiscreteMeasure random_measure(SeededRng& rng, std::size_t n, std::size_t d,
                                      double lo = 0.0, double hi = 1.0) {
    Tensor pts = rng.uniform_tensor({n, d}, lo, hi);
    Tensor w({n});
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.05 + rng.uniform(0.0, 1.0);
        sum += w[i];
    }
    w *= 1.0 / sum;
    return DiscreteMeasure(std::move(pts), std::move(w));
}

inline DiscreteMeasure random_uniform_measure(SeededRng& rng, std::size_t n, std::size_t d,
                                              double lo = 0.0, double hi = 1.0) {
    return uniform_on(rng.uniform_tensor({n, d}, lo, hi));
}

}  // namespace sdn::testing
