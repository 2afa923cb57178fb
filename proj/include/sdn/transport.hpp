#pragma once

#include "sdn/autodiff.hpp"
#include "sdn/measure.hpp"
#include "sdn/tensor.hpp"

namespace sdn {

struct SinkhornConfig {
    // Entropic regularization in the units of the cost matrix. Non-positive
    // means scale-aware: 0.01 * mean(C), resolved per call.
    double epsilon = -1.0;
    int p = 2;  // cost exponent, 1 or 2
    int max_iter = 500;
    double tol = 1e-6;       // L1 marginal violation threshold
    int unroll_iters = 50;   // fixed iteration count on the differentiable path

    void validate() const;
    double resolve_epsilon(const Tensor& cost) const;
};

struct OtResult {
    double cost = 0.0;  // <plan, C>, an estimate of W_p^p
    Tensor plan;        // n x m, nonnegative
    int iterations = 0;
    bool converged = false;
};

// C_ij = ||x_i - y_j||_2^p.
Tensor cost_matrix(const DiscreteMeasure& alpha, const DiscreteMeasure& beta, int p);

// Exact W_p for uniform measures of equal support size n <= 64: exhaustive
// permutation search for n <= 8, Hungarian assignment above. Returns W_p
// (the p-th root of the optimal mean cost).
double exact_wasserstein(const DiscreteMeasure& alpha, const DiscreteMeasure& beta, int p);

// Entropic OT cost via log-domain Sinkhorn iterations. Zero-weight atoms are
// dropped up front and restored as zero rows/columns of the plan.
// Non-convergence within max_iter yields converged=false, not an exception.
OtResult sinkhorn_cost(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                       const SinkhornConfig& cfg);

// Debiased divergence S(a,b) = OT(a,b) - (OT(a,a) + OT(b,b)) / 2, with the
// auto epsilon resolved once from the cross cost matrix and shared by all
// three terms.
double sinkhorn_divergence(const DiscreteMeasure& alpha, const DiscreteMeasure& beta,
                           const SinkhornConfig& cfg);

// Exact W1 between general weighted discrete measures, solved as an
// uncapacitated transportation problem by successive shortest augmenting
// paths with node potentials. Instances with n*m > 10^4 are refused.
double w1_between_laws(const DiscreteMeasure& alpha, const DiscreteMeasure& beta);

// --- differentiable path -----------------------------------------------
// Fixed-unroll Sinkhorn recorded on a tape: cfg.unroll_iters iterations are
// always taken regardless of convergence, so the gradient is a deterministic
// function of the inputs. Weights are constants under differentiation;
// zero-weight atoms are sliced away. cfg.epsilon <= 0 resolves the
// scale-aware default from the current cross cost values.
Var sinkhorn_cost_tape(Tape& tape, Var x_points, const Tensor& x_weights, Var y_points,
                       const Tensor& y_weights, const SinkhornConfig& cfg);

// Debiased divergence on the tape; the epsilon resolved from the cross term
// is shared by the two self terms.
Var sinkhorn_divergence_tape(Tape& tape, Var x_points, const Tensor& x_weights, Var y_points,
                             const Tensor& y_weights, const SinkhornConfig& cfg);

}  // namespace sdn
