#include <cmath>
#include <vector>

#include "sdn/transport.hpp"

namespace sdn {

namespace {

struct SlicedSide {
    Var points;
    std::vector<double> weights;
};

// Drop zero-weight atoms; weights are constants so the slice is host-side.
SlicedSide slice_positive(Tape& tape, Var points, const Tensor& weights) {
    if (weights.rank() != 1 || weights.size() != tape.value(points).rows()) {
        throw InvalidInput("sinkhorn tape: weight vector does not match points");
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) keep.push_back(i);
    }
    if (keep.empty()) throw InvalidInput("sinkhorn tape: all weights are zero");
    SlicedSide side;
    if (keep.size() == weights.size()) {
        side.points = points;
        side.weights = weights.values();
    } else {
        side.weights.reserve(keep.size());
        for (std::size_t i : keep) side.weights.push_back(weights[i]);
        side.points = tape.take_rows(points, std::move(keep));
    }
    return side;
}

Tensor log_tensor(const std::vector<double>& w) {
    Tensor t({w.size()});
    for (std::size_t i = 0; i < w.size(); ++i) t[i] = std::log(w[i]);
    return t;
}

Var unrolled_cost(Tape& tape, const SlicedSide& a, const SlicedSide& b, double eps,
                  const SinkhornConfig& cfg) {
    const std::size_t n = a.weights.size(), m = b.weights.size();
    const Tensor loga = log_tensor(a.weights);
    const Tensor logb = log_tensor(b.weights);

    Var cost = tape.pairwise_cost(a.points, b.points, cfg.p);
    Var cost_over_eps = tape.scale(cost, -1.0 / eps);

    Var f = tape.constant(Tensor({n}));
    Var g = tape.constant(Tensor({m}));
    for (int it = 0; it < cfg.unroll_iters; ++it) {
        Var gb = tape.add_const(tape.scale(g, 1.0 / eps), logb);
        f = tape.scale(tape.lse_rows(tape.add_rowvec(cost_over_eps, gb)), -eps);
        Var fa = tape.add_const(tape.scale(f, 1.0 / eps), loga);
        g = tape.scale(tape.lse_cols(tape.add_colvec(cost_over_eps, fa)), -eps);
    }
    // log pi_ij = (f_i + g_j - C_ij)/eps + log a_i + log b_j
    Var logplan = tape.add_colvec(
        tape.add_rowvec(cost_over_eps, tape.add_const(tape.scale(g, 1.0 / eps), logb)),
        tape.add_const(tape.scale(f, 1.0 / eps), loga));
    return tape.dot(tape.exp(logplan), cost);
}

double resolve_eps_from_values(Tape& tape, const SlicedSide& a, const SlicedSide& b,
                               const SinkhornConfig& cfg) {
    if (cfg.epsilon > 0.0) return cfg.epsilon;
    const Tensor& xa = tape.value(a.points);
    const Tensor& xb = tape.value(b.points);
    const std::size_t d = xa.cols();
    double mean = 0.0;
    for (std::size_t i = 0; i < xa.rows(); ++i) {
        for (std::size_t j = 0; j < xb.rows(); ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = xa.at(i, k) - xb.at(j, k);
                sq += diff * diff;
            }
            mean += cfg.p == 2 ? sq : std::sqrt(sq);
        }
    }
    mean /= static_cast<double>(xa.rows() * xb.rows());
    return 0.01 * mean;
}

}  // namespace

Var sinkhorn_cost_tape(Tape& tape, Var x_points, const Tensor& x_weights, Var y_points,
                       const Tensor& y_weights, const SinkhornConfig& cfg) {
    cfg.validate();
    const SlicedSide a = slice_positive(tape, x_points, x_weights);
    const SlicedSide b = slice_positive(tape, y_points, y_weights);
    const double eps = resolve_eps_from_values(tape, a, b, cfg);
    if (!(eps > 0.0)) {
        // Coincident supports: every coupling costs zero and the gradient of
        // the cost w.r.t. positions is zero at the optimum.
        return tape.constant(Tensor({1}));
    }
    return unrolled_cost(tape, a, b, eps, cfg);
}

Var sinkhorn_divergence_tape(Tape& tape, Var x_points, const Tensor& x_weights, Var y_points,
                             const Tensor& y_weights, const SinkhornConfig& cfg) {
    cfg.validate();
    const SlicedSide a = slice_positive(tape, x_points, x_weights);
    const SlicedSide b = slice_positive(tape, y_points, y_weights);
    const double eps = resolve_eps_from_values(tape, a, b, cfg);
    if (!(eps > 0.0)) return tape.constant(Tensor({1}));
    Var cross = unrolled_cost(tape, a, b, eps, cfg);
    Var self_a = unrolled_cost(tape, a, a, eps, cfg);
    Var self_b = unrolled_cost(tape, b, b, eps, cfg);
    return tape.sub(cross, tape.scale(tape.add(self_a, self_b), 0.5));
}

}  // namespace sdn
