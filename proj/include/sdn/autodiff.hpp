#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdn/tensor.hpp"

namespace sdn {

class Tape;

// Handle to a node on a tape. Valid only for the tape that produced it.
struct Var {
    int id = -1;
};

// Append-only reverse-mode tape. Values are computed eagerly as operations
// are recorded; backward() replays the recorded graph once in reverse and
// accumulates gradients additively at fan-out. A tape is single-owner: record
// and differentiate it from one thread.
class Tape {
public:
    Var constant(Tensor value);
    Var param(Tensor value);  // leaf tracked for gradients

    const Tensor& value(Var v) const { return node(v).value; }
    // Gradient of the backward root w.r.t. v; zeros if v never influenced it.
    const Tensor& grad(Var v);

    // --- elementwise ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var add_const(Var a, const Tensor& t);
    Var mul_const(Var a, const Tensor& t);
    Var relu(Var a);  // subgradient at 0 is 0
    Var exp(Var a);
    Var log(Var a);

    // --- linear algebra ---
    Var matmul(Var a, Var b);  // (n x k)(k x m)
    // y = x * w^T + b broadcast over rows; x: (N x in), w: (out x in), b: (out).
    // with_relu fuses the activation.
    Var linear(Var x, Var w, Var b, bool with_relu = false);

    // --- reductions (scalar results have shape {1}) ---
    Var sum(Var a);
    Var dot(Var a, Var b);
    Var norm2(Var a);  // sum of squares
    Var logsumexp(Var a);
    Var lse_rows(Var m);  // (n x m) -> (n)
    Var lse_cols(Var m);  // (n x m) -> (m)
    Var softmax(Var a);   // rank-1

    // --- structure ---
    Var concat(Var a, Var b);  // rank-1
    Var concat_cols(Var a, Var b);
    Var concat_cols_const(Var a, const Tensor& t);
    Var slice_cols(Var m, std::size_t begin, std::size_t end);
    Var replicate_row(Var row, std::size_t n);
    // (n x q) -> (n^order x order*q); row (i_1,...,i_k) in i_1-major order is
    // the concatenation [x_{i_1}; ...; x_{i_k}].
    Var tensor_rows(Var x, int order);
    Var take_rows(Var x, std::vector<std::size_t> rows);
    // (n*g x r) -> (n x r): out_i = sum_j w_j * row_{i*g+j}, |w| = g.
    Var group_avg_rows(Var f, std::vector<double> w);
    // (n x r) -> (1 x r): sum_j w_j * row_j.
    Var avg_rows(Var f, std::vector<double> w);
    Var weighted_sum(std::span<const Var> xs, std::span<const double> w);

    // --- broadcast over a matrix ---
    Var add_rowvec(Var m, Var v);  // v: (cols)
    Var add_colvec(Var m, Var v);  // v: (rows)

    // --- losses / transport ---
    // (n x d), (m x d) -> (n x m) with entries ||x_i - y_j||^p, p in {1,2}.
    Var pairwise_cost(Var x, Var y, int p);
    // scores: rank-1 or (1 x C); value = weight * (logsumexp(s) - s[label]).
    Var cross_entropy(Var scores, int label, double weight);

    // Reverse accumulation from a scalar root. One backward per tape.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_live = false;  // grad allocated and reached during backward
        std::function<void(Tape&, const Tensor&)> backprop;
    };

    const Node& node(Var v) const;
    Node& node(Var v);
    Var push(Tensor value, bool requires_grad,
             std::function<void(Tape&, const Tensor&)> backprop);
    void accum(Var target, const Tensor& contribution);
    // Adds `contribution` scaled into target without a temporary.
    Tensor& grad_buf(Var target);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Builds a scalar computation from parameter leaves; must be a pure function
// of the given parameters (randomness goes in as captured constants).
using TapeProgram = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    bool pass = false;
};

// Compares reverse-mode gradients of `program` against central differences.
// Relative error uses max(1, |ad|, |fd|) as denominator. When max_coords >= 0
// a random subset of coordinates is probed (seeded, reproducible). Inputs
// sitting exactly on a ReLU kink should be nudged by the caller.
GradCheckReport grad_check(const TapeProgram& program, const std::vector<Tensor>& params,
                           double h, double tol, int max_coords = -1,
                           std::uint64_t seed = 9);

}  // namespace sdn
