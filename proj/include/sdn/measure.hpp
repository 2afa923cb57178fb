#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sdn/tensor.hpp"

namespace sdn {

// Discrete probability measure: n weighted points in R^d. Weights are
// nonnegative and sum to 1; atoms may repeat (padding splits weight across
// duplicate coordinates, which downstream code must preserve).
class DiscreteMeasure {
public:
    // points: n x d, weights: length n. Throws InvalidInput on negative
    // weights or a weight sum off by more than 1e-9.
    DiscreteMeasure(Tensor points, Tensor weights);

    static DiscreteMeasure dirac(std::vector<double> point);

    std::size_t size() const { return points_.rows(); }
    std::size_t dim() const { return points_.cols(); }

    const Tensor& points() const { return points_; }
    const Tensor& weights() const { return weights_; }

    std::span<const double> point(std::size_t i) const;
    double weight(std::size_t i) const { return weights_[i]; }

    bool is_uniform(double tol = 1e-12) const;

private:
    Tensor points_;   // n x d
    Tensor weights_;  // n
};

// Uniform measure (weights 1/n) on the given support points.
DiscreteMeasure uniform_on(Tensor points);
DiscreteMeasure uniform_on(const std::vector<std::vector<double>>& points);
DiscreteMeasure uniform_on(std::initializer_list<std::initializer_list<double>> points);

using PointMap = std::function<std::vector<double>(std::span<const double>)>;

// Push-forward h#mu: atoms mapped through h, weights unchanged.
DiscreteMeasure push_forward(const PointMap& h, const DiscreteMeasure& mu);

// Product measure on R^{p+q}: nm atoms (x_i, y_j) enumerated i-major with
// weights w_i * v_j.
DiscreteMeasure tensor_product(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// n-fold product of mu with itself. Throws ResourceLimit when the support
// size would exceed `cap` atoms.
DiscreteMeasure self_tensorize(const DiscreteMeasure& mu, int order,
                               std::size_t cap = 1'000'000);

// Uniform grid on the unit cube [0,1]^q with k nodes per axis, k >= 2.
// Nodes are enumerated row-major in axis order (last axis fastest) with
// spacing h = 1/(k-1).
class GridSpec {
public:
    GridSpec(std::size_t dim, std::size_t points_per_axis);

    std::size_t dim() const { return dim_; }
    std::size_t points_per_axis() const { return k_; }
    std::size_t node_count() const { return node_count_; }
    double spacing() const { return spacing_; }

    std::vector<double> node(std::size_t index) const;
    // All nodes as an n x q matrix in enumeration order.
    Tensor nodes() const;

private:
    std::size_t dim_;
    std::size_t k_;
    std::size_t node_count_;
    double spacing_;
};

// P1 hat-function basis evaluated at x in [0,1]^q:
// phi_i(x) = prod_d max(0, 1 - |x_d - node_{i,d}| / h). Partition of unity.
// Points within 1e-9 of the cube are clamped; anything further is a
// DomainError.
Tensor p1_basis_eval(const GridSpec& grid, std::span<const double> x);

// Moments of mu against the hat basis: a_i = sum_k w_k phi_i(x_k). The
// result lies on the probability simplex.
Tensor discretize_p1(const DiscreteMeasure& mu, const GridSpec& grid);

// Measure with atoms at the grid nodes weighted by `a` (renormalized within
// 1e-9; components below -1e-9 are an InvalidInput).
DiscreteMeasure reconstruct(const Tensor& a, const GridSpec& grid);

// Atom order obtained by sorting lexicographically on coordinates, then
// weight, then original index. Canonical order for noise assignment and for
// comparing measures regardless of atom storage order.
std::vector<std::size_t> sorted_atom_order(const DiscreteMeasure& mu);

// True when the two measures have the same atoms and weights up to `tol`
// after canonical sorting.
bool measures_close(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol);

}  // namespace sdn
