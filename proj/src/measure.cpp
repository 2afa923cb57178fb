#include "sdn/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sdn {

namespace {

void check_weights(const Tensor& weights) {
    if (weights.rank() != 1) throw InvalidInput("measure weights must be rank-1");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) {
            throw InvalidInput("measure weight " + std::to_string(i) + " is negative");
        }
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidInput("measure weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Tensor points, Tensor weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rank() != 2) throw InvalidInput("measure points must be an n x d matrix");
    if (weights_.size() != points_.rows()) {
        throw InvalidInput("measure has " + std::to_string(points_.rows()) + " points but " +
                           std::to_string(weights_.size()) + " weights");
    }
    points_.ensure_finite("measure points");
    check_weights(weights_);
}

DiscreteMeasure DiscreteMeasure::dirac(std::vector<double> point) {
    const std::size_t d = point.size();
    return DiscreteMeasure(Tensor({1, d}, std::move(point)), Tensor::vector({1.0}));
}

std::span<const double> DiscreteMeasure::point(std::size_t i) const {
    return {points_.data() + i * dim(), dim()};
}

bool DiscreteMeasure::is_uniform(double tol) const {
    const double expected = 1.0 / static_cast<double>(size());
    for (std::size_t i = 0; i < size(); ++i) {
        if (std::abs(weights_[i] - expected) > tol) return false;
    }
    return true;
}

DiscreteMeasure uniform_on(Tensor points) {
    if (points.rank() != 2) throw InvalidInput("uniform_on: points must be an n x d matrix");
    const std::size_t n = points.rows();
    return DiscreteMeasure(std::move(points), Tensor::full({n}, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure uniform_on(std::initializer_list<std::initializer_list<double>> points) {
    std::vector<std::vector<double>> rows;
    rows.reserve(points.size());
    for (const auto& p : points) rows.emplace_back(p);
    return uniform_on(rows);
}

DiscreteMeasure uniform_on(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw InvalidInput("uniform_on: empty point list");
    const std::size_t d = points.front().size();
    std::vector<double> flat;
    flat.reserve(points.size() * d);
    for (const auto& p : points) {
        if (p.size() != d) throw InvalidInput("uniform_on: ragged point list");
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return uniform_on(Tensor({points.size(), d}, std::move(flat)));
}

DiscreteMeasure push_forward(const PointMap& h, const DiscreteMeasure& mu) {
    std::vector<double> flat;
    std::size_t out_dim = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        std::vector<double> y = h(mu.point(i));
        if (i == 0) {
            out_dim = y.size();
            if (out_dim == 0) throw EvaluationError("push_forward: map produced an empty point");
            flat.reserve(mu.size() * out_dim);
        } else if (y.size() != out_dim) {
            throw EvaluationError("push_forward: map output dimension varies across atoms");
        }
        for (double v : y) {
            if (!std::isfinite(v)) {
                throw EvaluationError("push_forward: non-finite output at atom " +
                                      std::to_string(i));
            }
        }
        flat.insert(flat.end(), y.begin(), y.end());
    }
    return DiscreteMeasure(Tensor({mu.size(), out_dim}, std::move(flat)), mu.weights());
}

DiscreteMeasure tensor_product(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const std::size_t n = mu.size(), m = nu.size();
    const std::size_t p = mu.dim(), q = nu.dim();
    Tensor points({n * m, p + q});
    Tensor weights({n * m});
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = mu.point(i);
        for (std::size_t j = 0; j < m; ++j) {
            const auto yj = nu.point(j);
            double* row = points.data() + (i * m + j) * (p + q);
            std::copy(xi.begin(), xi.end(), row);
            std::copy(yj.begin(), yj.end(), row + p);
            weights[i * m + j] = mu.weight(i) * nu.weight(j);
        }
    }
    return DiscreteMeasure(std::move(points), std::move(weights));
}

DiscreteMeasure self_tensorize(const DiscreteMeasure& mu, int order, std::size_t cap) {
    if (order < 1) throw InvalidInput("self_tensorize: order must be >= 1");
    double atoms = 1.0;
    for (int k = 0; k < order; ++k) {
        atoms *= static_cast<double>(mu.size());
        if (atoms > static_cast<double>(cap)) {
            throw ResourceLimit("self_tensorize: " + std::to_string(mu.size()) + "^" +
                                std::to_string(order) + " atoms exceed cap " +
                                std::to_string(cap));
        }
    }
    DiscreteMeasure out = mu;
    for (int k = 1; k < order; ++k) out = tensor_product(out, mu);
    return out;
}

GridSpec::GridSpec(std::size_t dim, std::size_t points_per_axis)
    : dim_(dim), k_(points_per_axis) {
    if (dim_ == 0) throw InvalidInput("GridSpec: dimension must be positive");
    if (k_ < 2) throw InvalidInput("GridSpec: need at least 2 points per axis");
    node_count_ = 1;
    for (std::size_t d = 0; d < dim_; ++d) {
        if (node_count_ > 2'000'000 / k_) throw ResourceLimit("GridSpec: too many nodes");
        node_count_ *= k_;
    }
    spacing_ = 1.0 / static_cast<double>(k_ - 1);
}

std::vector<double> GridSpec::node(std::size_t index) const {
    if (index >= node_count_) throw InvalidInput("GridSpec: node index out of range");
    std::vector<double> x(dim_);
    for (std::size_t d = dim_; d-- > 0;) {
        x[d] = static_cast<double>(index % k_) * spacing_;
        index /= k_;
    }
    return x;
}

Tensor GridSpec::nodes() const {
    Tensor out({node_count_, dim_});
    for (std::size_t i = 0; i < node_count_; ++i) {
        const auto x = node(i);
        std::copy(x.begin(), x.end(), out.data() + i * dim_);
    }
    return out;
}

Tensor p1_basis_eval(const GridSpec& grid, std::span<const double> x) {
    if (x.size() != grid.dim()) throw InvalidInput("p1_basis_eval: dimension mismatch");
    std::vector<double> clamped(x.begin(), x.end());
    for (std::size_t d = 0; d < clamped.size(); ++d) {
        if (clamped[d] < -1e-9 || clamped[d] > 1.0 + 1e-9) {
            throw DomainError("p1_basis_eval: coordinate " + std::to_string(d) +
                              " = " + std::to_string(clamped[d]) + " outside [0,1]");
        }
        clamped[d] = std::clamp(clamped[d], 0.0, 1.0);
    }
    const double h = grid.spacing();
    const std::size_t k = grid.points_per_axis();
    // Per-axis hat values; the tensor-product basis value at node
    // (i_0,...,i_{q-1}) is the product of axis factors.
    std::vector<std::vector<double>> axis(grid.dim(), std::vector<double>(k));
    for (std::size_t d = 0; d < grid.dim(); ++d) {
        for (std::size_t i = 0; i < k; ++i) {
            const double node = static_cast<double>(i) * h;
            axis[d][i] = std::max(0.0, 1.0 - std::abs(clamped[d] - node) / h);
        }
    }
    Tensor out({grid.node_count()});
    for (std::size_t idx = 0; idx < grid.node_count(); ++idx) {
        double v = 1.0;
        std::size_t rest = idx;
        for (std::size_t d = grid.dim(); d-- > 0;) {
            v *= axis[d][rest % k];
            rest /= k;
            if (v == 0.0) break;
        }
        out[idx] = v;
    }
    return out;
}

Tensor discretize_p1(const DiscreteMeasure& mu, const GridSpec& grid) {
    if (mu.dim() != grid.dim()) throw InvalidInput("discretize_p1: dimension mismatch");
    Tensor a({grid.node_count()});
    for (std::size_t kk = 0; kk < mu.size(); ++kk) {
        Tensor phi;
        try {
            phi = p1_basis_eval(grid, mu.point(kk));
        } catch (const DomainError&) {
            throw DomainError("discretize_p1: support point " + std::to_string(kk) +
                              " outside the unit cube");
        }
        const double w = mu.weight(kk);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += w * phi[i];
    }
    return a;
}

DiscreteMeasure reconstruct(const Tensor& a, const GridSpec& grid) {
    if (a.rank() != 1 || a.size() != grid.node_count()) {
        throw InvalidInput("reconstruct: coefficient vector does not match grid");
    }
    Tensor w = a;
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] < -1e-9) {
            throw InvalidInput("reconstruct: component " + std::to_string(i) + " is negative");
        }
        w[i] = std::max(0.0, w[i]);
        sum += w[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidInput("reconstruct: coefficients sum to " + std::to_string(sum));
    }
    w *= 1.0 / sum;
    return DiscreteMeasure(grid.nodes(), std::move(w));
}

std::vector<std::size_t> sorted_atom_order(const DiscreteMeasure& mu) {
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto pa = mu.point(a), pb = mu.point(b);
        for (std::size_t d = 0; d < pa.size(); ++d) {
            if (pa[d] != pb[d]) return pa[d] < pb[d];
        }
        if (mu.weight(a) != mu.weight(b)) return mu.weight(a) < mu.weight(b);
        return a < b;
    });
    return order;
}

bool measures_close(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol) {
    if (a.size() != b.size() || a.dim() != b.dim()) return false;
    const auto oa = sorted_atom_order(a);
    const auto ob = sorted_atom_order(b);
    for (std::size_t i = 0; i < oa.size(); ++i) {
        const auto pa = a.point(oa[i]), pb = b.point(ob[i]);
        for (std::size_t d = 0; d < pa.size(); ++d) {
            if (std::abs(pa[d] - pb[d]) > tol) return false;
        }
        if (std::abs(a.weight(oa[i]) - b.weight(ob[i])) > tol) return false;
    }
    return true;
}

}  // namespace sdn
