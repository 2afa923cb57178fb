#include "sdn/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdn {

LinearLayer xavier_linear(SeededRng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return LinearLayer{rng.uniform_tensor({fan_out, fan_in}, -limit, limit),
                       Tensor({fan_out})};
}

// ---------------------------------------------------------------------------
// InteractionMap
// ---------------------------------------------------------------------------

InteractionMap::InteractionMap(Dependence dep, std::size_t point_dim,
                               std::vector<std::size_t> hidden, std::size_t out_dim,
                               OutputActivation out_activation, SeededRng& rng)
    : dep_(dep), point_dim_(point_dim), out_activation_(out_activation) {
    if (point_dim == 0 || out_dim == 0) throw InvalidInput("InteractionMap: zero width");
    std::vector<std::size_t> widths;
    widths.push_back(dep == Dependence::Both ? 2 * point_dim : point_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out_dim);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        layers_.push_back(xavier_linear(rng, widths[l], widths[l + 1]));
    }
}

InteractionMap::InteractionMap(Dependence dep, std::size_t point_dim,
                               std::vector<LinearLayer> layers,
                               OutputActivation out_activation)
    : dep_(dep), point_dim_(point_dim), layers_(std::move(layers)),
      out_activation_(out_activation) {
    if (layers_.empty()) throw InvalidInput("InteractionMap: needs at least one layer");
    const std::size_t expected = dep == Dependence::Both ? 2 * point_dim : point_dim;
    std::size_t width = expected;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].weight.cols() != width ||
            layers_[l].bias.size() != layers_[l].weight.rows()) {
            throw InvalidInput("InteractionMap: layer " + std::to_string(l) +
                               " has incompatible widths");
        }
        width = layers_[l].weight.rows();
    }
}

std::vector<double> InteractionMap::eval(std::span<const double> x,
                                         std::span<const double> x_prime) const {
    if (x.size() != point_dim_ || x_prime.size() != point_dim_) {
        throw InvalidInput("InteractionMap: argument dimension mismatch");
    }
    std::vector<double> v;
    switch (dep_) {
        case Dependence::Both:
            v.reserve(2 * point_dim_);
            v.assign(x.begin(), x.end());
            v.insert(v.end(), x_prime.begin(), x_prime.end());
            break;
        case Dependence::FirstOnly:
            v.assign(x.begin(), x.end());
            break;
        case Dependence::SecondOnly:
            v.assign(x_prime.begin(), x_prime.end());
            break;
    }
    std::vector<double> next;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Tensor& w = layers_[l].weight;
        const Tensor& b = layers_[l].bias;
        const bool act = (l + 1 < layers_.size()) || out_activation_ == OutputActivation::Relu;
        next.assign(w.rows(), 0.0);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            double acc = b[o];
            const double* wo = w.data() + o * w.cols();
            for (std::size_t i = 0; i < w.cols(); ++i) acc += wo[i] * v[i];
            next[o] = act ? std::max(0.0, acc) : acc;
        }
        v.swap(next);
    }
    return v;
}

double spectral_norm(const Tensor& matrix) {
    if (matrix.rank() != 2) throw InvalidInput("spectral_norm: rank-2 tensor required");
    const std::size_t n = matrix.rows(), m = matrix.cols();
    // One-sided Jacobi on the columns of a working copy.
    std::vector<std::vector<double>> col(m, std::vector<double>(n));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[j][i] = matrix.at(i, j);
    }
    const auto dot = [&](std::size_t p, std::size_t q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += col[p][i] * col[q][i];
        return s;
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const double app = dot(p, p), aqq = dot(q, q), apq = dot(p, q);
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = col[p][i], vq = col[q][i];
                    col[p][i] = c * vp - s * vq;
                    col[q][i] = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    double best = 0.0;
    for (std::size_t j = 0; j < m; ++j) best = std::max(best, std::sqrt(dot(j, j)));
    return best;
}

namespace {

// Spectral norm of the column block [begin, end) of `matrix`.
double block_spectral_norm(const Tensor& matrix, std::size_t begin, std::size_t end) {
    Tensor sub({matrix.rows(), end - begin});
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        for (std::size_t j = begin; j < end; ++j) sub.at(i, j - begin) = matrix.at(i, j);
    }
    return spectral_norm(sub);
}

}  // namespace

double InteractionMap::lipschitz_bound_first() const {
    if (dep_ == Dependence::SecondOnly) return 0.0;
    double bound = (dep_ == Dependence::Both)
                       ? block_spectral_norm(layers_.front().weight, 0, point_dim_)
                       : spectral_norm(layers_.front().weight);
    for (std::size_t l = 1; l < layers_.size(); ++l) bound *= spectral_norm(layers_[l].weight);
    return bound;
}

double InteractionMap::lipschitz_bound_second() const {
    if (dep_ == Dependence::FirstOnly) return 0.0;
    double bound = (dep_ == Dependence::Both)
                       ? block_spectral_norm(layers_.front().weight, point_dim_, 2 * point_dim_)
                       : spectral_norm(layers_.front().weight);
    for (std::size_t l = 1; l < layers_.size(); ++l) bound *= spectral_norm(layers_[l].weight);
    return bound;
}

PairwiseMap as_pairwise(const InteractionMap& f) {
    return PairwiseMap{f.dependence(), f.point_dim(), f.out_dim(),
                       [f](std::span<const double> x, std::span<const double> xp) {
                           return f.eval(x, xp);
                       }};
}

// ---------------------------------------------------------------------------
// elementary block
// ---------------------------------------------------------------------------

DiscreteMeasure elementary_block_apply(const DiscreteMeasure& mu, const PairwiseMap& f,
                                       double locality_radius) {
    if (f.in_dim != 0 && f.in_dim != mu.dim()) {
        throw InvalidInput("elementary_block_apply: measure dimension " +
                           std::to_string(mu.dim()) + " does not match map input " +
                           std::to_string(f.in_dim));
    }
    const std::size_t n = mu.size();
    const bool cutoff = locality_radius > 0.0;

    if (f.dependence == Dependence::SecondOnly) {
        if (cutoff) {
            throw InvalidInput("elementary_block_apply: locality cutoff is incompatible "
                               "with a second-only interaction");
        }
        std::vector<double> acc;
        for (std::size_t j = 0; j < n; ++j) {
            const auto xj = mu.point(j);
            std::vector<double> y = f.fn(xj, xj);
            if (acc.empty()) acc.assign(y.size(), 0.0);
            for (std::size_t k = 0; k < y.size(); ++k) acc[k] += mu.weight(j) * y[k];
        }
        const std::size_t out_dim = acc.size();
        return DiscreteMeasure(Tensor({1, out_dim}, std::move(acc)), Tensor::vector({1.0}));
    }

    if (f.dependence == Dependence::FirstOnly && !cutoff) {
        // Plain push-forward: weights sum to 1, so the inner average is h(x_i).
        return push_forward([&f](std::span<const double> x) { return f.fn(x, x); }, mu);
    }

    std::vector<double> out;
    std::size_t out_dim = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = mu.point(i);
        std::vector<double> acc;
        for (std::size_t j = 0; j < n; ++j) {
            const auto xj = mu.point(j);
            if (cutoff) {
                double sq = 0.0;
                for (std::size_t k = 0; k < xi.size(); ++k) {
                    const double diff = xi[k] - xj[k];
                    sq += diff * diff;
                }
                if (sq >= locality_radius * locality_radius) {
                    continue;  // f masked to zero at this range
                }
            }
            std::vector<double> y = f.fn(xi, xj);
            if (acc.empty()) acc.assign(y.size(), 0.0);
            for (std::size_t k = 0; k < y.size(); ++k) acc[k] += mu.weight(j) * y[k];
        }
        if (i == 0) {
            out_dim = acc.empty() ? f.out_dim : acc.size();
            if (out_dim == 0) throw InvalidInput("elementary_block_apply: unknown output dim");
            out.reserve(n * out_dim);
        }
        if (acc.empty()) acc.assign(out_dim, 0.0);  // everything masked out
        out.insert(out.end(), acc.begin(), acc.end());
    }
    return DiscreteMeasure(Tensor({n, out_dim}, std::move(out)), mu.weights());
}

DiscreteMeasure elementary_block_apply(const DiscreteMeasure& mu, const InteractionMap& f,
                                       double locality_radius) {
    return elementary_block_apply(mu, as_pairwise(f), locality_radius);
}

PairwiseMap make_gradient_flow_block(PairGradient grad_f, double tau, double sign) {
    if (!(tau > 0.0)) throw InvalidInput("make_gradient_flow_block: tau must be positive");
    return PairwiseMap{
        Dependence::Both, 0, 0,
        [grad_f = std::move(grad_f), tau, sign](std::span<const double> x,
                                                std::span<const double> xp) {
            std::vector<double> g = grad_f(x, xp);
            if (g.size() != x.size()) {
                throw EvaluationError("gradient-flow block: gradient dimension mismatch");
            }
            std::vector<double> y(x.begin(), x.end());
            for (std::size_t k = 0; k < y.size(); ++k) y[k] += sign * 2.0 * tau * g[k];
            return y;
        }};
}

std::vector<DiscreteMeasure> recurrent_iterate(const PairwiseMap& block,
                                               const DiscreteMeasure& mu0, int steps) {
    if (steps < 0) throw InvalidInput("recurrent_iterate: steps must be >= 0");
    std::vector<DiscreteMeasure> trajectory;
    trajectory.reserve(static_cast<std::size_t>(steps) + 1);
    trajectory.push_back(mu0);
    for (int s = 0; s < steps; ++s) {
        trajectory.push_back(elementary_block_apply(trajectory.back(), block));
    }
    return trajectory;
}

double interaction_energy(
    const std::function<double(std::span<const double>, std::span<const double>)>& potential,
    const DiscreteMeasure& mu) {
    double e = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < mu.size(); ++j) {
            e += mu.weight(i) * mu.weight(j) * potential(mu.point(i), mu.point(j));
        }
    }
    return e;
}

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

Activation Activation::from_measure(DiscreteMeasure m) {
    Activation a;
    a.measure_ = std::move(m);
    return a;
}

Activation Activation::from_vector(Tensor v) {
    if (v.rank() != 1) throw InvalidInput("Activation: deterministic state must be rank-1");
    Activation a;
    a.vec_ = std::move(v);
    return a;
}

const DiscreteMeasure& Activation::measure() const {
    if (!measure_) throw ArchitectureError("state is deterministic, expected a measure");
    return *measure_;
}

const Tensor& Activation::vec() const {
    if (measure_) throw ArchitectureError("state is a measure, expected a deterministic vector");
    return vec_;
}

std::size_t Activation::dim() const {
    return measure_ ? measure_->dim() : vec_.size();
}

namespace {

struct ShapeState {
    std::size_t dim;
    bool is_measure;
};

ShapeState trace_layer(const ShapeState& in, const Layer& layer, std::size_t index) {
    const auto fail = [index](const std::string& msg) {
        throw ArchitectureError("layer " + std::to_string(index) + ": " + msg);
    };
    ShapeState out = in;
    if (const auto* eb = std::get_if<ElementaryBlockLayer>(&layer)) {
        if (eb->map.point_dim() != in.dim) {
            fail("interaction expects dimension " + std::to_string(eb->map.point_dim()) +
                 ", state has " + std::to_string(in.dim));
        }
        out.dim = eb->map.out_dim();
        if (eb->map.dependence() == Dependence::SecondOnly) out.is_measure = false;
    } else if (const auto* st = std::get_if<SelfTensorizeLayer>(&layer)) {
        if (st->order < 1) fail("tensorization order must be >= 1");
        out.dim = in.dim * static_cast<std::size_t>(st->order);
    } else if (const auto* nc = std::get_if<NoiseConcatLayer>(&layer)) {
        if (nc->dim == 0) fail("noise dimension must be positive");
        out.dim = in.dim + nc->dim;
        out.is_measure = true;
    } else if (const auto* dl = std::get_if<DenseLayer>(&layer)) {
        if (in.is_measure) fail("dense layer requires a deterministic state");
        if (dl->lin.weight.cols() != in.dim) {
            fail("dense layer expects dimension " + std::to_string(dl->lin.weight.cols()) +
                 ", state has " + std::to_string(in.dim));
        }
        out.dim = dl->lin.weight.rows();
    }
    return out;
}

}  // namespace

void Architecture::validate(std::size_t input_dim, bool input_is_measure) const {
    if (mode == Mode::Generative && input_is_measure) {
        throw ArchitectureError("generative architectures take a code vector input");
    }
    ShapeState state{input_dim, input_is_measure};
    for (std::size_t t = 0; t < layers.size(); ++t) state = trace_layer(state, layers[t], t);
    if (mode == Mode::Discriminative && state.is_measure) {
        throw ArchitectureError("discriminative architecture must end deterministic");
    }
}

std::vector<Tensor*> Architecture::parameters() {
    std::vector<Tensor*> params;
    for (auto& layer : layers) {
        if (auto* eb = std::get_if<ElementaryBlockLayer>(&layer)) {
            for (auto& lin : eb->map.layers()) {
                params.push_back(&lin.weight);
                params.push_back(&lin.bias);
            }
        } else if (auto* dl = std::get_if<DenseLayer>(&layer)) {
            params.push_back(&dl->lin.weight);
            params.push_back(&dl->lin.bias);
        }
    }
    return params;
}

std::vector<const Tensor*> Architecture::parameters() const {
    auto mut = const_cast<Architecture*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

namespace {

DiscreteMeasure as_measure(const Activation& state) {
    if (state.is_measure()) return state.measure();
    const Tensor& v = state.vec();
    return DiscreteMeasure(Tensor({1, v.size()}, v.values()), Tensor::vector({1.0}));
}

Tensor draw_noise(SeededRng& rng, std::size_t n, const NoiseConcatLayer& nc) {
    return nc.kind == NoiseKind::Uniform01 ? rng.uniform_tensor({n, nc.dim}, 0.0, 1.0)
                                           : rng.normal_tensor({n, nc.dim}, 0.0, 1.0);
}

Activation apply_noise_concat(const Activation& state, const NoiseConcatLayer& nc,
                              SeededRng& rng) {
    const DiscreteMeasure m = as_measure(state);
    const std::size_t q = m.dim();
    if (m.size() == 1) {
        // Code vector: lift to atom_count atoms with fresh noise coordinates.
        const std::size_t n = nc.atom_count;
        if (n == 0) throw ArchitectureError("noise layer needs a positive atom count");
        const Tensor noise = draw_noise(rng, n, nc);
        Tensor pts({n, q + nc.dim});
        const auto base = m.point(0);
        for (std::size_t k = 0; k < n; ++k) {
            double* row = pts.data() + k * (q + nc.dim);
            std::copy(base.begin(), base.end(), row);
            std::copy(noise.data() + k * nc.dim, noise.data() + (k + 1) * nc.dim, row + q);
        }
        return Activation::from_measure(
            uniform_on(std::move(pts)));
    }
    // One draw per atom, assigned in canonical sorted order so that permuting
    // the input atoms permutes the output atoms identically (per seed).
    const std::size_t n = m.size();
    const Tensor noise = draw_noise(rng, n, nc);
    const auto order = sorted_atom_order(m);
    Tensor pts({n, q + nc.dim});
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        double* row = pts.data() + i * (q + nc.dim);
        const auto xi = m.point(i);
        std::copy(xi.begin(), xi.end(), row);
        std::copy(noise.data() + rank * nc.dim, noise.data() + (rank + 1) * nc.dim, row + q);
    }
    return Activation::from_measure(DiscreteMeasure(std::move(pts), m.weights()));
}

}  // namespace

Activation apply_layer(const Activation& state, const Layer& layer, SeededRng& rng) {
    if (const auto* eb = std::get_if<ElementaryBlockLayer>(&layer)) {
        const DiscreteMeasure out =
            elementary_block_apply(as_measure(state), eb->map, eb->locality_radius);
        const bool deterministic =
            !state.is_measure() || eb->map.dependence() == Dependence::SecondOnly;
        if (deterministic) {
            const auto p = out.point(0);
            return Activation::from_vector(Tensor::vector({p.begin(), p.end()}));
        }
        return Activation::from_measure(out);
    }
    if (const auto* st = std::get_if<SelfTensorizeLayer>(&layer)) {
        if (!state.is_measure()) {
            // delta^(x n) is the Dirac at the stacked vector
            std::vector<double> stacked;
            for (int k = 0; k < st->order; ++k) {
                stacked.insert(stacked.end(), state.vec().values().begin(),
                               state.vec().values().end());
            }
            return Activation::from_vector(Tensor::vector(std::move(stacked)));
        }
        return Activation::from_measure(self_tensorize(state.measure(), st->order));
    }
    if (const auto* nc = std::get_if<NoiseConcatLayer>(&layer)) {
        return apply_noise_concat(state, *nc, rng);
    }
    const auto& dl = std::get<DenseLayer>(layer);
    if (state.is_measure()) throw ArchitectureError("dense layer applied to a measure state");
    const Tensor& v = state.vec();
    const Tensor& w = dl.lin.weight;
    if (w.cols() != v.size()) throw ArchitectureError("dense layer width mismatch");
    Tensor out({w.rows()});
    for (std::size_t o = 0; o < w.rows(); ++o) {
        double acc = dl.lin.bias[o];
        for (std::size_t i = 0; i < w.cols(); ++i) acc += w.at(o, i) * v[i];
        out[o] = dl.activation == OutputActivation::Relu ? std::max(0.0, acc) : acc;
    }
    return Activation::from_vector(std::move(out));
}

Activation forward(const Architecture& arch, const Activation& input, SeededRng& rng) {
    arch.validate(input.dim(), input.is_measure());
    Activation state = input;
    for (std::size_t t = 0; t < arch.layers.size(); ++t) {
        try {
            state = apply_layer(state, arch.layers[t], rng);
        } catch (const ArchitectureError& e) {
            throw ArchitectureError("layer " + std::to_string(t) + ": " + e.what());
        } catch (const Error& e) {
            throw ArchitectureError("layer " + std::to_string(t) + ": " + e.what());
        }
    }
    return state;
}

// ---------------------------------------------------------------------------
// differentiable forward
// ---------------------------------------------------------------------------

TapeActivation tape_activation(Tape& tape, const DiscreteMeasure& mu) {
    TapeActivation a;
    a.is_measure = true;
    a.atoms = tape.constant(mu.points());
    a.weights = mu.weights().values();
    return a;
}

std::vector<Var> make_param_vars(Tape& tape, const Architecture& arch) {
    std::vector<Var> vars;
    for (const Tensor* t : arch.parameters()) vars.push_back(tape.param(*t));
    return vars;
}

namespace {

Var tape_mlp(Tape& tape, Var rows, const InteractionMap& map, std::span<const Var> params,
             std::size_t& cursor) {
    Var x = rows;
    const std::size_t n_layers = map.layers().size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const bool act =
            (l + 1 < n_layers) || map.out_activation() == OutputActivation::Relu;
        x = tape.linear(x, params[cursor], params[cursor + 1], act);
        cursor += 2;
    }
    return x;
}

std::vector<double> tensorized_weights(const std::vector<double>& w, int order) {
    std::vector<double> out = w;
    for (int k = 1; k < order; ++k) {
        std::vector<double> next;
        next.reserve(out.size() * w.size());
        for (double a : out) {
            for (double b : w) next.push_back(a * b);
        }
        out = std::move(next);
    }
    return out;
}

}  // namespace

TapeActivation tape_forward(Tape& tape, const Architecture& arch, std::span<const Var> params,
                            const TapeActivation& input, SeededRng& rng) {
    TapeActivation state = input;
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < arch.layers.size(); ++t) {
        const Layer& layer = arch.layers[t];
        if (const auto* eb = std::get_if<ElementaryBlockLayer>(&layer)) {
            const InteractionMap& map = eb->map;
            const std::size_t n = state.weights.size();
            switch (map.dependence()) {
                case Dependence::Both: {
                    Var pairs = tape.tensor_rows(state.atoms, 2);
                    Var h = tape_mlp(tape, pairs, map, params, cursor);
                    if (eb->locality_radius > 0.0) {
                        // Indicator of ||x_i - x_j|| < radius applied to the
                        // MLP output; constant w.r.t. differentiation.
                        const Tensor& pts = tape.value(state.atoms);
                        const std::size_t d = pts.cols();
                        Tensor mask({n * n, map.out_dim()});
                        for (std::size_t i = 0; i < n; ++i) {
                            for (std::size_t j = 0; j < n; ++j) {
                                double sq = 0.0;
                                for (std::size_t k = 0; k < d; ++k) {
                                    const double diff = pts.at(i, k) - pts.at(j, k);
                                    sq += diff * diff;
                                }
                                const double keep =
                                    sq < eb->locality_radius * eb->locality_radius ? 1.0 : 0.0;
                                for (std::size_t k = 0; k < map.out_dim(); ++k) {
                                    mask.at(i * n + j, k) = keep;
                                }
                            }
                        }
                        h = tape.mul_const(h, mask);
                    }
                    state.atoms = tape.group_avg_rows(h, state.weights);
                    break;
                }
                case Dependence::FirstOnly: {
                    state.atoms = tape_mlp(tape, state.atoms, map, params, cursor);
                    break;
                }
                case Dependence::SecondOnly: {
                    Var h = tape_mlp(tape, state.atoms, map, params, cursor);
                    state.atoms = tape.avg_rows(h, state.weights);
                    state.weights = {1.0};
                    state.is_measure = false;
                    break;
                }
            }
        } else if (const auto* st = std::get_if<SelfTensorizeLayer>(&layer)) {
            state.atoms = tape.tensor_rows(state.atoms, st->order);
            state.weights = tensorized_weights(state.weights, st->order);
        } else if (const auto* nc = std::get_if<NoiseConcatLayer>(&layer)) {
            const std::size_t n = state.weights.size();
            if (n == 1) {
                const Tensor noise = nc->kind == NoiseKind::Uniform01
                                         ? rng.uniform_tensor({nc->atom_count, nc->dim}, 0.0, 1.0)
                                         : rng.normal_tensor({nc->atom_count, nc->dim}, 0.0, 1.0);
                Var lifted = tape.replicate_row(state.atoms, nc->atom_count);
                state.atoms = tape.concat_cols_const(lifted, noise);
                state.weights.assign(nc->atom_count, 1.0 / static_cast<double>(nc->atom_count));
                state.is_measure = true;
            } else {
                const Tensor noise = nc->kind == NoiseKind::Uniform01
                                         ? rng.uniform_tensor({n, nc->dim}, 0.0, 1.0)
                                         : rng.normal_tensor({n, nc->dim}, 0.0, 1.0);
                // Same canonical assignment as the plain forward.
                const DiscreteMeasure snapshot(tape.value(state.atoms),
                                               Tensor::vector(state.weights));
                const auto order = sorted_atom_order(snapshot);
                Tensor assigned({n, nc->dim});
                for (std::size_t rank = 0; rank < n; ++rank) {
                    for (std::size_t k = 0; k < nc->dim; ++k) {
                        assigned.at(order[rank], k) = noise.at(rank, k);
                    }
                }
                state.atoms = tape.concat_cols_const(state.atoms, assigned);
            }
        } else {
            const auto& dl = std::get<DenseLayer>(layer);
            if (state.is_measure) {
                throw ArchitectureError("layer " + std::to_string(t) +
                                        ": dense layer applied to a measure state");
            }
            state.atoms = tape.linear(state.atoms, params[cursor], params[cursor + 1],
                                      dl.activation == OutputActivation::Relu);
            cursor += 2;
        }
    }
    return state;
}

}  // namespace sdn
