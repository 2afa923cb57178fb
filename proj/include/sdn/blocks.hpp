#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "sdn/autodiff.hpp"
#include "sdn/measure.hpp"
#include "sdn/rng.hpp"
#include "sdn/tensor.hpp"

namespace sdn {

// Which arguments of f(x, x') the interaction actually reads. SecondOnly maps
// integrate the measure to a summary vector; FirstOnly maps act as pointwise
// push-forwards.
enum class Dependence { Both, FirstOnly, SecondOnly };

enum class OutputActivation { Relu, Identity };
enum class NoiseKind { Uniform01, Gaussian };
enum class Mode { Predictive, Discriminative, Generative };

struct LinearLayer {
    Tensor weight;  // out x in
    Tensor bias;    // out
};

// Xavier-uniform weights on +-sqrt(6/(fan_in+fan_out)), zero bias.
LinearLayer xavier_linear(SeededRng& rng, std::size_t fan_in, std::size_t fan_out);

// Small MLP f: R^q x R^q -> R^r on the concatenated pair [x; x'] (or on the
// single live argument per the dependence tag). Hidden activations are ReLU;
// the last layer is ReLU or identity per `out_activation`.
class InteractionMap {
public:
    InteractionMap(Dependence dep, std::size_t point_dim, std::vector<std::size_t> hidden,
                   std::size_t out_dim, OutputActivation out_activation, SeededRng& rng);
    InteractionMap(Dependence dep, std::size_t point_dim, std::vector<LinearLayer> layers,
                   OutputActivation out_activation);

    Dependence dependence() const { return dep_; }
    std::size_t point_dim() const { return point_dim_; }
    std::size_t out_dim() const { return layers_.back().weight.rows(); }
    std::size_t first_layer_input() const { return layers_.front().weight.cols(); }
    OutputActivation out_activation() const { return out_activation_; }

    const std::vector<LinearLayer>& layers() const { return layers_; }
    std::vector<LinearLayer>& layers() { return layers_; }

    std::vector<double> eval(std::span<const double> x, std::span<const double> x_prime) const;

    // Upper bounds on the Lipschitz constants w.r.t. each argument, computed
    // as products of layer spectral norms (ReLU contributes a factor 1). For
    // Both-dependence the first layer splits into its x / x' column blocks.
    double lipschitz_bound_first() const;
    double lipschitz_bound_second() const;

private:
    Dependence dep_;
    std::size_t point_dim_;
    std::vector<LinearLayer> layers_;
    OutputActivation out_activation_;
};

// Largest singular value (one-sided Jacobi; exact to machine precision).
double spectral_norm(const Tensor& matrix);

inline std::vector<double> interaction_eval(const InteractionMap& f, std::span<const double> x,
                                            std::span<const double> x_prime) {
    return f.eval(x, x_prime);
}

// Arbitrary pairwise interaction usable by elementary blocks: gradient-flow
// closures, basis evaluators, quantile maps.
struct PairwiseMap {
    Dependence dependence = Dependence::Both;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)> fn;
};

PairwiseMap as_pairwise(const InteractionMap& f);

// y_i = sum_j w_j f(x_i, x_j), output weights = input weights. A SecondOnly
// interaction makes every y_i equal; the result collapses to a single atom of
// weight 1. locality_radius > 0 zeroes contributions with ||x_i - x_j|| >=
// radius (multiplicative cutoff).
DiscreteMeasure elementary_block_apply(const DiscreteMeasure& mu, const PairwiseMap& f,
                                       double locality_radius = 0.0);
DiscreteMeasure elementary_block_apply(const DiscreteMeasure& mu, const InteractionMap& f,
                                       double locality_radius = 0.0);

// f(x, x') = x + sign * 2 * tau * grad_F(x, x'); plugged into a recurrent
// elementary block this simulates the interaction-energy gradient flow.
using PairGradient =
    std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;
PairwiseMap make_gradient_flow_block(PairGradient grad_f, double tau, double sign);

// Trajectory [mu_0, T_f(mu_0), ..., T_f^steps(mu_0)].
std::vector<DiscreteMeasure> recurrent_iterate(const PairwiseMap& block,
                                               const DiscreteMeasure& mu0, int steps);

// E(mu) = sum_ij w_i w_j F(x_i, x_j).
double interaction_energy(
    const std::function<double(std::span<const double>, std::span<const double>)>& potential,
    const DiscreteMeasure& mu);

// ---------------------------------------------------------------------------
// layers and architectures
// ---------------------------------------------------------------------------

struct ElementaryBlockLayer {
    InteractionMap map;
    double locality_radius = 0.0;  // <= 0 disables the cutoff
};

struct SelfTensorizeLayer {
    int order = 2;
};

struct NoiseConcatLayer {
    std::size_t dim = 1;
    NoiseKind kind = NoiseKind::Uniform01;
    std::size_t atom_count = 100;  // lift size for deterministic inputs
};

struct DenseLayer {
    LinearLayer lin;
    OutputActivation activation = OutputActivation::Relu;
};

using Layer = std::variant<ElementaryBlockLayer, SelfTensorizeLayer, NoiseConcatLayer, DenseLayer>;

// Network state flowing between layers: either a measure or a deterministic
// vector (the collapsed output of a SecondOnly block or of a Dense layer).
struct Activation {
    static Activation from_measure(DiscreteMeasure m);
    static Activation from_vector(Tensor v);

    bool is_measure() const { return measure_.has_value(); }
    const DiscreteMeasure& measure() const;
    const Tensor& vec() const;
    std::size_t dim() const;

private:
    std::optional<DiscreteMeasure> measure_;
    Tensor vec_;
};

struct Architecture {
    Mode mode = Mode::Predictive;
    std::vector<Layer> layers;

    // Walks the layer stack checking width chaining and state-kind rules;
    // throws ArchitectureError naming the offending layer.
    void validate(std::size_t input_dim, bool input_is_measure) const;

    // Mutable views of every weight/bias tensor in a fixed canonical order
    // (layer by layer, weight before bias).
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
};

Activation apply_layer(const Activation& state, const Layer& layer, SeededRng& rng);
Activation forward(const Architecture& arch, const Activation& input, SeededRng& rng);

// ---------------------------------------------------------------------------
// differentiable forward
// ---------------------------------------------------------------------------

// Measure state on a tape: atom matrix (n x d) plus constant weights.
// Deterministic vectors are single-row matrices with weights {1}.
struct TapeActivation {
    bool is_measure = true;
    Var atoms;
    std::vector<double> weights;
};

TapeActivation tape_activation(Tape& tape, const DiscreteMeasure& mu);

// Creates tape parameters for every architecture tensor, in parameters() order.
std::vector<Var> make_param_vars(Tape& tape, const Architecture& arch);

// Mirrors forward() with tape operations; params must come from
// make_param_vars (or align with parameters() order). Noise is drawn from rng
// exactly as the plain forward does, so both paths agree bitwise.
TapeActivation tape_forward(Tape& tape, const Architecture& arch, std::span<const Var> params,
                            const TapeActivation& input, SeededRng& rng);

}  // namespace sdn
