#include "sdn/universal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdn/transport.hpp"

namespace sdn {

double noise_reshape_1d(const Tensor& b, const GridSpec& grid, double u, double eps) {
    if (grid.dim() != 1) throw InvalidInput("noise_reshape_1d: grid must be 1-D");
    if (b.rank() != 1 || b.size() != grid.node_count()) {
        throw InvalidInput("noise_reshape_1d: coefficient vector does not match grid");
    }
    if (!(eps > 0.0) || eps > 1.0) {
        throw InvalidInput("noise_reshape_1d: eps must lie in (0, 1]");
    }
    if (u < 0.0 || u > 1.0) {
        throw DomainError("noise_reshape_1d: u = " + std::to_string(u) + " outside [0,1]");
    }
    // Mixture CDF F(t) = (1-eps) * sum_{y_j <= t} b_j + eps * t is strictly
    // increasing with jumps at the nodes. Walk the nodes, solving the linear
    // segment before each node and letting atoms swallow their interval.
    const double h = grid.spacing();
    double cum = 0.0;  // atom mass strictly below the current node
    for (std::size_t j = 0; j < grid.node_count(); ++j) {
        const double node = static_cast<double>(j) * h;
        const double before = (1.0 - eps) * cum + eps * node;
        if (u <= before) {
            return std::clamp((u - (1.0 - eps) * cum) / eps, 0.0, node);
        }
        const double after = before + (1.0 - eps) * b[j];
        if (u <= after) return node;
        cum += b[j];
    }
    return 1.0;  // F(1) = 1; only reachable through rounding
}

// ---------------------------------------------------------------------------
// three-block surrogate
// ---------------------------------------------------------------------------

UniversalPipeline::UniversalPipeline(MeasureMap oracle, UniversalPipelineConfig cfg)
    : oracle_(std::move(oracle)), cfg_(cfg),
      in_grid_(cfg.input_dim, cfg.input_grid_k),
      out_grid_(1, cfg.output_grid_k) {
    if (!oracle_) throw InvalidInput("UniversalPipeline: empty oracle");
    if (cfg_.noise_atoms == 0) throw InvalidInput("UniversalPipeline: need noise atoms");
}

Tensor UniversalPipeline::discretize_input(const DiscreteMeasure& input) const {
    // First block: f(x, x') = (phi_i(x')), integrated against the input.
    const PairwiseMap basis{
        Dependence::SecondOnly, in_grid_.dim(), in_grid_.node_count(),
        [this](std::span<const double>, std::span<const double> xp) {
            const Tensor phi = p1_basis_eval(in_grid_, xp);
            return std::vector<double>(phi.values());
        }};
    const DiscreteMeasure collapsed = elementary_block_apply(input, basis);
    const auto a = collapsed.point(0);
    return Tensor({in_grid_.node_count()}, {a.begin(), a.end()});
}

Tensor UniversalPipeline::surrogate(const Tensor& a) const {
    const DiscreteMeasure guess = reconstruct(a, in_grid_);
    const DiscreteMeasure image = oracle_(guess);
    if (image.dim() != 1) {
        throw DomainError("UniversalPipeline: oracle output must live on [0,1]");
    }
    try {
        return discretize_p1(image, out_grid_);
    } catch (const DomainError&) {
        throw DomainError("UniversalPipeline: oracle output support outside [0,1]");
    }
}

DiscreteMeasure UniversalPipeline::operator()(const DiscreteMeasure& input,
                                              SeededRng& rng) const {
    const Tensor a = discretize_input(input);

    // Second block: g(a, a') = G(a'), deterministic in the collapsed state.
    const Tensor b = surrogate(a);
    const std::size_t m = b.size();
    DiscreteMeasure state(Tensor({1, m}, b.values()), Tensor::vector({1.0}));

    // Noise block: (b, u_k) for noise_atoms uniform draws.
    const Activation lifted =
        apply_layer(Activation::from_measure(state),
                    Layer{NoiseConcatLayer{1, NoiseKind::Uniform01, cfg_.noise_atoms}}, rng);

    // Final block: h((b, u), .) = quantile of the mixture at u.
    const GridSpec& out_grid = out_grid_;
    const double eps = cfg_.eps;
    const PairwiseMap reshape{
        Dependence::FirstOnly, m + 1, 1,
        [m, &out_grid, eps](std::span<const double> x, std::span<const double>) {
            const Tensor coeffs({m}, {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m)});
            return std::vector<double>{noise_reshape_1d(coeffs, out_grid, x[m], eps)};
        }};
    return elementary_block_apply(lifted.measure(), reshape);
}

// ---------------------------------------------------------------------------
// moment functionals
// ---------------------------------------------------------------------------

double moment_functional(const std::function<double(std::span<const double>)>& phi, int order,
                         const DiscreteMeasure& mu, std::size_t cap) {
    const DiscreteMeasure product = self_tensorize(mu, order, cap);
    const PairwiseMap integrand{
        Dependence::SecondOnly, product.dim(), 1,
        [&phi](std::span<const double>, std::span<const double> xp) {
            return std::vector<double>{phi(xp)};
        }};
    return elementary_block_apply(product, integrand).point(0)[0];
}

// ---------------------------------------------------------------------------
// Lipschitz harness
// ---------------------------------------------------------------------------

HarnessReport lipschitz_harness(std::string name, const MeasureMap& map_under_test,
                                const PairSampler& sampler, double bound, int trials,
                                SeededRng& rng) {
    HarnessReport report;
    report.name = std::move(name);
    report.bound = bound;
    for (int t = 0; t < trials; ++t) {
        const auto [mu, nu] = sampler(rng);
        const double w_in = exact_wasserstein(mu, nu, 1);
        if (w_in < 1e-9) continue;
        const double w_out = exact_wasserstein(map_under_test(mu), map_under_test(nu), 1);
        report.max_ratio = std::max(report.max_ratio, w_out / w_in);
        ++report.trials;
    }
    report.pass = report.max_ratio <= bound;
    return report;
}

}  // namespace sdn
