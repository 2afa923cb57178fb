#pragma once

#include <functional>
#include <string>

#include "sdn/blocks.hpp"
#include "sdn/measure.hpp"
#include "sdn/rng.hpp"

namespace sdn {

// Quantile function (generalized inverse CDF) at u of the mixture
// (1 - eps) * sum_j b_j delta_{y_j} + eps * Uniform[0,1], where y_j are the
// nodes of a 1-D grid. Continuous and nondecreasing in u; atoms absorb whole
// quantile intervals. eps in (0, 1]; eps = 1 is the pure uniform (identity).
double noise_reshape_1d(const Tensor& b, const GridSpec& grid, double u, double eps);

using MeasureMap = std::function<DiscreteMeasure(const DiscreteMeasure&)>;

struct UniversalPipelineConfig {
    std::size_t input_dim = 1;       // q of the input cube [0,1]^q
    std::size_t input_grid_k = 16;   // nodes per axis on the input grid
    std::size_t output_grid_k = 16;  // output grid on [0,1] (1-D outputs only)
    double eps = 0.05;               // uniform mixing weight fed to the quantile map
    std::size_t noise_atoms = 1000;  // atoms drawn through the noise block
};

// Three-block surrogate of a measure-to-measure functional F:
//   1. second-only block evaluating the P1 basis  -> simplex vector a
//   2. second-only block a -> G(a), with G evaluated lazily as
//      discretize(F(reconstruct(a)))               -> simplex vector b
//   3. noise concatenation (b, u_k), u_k ~ U[0,1]
//   4. first-only block applying the quantile map  -> measure on [0,1]
// The surrogate converges to F on the grid refinement family.
class UniversalPipeline {
public:
    UniversalPipeline(MeasureMap oracle, UniversalPipelineConfig cfg);

    DiscreteMeasure operator()(const DiscreteMeasure& input, SeededRng& rng) const;

    // First-stage output: the input discretized onto the simplex.
    Tensor discretize_input(const DiscreteMeasure& input) const;

    const GridSpec& input_grid() const { return in_grid_; }
    const GridSpec& output_grid() const { return out_grid_; }
    const UniversalPipelineConfig& config() const { return cfg_; }

private:
    Tensor surrogate(const Tensor& a) const;  // G = discretize . F . reconstruct

    MeasureMap oracle_;
    UniversalPipelineConfig cfg_;
    GridSpec in_grid_;
    GridSpec out_grid_;
};

// Integral of phi against the order-fold product measure mu^(x order),
// computed as a second-only elementary block after self-tensorization:
// sum over index tuples of the weight products times phi on the stacked
// coordinates.
double moment_functional(const std::function<double(std::span<const double>)>& phi, int order,
                         const DiscreteMeasure& mu, std::size_t cap = 1'000'000);

struct HarnessReport {
    std::string name;
    int trials = 0;
    double max_ratio = 0.0;
    double bound = 0.0;
    bool pass = false;
};

using PairSampler = std::function<std::pair<DiscreteMeasure, DiscreteMeasure>(SeededRng&)>;

// Worst observed W1(T(mu), T(nu)) / W1(mu, nu) over sampled pairs, using the
// exact assignment solver on both sides. Pairs closer than 1e-9 are skipped.
// The sampler must produce uniform equal-size pairs the oracle accepts.
HarnessReport lipschitz_harness(std::string name, const MeasureMap& map_under_test,
                                const PairSampler& sampler, double bound, int trials,
                                SeededRng& rng);

}  // namespace sdn
