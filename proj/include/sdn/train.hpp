#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdn/blocks.hpp"
#include "sdn/flocking.hpp"
#include "sdn/measure.hpp"
#include "sdn/rng.hpp"
#include "sdn/transport.hpp"

namespace sdn {

// ---------------------------------------------------------------------------
// optimizer and initialization
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState(const std::vector<Tensor*>& params, AdamConfig cfg);

    // Standard bias-corrected update, in place on the parameter tensors.
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);
    int steps_taken() const { return steps_; }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    int steps_ = 0;
};

// Xavier-uniform stack over consecutive widths; biases zero.
std::vector<LinearLayer> xavier_init(SeededRng& rng, std::span<const std::size_t> widths);

// ---------------------------------------------------------------------------
// losses and ingestion
// ---------------------------------------------------------------------------

// -w_label * log softmax(scores)[label]; empty class_weights means 1.
double cross_entropy_loss(const Tensor& scores, int label,
                          std::span<const double> class_weights = {});

// KL(N(mean, diag exp(logvar)) || N(0, I)) in closed form.
double gaussian_kl(const Tensor& mean, const Tensor& logvar);

// Pixels above `rho` ranked by intensity (ties row-major), top n_points kept
// with repetition from the start of the kept list when fewer qualify; (row,
// col) coordinates standardized per axis to mean 0 / variance 1 (axes with
// zero variance stay centered); uniform weights.
DiscreteMeasure ingest_image(const Tensor& pixels, double rho, std::size_t n_points);

// Affine map of the support into [margin, 1-margin]^d (shared scale across
// axes so geometry is preserved); used to feed arbitrary data to unit-cube
// grids.
DiscreteMeasure rescale_to_unit_cube(const DiscreteMeasure& m, double margin = 0.05);

// ---------------------------------------------------------------------------
// training loops
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 30;
    int batch = 16;
    double lr = 1e-2;
    std::uint64_t seed = 1;
    SinkhornConfig sinkhorn;          // loss settings for OT-fitted models
    std::vector<double> class_weights;  // empty: inverse class frequency
    int threads = 1;
};

struct EpochMetric {
    int epoch = 0;
    double loss = 0.0;
    double score = 0.0;  // accuracy (classifier) or mean divergence (others)
};

struct LabeledMeasure {
    DiscreteMeasure measure;
    int label = 0;
};

struct TrainHistory {
    std::vector<EpochMetric> epochs;
    double final_score = 0.0;
};

// Cross-entropy training of a discriminative architecture; score = test
// accuracy. Deterministic per (dataset, config, seed).
TrainHistory train_classifier(std::span<const LabeledMeasure> train,
                              std::span<const LabeledMeasure> test, Architecture& arch,
                              const TrainConfig& cfg);

double classifier_accuracy(std::span<const LabeledMeasure> data, const Architecture& arch,
                           std::uint64_t seed);

struct VaeConfig {
    int latent_dim = 2;
    std::size_t decoder_atoms = 100;
    double kl_weight = 1e-3;
    std::size_t noise_dim = 2;
    // > 0: record the fixed-seed reconstruction divergence of example 0
    // every eval_every optimizer steps (for convergence tracking).
    int eval_every = 0;
};

struct VaeHistory {
    std::vector<EpochMetric> epochs;  // loss = total, score = reconstruction term
    std::vector<double> step_losses;  // per-step totals, for convergence tests
    std::vector<double> eval_divergences;  // fixed-seed metric, see eval_every
};

// Sinkhorn-divergence reconstruction + kl_weight * KL with the standard
// reparameterization; encoder ends deterministic with 2*latent_dim outputs
// (mean, logvar), decoder lifts the code through its noise block.
VaeHistory train_vae(std::span<const DiscreteMeasure> dataset, Architecture& encoder,
                     Architecture& decoder, const VaeConfig& vae_cfg, const TrainConfig& cfg);

// Decode a latent code into a measure (fresh decoder noise from `seed`).
DiscreteMeasure vae_decode(const Architecture& decoder, const Tensor& code, std::uint64_t seed);

// Reconstruction divergence of one example under a fixed evaluation seed
// (same reparameterization draw and decoder noise every call), so successive
// calls measure model quality, not sampling noise.
double vae_reconstruction_divergence(const Architecture& encoder, const Architecture& decoder,
                                     const DiscreteMeasure& example, const VaeConfig& vae_cfg,
                                     const SinkhornConfig& sinkhorn, std::uint64_t eval_seed);

// Sinkhorn-divergence regression of phase-space measures onto limit
// measures; score = mean divergence on the held-out split.
TrainHistory train_predictor(std::span<const FlockSample> train,
                             std::span<const FlockSample> test, Architecture& arch,
                             const TrainConfig& cfg);

double predictor_mean_divergence(std::span<const FlockSample> data, const Architecture& arch,
                                 const SinkhornConfig& sinkhorn, std::uint64_t seed);

// ---------------------------------------------------------------------------
// reference architectures and synthetic data
// ---------------------------------------------------------------------------

Architecture default_classifier_arch(std::size_t input_dim, std::size_t classes,
                                     std::span<const std::size_t> widths, SeededRng& rng);
Architecture default_predictor_arch(std::span<const std::size_t> widths, SeededRng& rng);
Architecture default_vae_encoder(std::size_t input_dim, const VaeConfig& cfg, SeededRng& rng);
Architecture default_vae_decoder(std::size_t output_dim, const VaeConfig& cfg, SeededRng& rng);

// Two point-cloud classes: Gaussian blob (label 0) vs annulus (label 1).
std::vector<LabeledMeasure> synthetic_blob_ring(SeededRng& rng, std::size_t examples,
                                                std::size_t atoms);

}  // namespace sdn
