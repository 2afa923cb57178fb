#include "sdn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace sdn {

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

AdamState::AdamState(const std::vector<Tensor*>& params, AdamConfig cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
    }
}

void AdamState::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw InvalidInput("AdamState: parameter/gradient count mismatch");
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, steps_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, steps_);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        if (!p.same_shape(grads[k])) throw InvalidInput("AdamState: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = grads[k][i];
            m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
            v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m_[k][i] / bc1;
            const double vhat = v_[k][i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

std::vector<LinearLayer> xavier_init(SeededRng& rng, std::span<const std::size_t> widths) {
    if (widths.size() < 2) throw InvalidInput("xavier_init: need at least two widths");
    std::vector<LinearLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        layers.push_back(xavier_linear(rng, widths[l], widths[l + 1]));
    }
    return layers;
}

// ---------------------------------------------------------------------------
// losses / ingestion
// ---------------------------------------------------------------------------

double cross_entropy_loss(const Tensor& scores, int label,
                          std::span<const double> class_weights) {
    const std::size_t classes = scores.size();
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
        throw InvalidInput("cross_entropy_loss: label out of range");
    }
    if (!class_weights.empty() && class_weights.size() != classes) {
        throw InvalidInput("cross_entropy_loss: class weight count mismatch");
    }
    double mx = scores[0];
    for (std::size_t i = 1; i < classes; ++i) mx = std::max(mx, scores[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < classes; ++i) sum += std::exp(scores[i] - mx);
    const double lse = mx + std::log(sum);
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(label)];
    return w * (lse - scores[static_cast<std::size_t>(label)]);
}

double gaussian_kl(const Tensor& mean, const Tensor& logvar) {
    if (!mean.same_shape(logvar)) throw InvalidInput("gaussian_kl: shape mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        kl += mean[i] * mean[i] + std::exp(logvar[i]) - logvar[i] - 1.0;
    }
    return 0.5 * kl;
}

DiscreteMeasure ingest_image(const Tensor& pixels, double rho, std::size_t n_points) {
    if (pixels.rank() != 2) throw InvalidInput("ingest_image: pixels must be H x W");
    if (n_points == 0) throw InvalidInput("ingest_image: n_points must be positive");
    const std::size_t h = pixels.rows(), w = pixels.cols();
    struct Pixel {
        double value;
        std::size_t index;  // row-major, the tie-break order
    };
    std::vector<Pixel> kept;
    for (std::size_t i = 0; i < h * w; ++i) {
        if (pixels[i] > rho) kept.push_back({pixels[i], i});
    }
    if (kept.empty()) {
        throw InvalidInput("ingest_image: no pixel above the threshold");
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Pixel& a, const Pixel& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.index < b.index;
    });

    Tensor pts({n_points, 2});
    for (std::size_t k = 0; k < n_points; ++k) {
        const Pixel& px = kept[k % kept.size()];
        pts.at(k, 0) = static_cast<double>(px.index / w);  // row
        pts.at(k, 1) = static_cast<double>(px.index % w);  // col
    }
    // Standardize each axis to mean 0 / variance 1 (population variance).
    for (std::size_t axis = 0; axis < 2; ++axis) {
        double mean = 0.0;
        for (std::size_t k = 0; k < n_points; ++k) mean += pts.at(k, axis);
        mean /= static_cast<double>(n_points);
        double var = 0.0;
        for (std::size_t k = 0; k < n_points; ++k) {
            const double c = pts.at(k, axis) - mean;
            var += c * c;
        }
        var /= static_cast<double>(n_points);
        const double sd = std::sqrt(var);
        for (std::size_t k = 0; k < n_points; ++k) {
            pts.at(k, axis) = sd > 1e-12 ? (pts.at(k, axis) - mean) / sd
                                         : pts.at(k, axis) - mean;
        }
    }
    return uniform_on(std::move(pts));
}

DiscreteMeasure rescale_to_unit_cube(const DiscreteMeasure& m, double margin) {
    if (margin < 0.0 || margin >= 0.5) throw InvalidInput("rescale_to_unit_cube: bad margin");
    const std::size_t d = m.dim();
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto p = m.point(i);
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    }
    double range = 0.0;
    for (std::size_t k = 0; k < d; ++k) range = std::max(range, hi[k] - lo[k]);
    const double scale = range > 0.0 ? (1.0 - 2.0 * margin) / range : 0.0;
    Tensor pts({m.size(), d});
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto p = m.point(i);
        for (std::size_t k = 0; k < d; ++k) {
            pts.at(i, k) = range > 0.0 ? margin + (p[k] - lo[k]) * scale : 0.5;
        }
    }
    return DiscreteMeasure(std::move(pts), m.weights());
}

// ---------------------------------------------------------------------------
// batching helpers
// ---------------------------------------------------------------------------

namespace {

struct ExampleResult {
    double loss = 0.0;
    double aux = 0.0;  // secondary metric (e.g. reconstruction term)
    std::vector<Tensor> grads;
};

// Evaluates per-example closures over a batch, possibly in parallel, then
// reduces gradients in ascending slot order for reproducibility.
ExampleResult run_batch(std::span<const std::size_t> indices, int threads,
                        const std::function<ExampleResult(std::size_t)>& per_example,
                        const std::vector<Tensor*>& params) {
    std::vector<ExampleResult> slots(indices.size());
    const auto work = [&](std::size_t slot) { slots[slot] = per_example(indices[slot]); };
    if (threads <= 1 || indices.size() < 2) {
        for (std::size_t s = 0; s < indices.size(); ++s) work(s);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> pool;
        const int workers = std::min<int>(threads, static_cast<int>(indices.size()));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                while (true) {
                    const std::size_t s = cursor.fetch_add(1);
                    if (s >= indices.size()) return;
                    work(s);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // Fixed ascending-slot reduction keeps results independent of scheduling.
    ExampleResult total;
    total.grads.reserve(params.size());
    for (const Tensor* p : params) total.grads.emplace_back(p->shape());
    for (const ExampleResult& r : slots) {
        total.loss += r.loss;
        total.aux += r.aux;
        for (std::size_t k = 0; k < params.size(); ++k) total.grads[k] += r.grads[k];
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    total.loss *= inv;
    total.aux *= inv;
    for (Tensor& g : total.grads) g *= inv;
    return total;
}

void shuffle_indices(std::vector<std::size_t>& order, SeededRng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
}

std::uint64_t step_seed(std::uint64_t seed, int epoch, std::size_t example) {
    return SeededRng(seed).split(static_cast<std::uint64_t>(epoch) * 0x10001ULL + example)
        .seed();
}

}  // namespace

// ---------------------------------------------------------------------------
// classifier
// ---------------------------------------------------------------------------

double classifier_accuracy(std::span<const LabeledMeasure> data, const Architecture& arch,
                           std::uint64_t seed) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        SeededRng rng(step_seed(seed, -1, i));
        const Tensor scores =
            forward(arch, Activation::from_measure(data[i].measure), rng).vec();
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.size(); ++c) {
            if (scores[c] > scores[best]) best = c;
        }
        if (static_cast<int>(best) == data[i].label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainHistory train_classifier(std::span<const LabeledMeasure> train,
                              std::span<const LabeledMeasure> test, Architecture& arch,
                              const TrainConfig& cfg) {
    if (train.empty()) throw InvalidInput("train_classifier: empty training set");
    arch.validate(train.front().measure.dim(), true);

    int classes = 0;
    for (const auto& ex : train) classes = std::max(classes, ex.label + 1);
    std::vector<double> weights = cfg.class_weights;
    if (weights.empty()) {
        // Inverse class frequency, normalized to mean 1.
        std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
        for (const auto& ex : train) counts[static_cast<std::size_t>(ex.label)] += 1.0;
        weights.resize(static_cast<std::size_t>(classes));
        for (std::size_t c = 0; c < weights.size(); ++c) {
            weights[c] = counts[c] > 0.0
                             ? static_cast<double>(train.size()) /
                                   (static_cast<double>(classes) * counts[c])
                             : 0.0;
        }
    }

    const std::vector<Tensor*> params = arch.parameters();
    AdamState adam(params, AdamConfig{.lr = cfg.lr});
    SeededRng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const std::span<const std::size_t> batch{order.data() + start, stop - start};
            const auto per_example = [&](std::size_t idx) {
                const LabeledMeasure& ex = train[idx];
                Tape tape;
                const std::vector<Var> pvars = make_param_vars(tape, arch);
                SeededRng fwd_rng(step_seed(cfg.seed, epoch, idx));
                const TapeActivation out =
                    tape_forward(tape, arch, pvars, tape_activation(tape, ex.measure), fwd_rng);
                Var loss = tape.cross_entropy(out.atoms, ex.label,
                                              weights[static_cast<std::size_t>(ex.label)]);
                tape.backward(loss);
                ExampleResult r;
                r.loss = tape.value(loss)[0];
                r.grads.reserve(pvars.size());
                for (const Var& v : pvars) r.grads.push_back(tape.grad(v));
                return r;
            };
            const ExampleResult batch_result = run_batch(batch, cfg.threads, per_example, params);
            adam.step(params, batch_result.grads);
            epoch_loss += batch_result.loss;
            ++batches;
        }
        EpochMetric metric;
        metric.epoch = epoch;
        metric.loss = epoch_loss / static_cast<double>(batches);
        metric.score = classifier_accuracy(test, arch, cfg.seed);
        history.epochs.push_back(metric);
    }
    history.final_score = history.epochs.empty() ? 0.0 : history.epochs.back().score;
    return history;
}

// ---------------------------------------------------------------------------
// VAE
// ---------------------------------------------------------------------------

VaeHistory train_vae(std::span<const DiscreteMeasure> dataset, Architecture& encoder,
                     Architecture& decoder, const VaeConfig& vae_cfg, const TrainConfig& cfg) {
    if (dataset.empty()) throw InvalidInput("train_vae: empty dataset");
    const std::size_t latent = static_cast<std::size_t>(vae_cfg.latent_dim);
    encoder.validate(dataset.front().dim(), true);
    decoder.validate(latent, false);

    std::vector<Tensor*> params = encoder.parameters();
    const std::size_t encoder_count = params.size();
    for (Tensor* p : decoder.parameters()) params.push_back(p);
    AdamState adam(params, AdamConfig{.lr = cfg.lr});

    SeededRng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    VaeHistory history;
    int global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0, epoch_recon = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const std::span<const std::size_t> batch{order.data() + start, stop - start};
            const int step_id = global_step;
            const auto per_example = [&, step_id](std::size_t idx) {
                const DiscreteMeasure& input = dataset[idx];
                Tape tape;
                std::vector<Var> pvars = make_param_vars(tape, encoder);
                const std::vector<Var> dec_vars = make_param_vars(tape, decoder);
                pvars.insert(pvars.end(), dec_vars.begin(), dec_vars.end());

                SeededRng noise_rng(step_seed(cfg.seed, step_id, idx));
                const TapeActivation enc_out = tape_forward(
                    tape, encoder, std::span<const Var>(pvars.data(), encoder_count),
                    tape_activation(tape, input), noise_rng);
                Var mean = tape.slice_cols(enc_out.atoms, 0, latent);
                Var logvar = tape.slice_cols(enc_out.atoms, latent, 2 * latent);

                const Tensor xi = noise_rng.normal_tensor({1, latent}, 0.0, 1.0);
                Var z = tape.add(mean, tape.mul_const(tape.exp(tape.scale(logvar, 0.5)), xi));

                TapeActivation code;
                code.is_measure = false;
                code.atoms = z;
                code.weights = {1.0};
                const TapeActivation dec_out = tape_forward(
                    tape, decoder,
                    std::span<const Var>(pvars.data() + encoder_count,
                                         pvars.size() - encoder_count),
                    code, noise_rng);

                const Tensor dec_weights = Tensor::vector(dec_out.weights);
                Var reconstruction = sinkhorn_divergence_tape(
                    tape, dec_out.atoms, dec_weights, tape.constant(input.points()),
                    input.weights(), cfg.sinkhorn);

                // KL(N(mean, exp(logvar)) || N(0, I)) =
                //   (||mean||^2 + sum exp(logvar) - sum logvar - L) / 2
                Var kl = tape.scale(
                    tape.sub(tape.add(tape.norm2(mean), tape.sum(tape.exp(logvar))),
                             tape.add(tape.sum(logvar),
                                      tape.constant(Tensor::vector(
                                          {static_cast<double>(latent)})))),
                    0.5);
                Var loss = tape.add(reconstruction, tape.scale(kl, vae_cfg.kl_weight));
                tape.backward(loss);

                ExampleResult r;
                r.loss = tape.value(loss)[0];
                r.aux = tape.value(reconstruction)[0];
                r.grads.reserve(pvars.size());
                for (const Var& v : pvars) r.grads.push_back(tape.grad(v));
                return r;
            };
            const ExampleResult batch_result = run_batch(batch, cfg.threads, per_example, params);
            adam.step(params, batch_result.grads);
            history.step_losses.push_back(batch_result.loss);
            epoch_loss += batch_result.loss;
            epoch_recon += batch_result.aux;
            ++batches;
            ++global_step;
            if (vae_cfg.eval_every > 0 && global_step % vae_cfg.eval_every == 0) {
                history.eval_divergences.push_back(vae_reconstruction_divergence(
                    encoder, decoder, dataset.front(), vae_cfg, cfg.sinkhorn,
                    cfg.seed ^ 0x5eedULL));
            }
        }
        history.epochs.push_back(EpochMetric{epoch, epoch_loss / static_cast<double>(batches),
                                             epoch_recon / static_cast<double>(batches)});
    }
    return history;
}

DiscreteMeasure vae_decode(const Architecture& decoder, const Tensor& code,
                           std::uint64_t seed) {
    SeededRng rng(seed);
    return forward(decoder, Activation::from_vector(code), rng).measure();
}

double vae_reconstruction_divergence(const Architecture& encoder, const Architecture& decoder,
                                     const DiscreteMeasure& example, const VaeConfig& vae_cfg,
                                     const SinkhornConfig& sinkhorn, std::uint64_t eval_seed) {
    const std::size_t latent = static_cast<std::size_t>(vae_cfg.latent_dim);
    SeededRng rng(eval_seed);
    const Tensor enc_out =
        forward(encoder, Activation::from_measure(example), rng).vec();
    if (enc_out.size() != 2 * latent) {
        throw InvalidInput("vae_reconstruction_divergence: encoder output width mismatch");
    }
    const Tensor xi = rng.normal_tensor({latent}, 0.0, 1.0);
    Tensor code({latent});
    for (std::size_t k = 0; k < latent; ++k) {
        code[k] = enc_out[k] + std::exp(0.5 * enc_out[latent + k]) * xi[k];
    }
    const DiscreteMeasure recon =
        forward(decoder, Activation::from_vector(code), rng).measure();
    return sinkhorn_divergence(recon, example, sinkhorn);
}

// ---------------------------------------------------------------------------
// predictor
// ---------------------------------------------------------------------------

double predictor_mean_divergence(std::span<const FlockSample> data, const Architecture& arch,
                                 const SinkhornConfig& sinkhorn, std::uint64_t seed) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        SeededRng rng(step_seed(seed, -2, i));
        const DiscreteMeasure pred =
            forward(arch, Activation::from_measure(data[i].input), rng).measure();
        total += sinkhorn_divergence(pred, data[i].target, sinkhorn);
    }
    return total / static_cast<double>(data.size());
}

TrainHistory train_predictor(std::span<const FlockSample> train,
                             std::span<const FlockSample> test, Architecture& arch,
                             const TrainConfig& cfg) {
    if (train.empty()) throw InvalidInput("train_predictor: empty training set");
    arch.validate(train.front().input.dim(), true);

    const std::vector<Tensor*> params = arch.parameters();
    AdamState adam(params, AdamConfig{.lr = cfg.lr});
    SeededRng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const std::span<const std::size_t> batch{order.data() + start, stop - start};
            const auto per_example = [&](std::size_t idx) {
                const FlockSample& ex = train[idx];
                Tape tape;
                const std::vector<Var> pvars = make_param_vars(tape, arch);
                SeededRng fwd_rng(step_seed(cfg.seed, epoch, idx));
                const TapeActivation out =
                    tape_forward(tape, arch, pvars, tape_activation(tape, ex.input), fwd_rng);
                Var loss = sinkhorn_divergence_tape(
                    tape, out.atoms, Tensor::vector(out.weights),
                    tape.constant(ex.target.points()), ex.target.weights(), cfg.sinkhorn);
                tape.backward(loss);
                ExampleResult r;
                r.loss = tape.value(loss)[0];
                r.grads.reserve(pvars.size());
                for (const Var& v : pvars) r.grads.push_back(tape.grad(v));
                return r;
            };
            const ExampleResult batch_result = run_batch(batch, cfg.threads, per_example, params);
            adam.step(params, batch_result.grads);
            epoch_loss += batch_result.loss;
            ++batches;
        }
        EpochMetric metric;
        metric.epoch = epoch;
        metric.loss = epoch_loss / static_cast<double>(batches);
        metric.score = predictor_mean_divergence(test, arch, cfg.sinkhorn, cfg.seed);
        history.epochs.push_back(metric);
    }
    history.final_score = history.epochs.empty() ? 0.0 : history.epochs.back().score;
    return history;
}

// ---------------------------------------------------------------------------
// reference architectures and synthetic data
// ---------------------------------------------------------------------------

Architecture default_classifier_arch(std::size_t input_dim, std::size_t classes,
                                     std::span<const std::size_t> widths, SeededRng& rng) {
    std::vector<std::size_t> w(widths.begin(), widths.end());
    if (w.size() != 3) throw InvalidInput("default_classifier_arch: expected three widths");
    Architecture arch;
    arch.mode = Mode::Discriminative;
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::Both, input_dim, {}, w[0], OutputActivation::Relu, rng)});
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::SecondOnly, w[0], {}, w[1], OutputActivation::Relu, rng)});
    arch.layers.push_back(DenseLayer{xavier_linear(rng, w[1], w[2]), OutputActivation::Relu});
    arch.layers.push_back(
        DenseLayer{xavier_linear(rng, w[2], classes), OutputActivation::Identity});
    return arch;
}

Architecture default_predictor_arch(std::span<const std::size_t> widths, SeededRng& rng) {
    Architecture arch;
    arch.mode = Mode::Predictive;
    std::vector<std::size_t> chain;
    chain.push_back(4);  // phase space (positions, velocities) in the plane
    chain.insert(chain.end(), widths.begin(), widths.end());
    chain.push_back(2);  // limit positions
    for (std::size_t l = 0; l + 1 < chain.size(); ++l) {
        const bool last = l + 2 == chain.size();
        arch.layers.push_back(ElementaryBlockLayer{InteractionMap(
            Dependence::Both, chain[l], {}, chain[l + 1],
            last ? OutputActivation::Identity : OutputActivation::Relu, rng)});
    }
    return arch;
}

Architecture default_vae_encoder(std::size_t input_dim, const VaeConfig& cfg, SeededRng& rng) {
    Architecture arch;
    arch.mode = Mode::Discriminative;
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::Both, input_dim, {}, 16, OutputActivation::Relu, rng)});
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::SecondOnly, 16, {}, 16, OutputActivation::Relu, rng)});
    arch.layers.push_back(DenseLayer{xavier_linear(rng, 16, 16), OutputActivation::Relu});
    arch.layers.push_back(DenseLayer{xavier_linear(rng, 16, 8), OutputActivation::Relu});
    arch.layers.push_back(DenseLayer{
        xavier_linear(rng, 8, 2 * static_cast<std::size_t>(cfg.latent_dim)),
        OutputActivation::Identity});
    return arch;
}

Architecture default_vae_decoder(std::size_t output_dim, const VaeConfig& cfg, SeededRng& rng) {
    const std::size_t latent = static_cast<std::size_t>(cfg.latent_dim);
    Architecture arch;
    arch.mode = Mode::Generative;
    arch.layers.push_back(NoiseConcatLayer{cfg.noise_dim, NoiseKind::Gaussian,
                                           cfg.decoder_atoms});
    arch.layers.push_back(ElementaryBlockLayer{InteractionMap(
        Dependence::Both, latent + cfg.noise_dim, {}, 16, OutputActivation::Relu, rng)});
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::Both, 16, {}, 16, OutputActivation::Relu, rng)});
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::FirstOnly, 16, {}, 8, OutputActivation::Relu, rng)});
    arch.layers.push_back(ElementaryBlockLayer{
        InteractionMap(Dependence::FirstOnly, 8, {}, output_dim, OutputActivation::Identity,
                       rng)});
    return arch;
}

std::vector<LabeledMeasure> synthetic_blob_ring(SeededRng& rng, std::size_t examples,
                                                std::size_t atoms) {
    std::vector<LabeledMeasure> data;
    data.reserve(examples);
    for (std::size_t e = 0; e < examples; ++e) {
        const int label = static_cast<int>(e % 2);
        Tensor pts({atoms, 2});
        for (std::size_t i = 0; i < atoms; ++i) {
            if (label == 0) {
                pts.at(i, 0) = rng.normal(0.0, 0.35);
                pts.at(i, 1) = rng.normal(0.0, 0.35);
            } else {
                const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                const double radius = 1.0 + rng.normal(0.0, 0.08);
                pts.at(i, 0) = radius * std::cos(angle);
                pts.at(i, 1) = radius * std::sin(angle);
            }
        }
        data.push_back({uniform_on(std::move(pts)), label});
    }
    return data;
}

}  // namespace sdn
