// Command-line front end: simulation, dataset generation, training,
// evaluation, and the verification suites. Every run writes its full
// configuration (flags + seed) to <out>/config.json so results are
// reproducible from the recorded file alone.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdn/checkpoint.hpp"
#include "sdn/flocking.hpp"
#include "sdn/measure_io.hpp"
#include "sdn/train.hpp"
#include "sdn/transport.hpp"
#include "sdn/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SDN_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    return 1;
}

void write_config(const fs::path& out_dir, const json& config) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "config.json");
    if (!out) throw sdn::InvalidInput("cannot write " + (out_dir / "config.json").string());
    out << config.dump(2) << '\n';
}

void write_metrics(const fs::path& out_dir, const std::vector<sdn::EpochMetric>& epochs,
                   const char* score_name) {
    std::ofstream out(out_dir / "metrics.jsonl");
    for (const auto& e : epochs) {
        out << json{{"epoch", e.epoch}, {"loss", e.loss}, {score_name, e.score}}.dump()
            << '\n';
    }
}

std::vector<std::size_t> parse_widths(const std::string& csv) {
    std::vector<std::size_t> widths;
    std::size_t begin = 0;
    while (begin <= csv.size()) {
        const std::size_t comma = csv.find(',', begin);
        const std::string token = csv.substr(begin, comma - begin);
        if (!token.empty()) widths.push_back(static_cast<std::size_t>(std::stoul(token)));
        if (comma == std::string::npos) break;
        begin = comma + 1;
    }
    if (widths.empty()) throw sdn::InvalidInput("--widths: empty list");
    return widths;
}

std::vector<sdn::FlockScenario> sample_scenarios(const sdn::SeededRng& rng, int count,
                                                 std::size_t particles) {
    std::vector<sdn::FlockScenario> scenarios;
    scenarios.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        sdn::SeededRng pick = rng.split(1000 + static_cast<std::uint64_t>(i));
        const std::size_t groups = 2 + pick.next_u64() % 3;
        sdn::FlockScenario scenario;
        const std::size_t base = particles / groups;
        for (std::size_t g = 0; g < groups; ++g) {
            scenario.flock_sizes.push_back(
                g + 1 == groups ? particles - base * (groups - 1) : base);
        }
        scenarios.push_back(std::move(scenario));
    }
    return scenarios;
}

// --- IDX (raw MNIST-style) readers ----------------------------------------

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw sdn::InvalidInput("idx file truncated");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<sdn::Tensor> read_idx_images(const fs::path& path, std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sdn::InvalidInput("cannot open " + path.string());
    if (read_be32(in) != 0x00000803u) {
        throw sdn::InvalidInput(path.string() + ": not an idx3-ubyte image file");
    }
    const std::size_t count = read_be32(in);
    const std::size_t rows = read_be32(in);
    const std::size_t cols = read_be32(in);
    const std::size_t take = limit > 0 ? std::min(limit, count) : count;
    std::vector<sdn::Tensor> images;
    images.reserve(take);
    std::vector<unsigned char> buffer(rows * cols);
    for (std::size_t i = 0; i < take; ++i) {
        in.read(reinterpret_cast<char*>(buffer.data()),
                static_cast<std::streamsize>(buffer.size()));
        if (!in) throw sdn::InvalidInput(path.string() + ": truncated image data");
        sdn::Tensor img({rows, cols});
        for (std::size_t k = 0; k < buffer.size(); ++k) {
            img[k] = static_cast<double>(buffer[k]) / 255.0;
        }
        images.push_back(std::move(img));
    }
    return images;
}

std::vector<int> read_idx_labels(const fs::path& path, std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sdn::InvalidInput("cannot open " + path.string());
    if (read_be32(in) != 0x00000801u) {
        throw sdn::InvalidInput(path.string() + ": not an idx1-ubyte label file");
    }
    const std::size_t count = read_be32(in);
    const std::size_t take = limit > 0 ? std::min(limit, count) : count;
    std::vector<int> labels(take);
    for (std::size_t i = 0; i < take; ++i) {
        char byte;
        in.read(&byte, 1);
        if (!in) throw sdn::InvalidInput(path.string() + ": truncated label data");
        labels[i] = static_cast<int>(static_cast<unsigned char>(byte));
    }
    return labels;
}

std::vector<sdn::LabeledMeasure> load_labeled(const fs::path& path) {
    std::vector<sdn::LabeledMeasure> data;
    for (auto& rec : sdn::read_measures_jsonl(path)) {
        if (!rec.label) {
            throw sdn::InvalidInput(path.string() + ": record without a label");
        }
        data.push_back({std::move(rec.measure), *rec.label});
    }
    return data;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep networks on discrete probability measures"};
    app.require_subcommand(1);

    // ---- simulate-flock ----
    auto* sim = app.add_subcommand("simulate-flock", "integrate one flocking scenario");
    std::uint64_t sim_seed = 1;
    std::size_t sim_particles = 720;
    int sim_flocks = 4;
    double sim_m = 0.6, sim_dt = 0.01, sim_stop = 1e-3, sim_max_time = 200.0;
    int sim_record = 10;
    std::string sim_integrator = "rk4";
    std::string sim_out = "out/simulate";
    sim->add_option("--seed", sim_seed, "rng seed");
    sim->add_option("--n-particles", sim_particles, "total particle count");
    sim->add_option("--flocks", sim_flocks, "number of groups (2-4)")->check(CLI::Range(2, 4));
    sim->add_option("--m", sim_m, "interaction exponent");
    sim->add_option("--dt", sim_dt, "integrator step");
    sim->add_option("--integrator", sim_integrator, "euler | rk4")
        ->check(CLI::IsMember({"euler", "rk4"}));
    sim->add_option("--stop-tol", sim_stop, "velocity dispersion threshold");
    sim->add_option("--max-time", sim_max_time, "time horizon");
    sim->add_option("--record-every", sim_record, "snapshot stride")->check(CLI::PositiveNumber);
    sim->add_option("--out", sim_out, "output directory");

    // ---- gen-flock-data ----
    auto* gen = app.add_subcommand("gen-flock-data", "generate (input, limit) measure pairs");
    std::uint64_t gen_seed = 1;
    int gen_scenarios = 200;
    std::size_t gen_particles = 720;
    double gen_m = 0.6, gen_dt = 0.01, gen_max_time = 200.0;
    int gen_threads = 0;
    std::string gen_out = "out/flock-data";
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--scenarios", gen_scenarios, "number of scenarios")
        ->check(CLI::PositiveNumber);
    gen->add_option("--n-particles", gen_particles, "particles per scenario");
    gen->add_option("--m", gen_m, "interaction exponent");
    gen->add_option("--dt", gen_dt, "integrator step");
    gen->add_option("--max-time", gen_max_time, "time horizon");
    gen->add_option("--threads", gen_threads, "worker threads (0: SDN_THREADS or 1)");
    gen->add_option("--out", gen_out, "output directory");

    // ---- train-classify ----
    auto* clf = app.add_subcommand("train-classify", "train a point-cloud classifier");
    std::uint64_t clf_seed = 1;
    int clf_epochs = 30, clf_batch = 16, clf_threads = 0;
    double clf_lr = 1e-2;
    std::string clf_widths = "10,64,32";
    std::string clf_train, clf_test;
    int clf_synthetic = 0;
    std::size_t clf_atoms = 20;
    std::string clf_out = "out/classify";
    clf->add_option("--seed", clf_seed, "rng seed");
    clf->add_option("--epochs", clf_epochs, "training epochs")->check(CLI::PositiveNumber);
    clf->add_option("--batch", clf_batch, "batch size")->check(CLI::PositiveNumber);
    clf->add_option("--lr", clf_lr, "learning rate");
    clf->add_option("--widths", clf_widths, "comma list: block, summary, dense widths");
    clf->add_option("--train", clf_train, "labeled measures (jsonl)");
    clf->add_option("--test", clf_test, "labeled measures (jsonl)");
    clf->add_option("--synthetic", clf_synthetic,
                    "generate N blob-vs-ring examples instead of --train/--test");
    clf->add_option("--atoms", clf_atoms, "atoms per synthetic cloud");
    clf->add_option("--threads", clf_threads, "worker threads (0: SDN_THREADS or 1)");
    clf->add_option("--out", clf_out, "output directory");

    // ---- train-vae ----
    auto* vae = app.add_subcommand("train-vae", "train a measure autoencoder");
    std::uint64_t vae_seed = 1;
    int vae_epochs = 20, vae_batch = 8, vae_threads = 0;
    double vae_lr = 2e-3, vae_kl = 1e-3, vae_eps = -1.0;
    int vae_latent = 2, vae_unroll = 50;
    std::size_t vae_atoms = 100, vae_noise_dim = 2;
    std::string vae_data;
    int vae_synthetic = 0;
    std::size_t vae_cloud_atoms = 50;
    std::string vae_out = "out/vae";
    vae->add_option("--seed", vae_seed, "rng seed");
    vae->add_option("--epochs", vae_epochs, "training epochs")->check(CLI::PositiveNumber);
    vae->add_option("--batch", vae_batch, "batch size")->check(CLI::PositiveNumber);
    vae->add_option("--lr", vae_lr, "learning rate");
    vae->add_option("--latent", vae_latent, "latent dimension")->check(CLI::PositiveNumber);
    vae->add_option("--decoder-atoms", vae_atoms, "atoms in decoded measures");
    vae->add_option("--noise-dim", vae_noise_dim, "decoder noise dimension");
    vae->add_option("--kl-weight", vae_kl, "weight of the KL term");
    vae->add_option("--epsilon", vae_eps, "sinkhorn epsilon (<=0: scale-aware)");
    vae->add_option("--max-iter", vae_unroll, "unrolled sinkhorn iterations")
        ->check(CLI::PositiveNumber);
    vae->add_option("--data", vae_data, "measures (jsonl)");
    vae->add_option("--synthetic", vae_synthetic, "generate N synthetic clouds instead");
    vae->add_option("--atoms", vae_cloud_atoms, "atoms per synthetic cloud");
    vae->add_option("--threads", vae_threads, "worker threads (0: SDN_THREADS or 1)");
    vae->add_option("--out", vae_out, "output directory");

    // ---- train-predict ----
    auto* prd = app.add_subcommand("train-predict", "train the flocking limit predictor");
    std::uint64_t prd_seed = 1;
    int prd_epochs = 3, prd_batch = 10, prd_threads = 0, prd_holdout = 50;
    double prd_lr = 5e-3, prd_eps = -1.0;
    int prd_p = 2, prd_unroll = 50;
    std::string prd_widths = "10,20,40,60";
    std::string prd_data;
    std::string prd_out = "out/predict";
    prd->add_option("--seed", prd_seed, "rng seed");
    prd->add_option("--epochs", prd_epochs, "training epochs")->check(CLI::PositiveNumber);
    prd->add_option("--batch", prd_batch, "batch size")->check(CLI::PositiveNumber);
    prd->add_option("--lr", prd_lr, "learning rate");
    prd->add_option("--widths", prd_widths, "comma list of block widths");
    prd->add_option("--epsilon", prd_eps, "sinkhorn epsilon (<=0: scale-aware)");
    prd->add_option("--p", prd_p, "cost exponent")->check(CLI::IsMember({1, 2}));
    prd->add_option("--max-iter", prd_unroll, "unrolled sinkhorn iterations")
        ->check(CLI::PositiveNumber);
    prd->add_option("--data", prd_data, "paired flock dataset (jsonl)")->required();
    prd->add_option("--holdout", prd_holdout, "held-out sample count")
        ->check(CLI::PositiveNumber);
    prd->add_option("--threads", prd_threads, "worker threads (0: SDN_THREADS or 1)");
    prd->add_option("--out", prd_out, "output directory");

    // ---- eval ----
    auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string evl_kind = "classify";
    std::string evl_ckpt, evl_data;
    std::uint64_t evl_seed = 1;
    double evl_eps = -1.0;
    int evl_p = 2;
    std::string evl_out = "out/eval";
    evl->add_option("--kind", evl_kind, "classify | predict")
        ->check(CLI::IsMember({"classify", "predict"}));
    evl->add_option("--checkpoint", evl_ckpt, "checkpoint json")->required();
    evl->add_option("--data", evl_data, "dataset (jsonl)")->required();
    evl->add_option("--seed", evl_seed, "rng seed");
    evl->add_option("--epsilon", evl_eps, "sinkhorn epsilon (<=0: scale-aware)");
    evl->add_option("--p", evl_p, "cost exponent")->check(CLI::IsMember({1, 2}));
    evl->add_option("--out", evl_out, "output directory");

    // ---- verify ----
    auto* ver = app.add_subcommand("verify", "run the property verification suites");
    std::string ver_suite = "all";
    std::uint64_t ver_seed = 1;
    int ver_threads = 0;
    std::string ver_out = "out/verify";
    ver->add_option("--suite", ver_suite,
                    "lipschitz|discretization|sinkhorn|gradients|universality|flocking|all")
        ->check(CLI::IsMember({"lipschitz", "discretization", "sinkhorn", "gradients",
                               "universality", "flocking", "all"}));
    ver->add_option("--seed", ver_seed, "rng seed");
    ver->add_option("--threads", ver_threads, "worker threads (0: SDN_THREADS or 1)");
    ver->add_option("--out", ver_out, "output directory");

    // ---- ingest-images ----
    auto* ing = app.add_subcommand("ingest-images", "convert idx images to measure jsonl");
    std::string ing_images, ing_labels;
    double ing_rho = 0.5;
    std::size_t ing_points = 256, ing_limit = 0;
    std::string ing_out = "out/ingest";
    ing->add_option("--images", ing_images, "idx3-ubyte image file")->required();
    ing->add_option("--labels", ing_labels, "idx1-ubyte label file (optional)");
    ing->add_option("--rho", ing_rho, "intensity threshold");
    ing->add_option("--points", ing_points, "atoms per measure");
    ing->add_option("--limit", ing_limit, "max images (0: all)");
    ing->add_option("--out", ing_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints usage or the failing flag
        return code == 0 ? 0 : 1;      // --help exits 0; parse errors are user errors
    }

    try {
        if (sim->parsed()) {
            const fs::path out_dir{sim_out};
            write_config(out_dir,
                         json{{"command", "simulate-flock"}, {"seed", sim_seed},
                              {"n_particles", sim_particles}, {"flocks", sim_flocks},
                              {"m", sim_m}, {"dt", sim_dt}, {"integrator", sim_integrator},
                              {"stop_tol", sim_stop}, {"max_time", sim_max_time},
                              {"record_every", sim_record},
                              {"prng", sdn::SeededRng::algorithm()}});
            sdn::SeededRng rng(sim_seed);
            sdn::FlockScenario scenario;
            const std::size_t groups = static_cast<std::size_t>(sim_flocks);
            const std::size_t base = sim_particles / groups;
            for (std::size_t g = 0; g < groups; ++g) {
                scenario.flock_sizes.push_back(
                    g + 1 == groups ? sim_particles - base * (groups - 1) : base);
            }
            sdn::FlockConfig cfg;
            cfg.m = sim_m;
            cfg.dt = sim_dt;
            cfg.integrator = sim_integrator == "rk4" ? sdn::Integrator::Rk4
                                                     : sdn::Integrator::Euler;
            cfg.stop_tol = sim_stop;
            cfg.max_time = sim_max_time;
            const sdn::FlockState initial = sdn::sample_initial_state(rng, scenario);
            const sdn::FlockTrajectory trajectory =
                sdn::simulate(initial, cfg, sim_record);
            sdn::write_trajectory_csv(out_dir / "trajectory.csv", trajectory);
            std::cout << "converged=" << (trajectory.converged ? "true" : "false")
                      << " snapshots=" << trajectory.states.size()
                      << " final_dispersion=" << trajectory.final_dispersion << "\n";
        } else if (gen->parsed()) {
            const fs::path out_dir{gen_out};
            const int threads = resolve_threads(gen_threads);
            write_config(out_dir,
                         json{{"command", "gen-flock-data"}, {"seed", gen_seed},
                              {"scenarios", gen_scenarios}, {"n_particles", gen_particles},
                              {"m", gen_m}, {"dt", gen_dt}, {"max_time", gen_max_time},
                              {"threads", threads}, {"prng", sdn::SeededRng::algorithm()}});
            const sdn::SeededRng rng(gen_seed);
            const auto scenarios = sample_scenarios(rng, gen_scenarios, gen_particles);
            sdn::FlockConfig cfg;
            cfg.m = gen_m;
            cfg.dt = gen_dt;
            cfg.max_time = gen_max_time;
            const auto samples = sdn::generate_dataset(rng, scenarios, cfg, threads);
            sdn::write_flock_dataset(out_dir / "dataset.jsonl", samples);
            std::cout << "wrote " << samples.size() << " sample pairs\n";
        } else if (clf->parsed()) {
            const fs::path out_dir{clf_out};
            const int threads = resolve_threads(clf_threads);
            const auto widths = parse_widths(clf_widths);
            write_config(out_dir,
                         json{{"command", "train-classify"}, {"seed", clf_seed},
                              {"epochs", clf_epochs}, {"batch", clf_batch}, {"lr", clf_lr},
                              {"widths", widths}, {"train", clf_train}, {"test", clf_test},
                              {"synthetic", clf_synthetic}, {"atoms", clf_atoms},
                              {"threads", threads}, {"prng", sdn::SeededRng::algorithm()}});
            std::vector<sdn::LabeledMeasure> train_set, test_set;
            if (clf_synthetic > 0) {
                sdn::SeededRng data_rng(clf_seed ^ 0xda7aULL);
                train_set = sdn::synthetic_blob_ring(
                    data_rng, static_cast<std::size_t>(clf_synthetic), clf_atoms);
                test_set = sdn::synthetic_blob_ring(
                    data_rng, static_cast<std::size_t>(clf_synthetic) / 2, clf_atoms);
            } else {
                if (clf_train.empty() || clf_test.empty()) {
                    std::cerr << "error: provide --train/--test or --synthetic\n";
                    return 1;
                }
                train_set = load_labeled(clf_train);
                test_set = load_labeled(clf_test);
            }
            int classes = 0;
            for (const auto& ex : train_set) classes = std::max(classes, ex.label + 1);
            sdn::SeededRng arch_rng(clf_seed ^ 0x1234ULL);
            sdn::Architecture arch = sdn::default_classifier_arch(
                train_set.front().measure.dim(), static_cast<std::size_t>(classes), widths,
                arch_rng);
            sdn::TrainConfig cfg;
            cfg.epochs = clf_epochs;
            cfg.batch = clf_batch;
            cfg.lr = clf_lr;
            cfg.seed = clf_seed;
            cfg.threads = threads;
            const sdn::TrainHistory history =
                sdn::train_classifier(train_set, test_set, arch, cfg);
            write_metrics(out_dir, history.epochs, "accuracy");
            sdn::save_checkpoint(out_dir / "checkpoint.json", arch, clf_seed);
            std::cout << "final test accuracy " << history.final_score << "\n";
        } else if (vae->parsed()) {
            const fs::path out_dir{vae_out};
            const int threads = resolve_threads(vae_threads);
            write_config(out_dir,
                         json{{"command", "train-vae"}, {"seed", vae_seed},
                              {"epochs", vae_epochs}, {"batch", vae_batch}, {"lr", vae_lr},
                              {"latent", vae_latent}, {"decoder_atoms", vae_atoms},
                              {"noise_dim", vae_noise_dim}, {"kl_weight", vae_kl},
                              {"epsilon", vae_eps}, {"unroll_iters", vae_unroll},
                              {"data", vae_data}, {"synthetic", vae_synthetic},
                              {"threads", threads}, {"prng", sdn::SeededRng::algorithm()}});
            std::vector<sdn::DiscreteMeasure> dataset;
            if (vae_synthetic > 0) {
                sdn::SeededRng data_rng(vae_seed ^ 0xda7aULL);
                for (auto& ex : sdn::synthetic_blob_ring(
                         data_rng, static_cast<std::size_t>(vae_synthetic), vae_cloud_atoms)) {
                    dataset.push_back(std::move(ex.measure));
                }
            } else {
                if (vae_data.empty()) {
                    std::cerr << "error: provide --data or --synthetic\n";
                    return 1;
                }
                for (auto& rec : sdn::read_measures_jsonl(vae_data)) {
                    dataset.push_back(std::move(rec.measure));
                }
            }
            sdn::VaeConfig vcfg;
            vcfg.latent_dim = vae_latent;
            vcfg.decoder_atoms = vae_atoms;
            vcfg.kl_weight = vae_kl;
            vcfg.noise_dim = vae_noise_dim;
            sdn::SeededRng arch_rng(vae_seed ^ 0x5678ULL);
            sdn::Architecture encoder =
                sdn::default_vae_encoder(dataset.front().dim(), vcfg, arch_rng);
            sdn::Architecture decoder =
                sdn::default_vae_decoder(dataset.front().dim(), vcfg, arch_rng);
            sdn::TrainConfig cfg;
            cfg.epochs = vae_epochs;
            cfg.batch = vae_batch;
            cfg.lr = vae_lr;
            cfg.seed = vae_seed;
            cfg.threads = threads;
            cfg.sinkhorn.epsilon = vae_eps;
            cfg.sinkhorn.unroll_iters = vae_unroll;
            const sdn::VaeHistory history =
                sdn::train_vae(dataset, encoder, decoder, vcfg, cfg);
            write_metrics(out_dir, history.epochs, "divergence");
            sdn::save_checkpoint(out_dir / "encoder.json", encoder, vae_seed);
            sdn::save_checkpoint(out_dir / "decoder.json", decoder, vae_seed);
            std::cout << "final loss " << history.epochs.back().loss << "\n";
        } else if (prd->parsed()) {
            const fs::path out_dir{prd_out};
            const int threads = resolve_threads(prd_threads);
            const auto widths = parse_widths(prd_widths);
            write_config(out_dir,
                         json{{"command", "train-predict"}, {"seed", prd_seed},
                              {"epochs", prd_epochs}, {"batch", prd_batch}, {"lr", prd_lr},
                              {"widths", widths}, {"epsilon", prd_eps}, {"p", prd_p},
                              {"unroll_iters", prd_unroll}, {"data", prd_data},
                              {"holdout", prd_holdout}, {"threads", threads},
                              {"prng", sdn::SeededRng::algorithm()}});
            const auto samples = sdn::read_flock_dataset(prd_data);
            if (samples.size() <= static_cast<std::size_t>(prd_holdout)) {
                std::cerr << "error: dataset smaller than --holdout\n";
                return 1;
            }
            const std::size_t train_count = samples.size() - prd_holdout;
            const std::span<const sdn::FlockSample> train_split{samples.data(), train_count};
            const std::span<const sdn::FlockSample> test_split{samples.data() + train_count,
                                                               static_cast<std::size_t>(
                                                                   prd_holdout)};
            sdn::SeededRng arch_rng(prd_seed ^ 0x9999ULL);
            sdn::Architecture arch = sdn::default_predictor_arch(widths, arch_rng);
            sdn::TrainConfig cfg;
            cfg.epochs = prd_epochs;
            cfg.batch = prd_batch;
            cfg.lr = prd_lr;
            cfg.seed = prd_seed;
            cfg.threads = threads;
            cfg.sinkhorn.epsilon = prd_eps;
            cfg.sinkhorn.p = prd_p;
            cfg.sinkhorn.unroll_iters = prd_unroll;
            const double untrained = sdn::predictor_mean_divergence(
                test_split, arch, cfg.sinkhorn, cfg.seed);
            const sdn::TrainHistory history =
                sdn::train_predictor(train_split, test_split, arch, cfg);
            write_metrics(out_dir, history.epochs, "divergence");
            sdn::save_checkpoint(out_dir / "checkpoint.json", arch, prd_seed);
            std::cout << "untrained divergence " << untrained << ", trained "
                      << history.final_score << "\n";
        } else if (evl->parsed()) {
            const fs::path out_dir{evl_out};
            write_config(out_dir, json{{"command", "eval"}, {"kind", evl_kind},
                                       {"checkpoint", evl_ckpt}, {"data", evl_data},
                                       {"seed", evl_seed}, {"epsilon", evl_eps},
                                       {"p", evl_p}});
            const sdn::Checkpoint ckpt = sdn::load_checkpoint(evl_ckpt);
            json result;
            if (evl_kind == "classify") {
                const auto data = load_labeled(evl_data);
                const double accuracy =
                    sdn::classifier_accuracy(data, ckpt.arch, evl_seed);
                result = {{"examples", data.size()}, {"accuracy", accuracy}};
                std::cout << "accuracy " << accuracy << "\n";
            } else {
                const auto samples = sdn::read_flock_dataset(evl_data);
                sdn::SinkhornConfig sk;
                sk.epsilon = evl_eps;
                sk.p = evl_p;
                const double divergence = sdn::predictor_mean_divergence(
                    samples, ckpt.arch, sk, evl_seed);
                result = {{"examples", samples.size()}, {"mean_divergence", divergence}};
                std::cout << "mean divergence " << divergence << "\n";
            }
            std::ofstream out(out_dir / "eval.json");
            out << result.dump(2) << '\n';
        } else if (ver->parsed()) {
            const fs::path out_dir{ver_out};
            const int threads = resolve_threads(ver_threads);
            write_config(out_dir, json{{"command", "verify"}, {"suite", ver_suite},
                                       {"seed", ver_seed}, {"threads", threads}});
            const sdn::SuiteReport report = sdn::run_suite(ver_suite, ver_seed, threads);
            sdn::write_suite_json(out_dir / (report.suite + ".json"), report);
            for (const auto& check : report.checks) {
                std::cout << (check.pass ? "PASS" : "FAIL") << "  " << check.name
                          << "  (observed " << check.max_ratio << ", bound " << check.bound
                          << ", " << check.trials << " trials, " << check.seconds << " s)\n";
            }
            std::cout << (report.pass ? "PASS" : "FAIL") << "  suite " << report.suite
                      << "\n";
            if (!report.pass) return 2;
        } else if (ing->parsed()) {
            const fs::path out_dir{ing_out};
            write_config(out_dir, json{{"command", "ingest-images"}, {"images", ing_images},
                                       {"labels", ing_labels}, {"rho", ing_rho},
                                       {"points", ing_points}, {"limit", ing_limit}});
            const auto images = read_idx_images(ing_images, ing_limit);
            std::vector<int> labels;
            if (!ing_labels.empty()) labels = read_idx_labels(ing_labels, ing_limit);
            if (!labels.empty() && labels.size() != images.size()) {
                std::cerr << "error: image/label counts differ\n";
                return 1;
            }
            std::vector<sdn::MeasureRecord> records;
            records.reserve(images.size());
            for (std::size_t i = 0; i < images.size(); ++i) {
                sdn::MeasureRecord rec{sdn::ingest_image(images[i], ing_rho, ing_points),
                                       std::nullopt};
                if (!labels.empty()) rec.label = labels[i];
                records.push_back(std::move(rec));
            }
            sdn::write_measures_jsonl(out_dir / "measures.jsonl", records);
            std::cout << "wrote " << records.size() << " measures\n";
        }
    } catch (const sdn::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sdn::Error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
