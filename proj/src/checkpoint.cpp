#include "sdn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace sdn {

using nlohmann::json;

namespace {

const char* dependence_name(Dependence d) {
    switch (d) {
        case Dependence::Both: return "both";
        case Dependence::FirstOnly: return "first_only";
        case Dependence::SecondOnly: return "second_only";
    }
    return "both";
}

Dependence dependence_from(const std::string& s) {
    if (s == "both") return Dependence::Both;
    if (s == "first_only") return Dependence::FirstOnly;
    if (s == "second_only") return Dependence::SecondOnly;
    throw InvalidInput("checkpoint: unknown dependence '" + s + "'");
}

const char* activation_name(OutputActivation a) {
    return a == OutputActivation::Relu ? "relu" : "identity";
}

OutputActivation activation_from(const std::string& s) {
    if (s == "relu") return OutputActivation::Relu;
    if (s == "identity") return OutputActivation::Identity;
    throw InvalidInput("checkpoint: unknown activation '" + s + "'");
}

const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Predictive: return "predictive";
        case Mode::Discriminative: return "discriminative";
        case Mode::Generative: return "generative";
    }
    return "predictive";
}

Mode mode_from(const std::string& s) {
    if (s == "predictive") return Mode::Predictive;
    if (s == "discriminative") return Mode::Discriminative;
    if (s == "generative") return Mode::Generative;
    throw InvalidInput("checkpoint: unknown mode '" + s + "'");
}

json linear_to_json(const LinearLayer& lin) {
    return json{{"out", lin.weight.rows()},
                {"in", lin.weight.cols()},
                {"weight", lin.weight.values()},
                {"bias", lin.bias.values()}};
}

LinearLayer linear_from_json(const json& obj) {
    const std::size_t out = obj.at("out").get<std::size_t>();
    const std::size_t in = obj.at("in").get<std::size_t>();
    return LinearLayer{Tensor({out, in}, obj.at("weight").get<std::vector<double>>()),
                       Tensor({out}, obj.at("bias").get<std::vector<double>>())};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     std::uint64_t seed) {
    json root;
    root["format_version"] = kCheckpointFormatVersion;
    root["prng"] = {{"algorithm", SeededRng::algorithm()}, {"seed", seed}};
    root["mode"] = mode_name(arch.mode);
    json layers = json::array();
    for (const Layer& layer : arch.layers) {
        json obj;
        if (const auto* eb = std::get_if<ElementaryBlockLayer>(&layer)) {
            obj["kind"] = "elementary";
            obj["dependence"] = dependence_name(eb->map.dependence());
            obj["point_dim"] = eb->map.point_dim();
            obj["out_activation"] = activation_name(eb->map.out_activation());
            obj["locality_radius"] = eb->locality_radius;
            json linears = json::array();
            for (const auto& lin : eb->map.layers()) linears.push_back(linear_to_json(lin));
            obj["linears"] = std::move(linears);
        } else if (const auto* st = std::get_if<SelfTensorizeLayer>(&layer)) {
            obj["kind"] = "self_tensorize";
            obj["order"] = st->order;
        } else if (const auto* nc = std::get_if<NoiseConcatLayer>(&layer)) {
            obj["kind"] = "noise_concat";
            obj["dim"] = nc->dim;
            obj["dist"] = nc->kind == NoiseKind::Uniform01 ? "uniform01" : "gaussian";
            obj["atom_count"] = nc->atom_count;
        } else {
            const auto& dl = std::get<DenseLayer>(layer);
            obj["kind"] = "dense";
            obj["activation"] = activation_name(dl.activation);
            obj["linear"] = linear_to_json(dl.lin);
        }
        layers.push_back(std::move(obj));
    }
    root["layers"] = std::move(layers);

    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << root.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    if (root.at("format_version").get<int>() != kCheckpointFormatVersion) {
        throw InvalidInput("checkpoint: unsupported format version");
    }
    Checkpoint ckpt;
    ckpt.seed = root.at("prng").at("seed").get<std::uint64_t>();
    ckpt.arch.mode = mode_from(root.at("mode").get<std::string>());
    for (const json& obj : root.at("layers")) {
        const std::string kind = obj.at("kind").get<std::string>();
        if (kind == "elementary") {
            std::vector<LinearLayer> linears;
            for (const json& lin : obj.at("linears")) linears.push_back(linear_from_json(lin));
            InteractionMap map(dependence_from(obj.at("dependence").get<std::string>()),
                               obj.at("point_dim").get<std::size_t>(), std::move(linears),
                               activation_from(obj.at("out_activation").get<std::string>()));
            ckpt.arch.layers.push_back(
                ElementaryBlockLayer{std::move(map), obj.at("locality_radius").get<double>()});
        } else if (kind == "self_tensorize") {
            ckpt.arch.layers.push_back(SelfTensorizeLayer{obj.at("order").get<int>()});
        } else if (kind == "noise_concat") {
            const std::string dist = obj.at("dist").get<std::string>();
            if (dist != "uniform01" && dist != "gaussian") {
                throw InvalidInput("checkpoint: unknown noise distribution '" + dist + "'");
            }
            ckpt.arch.layers.push_back(NoiseConcatLayer{
                obj.at("dim").get<std::size_t>(),
                dist == "uniform01" ? NoiseKind::Uniform01 : NoiseKind::Gaussian,
                obj.at("atom_count").get<std::size_t>()});
        } else if (kind == "dense") {
            ckpt.arch.layers.push_back(
                DenseLayer{linear_from_json(obj.at("linear")),
                           activation_from(obj.at("activation").get<std::string>())});
        } else {
            throw InvalidInput("checkpoint: unknown layer kind '" + kind + "'");
        }
    }
    return ckpt;
}

}  // namespace sdn
