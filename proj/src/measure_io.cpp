#include "sdn/measure_io.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

namespace sdn {

using nlohmann::json;

std::vector<MeasureRecord> read_measures_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::vector<MeasureRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto points = obj.at("points").get<std::vector<std::vector<double>>>();
        if (points.empty()) {
            throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                               ": empty point list");
        }
        const std::size_t n = points.size(), d = points.front().size();
        std::vector<double> flat;
        flat.reserve(n * d);
        for (const auto& p : points) {
            if (p.size() != d) {
                throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                                   ": ragged points");
            }
            flat.insert(flat.end(), p.begin(), p.end());
        }
        Tensor pts({n, d}, std::move(flat));
        Tensor w = obj.contains("weights")
                       ? Tensor::vector(obj.at("weights").get<std::vector<double>>())
                       : Tensor::full({n}, 1.0 / static_cast<double>(n));
        MeasureRecord rec{DiscreteMeasure(std::move(pts), std::move(w)), std::nullopt};
        if (obj.contains("label")) rec.label = obj.at("label").get<int>();
        records.push_back(std::move(rec));
    }
    return records;
}

void write_measures_jsonl(const std::filesystem::path& path,
                          const std::vector<MeasureRecord>& records) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    for (const auto& rec : records) {
        const auto& m = rec.measure;
        json obj;
        std::vector<std::vector<double>> points(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto p = m.point(i);
            points[i].assign(p.begin(), p.end());
        }
        obj["points"] = points;
        if (!m.is_uniform(1e-15)) {
            obj["weights"] = m.weights().values();
        }
        if (rec.label) obj["label"] = *rec.label;
        out << obj.dump() << '\n';
    }
}

}  // namespace sdn
