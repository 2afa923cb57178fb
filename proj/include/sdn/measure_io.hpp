#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sdn/measure.hpp"

namespace sdn {

// One JSONL record: {"points": [[...],...], "weights": [...], "label": k}.
// "weights" is omitted on write (and may be absent on read) when the measure
// is uniform; "label" is optional.
struct MeasureRecord {
    DiscreteMeasure measure;
    std::optional<int> label;
};

std::vector<MeasureRecord> read_measures_jsonl(const std::filesystem::path& path);
void write_measures_jsonl(const std::filesystem::path& path,
                          const std::vector<MeasureRecord>& records);

}  // namespace sdn
