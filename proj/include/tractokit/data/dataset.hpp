#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractokit/core/streamline.hpp"

namespace tractokit {

// Maximum number of classes; the last valid label id is reserved for "other".
inline constexpr std::uint16_t kMaxClasses = 43;

struct Dataset {
    std::vector<LabeledStreamline> streamlines;
    std::vector<std::string> subjects;
    std::vector<std::string> label_names;  // display names; "other" last when present
    std::string provenance;

    std::size_t size() const { return streamlines.size(); }
};

bool operator==(const Dataset& a, const Dataset& b);

struct SplitSpec {
    std::vector<std::string> train, val, test;
};

// STRM container: binary payload at `path` plus the human-readable manifest
// at `path + ".json"` carrying label names and provenance. Coordinates are
// stored as little-endian f32; callers holding doubles get them quantized on
// save (the generator already emits f32-exact values, making round trips
// bit-exact). Throws FormatError with a byte offset on malformed input and
// IoError on filesystem failure.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Shuffle subjects by seed, then partition by ratio with largest-remainder
// rounding (remainder ties giving the earlier split priority). Throws
// InvalidInputError when fewer subjects exist than nonzero splits or ratios
// are not positive with sum 1.
SplitSpec split_subjectwise(const Dataset& ds, double train_ratio, double val_ratio,
                            double test_ratio, std::uint64_t seed);

// Subset view helpers.
std::vector<std::size_t> indices_for_subjects(const Dataset& ds,
                                              const std::vector<std::string>& subjects);

}  // namespace tractokit
