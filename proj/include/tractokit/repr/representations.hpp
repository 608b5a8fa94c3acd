#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractokit/core/streamline.hpp"
#include "tractokit/data/dataset.hpp"
#include "tractokit/search/search.hpp"

namespace tractokit {

// Parameters of the hierarchical input representations.
struct RepresentationConfig {
    std::size_t n_s = 15;       // points per streamline-data row
    std::size_t m_interp = 40;  // interpolated point count fed to neighbor search
    std::size_t k_local = 20;   // MDF neighbors for the local cloud
    std::size_t k_hyper = 5;    // streamlines picked by the radius search
    double radius = 6.0;        // radius-search threshold, mm
    std::size_t n_c = 220;      // points sampled into a cluster cloud
    std::size_t p_f = 64;       // patches per cloud
    std::size_t p_local = 16;   // points per patch
    std::uint64_t seed = 0;

    bool operator==(const RepresentationConfig&) const = default;
};

void validate(const RepresentationConfig& cfg);

// p_f patches of p_local points each, gathered by kNN around farthest-point
// centers. Stored points are center-relative; add the center back to recover
// cloud coordinates.
struct PatchSet {
    std::size_t p_f = 0;
    std::size_t p_local = 0;
    std::vector<Vec3> points;   // p_f * p_local, patch-major
    std::vector<Vec3> centers;  // p_f

    const Vec3& at(std::size_t patch, std::size_t i) const { return points[patch * p_local + i]; }
};

// (2n, 2n) grid of points built from an n-point streamline: even rows are
// [s | reverse(s)], odd rows are [reverse(s) | s].
struct FiberDescriptor {
    std::size_t n = 0;        // rows == cols == 2 * n_s
    std::vector<Vec3> grid;   // n * n, row-major

    const Vec3& at(std::size_t r, std::size_t c) const { return grid[r * n + c]; }
};

// Resample to the fixed streamline-data point count.
Streamline build_streamline_data(const Streamline& s, std::size_t n_s = 15);

// The query's index entry followed by its k_local nearest neighbors by MDF
// (ascending). When the index holds fewer streamlines, the query is repeated
// to keep the merge set at exactly k_local + 1 entries.
std::vector<Streamline> local_merge_set(std::uint32_t query_id, const StreamlineIndex& index,
                                        const RepresentationConfig& cfg);

// The query plus the k_hyper radius-search picks among its k_local nearest
// candidates, nearest-filled when too few fall within the radius and
// self-repeated when the index itself is too small. Exactly k_hyper + 1
// entries, query first.
std::vector<Streamline> hyperlocal_merge_set(std::uint32_t query_id, const StreamlineIndex& index,
                                             const RepresentationConfig& cfg);

// Merge-and-sample clouds over the two neighborhood sizes. Sampling is seeded
// per query from cfg.seed, so a fixed (query, index, seed) is bit-stable.
PointCloud build_local_pcd(std::uint32_t query_id, const StreamlineIndex& index,
                           const RepresentationConfig& cfg);
PointCloud build_hyperlocal_pcd(std::uint32_t query_id, const StreamlineIndex& index,
                                const RepresentationConfig& cfg);

// FPS centers + kNN gather + per-patch centering over a cluster cloud.
PatchSet build_patches(const PointCloud& pcd, const RepresentationConfig& cfg);
PatchSet build_patches(const PointCloud& pcd, const RepresentationConfig& cfg,
                       std::uint64_t seed);

// Flip-augmented grid image of one streamline; s must have exactly n_s points.
FiberDescriptor fiber_descriptor(const Streamline& s, std::size_t n_s = 15);

// Diagnostics for RepresentationItem::flags.
inline constexpr std::uint8_t kFallbackRadius = 1;  // radius not honored, nearest-filled
inline constexpr std::uint8_t kFallbackSelf = 2;    // merge set padded with the query

// One streamline's precomputed inputs: the fixed-size streamline data plus
// the merge pool its cluster clouds are sampled from (query first). Clouds
// and patches are drawn per epoch with sample_cloud/build_patches.
struct RepresentationItem {
    std::uint16_t label = 0;
    std::uint8_t flags = 0;
    Streamline streamline_data;    // n_s points
    std::vector<Streamline> pool;  // (k + 1) streamlines of m_interp points

    bool operator==(const RepresentationItem&) const = default;
};

struct RepresentationSet {
    RepresentationConfig cfg;
    bool hyperlocal = true;  // pool source: hyperlocal (k_hyper) or local (k_local)
    std::vector<std::string> label_names;
    std::vector<RepresentationItem> items;
};

bool operator==(const RepresentationSet& a, const RepresentationSet& b);

// Build items for the given dataset indices, in order. Neighbor search runs
// within each streamline's own subject — one subject is one tractogram — so
// pools never mix subjects. All stored coordinates are rounded to f32 so the
// set survives save/load bit-exactly.
RepresentationSet build_representations(const Dataset& ds, const std::vector<std::uint32_t>& ids,
                                        const RepresentationConfig& cfg, bool hyperlocal);

// Draw one cluster cloud (n_c points) from an item's pool.
PointCloud sample_cloud(const RepresentationItem& item, const RepresentationConfig& cfg,
                        std::uint64_t seed);

// TREP container round trip; format documented in docs/formats.md.
void save_representations(const RepresentationSet& rs, const std::string& path);
RepresentationSet load_representations(const std::string& path);

}  // namespace tractokit
