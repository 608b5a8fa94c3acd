#pragma once

#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "tractokit/core/streamline.hpp"

namespace tractokit {

// Query result: dataset indices with their MDF distances, ascending.
struct NeighborSet {
    std::vector<std::uint32_t> ids;
    std::vector<double> distances;
    // true when a radius search could not honor its radius and filled the
    // result with nearest candidates instead
    bool fallback = false;

    std::size_t size() const { return ids.size(); }
};

// Immutable MDF search structure: resampled streamlines with precomputed
// barycenters, hashed into a uniform grid by barycenter. Pruning uses
// MDF(a,b) >= |barycenter(a) - barycenter(b)| (mean of norms bounds the norm
// of the mean, for both the direct and flipped alignments), which keeps every
// query exact — equal to a brute-force scan.
class StreamlineIndex {
public:
    static constexpr std::size_t kPointCount = 40;
    static constexpr std::uint32_t kNoExclude = std::numeric_limits<std::uint32_t>::max();

    StreamlineIndex(std::vector<Streamline> streamlines, double cell_size);

    std::size_t size() const { return streamlines_.size(); }
    double cell_size() const { return cell_size_; }
    const Streamline& entry(std::size_t id) const { return streamlines_[id]; }
    const Vec3& entry_barycenter(std::size_t id) const { return barycenters_[id]; }

    // k nearest entries by MDF, ascending, ties broken by lowest id.
    // exclude_id skips one entry (pass the query's own id when it is indexed).
    NeighborSet knn_mdf(const Streamline& query, std::size_t k,
                        std::uint32_t exclude_id = kNoExclude) const;

private:
    struct CellKey {
        std::int32_t x, y, z;
        bool operator==(const CellKey&) const = default;
    };
    struct CellHash {
        std::size_t operator()(const CellKey& c) const;
    };

    CellKey cell_of(const Vec3& p) const;

    std::vector<Streamline> streamlines_;
    std::vector<Vec3> barycenters_;
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid_;
    double cell_size_ = 0.0;
    CellKey bbox_min_{0, 0, 0}, bbox_max_{0, 0, 0};  // over occupied cells
};

// Convenience: index over streamlines resampled to 40 points.
StreamlineIndex build_index(std::vector<Streamline> streamlines, double cell_size);

// FSS-style radius search restricted to an already-retrieved candidate set:
// of the candidates within `radius` (by their stored MDF distance), the
// k_hyper nearest. When fewer than k_hyper qualify the result is filled with
// the nearest remaining candidates and flagged `fallback`.
NeighborSet radius_search_fss(const NeighborSet& candidates, double radius,
                              std::size_t k_hyper);

// Greedy farthest point sampling. The first pick is drawn by the seeded RNG;
// each later pick maximizes the minimum distance to everything already
// picked, ties broken by lowest index.
std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& points, std::size_t p_f,
                                                   std::uint64_t seed);

// Indices of the k points nearest to `center`, ascending by distance, ties
// broken by lowest index.
std::vector<std::uint32_t> knn_points(const PointCloud& points, const Vec3& center,
                                      std::size_t k);

}  // namespace tractokit
