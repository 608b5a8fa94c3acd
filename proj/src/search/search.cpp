#include "tractokit/search/search.hpp"

#include <algorithm>
#include <cmath>

#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit {

std::size_t StreamlineIndex::CellHash::operator()(const CellKey& c) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int64_t v : {std::int64_t{c.x}, std::int64_t{c.y}, std::int64_t{c.z}}) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
}

StreamlineIndex::CellKey StreamlineIndex::cell_of(const Vec3& p) const {
    const auto f = [this](double v) {
        return static_cast<std::int32_t>(std::floor(v / cell_size_));
    };
    return {f(p.x), f(p.y), f(p.z)};
}

StreamlineIndex::StreamlineIndex(std::vector<Streamline> streamlines, double cell_size)
    : streamlines_(std::move(streamlines)), cell_size_(cell_size) {
    if (cell_size_ <= 0.0) throw InvalidInputError("cell_size must be positive");
    barycenters_.reserve(streamlines_.size());
    for (std::size_t i = 0; i < streamlines_.size(); ++i) {
        if (streamlines_[i].size() != kPointCount)
            throw InvalidInputError("index entries must have exactly 40 points");
        barycenters_.push_back(barycenter(streamlines_[i]));
        const CellKey c = cell_of(barycenters_.back());
        grid_[c].push_back(static_cast<std::uint32_t>(i));
        if (i == 0) {
            bbox_min_ = bbox_max_ = c;
        } else {
            bbox_min_ = {std::min(bbox_min_.x, c.x), std::min(bbox_min_.y, c.y),
                         std::min(bbox_min_.z, c.z)};
            bbox_max_ = {std::max(bbox_max_.x, c.x), std::max(bbox_max_.y, c.y),
                         std::max(bbox_max_.z, c.z)};
        }
    }
}

namespace {

struct HeapEntry {
    double dist;
    std::uint32_t id;
    // max-heap on (dist, id): the lexicographically largest pair is the first
    // to be displaced, which makes low ids win distance ties
    bool operator<(const HeapEntry& o) const {
        return dist != o.dist ? dist < o.dist : id < o.id;
    }
};

}  // namespace

NeighborSet StreamlineIndex::knn_mdf(const Streamline& query, std::size_t k,
                                     std::uint32_t exclude_id) const {
    if (k < 1) throw InvalidInputError("k must be at least 1");
    if (query.size() != kPointCount)
        throw InvalidInputError("query must have exactly 40 points");

    NeighborSet out;
    if (streamlines_.empty()) return out;

    const Vec3 qbary = barycenter(query);
    const CellKey qcell = cell_of(qbary);

    // Outermost ring that can still hold an occupied cell.
    const auto cheb = [&](const CellKey& c) {
        return std::max({std::abs(c.x - qcell.x), std::abs(c.y - qcell.y),
                         std::abs(c.z - qcell.z)});
    };
    const std::int32_t max_ring =
        std::max(cheb(bbox_min_), std::max(cheb(bbox_max_),
                 std::max(cheb({bbox_min_.x, bbox_min_.y, bbox_max_.z}),
                 std::max(cheb({bbox_min_.x, bbox_max_.y, bbox_min_.z}),
                 std::max(cheb({bbox_max_.x, bbox_min_.y, bbox_min_.z}),
                 std::max(cheb({bbox_min_.x, bbox_max_.y, bbox_max_.z}),
                 std::max(cheb({bbox_max_.x, bbox_min_.y, bbox_max_.z}),
                          cheb({bbox_max_.x, bbox_max_.y, bbox_min_.z}))))))));

    std::vector<HeapEntry> heap;  // std::*_heap max-heap of current best k
    heap.reserve(k + 1);

    const auto visit_cell = [&](std::int32_t cx, std::int32_t cy, std::int32_t cz) {
        const auto it = grid_.find(CellKey{cx, cy, cz});
        if (it == grid_.end()) return;
        for (const std::uint32_t id : it->second) {
            if (id == exclude_id) continue;
            if (heap.size() == k) {
                // barycenter distance lower-bounds MDF; strict > keeps ties alive
                if (distance(qbary, barycenters_[id]) > heap.front().dist) continue;
            }
            const HeapEntry cand{mdf_distance(query, streamlines_[id]), id};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
    };

    for (std::int32_t r = 0; r <= max_ring; ++r) {
        if (heap.size() == k) {
            const double ring_lb = static_cast<double>(r - 1) * cell_size_;
            if (r >= 1 && ring_lb > heap.front().dist) break;
        }
        if (r == 0) {
            visit_cell(qcell.x, qcell.y, qcell.z);
            continue;
        }
        for (std::int32_t dx = -r; dx <= r; ++dx)
            for (std::int32_t dy = -r; dy <= r; ++dy) {
                visit_cell(qcell.x + dx, qcell.y + dy, qcell.z - r);
                visit_cell(qcell.x + dx, qcell.y + dy, qcell.z + r);
            }
        for (std::int32_t dz = -r + 1; dz <= r - 1; ++dz) {
            for (std::int32_t dx = -r; dx <= r; ++dx) {
                visit_cell(qcell.x + dx, qcell.y - r, qcell.z + dz);
                visit_cell(qcell.x + dx, qcell.y + r, qcell.z + dz);
            }
            for (std::int32_t dy = -r + 1; dy <= r - 1; ++dy) {
                visit_cell(qcell.x - r, qcell.y + dy, qcell.z + dz);
                visit_cell(qcell.x + r, qcell.y + dy, qcell.z + dz);
            }
        }
    }

    std::sort_heap(heap.begin(), heap.end());
    out.ids.reserve(heap.size());
    out.distances.reserve(heap.size());
    for (const HeapEntry& e : heap) {
        out.ids.push_back(e.id);
        out.distances.push_back(e.dist);
    }
    return out;
}

StreamlineIndex build_index(std::vector<Streamline> streamlines, double cell_size) {
    return StreamlineIndex(std::move(streamlines), cell_size);
}

NeighborSet radius_search_fss(const NeighborSet& candidates, double radius,
                              std::size_t k_hyper) {
    if (radius <= 0.0) throw InvalidInputError("radius must be positive");
    if (k_hyper < 1) throw InvalidInputError("k_hyper must be at least 1");

    // candidates are already ascending by (distance, id)
    std::size_t within = 0;
    while (within < candidates.size() && candidates.distances[within] <= radius) ++within;

    NeighborSet out;
    const std::size_t take = std::min(k_hyper, candidates.size());
    out.fallback = within < k_hyper;
    for (std::size_t i = 0; i < take; ++i) {
        out.ids.push_back(candidates.ids[i]);
        out.distances.push_back(candidates.distances[i]);
    }
    return out;
}

std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& points, std::size_t p_f,
                                                   std::uint64_t seed) {
    const std::size_t n = points.size();
    if (p_f < 1) throw InvalidInputError("p_f must be at least 1");
    if (p_f > n) throw InvalidInputError("p_f exceeds point count");

    std::vector<std::uint32_t> picked;
    picked.reserve(p_f);
    Rng rng(seed);
    const std::uint32_t first = static_cast<std::uint32_t>(rng.uniform_index(n));
    picked.push_back(first);

    std::vector<double> min_d2(n);
    for (std::size_t i = 0; i < n; ++i)
        min_d2[i] = (points.points[i] - points.points[first]).norm2();

    while (picked.size() < p_f) {
        std::uint32_t best = 0;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (min_d2[i] > best_d2) {  // strict: ties keep the lowest index
                best_d2 = min_d2[i];
                best = static_cast<std::uint32_t>(i);
            }
        picked.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = (points.points[i] - points.points[best]).norm2();
            if (d2 < min_d2[i]) min_d2[i] = d2;
        }
    }
    return picked;
}

std::vector<std::uint32_t> knn_points(const PointCloud& points, const Vec3& center,
                                      std::size_t k) {
    const std::size_t n = points.size();
    if (k < 1) throw InvalidInputError("k must be at least 1");
    if (k > n) throw InvalidInputError("k exceeds point count");

    std::vector<std::pair<double, std::uint32_t>> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = {(points.points[i] - center).norm2(), static_cast<std::uint32_t>(i)};
    std::sort(order.begin(), order.end());
    std::vector<std::uint32_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = order[i].second;
    return out;
}

}  // namespace tractokit
