#include "tractokit/model/adapters.hpp"

#include <cstddef>

#include "tractokit/util/error.hpp"

namespace tractokit::model {

// The conversion loops below touch one coordinate member per loop on purpose:
// gcc 11 -O3 vectorizes mixed {x,y,z} narrowing loops incorrectly.

template <typename T>
nn::Tensor<T> descriptor_batch(const std::vector<FiberDescriptor>& ds) {
    if (ds.empty()) throw InvalidInputError("descriptor_batch: empty batch");
    const std::size_t S = ds[0].n;
    for (const auto& d : ds)
        if (d.n != S || d.grid.size() != S * S)
            throw InvalidInputError("descriptor_batch: inconsistent grid side");
    nn::Tensor<T> out(nn::Shape{ds.size(), 3, S, S});
    const std::size_t plane = S * S;
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const Vec3* g = ds[b].grid.data();
        T* dst = out.data.data() + b * 3 * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(g[i].x);
        for (std::size_t i = 0; i < plane; ++i) dst[plane + i] = static_cast<T>(g[i].y);
        for (std::size_t i = 0; i < plane; ++i) dst[2 * plane + i] = static_cast<T>(g[i].z);
    }
    return out;
}

template <typename T>
nn::Tensor<T> cloud_batch(const std::vector<PointCloud>& cs) {
    if (cs.empty()) throw InvalidInputError("cloud_batch: empty batch");
    const std::size_t n = cs[0].size();
    if (n == 0) throw InvalidInputError("cloud_batch: empty cloud");
    for (const auto& c : cs)
        if (c.size() != n) throw InvalidInputError("cloud_batch: inconsistent cloud size");
    nn::Tensor<T> out(nn::Shape{cs.size(), 3, n});
    for (std::size_t b = 0; b < cs.size(); ++b) {
        const Vec3* p = cs[b].points.data();
        T* dst = out.data.data() + b * 3 * n;
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<T>(p[i].x);
        for (std::size_t i = 0; i < n; ++i) dst[n + i] = static_cast<T>(p[i].y);
        for (std::size_t i = 0; i < n; ++i) dst[2 * n + i] = static_cast<T>(p[i].z);
    }
    return out;
}

template <typename T>
nn::Tensor<T> patch_batch(const std::vector<PatchSet>& ps) {
    if (ps.empty()) throw InvalidInputError("patch_batch: empty batch");
    const std::size_t pf = ps[0].p_f, pl = ps[0].p_local;
    if (pf == 0 || pl == 0) throw InvalidInputError("patch_batch: empty patch set");
    for (const auto& p : ps)
        if (p.p_f != pf || p.p_local != pl || p.points.size() != pf * pl)
            throw InvalidInputError("patch_batch: inconsistent patch layout");
    nn::Tensor<T> out(nn::Shape{ps.size(), pf, pl, 3});
    const std::size_t m = pf * pl;
    for (std::size_t b = 0; b < ps.size(); ++b) {
        const Vec3* p = ps[b].points.data();
        T* dst = out.data.data() + b * m * 3;
        for (std::size_t i = 0; i < m; ++i) dst[3 * i] = static_cast<T>(p[i].x);
        for (std::size_t i = 0; i < m; ++i) dst[3 * i + 1] = static_cast<T>(p[i].y);
        for (std::size_t i = 0; i < m; ++i) dst[3 * i + 2] = static_cast<T>(p[i].z);
    }
    return out;
}

#define TRACTOKIT_INSTANTIATE(T)                                              \
    template nn::Tensor<T> descriptor_batch<T>(const std::vector<FiberDescriptor>&); \
    template nn::Tensor<T> cloud_batch<T>(const std::vector<PointCloud>&);            \
    template nn::Tensor<T> patch_batch<T>(const std::vector<PatchSet>&);

TRACTOKIT_INSTANTIATE(float)
TRACTOKIT_INSTANTIATE(double)
#undef TRACTOKIT_INSTANTIATE

}  // namespace tractokit::model
