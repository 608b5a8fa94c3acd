#include "tractokit/repr/representations.hpp"

#include <algorithm>
#include <unordered_map>
#include <utility>

#include "tractokit/util/binio.hpp"
#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit {

namespace {

constexpr std::uint64_t kSeedLocal = 1;
constexpr std::uint64_t kSeedHyper = 2;

struct MergeResult {
    std::vector<Streamline> set;
    std::uint8_t flags = 0;
};

MergeResult merge_core(std::uint32_t query_id, const StreamlineIndex& index,
                       const RepresentationConfig& cfg, bool hyperlocal) {
    if (index.size() == 0)
        throw InvalidInputError("representation query against an empty index");
    if (query_id >= index.size()) throw InvalidInputError("query id outside the index");

    const NeighborSet nb = index.knn_mdf(index.entry(query_id), cfg.k_local, query_id);
    const std::size_t want = hyperlocal ? cfg.k_hyper : cfg.k_local;

    MergeResult r;
    r.set.reserve(want + 1);
    r.set.push_back(index.entry(query_id));
    if (hyperlocal) {
        const NeighborSet hs = radius_search_fss(nb, cfg.radius, cfg.k_hyper);
        if (hs.fallback) r.flags |= kFallbackRadius;
        for (std::uint32_t id : hs.ids) r.set.push_back(index.entry(id));
    } else {
        for (std::uint32_t id : nb.ids) r.set.push_back(index.entry(id));
    }
    while (r.set.size() < want + 1) {
        r.set.push_back(index.entry(query_id));
        r.flags |= kFallbackSelf;
    }
    return r;
}

void quantize_streamline(Streamline& s) { quantize_f32(s.raw(), 3 * s.points.size()); }

}  // namespace

void validate(const RepresentationConfig& cfg) {
    if (cfg.n_s < 2) throw InvalidInputError("n_s must be at least 2");
    if (cfg.m_interp < 2) throw InvalidInputError("m_interp must be at least 2");
    if (cfg.k_local < 1 || cfg.k_hyper < 1)
        throw InvalidInputError("neighbor counts must be at least 1");
    if (cfg.radius <= 0.0) throw InvalidInputError("radius must be positive");
    if (cfg.n_c < 1) throw InvalidInputError("n_c must be at least 1");
    if (cfg.p_f < 1 || cfg.p_local < 1)
        throw InvalidInputError("patch counts must be at least 1");
}

Streamline build_streamline_data(const Streamline& s, std::size_t n_s) {
    return resample(s, n_s);
}

std::vector<Streamline> local_merge_set(std::uint32_t query_id, const StreamlineIndex& index,
                                        const RepresentationConfig& cfg) {
    return merge_core(query_id, index, cfg, false).set;
}

std::vector<Streamline> hyperlocal_merge_set(std::uint32_t query_id, const StreamlineIndex& index,
                                             const RepresentationConfig& cfg) {
    return merge_core(query_id, index, cfg, true).set;
}

PointCloud build_local_pcd(std::uint32_t query_id, const StreamlineIndex& index,
                           const RepresentationConfig& cfg) {
    return to_point_cloud(local_merge_set(query_id, index, cfg), cfg.n_c,
                          mix_seed(cfg.seed, query_id, kSeedLocal));
}

PointCloud build_hyperlocal_pcd(std::uint32_t query_id, const StreamlineIndex& index,
                                const RepresentationConfig& cfg) {
    return to_point_cloud(hyperlocal_merge_set(query_id, index, cfg), cfg.n_c,
                          mix_seed(cfg.seed, query_id, kSeedHyper));
}

PatchSet build_patches(const PointCloud& pcd, const RepresentationConfig& cfg) {
    return build_patches(pcd, cfg, cfg.seed);
}

PatchSet build_patches(const PointCloud& pcd, const RepresentationConfig& cfg,
                       std::uint64_t seed) {
    if (pcd.size() < cfg.p_f)
        throw InvalidInputError("cloud has fewer points than requested patches");
    if (pcd.size() < cfg.p_local)
        throw InvalidInputError("cloud has fewer points than a patch holds");

    const std::vector<std::uint32_t> centers = farthest_point_sampling(pcd, cfg.p_f, seed);

    PatchSet ps;
    ps.p_f = cfg.p_f;
    ps.p_local = cfg.p_local;
    ps.centers.reserve(cfg.p_f);
    ps.points.reserve(cfg.p_f * cfg.p_local);
    for (std::uint32_t ci : centers) {
        const Vec3& c = pcd.points[ci];
        ps.centers.push_back(c);
        for (std::uint32_t pi : knn_points(pcd, c, cfg.p_local))
            ps.points.push_back(pcd.points[pi] - c);
    }
    return ps;
}

FiberDescriptor fiber_descriptor(const Streamline& s, std::size_t n_s) {
    if (s.points.size() != n_s)
        throw InvalidInputError("fiber descriptor needs exactly the configured point count");
    const std::size_t n = 2 * n_s;
    FiberDescriptor d;
    d.n = n;
    d.grid.resize(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        Vec3* row = &d.grid[r * n];
        for (std::size_t j = 0; j < n_s; ++j) {
            const Vec3& fwd = s.points[j];
            const Vec3& rev = s.points[n_s - 1 - j];
            if (r % 2 == 0) {
                row[j] = fwd;
                row[n_s + j] = rev;
            } else {
                row[j] = rev;
                row[n_s + j] = fwd;
            }
        }
    }
    return d;
}

bool operator==(const RepresentationSet& a, const RepresentationSet& b) {
    return a.cfg == b.cfg && a.hyperlocal == b.hyperlocal && a.label_names == b.label_names &&
           a.items == b.items;
}

RepresentationSet build_representations(const Dataset& ds, const std::vector<std::uint32_t>& ids,
                                        const RepresentationConfig& cfg, bool hyperlocal) {
    validate(cfg);

    std::unordered_map<std::string, std::uint32_t> subj_slot;
    for (std::uint32_t s = 0; s < ds.subjects.size(); ++s) subj_slot[ds.subjects[s]] = s;

    // full per-subject tractograms: neighbor search never crosses subjects
    std::vector<std::vector<std::uint32_t>> members(ds.subjects.size());
    for (std::uint32_t i = 0; i < ds.streamlines.size(); ++i)
        members[subj_slot.at(ds.streamlines[i].subject_id)].push_back(i);

    struct SubjectIndex {
        StreamlineIndex index;
        std::unordered_map<std::uint32_t, std::uint32_t> local_id;  // dataset id -> entry id
    };
    std::unordered_map<std::uint32_t, SubjectIndex> indexes;
    for (std::uint32_t id : ids) {
        if (id >= ds.streamlines.size()) throw InvalidInputError("streamline id outside dataset");
        const std::uint32_t slot = subj_slot.at(ds.streamlines[id].subject_id);
        if (indexes.count(slot)) continue;
        std::vector<Streamline> interp;
        interp.reserve(members[slot].size());
        std::unordered_map<std::uint32_t, std::uint32_t> local;
        for (std::uint32_t dsid : members[slot]) {
            local[dsid] = static_cast<std::uint32_t>(interp.size());
            interp.push_back(resample(ds.streamlines[dsid].streamline, cfg.m_interp));
        }
        indexes.emplace(slot,
                        SubjectIndex{build_index(std::move(interp), cfg.radius), std::move(local)});
    }

    RepresentationSet rs;
    rs.cfg = cfg;
    rs.hyperlocal = hyperlocal;
    rs.label_names = ds.label_names;
    rs.items.reserve(ids.size());
    for (std::uint32_t id : ids) {
        const LabeledStreamline& ls = ds.streamlines[id];
        const SubjectIndex& si = indexes.at(subj_slot.at(ls.subject_id));
        MergeResult mr = merge_core(si.local_id.at(id), si.index, cfg, hyperlocal);

        RepresentationItem item;
        item.label = ls.label;
        item.flags = mr.flags;
        item.streamline_data = build_streamline_data(ls.streamline, cfg.n_s);
        item.pool = std::move(mr.set);
        quantize_streamline(item.streamline_data);
        for (Streamline& p : item.pool) quantize_streamline(p);
        rs.items.push_back(std::move(item));
    }
    return rs;
}

PointCloud sample_cloud(const RepresentationItem& item, const RepresentationConfig& cfg,
                        std::uint64_t seed) {
    return to_point_cloud(item.pool, cfg.n_c, seed);
}

// --- TREP container ---------------------------------------------------------

namespace {

constexpr std::uint32_t kTrepVersion = 1;

void put_points(ByteWriter& w, const Streamline& s, std::size_t expected, const char* what) {
    if (s.points.size() != expected)
        throw InvalidInputError(std::string("representation item has a mis-sized ") + what);
    for (const Vec3& p : s.points) {
        w.f32(static_cast<float>(p.x));
        w.f32(static_cast<float>(p.y));
        w.f32(static_cast<float>(p.z));
    }
}

Streamline get_points(ByteReader& r, std::size_t count) {
    Streamline s;
    s.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = r.f32();
        const double y = r.f32();
        const double z = r.f32();
        s.points.push_back({x, y, z});
    }
    return s;
}

}  // namespace

void save_representations(const RepresentationSet& rs, const std::string& path) {
    validate(rs.cfg);
    const std::size_t pool_count = (rs.hyperlocal ? rs.cfg.k_hyper : rs.cfg.k_local) + 1;

    ByteWriter w;
    w.bytes("TREP", 4);
    w.u32(kTrepVersion);
    w.u8(rs.hyperlocal ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(rs.cfg.n_s));
    w.u32(static_cast<std::uint32_t>(rs.cfg.m_interp));
    w.u32(static_cast<std::uint32_t>(rs.cfg.k_local));
    w.u32(static_cast<std::uint32_t>(rs.cfg.k_hyper));
    w.f64(rs.cfg.radius);
    w.u32(static_cast<std::uint32_t>(rs.cfg.n_c));
    w.u32(static_cast<std::uint32_t>(rs.cfg.p_f));
    w.u32(static_cast<std::uint32_t>(rs.cfg.p_local));
    w.u64(rs.cfg.seed);
    w.u32(static_cast<std::uint32_t>(rs.label_names.size()));
    for (const std::string& name : rs.label_names) w.str(name);
    w.u32(static_cast<std::uint32_t>(rs.items.size()));
    for (const RepresentationItem& item : rs.items) {
        w.u16(item.label);
        w.u8(item.flags);
        put_points(w, item.streamline_data, rs.cfg.n_s, "streamline data");
        if (item.pool.size() != pool_count)
            throw InvalidInputError("representation item has a mis-sized pool");
        for (const Streamline& p : item.pool) put_points(w, p, rs.cfg.m_interp, "pool entry");
    }
    write_file(path, w.buffer());
}

RepresentationSet load_representations(const std::string& path) {
    const std::vector<char> bytes = read_file(path);
    ByteReader r(bytes);
    r.expect_magic("TREP", 4);
    if (const std::uint32_t v = r.u32(); v != kTrepVersion)
        throw FormatError("unsupported TREP version " + std::to_string(v), 4);

    RepresentationSet rs;
    rs.hyperlocal = r.u8() != 0;
    rs.cfg.n_s = r.u32();
    rs.cfg.m_interp = r.u32();
    rs.cfg.k_local = r.u32();
    rs.cfg.k_hyper = r.u32();
    rs.cfg.radius = r.f64();
    rs.cfg.n_c = r.u32();
    rs.cfg.p_f = r.u32();
    rs.cfg.p_local = r.u32();
    rs.cfg.seed = r.u64();
    validate(rs.cfg);

    const std::uint32_t n_names = r.u32();
    rs.label_names.reserve(n_names);
    for (std::uint32_t i = 0; i < n_names; ++i) rs.label_names.push_back(r.str());

    const std::size_t pool_count = (rs.hyperlocal ? rs.cfg.k_hyper : rs.cfg.k_local) + 1;
    const std::uint32_t n_items = r.u32();
    rs.items.reserve(n_items);
    for (std::uint32_t i = 0; i < n_items; ++i) {
        RepresentationItem item;
        item.label = r.u16();
        if (item.label >= kMaxClasses)
            throw FormatError("label outside the class range", r.offset());
        item.flags = r.u8();
        item.streamline_data = get_points(r, rs.cfg.n_s);
        item.pool.reserve(pool_count);
        for (std::size_t p = 0; p < pool_count; ++p)
            item.pool.push_back(get_points(r, rs.cfg.m_interp));
        rs.items.push_back(std::move(item));
    }
    r.expect_end();
    return rs;
}

}  // namespace tractokit
