#include "tractokit/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "tractokit/util/binio.hpp"
#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit {

bool operator==(const Dataset& a, const Dataset& b) {
    if (a.subjects != b.subjects || a.label_names != b.label_names ||
        a.provenance != b.provenance || a.streamlines.size() != b.streamlines.size())
        return false;
    for (std::size_t i = 0; i < a.streamlines.size(); ++i) {
        const LabeledStreamline& x = a.streamlines[i];
        const LabeledStreamline& y = b.streamlines[i];
        if (x.label != y.label || x.subject_id != y.subject_id ||
            x.streamline.points != y.streamline.points)
            return false;
    }
    return true;
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::unordered_map<std::string, std::uint32_t> subject_index;
    for (std::size_t i = 0; i < ds.subjects.size(); ++i)
        subject_index[ds.subjects[i]] = static_cast<std::uint32_t>(i);

    std::uint64_t total_points = 0;
    for (const LabeledStreamline& ls : ds.streamlines) {
        if (ls.label >= kMaxClasses)
            throw InvalidInputError("label " + std::to_string(ls.label) + " out of range");
        if (!subject_index.count(ls.subject_id))
            throw InvalidInputError("subject_id \"" + ls.subject_id + "\" not in subject list");
        total_points += ls.streamline.size();
    }

    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(ds.streamlines.size()));
    w.u32(static_cast<std::uint32_t>(ds.subjects.size()));
    w.u64(total_points);
    for (const LabeledStreamline& ls : ds.streamlines)
        w.u32(static_cast<std::uint32_t>(ls.streamline.size()));
    for (const LabeledStreamline& ls : ds.streamlines) w.u16(ls.label);
    for (const LabeledStreamline& ls : ds.streamlines) w.u32(subject_index[ls.subject_id]);
    for (const std::string& s : ds.subjects) w.str(s);
    for (const LabeledStreamline& ls : ds.streamlines)
        for (const Vec3& p : ls.streamline.points) {
            w.f32(static_cast<float>(p.x));
            w.f32(static_cast<float>(p.y));
            w.f32(static_cast<float>(p.z));
        }
    write_file(path, w.buffer());

    nlohmann::json manifest;
    manifest["format"] = "strm-manifest";
    manifest["version"] = kVersion;
    manifest["label_names"] = ds.label_names;
    manifest["provenance"] = ds.provenance;
    manifest["n_streamlines"] = ds.streamlines.size();
    manifest["n_subjects"] = ds.subjects.size();
    write_file(path + ".json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
    const std::vector<char> bytes = read_file(path);
    ByteReader r(bytes);

    Dataset ds;
    r.expect_magic(kMagic, 4);
    {
        const std::size_t at = r.offset();
        const std::uint32_t version = r.u32();
        if (version != kVersion)
            throw FormatError("unsupported version " + std::to_string(version), at);
    }
    const std::uint32_t n_streamlines = r.u32();
    const std::uint32_t n_subjects = r.u32();
    const std::uint64_t total_points = r.u64();

    std::vector<std::uint32_t> point_counts(n_streamlines);
    std::uint64_t point_sum = 0;
    for (std::uint32_t i = 0; i < n_streamlines; ++i) {
        const std::size_t at = r.offset();
        point_counts[i] = r.u32();
        if (point_counts[i] < 2)
            throw FormatError("streamline with fewer than 2 points", at);
        point_sum += point_counts[i];
    }
    if (point_sum != total_points)
        throw FormatError("point-count table does not sum to the header total", r.offset());

    std::vector<std::uint16_t> labels(n_streamlines);
    for (std::uint32_t i = 0; i < n_streamlines; ++i) {
        const std::size_t at = r.offset();
        labels[i] = r.u16();
        if (labels[i] >= kMaxClasses)
            throw FormatError("label " + std::to_string(labels[i]) + " out of range", at);
    }
    std::vector<std::uint32_t> subject_ids(n_streamlines);
    for (std::uint32_t i = 0; i < n_streamlines; ++i) {
        const std::size_t at = r.offset();
        subject_ids[i] = r.u32();
        if (subject_ids[i] >= n_subjects)
            throw FormatError("subject index " + std::to_string(subject_ids[i]) +
                                  " out of range",
                              at);
    }
    ds.subjects.reserve(n_subjects);
    for (std::uint32_t i = 0; i < n_subjects; ++i) ds.subjects.push_back(r.str());

    ds.streamlines.resize(n_streamlines);
    for (std::uint32_t i = 0; i < n_streamlines; ++i) {
        LabeledStreamline& ls = ds.streamlines[i];
        ls.label = labels[i];
        ls.subject_id = ds.subjects[subject_ids[i]];
        ls.streamline.points.resize(point_counts[i]);
        for (Vec3& p : ls.streamline.points) {
            p.x = static_cast<double>(r.f32());
            p.y = static_cast<double>(r.f32());
            p.z = static_cast<double>(r.f32());
        }
    }
    r.expect_end();

    const std::string manifest_path = path + ".json";
    const std::vector<char> mbytes = read_file(manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mbytes.begin(), mbytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("manifest is not valid JSON: " + std::string(e.what()),
                          static_cast<std::size_t>(e.byte));
    }
    try {
        ds.label_names = manifest.at("label_names").get<std::vector<std::string>>();
        ds.provenance = manifest.value("provenance", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest missing required fields: " + std::string(e.what()), 0);
    }
    if (ds.label_names.size() > kMaxClasses)
        throw FormatError("manifest lists more than 43 label names", 0);
    for (const LabeledStreamline& ls : ds.streamlines)
        if (!ds.label_names.empty() && ls.label >= ds.label_names.size())
            throw FormatError("label " + std::to_string(ls.label) +
                                  " has no name in the manifest",
                              0);
    return ds;
}

SplitSpec split_subjectwise(const Dataset& ds, double train_ratio, double val_ratio,
                            double test_ratio, std::uint64_t seed) {
    const double ratios[3] = {train_ratio, val_ratio, test_ratio};
    double sum = 0.0;
    std::size_t nonzero = 0;
    for (double r : ratios) {
        if (r < 0.0 || !std::isfinite(r)) throw InvalidInputError("split ratios must be >= 0");
        sum += r;
        nonzero += r > 0.0;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw InvalidInputError("split ratios must sum to 1");
    if (nonzero == 0) throw InvalidInputError("at least one split ratio must be positive");
    const std::size_t n = ds.subjects.size();
    if (n < nonzero)
        throw InvalidInputError("fewer subjects than nonzero splits");

    std::vector<std::string> shuffled = ds.subjects;
    Rng rng(seed);
    rng.shuffle(shuffled);

    // largest-remainder apportionment; remainder ties favor the earlier split
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double quota = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(quota));
        remainders[i] = quota - std::floor(quota);
        assigned += counts[i];
    }
    std::size_t leftover = n - assigned;
    while (leftover > 0) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (remainders[i] > remainders[best]) best = i;
        counts[best] += 1;
        remainders[best] = -1.0;
        --leftover;
    }

    SplitSpec spec;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) spec.train.push_back(shuffled[pos++]);
    for (std::size_t i = 0; i < counts[1]; ++i) spec.val.push_back(shuffled[pos++]);
    for (std::size_t i = 0; i < counts[2]; ++i) spec.test.push_back(shuffled[pos++]);
    return spec;
}

std::vector<std::size_t> indices_for_subjects(const Dataset& ds,
                                              const std::vector<std::string>& subjects) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.streamlines.size(); ++i)
        if (std::find(subjects.begin(), subjects.end(), ds.streamlines[i].subject_id) !=
            subjects.end())
            out.push_back(i);
    return out;
}

}  // namespace tractokit
