#include "tractokit/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tractokit/util/binio.hpp"
#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit {

namespace {

// Curve templates are stored as control polygons: 4 points for cubic Bezier
// classes, 2 for straight-fiber classes.
struct Template {
    std::vector<Vec3> ctrl;
    bool linear = false;
};

Vec3 bezier_eval(const std::vector<Vec3>& c, double t) {
    if (c.size() == 2) return c[0] * (1.0 - t) + c[1] * t;
    const double u = 1.0 - t;
    return c[0] * (u * u * u) + c[1] * (3.0 * u * u * t) + c[2] * (3.0 * u * t * t) +
           c[3] * (t * t * t);
}

Streamline sample_curve(const std::vector<Vec3>& ctrl, std::size_t n) {
    Streamline s;
    s.points.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
        s.points.push_back(bezier_eval(ctrl, static_cast<double>(j) / (n - 1)));
    return s;
}

Vec3 mirror_x(const Vec3& p) { return {-p.x, p.y, p.z}; }

Template mirror_x(const Template& t) {
    Template m = t;
    for (Vec3& p : m.ctrl) p = mirror_x(p);
    return m;
}

Vec3 random_in_box(Rng& rng, double extent) {
    return {rng.uniform_range(-extent, extent), rng.uniform_range(-extent, extent),
            rng.uniform_range(-extent, extent)};
}

double polygon_length(const std::vector<Vec3>& c) {
    double len = 0.0;
    for (std::size_t i = 1; i < c.size(); ++i) len += distance(c[i], c[i - 1]);
    return len;
}

struct Rigid {
    double rot[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vec3 shift;

    Vec3 apply(const Vec3& p) const {
        return {rot[0][0] * p.x + rot[0][1] * p.y + rot[0][2] * p.z + shift.x,
                rot[1][0] * p.x + rot[1][1] * p.y + rot[1][2] * p.z + shift.y,
                rot[2][0] * p.x + rot[2][1] * p.y + rot[2][2] * p.z + shift.z};
    }
};

Rigid random_rigid(Rng& rng, double rot_sigma, double trans_sigma) {
    // axis-angle via Rodrigues
    Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    const double norm = axis.norm();
    axis = norm > 0.0 ? axis * (1.0 / norm) : Vec3{1, 0, 0};
    const double angle = rng.normal(0.0, rot_sigma);
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Rigid r;
    r.rot[0][0] = t * axis.x * axis.x + c;
    r.rot[0][1] = t * axis.x * axis.y - s * axis.z;
    r.rot[0][2] = t * axis.x * axis.z + s * axis.y;
    r.rot[1][0] = t * axis.x * axis.y + s * axis.z;
    r.rot[1][1] = t * axis.y * axis.y + c;
    r.rot[1][2] = t * axis.y * axis.z - s * axis.x;
    r.rot[2][0] = t * axis.x * axis.z - s * axis.y;
    r.rot[2][1] = t * axis.y * axis.z + s * axis.x;
    r.rot[2][2] = t * axis.z * axis.z + c;
    r.shift = {rng.normal(0.0, trans_sigma), rng.normal(0.0, trans_sigma),
               rng.normal(0.0, trans_sigma)};
    return r;
}

void validate(const SyntheticConfig& cfg) {
    if (cfg.n_classes < 1) throw InvalidInputError("n_classes must be at least 1");
    const std::size_t with_other = cfg.n_classes + (cfg.outlier_fraction > 0.0 ? 1 : 0);
    if (with_other > kMaxClasses)
        throw InvalidInputError("n_classes exceeds the 43-class label space");
    if (2 * cfg.mirrored_pairs + cfg.linear_classes > cfg.n_classes)
        throw InvalidInputError("mirrored_pairs and linear_classes exceed n_classes");
    if (cfg.outlier_fraction < 0.0 || cfg.outlier_fraction >= 1.0)
        throw InvalidInputError("outlier_fraction must lie in [0, 1)");
    if (cfg.jitter_sigma < 0.0) throw InvalidInputError("jitter_sigma must be >= 0");
    if (cfg.subjects < 1 || cfg.streamlines_per_subject < 1)
        throw InvalidInputError("need at least one subject and one streamline");
    if (cfg.min_points < 2 || cfg.max_points < cfg.min_points)
        throw InvalidInputError("point-count range invalid");
    if (cfg.extent <= 0.0) throw InvalidInputError("extent must be positive");
}

std::vector<Template> make_templates(const SyntheticConfig& cfg, Rng& rng) {
    std::vector<Template> templates(cfg.n_classes);
    std::vector<Streamline> accepted40;  // resampled previews for separation checks

    double threshold = cfg.min_template_mdf;
    const std::size_t first_linear = cfg.n_classes - cfg.linear_classes;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        const bool is_mirror_slot = c < 2 * cfg.mirrored_pairs && (c % 2 == 1);
        if (is_mirror_slot) {
            templates[c] = mirror_x(templates[c - 1]);
            accepted40.push_back(resample(sample_curve(templates[c].ctrl, 12), 40));
            continue;
        }
        const bool linear = c >= first_linear;
        const bool has_mirror = c < 2 * cfg.mirrored_pairs;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 0 && attempt % 200 == 0) threshold *= 0.9;
            Template t;
            t.linear = linear;
            const std::size_t n_ctrl = linear ? 2 : 4;
            t.ctrl.clear();
            for (std::size_t i = 0; i < n_ctrl; ++i)
                t.ctrl.push_back(random_in_box(rng, cfg.extent));
            if (polygon_length(t.ctrl) < cfg.extent) continue;  // reject stubby curves

            const Streamline preview = resample(sample_curve(t.ctrl, 12), 40);
            bool ok = true;
            for (const Streamline& prev : accepted40)
                if (mdf_distance(preview, prev) < threshold) {
                    ok = false;
                    break;
                }
            // a mirrored class must also stay clear of its own reflection
            if (ok && has_mirror) {
                const Streamline mprev = resample(sample_curve(mirror_x(t).ctrl, 12), 40);
                if (mdf_distance(preview, mprev) < threshold) ok = false;
            }
            if (!ok) continue;
            templates[c] = t;
            accepted40.push_back(preview);
            break;
        }
    }
    return templates;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);

    Dataset ds;
    const bool has_other = cfg.outlier_fraction > 0.0;
    const std::uint16_t other_label = static_cast<std::uint16_t>(cfg.n_classes);

    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        char buf[32];
        if (c < 2 * cfg.mirrored_pairs)
            std::snprintf(buf, sizeof buf, "tract_%02zu_%c", c / 2, c % 2 == 0 ? 'l' : 'r');
        else if (c >= cfg.n_classes - cfg.linear_classes)
            std::snprintf(buf, sizeof buf, "linear_%02zu", c);
        else
            std::snprintf(buf, sizeof buf, "tract_%02zu", c);
        ds.label_names.push_back(buf);
    }
    if (has_other) ds.label_names.push_back("other");

    Rng template_rng(mix_seed(cfg.seed, 1));
    const std::vector<Template> templates = make_templates(cfg, template_rng);

    const std::size_t n_outliers = static_cast<std::size_t>(
        std::llround(cfg.outlier_fraction * static_cast<double>(cfg.streamlines_per_subject)));
    const std::size_t n_regular = cfg.streamlines_per_subject - n_outliers;

    ds.streamlines.reserve(cfg.subjects * cfg.streamlines_per_subject);
    for (std::size_t s = 0; s < cfg.subjects; ++s) {
        char sbuf[32];
        std::snprintf(sbuf, sizeof sbuf, "subj_%03zu", s);
        ds.subjects.push_back(sbuf);

        Rng subject_rng(mix_seed(cfg.seed, 2, s));
        const Rigid rigid = random_rigid(subject_rng, cfg.subject_rotation_sigma,
                                         cfg.subject_translation_sigma);

        for (std::size_t i = 0; i < cfg.streamlines_per_subject; ++i) {
            Rng rng(mix_seed(subject_rng.next_u64(), i));
            const bool outlier = i >= n_regular;

            std::vector<Vec3> ctrl;
            std::uint16_t label;
            if (outlier) {
                label = other_label;
                for (int j = 0; j < 4; ++j) ctrl.push_back(random_in_box(rng, cfg.extent));
            } else {
                label = static_cast<std::uint16_t>(i % cfg.n_classes);
                ctrl = templates[label].ctrl;
                for (Vec3& p : ctrl)
                    p += Vec3{rng.normal(0.0, cfg.jitter_sigma),
                              rng.normal(0.0, cfg.jitter_sigma),
                              rng.normal(0.0, cfg.jitter_sigma)};
            }
            for (Vec3& p : ctrl) p = rigid.apply(p);

            const std::size_t n_pts =
                cfg.min_points +
                static_cast<std::size_t>(rng.uniform_index(cfg.max_points - cfg.min_points + 1));
            Streamline sl = sample_curve(ctrl, n_pts);
            if (cfg.random_flip && rng.uniform_index(2) == 1)
                std::reverse(sl.points.begin(), sl.points.end());
            quantize_f32(sl.raw(), 3 * sl.points.size());

            ds.streamlines.push_back({std::move(sl), label, ds.subjects.back()});
        }
    }

    char prov[256];
    std::snprintf(prov, sizeof prov,
                  "synthetic v1: %zu classes%s, %zu subjects x %zu streamlines, jitter %.3g mm, "
                  "outliers %.3g, seed %llu",
                  cfg.n_classes, has_other ? " + other" : "", cfg.subjects,
                  cfg.streamlines_per_subject, cfg.jitter_sigma, cfg.outlier_fraction,
                  static_cast<unsigned long long>(cfg.seed));
    ds.provenance = prov;
    return ds;
}

}  // namespace tractokit
