#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tractokit {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double xx, double yy, double zz) : x(xx), y(yy), z(zz) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm2() const { return x * x + y * y + z * z; }
    double norm() const;
};

double distance(const Vec3& a, const Vec3& b);

// Ordered polyline in RAS millimeters. Point order is anatomically meaningful
// but every distance defined on streamlines is flip-invariant.
struct Streamline {
    std::vector<Vec3> points;

    Streamline() = default;
    explicit Streamline(std::vector<Vec3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool operator==(const Streamline&) const = default;
    // Contiguous xyz view for kernel calls.
    const double* raw() const { return &points[0].x; }
    double* raw() { return &points[0].x; }
};

static_assert(sizeof(Vec3) == 3 * sizeof(double));

struct LabeledStreamline {
    Streamline streamline;
    std::uint16_t label = 0;       // class id; the last class is "other"
    std::string subject_id;
};

// Unordered bag of points, produced by merging and sampling streamlines.
struct PointCloud {
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
};

// Throws InvalidInputError when a streamline breaks its type invariants
// (fewer than 2 points or non-finite coordinates).
void validate(const Streamline& s);

// Resample to m points: per-coordinate cubic-spline fit over the normalized
// cumulative chord-length parameter, evaluated at m equally spaced parameter
// values. Endpoints are preserved. Duplicate consecutive points are collapsed
// before fitting; 2 points fall back to linear and 3 to a quadratic fit.
Streamline resample(const Streamline& s, std::size_t m);

// Arithmetic mean of the points.
Vec3 barycenter(const Streamline& s);

// Mean Direct-Flip distance: min over the identity and reversal alignments of
// the mean pointwise Euclidean distance. Requires equal point counts.
// Exactly symmetric and exactly invariant under reversing either argument.
double mdf_distance(const Streamline& a, const Streamline& b);

// Merge all points of all streamlines and draw n_c of them, uniformly without
// replacement when n_c does not exceed the merged total, with replacement
// otherwise. Deterministic for a fixed seed.
PointCloud to_point_cloud(const std::vector<Streamline>& streamlines, std::size_t n_c,
                          std::uint64_t seed);

}  // namespace tractokit
