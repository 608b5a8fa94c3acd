#include "tractokit/core/streamline.hpp"

#include <cmath>
#include <cstring>

#include "tractokit/kernels/kernels.hpp"
#include "tractokit/util/error.hpp"
#include "tractokit/util/rng.hpp"

namespace tractokit {

double Vec3::norm() const { return std::sqrt(norm2()); }

double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

void validate(const Streamline& s) {
    if (s.size() < 2) throw InvalidInputError("streamline must have at least 2 points");
    for (const Vec3& p : s.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw InvalidInputError("streamline contains a non-finite coordinate");
}

namespace {

// Cubic spline with not-a-knot boundary conditions: second-derivative
// unknowns M solve a tridiagonal system whose first/last rows carry one
// extra entry, eliminated against the adjacent row before the Thomas sweep.
// Natural boundaries would be simpler but flatten curvature at the ends
// enough to miss tight resampling tolerances on arcs.
class CubicSpline {
public:
    // t strictly increasing, y same length, n >= 4
    CubicSpline(const std::vector<double>& t, std::vector<double> y)
        : t_(t), y_(std::move(y)) {
        const std::size_t n = t_.size();
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = t_[i + 1] - t_[i];

        // Interior row i: h[i-1] M[i-1] + 2(h[i-1]+h[i]) M[i] + h[i] M[i+1] = r[i].
        // The boundary conditions express the end M's through their neighbors:
        //   M0     = ((h0+h1) M1 - h0 M2) / h1
        //   M[n-1] = ((h[n-3]+h[n-2]) M[n-2] - h[n-2] M[n-3]) / h[n-3]
        // Substituting them into rows 1 and n-2 leaves a well-conditioned
        // tridiagonal system over the interior unknowns M1..M[n-2].
        const std::size_t ni = n - 2;
        std::vector<double> lower(ni, 0.0), diag(ni, 0.0), upper(ni, 0.0), rhs(ni, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const std::size_t j = i - 1;
            lower[j] = h[i - 1];
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            upper[j] = h[i];
            rhs[j] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
        }
        diag[0] += h[0] * (h[0] + h[1]) / h[1];
        upper[0] -= h[0] * h[0] / h[1];
        lower[0] = 0.0;
        diag[ni - 1] += h[n - 2] * (h[n - 3] + h[n - 2]) / h[n - 3];
        lower[ni - 1] -= h[n - 2] * h[n - 2] / h[n - 3];
        upper[ni - 1] = 0.0;

        // Thomas sweep.
        for (std::size_t j = 1; j < ni; ++j) {
            const double f = lower[j] / diag[j - 1];
            diag[j] -= f * upper[j - 1];
            rhs[j] -= f * rhs[j - 1];
        }
        m_.assign(n, 0.0);
        m_[n - 2] = rhs[ni - 1] / diag[ni - 1];
        for (std::size_t j = ni - 1; j-- > 0;)
            m_[j + 1] = (rhs[j] - upper[j] * m_[j + 2]) / diag[j];
        m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
        m_[n - 1] = ((h[n - 3] + h[n - 2]) * m_[n - 2] - h[n - 2] * m_[n - 3]) / h[n - 3];
    }

    double eval(double t, std::size_t seg) const {
        const double h = t_[seg + 1] - t_[seg];
        const double a = t_[seg + 1] - t;
        const double b = t - t_[seg];
        return (m_[seg] * a * a * a + m_[seg + 1] * b * b * b) / (6.0 * h) +
               (y_[seg] / h - m_[seg] * h / 6.0) * a +
               (y_[seg + 1] / h - m_[seg + 1] * h / 6.0) * b;
    }

private:
    std::vector<double> t_;
    std::vector<double> y_, m_;
};

// Parabola through three points, used when a cubic is underdetermined.
double quadratic_eval(const std::vector<double>& t, const double* y, double u) {
    const double l0 = (u - t[1]) * (u - t[2]) / ((t[0] - t[1]) * (t[0] - t[2]));
    const double l1 = (u - t[0]) * (u - t[2]) / ((t[1] - t[0]) * (t[1] - t[2]));
    const double l2 = (u - t[0]) * (u - t[1]) / ((t[2] - t[0]) * (t[2] - t[1]));
    return y[0] * l0 + y[1] * l1 + y[2] * l2;
}

std::vector<Vec3> collapse_duplicates(const std::vector<Vec3>& pts) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    out.push_back(pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i] == out.back())) out.push_back(pts[i]);
    return out;
}

}  // namespace

Streamline resample(const Streamline& s, std::size_t m) {
    validate(s);
    if (m < 2) throw InvalidInputError("resample target must be at least 2 points");

    const std::vector<Vec3> pts = collapse_duplicates(s.points);
    const std::size_t n = pts.size();

    Streamline out;
    out.points.resize(m);

    if (n == 1) {  // fully degenerate input: every point identical
        for (auto& p : out.points) p = pts[0];
        return out;
    }

    // Normalized cumulative chord length.
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) t[i] = t[i - 1] + distance(pts[i], pts[i - 1]);
    const double total = t[n - 1];
    for (std::size_t i = 1; i < n; ++i) t[i] /= total;
    t[n - 1] = 1.0;

    const auto param = [m](std::size_t j) {
        return static_cast<double>(j) / static_cast<double>(m - 1);
    };

    if (n == 2) {
        for (std::size_t j = 0; j < m; ++j) {
            const double u = param(j);
            out.points[j] = pts[0] * (1.0 - u) + pts[1] * u;
        }
    } else if (n == 3) {
        std::vector<double> ys(3);
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < 3; ++i)
                ys[i] = (&pts[i].x)[c];
            for (std::size_t j = 0; j < m; ++j)
                (&out.points[j].x)[c] = quadratic_eval(t, ys.data(), param(j));
        }
    } else {
        std::vector<double> ys(n);
        std::size_t seg = 0;
        for (int c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < n; ++i) ys[i] = (&pts[i].x)[c];
            const CubicSpline spline(t, ys);
            seg = 0;
            for (std::size_t j = 0; j < m; ++j) {
                const double u = param(j);
                while (seg + 2 < n && t[seg + 1] < u) ++seg;
                (&out.points[j].x)[c] = spline.eval(u, seg);
            }
        }
    }

    // The parameter hits 0 and 1 exactly, but pin the endpoints anyway so the
    // guarantee is bit-exact rather than within rounding.
    out.points.front() = pts.front();
    out.points.back() = pts.back();
    return out;
}

Vec3 barycenter(const Streamline& s) {
    validate(s);
    Vec3 sum;
    for (const Vec3& p : s.points) sum += p;
    return sum * (1.0 / static_cast<double>(s.size()));
}

double mdf_distance(const Streamline& a, const Streamline& b) {
    if (a.size() != b.size())
        throw InvalidInputError("mdf_distance requires equal point counts; resample first");
    validate(a);
    validate(b);
    double direct = 0.0, flipped = 0.0;
    kernels::active().polyline_pair_dist(a.raw(), b.raw(), a.size(), &direct, &flipped);
    return direct < flipped ? direct : flipped;
}

PointCloud to_point_cloud(const std::vector<Streamline>& streamlines, std::size_t n_c,
                          std::uint64_t seed) {
    if (streamlines.empty()) throw InvalidInputError("to_point_cloud needs at least one streamline");
    if (n_c < 1) throw InvalidInputError("n_c must be at least 1");

    std::size_t total = 0;
    for (const Streamline& s : streamlines) {
        validate(s);
        total += s.size();
    }

    std::vector<const Vec3*> merged;
    merged.reserve(total);
    for (const Streamline& s : streamlines)
        for (const Vec3& p : s.points) merged.push_back(&p);

    Rng rng(seed);
    PointCloud out;
    out.points.reserve(n_c);
    if (n_c <= total) {
        // partial Fisher-Yates: the first n_c slots of a full shuffle
        std::vector<std::uint32_t> idx(total);
        for (std::size_t i = 0; i < total; ++i) idx[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < n_c; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(total - i));
            std::swap(idx[i], idx[j]);
            out.points.push_back(*merged[idx[i]]);
        }
    } else {
        for (std::size_t i = 0; i < n_c; ++i)
            out.points.push_back(*merged[rng.uniform_index(total)]);
    }
    return out;
}

}  // namespace tractokit
