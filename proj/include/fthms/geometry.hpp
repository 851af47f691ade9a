#pragma once

// Parametric curves, the overlapping-patch decomposition of a boundary and
// the smooth windows used to split boundary data between patches.

#include <algorithm>
#include <memory>

#include "fthms/cheb.hpp"
#include "fthms/core.hpp"
#include "fthms/fft.hpp"

namespace fthms {

struct CurvePoint {
    Vec2 pos, d1, d2;  // position and first/second parameter derivatives
};

class ParametricCurve {
public:
    virtual ~ParametricCurve() = default;
    virtual CurvePoint eval(double theta) const = 0;
    virtual bool closed() const = 0;
    virtual double param_begin() const = 0;
    virtual double param_end() const = 0;
    double param_length() const { return param_end() - param_begin(); }

    double speed(double theta) const { return eval(theta).d1.norm(); }
    Vec2 position(double theta) const { return eval(theta).pos; }
    // Outward normal for positively oriented (counterclockwise) closed curves.
    Vec2 normal(double theta) const {
        const Vec2 t = eval(theta).d1;
        return t.perp_cw() * (1.0 / t.norm());
    }
};

inline CurvePoint eval_curve(const ParametricCurve& c, double theta) { return c.eval(theta); }

class Circle : public ParametricCurve {
public:
    Circle(Vec2 center, double radius) : c_(center), r_(radius) {
        if (!(radius > 0)) throw config_error("Circle: radius must be positive");
    }
    CurvePoint eval(double th) const override {
        const double co = std::cos(th), si = std::sin(th);
        return {{c_.x + r_ * co, c_.y + r_ * si}, {-r_ * si, r_ * co}, {-r_ * co, -r_ * si}};
    }
    bool closed() const override { return true; }
    double param_begin() const override { return 0.0; }
    double param_end() const override { return 2.0 * pi; }

private:
    Vec2 c_;
    double r_;
};

class Ellipse : public ParametricCurve {
public:
    Ellipse(Vec2 center, double a, double b) : c_(center), a_(a), b_(b) {
        if (!(a > 0) || !(b > 0)) throw config_error("Ellipse: semi-axes must be positive");
    }
    CurvePoint eval(double th) const override {
        const double co = std::cos(th), si = std::sin(th);
        return {{c_.x + a_ * co, c_.y + b_ * si}, {-a_ * si, b_ * co}, {-a_ * co, -b_ * si}};
    }
    bool closed() const override { return true; }
    double param_begin() const override { return 0.0; }
    double param_end() const override { return 2.0 * pi; }

private:
    Vec2 c_;
    double a_, b_;
};

// The classical kite contour (cos t + 0.65 cos 2t - 0.65, 1.5 sin t),
// optionally scaled and shifted.
class Kite : public ParametricCurve {
public:
    explicit Kite(Vec2 center = {0, 0}, double scale = 1.0) : c_(center), s_(scale) {}
    CurvePoint eval(double th) const override {
        const double co = std::cos(th), si = std::sin(th);
        const double c2 = std::cos(2 * th), s2 = std::sin(2 * th);
        return {{c_.x + s_ * (co + 0.65 * c2 - 0.65), c_.y + s_ * 1.5 * si},
                {s_ * (-si - 1.3 * s2), s_ * 1.5 * co},
                {s_ * (-co - 2.6 * c2), s_ * -1.5 * si}};
    }
    bool closed() const override { return true; }
    double param_begin() const override { return 0.0; }
    double param_end() const override { return 2.0 * pi; }

private:
    Vec2 c_;
    double s_;
};

// Closed curve through a list of points, interpolated by a trigonometric
// polynomial (points are read as samples at uniform parameters 2 pi k / M).
class TrigCurve : public ParametricCurve {
public:
    explicit TrigCurve(const std::vector<Vec2>& pts) {
        const size_t m = pts.size();
        if (m < 5) throw config_error("TrigCurve: need at least 5 points");
        std::vector<cplx> z(m);
        for (size_t k = 0; k < m; ++k) z[k] = {pts[k].x, pts[k].y};
        coef_ = fft(std::move(z));
        for (auto& c : coef_) c /= static_cast<double>(m);
    }
    CurvePoint eval(double th) const override {
        const int m = static_cast<int>(coef_.size());
        cplx p{0, 0}, d1{0, 0}, d2{0, 0};
        for (int j = 0; j < m; ++j) {
            // frequency of DFT bin j (symmetric range; Nyquist bin of an even
            // length treated as a pure cosine, giving a real-analytic curve)
            int k = j <= m / 2 ? j : j - m;
            if (2 * j == m) {
                const cplx c = coef_[j];
                const double kk = m / 2;
                p += c * std::cos(kk * th);
                d1 += c * (-kk * std::sin(kk * th));
                d2 += c * (-kk * kk * std::cos(kk * th));
                continue;
            }
            const cplx e = std::polar(1.0, k * th);
            p += coef_[j] * e;
            d1 += coef_[j] * e * cplx{0.0, static_cast<double>(k)};
            d2 += coef_[j] * e * (-static_cast<double>(k) * k);
        }
        return {{p.real(), p.imag()}, {d1.real(), d1.imag()}, {d2.real(), d2.imag()}};
    }
    bool closed() const override { return true; }
    double param_begin() const override { return 0.0; }
    double param_end() const override { return 2.0 * pi; }

private:
    std::vector<cplx> coef_;  // DFT of the sample points
};

// Open curve through points read as samples at Chebyshev-Lobatto nodes of
// [-1, 1], one polynomial per coordinate.
class ChebCurve : public ParametricCurve {
public:
    explicit ChebCurve(const std::vector<Vec2>& pts) {
        const int n = static_cast<int>(pts.size());
        if (n < 2) throw config_error("ChebCurve: need at least 2 points");
        // Lobatto nodes s_i = -cos(pi i/(n-1)); coefficients by the discrete
        // cosine transform underlying Clenshaw-Curtis interpolation.
        ax_.assign(n, 0.0);
        ay_.assign(n, 0.0);
        for (int k = 0; k < n; ++k) {
            double sx = 0.0, sy = 0.0;
            for (int i = 0; i < n; ++i) {
                const double c = std::cos(pi * k * i / (n - 1.0));
                const double f = (i == 0 || i == n - 1) ? 0.5 : 1.0;
                // input point order runs s = -1..1, i.e. node cos(pi i/(n-1))
                // carries pts[n-1-i]
                sx += f * c * pts[n - 1 - i].x;
                sy += f * c * pts[n - 1 - i].y;
            }
            const double scale = (k == 0 || k == n - 1) ? 1.0 / (n - 1.0) : 2.0 / (n - 1.0);
            ax_[k] = scale * sx;
            ay_[k] = scale * sy;
        }
        dx_ = cheb_derivative(ax_);
        dy_ = cheb_derivative(ay_);
        d2x_ = cheb_derivative(dx_);
        d2y_ = cheb_derivative(dy_);
    }
    CurvePoint eval(double s) const override {
        return {{cheb_eval(ax_, s), cheb_eval(ay_, s)},
                {cheb_eval(dx_, s), cheb_eval(dy_, s)},
                {cheb_eval(d2x_, s), cheb_eval(d2y_, s)}};
    }
    bool closed() const override { return false; }
    double param_begin() const override { return -1.0; }
    double param_end() const override { return 1.0; }

private:
    std::vector<double> ax_, ay_, dx_, dy_, d2x_, d2y_;
};

// View of a parameter subinterval [a,b] of a parent curve, itself an open
// curve. For closed parents the interval may pass the parameter seam.
class SubArc : public ParametricCurve {
public:
    SubArc(std::shared_ptr<const ParametricCurve> parent, double a, double b)
        : parent_(std::move(parent)), a_(a), b_(b) {
        if (!(b > a)) throw config_error("SubArc: empty parameter interval");
        if (!parent_->closed() &&
            (a < parent_->param_begin() - 1e-12 || b > parent_->param_end() + 1e-12))
            throw config_error("SubArc: interval outside the open parent's domain");
        if (parent_->closed() && b - a > parent_->param_length() + 1e-12)
            throw config_error("SubArc: interval longer than the parent period");
    }
    CurvePoint eval(double th) const override { return parent_->eval(th); }
    bool closed() const override { return false; }
    double param_begin() const override { return a_; }
    double param_end() const override { return b_; }
    const ParametricCurve& parent() const { return *parent_; }

private:
    std::shared_ptr<const ParametricCurve> parent_;
    double a_, b_;
};

namespace detail {

// Rounded-polygon sampler: replaces each corner by a circular fillet of
// radius r and returns points spaced uniformly in traversal length,
// suitable for TrigCurve interpolation.
inline std::vector<Vec2> rounded_polygon_samples(const std::vector<Vec2>& v, double r, int m) {
    const int n = static_cast<int>(v.size());
    std::vector<Vec2> q0(n), q1(n);  // trimmed segment endpoints around corner i
    for (int i = 0; i < n; ++i) {
        const Vec2 a = v[(i + n - 1) % n], b = v[i], c = v[(i + 1) % n];
        Vec2 u = b - a, w = c - b;
        const double lu = u.norm(), lw = w.norm();
        u = u * (1.0 / lu);
        w = w * (1.0 / lw);
        const double cosang = std::clamp(-(u.dot(w)), -1.0, 1.0);
        const double half = 0.5 * (pi - std::acos(cosang));
        const double trim = std::min({r / std::tan(half), 0.45 * lu, 0.45 * lw});
        q0[i] = b - u * trim;
        q1[i] = b + w * trim;
    }
    std::vector<Vec2> samples;
    std::vector<Vec2> path;  // dense polyline: fillet arcs approximated finely
    for (int i = 0; i < n; ++i) {
        const Vec2 s0 = q1[i], s1 = q0[(i + 1) % n];
        for (int k = 0; k < 64; ++k) path.push_back(s0 + (s1 - s0) * (k / 64.0));
        // fillet at corner i+1: quadratic Bezier approximation of the corner arc
        const Vec2 b = v[(i + 1) % n], p0 = q0[(i + 1) % n], p1 = q1[(i + 1) % n];
        for (int k = 0; k < 32; ++k) {
            const double t = k / 32.0;
            const Vec2 a01 = p0 + (b - p0) * t, a12 = b + (p1 - b) * t;
            path.push_back(a01 + (a12 - a01) * t);
        }
    }
    // resample uniformly by cumulative length
    std::vector<double> cum(path.size() + 1, 0.0);
    for (size_t k = 0; k < path.size(); ++k)
        cum[k + 1] = cum[k] + dist(path[k], path[(k + 1) % path.size()]);
    const double total = cum.back();
    samples.reserve(m);
    size_t j = 0;
    for (int k = 0; k < m; ++k) {
        const double target = total * k / m;
        while (j + 1 < path.size() && cum[j + 1] < target) ++j;
        const double seg = cum[j + 1] - cum[j];
        const double t = seg > 0 ? (target - cum[j]) / seg : 0.0;
        samples.push_back(path[j] + (path[(j + 1) % path.size()] - path[j]) * t);
    }
    return samples;
}

}  // namespace detail

// H-shaped contour with rounded corners, represented as a smooth
// trigonometric curve through resampled outline points.
inline std::shared_ptr<ParametricCurve> make_hshape(double width = 2.0, double height = 2.0,
                                                    double bar = 0.6, double fillet = 0.15) {
    const double w = width / 2, h = height / 2, t = bar / 2;
    // counterclockwise outline of an "H"
    const std::vector<Vec2> poly = {{-w, -h}, {-w + bar, -h}, {-w + bar, -t}, {w - bar, -t},
                                    {w - bar, -h}, {w, -h},   {w, h},         {w - bar, h},
                                    {w - bar, t},  {-w + bar, t}, {-w + bar, h}, {-w, h}};
    return std::make_shared<TrigCurve>(detail::rounded_polygon_samples(poly, fillet, 256));
}

// Rocket-shaped closed outline (nose cone, body, flared tail), used to build
// an open cavity by removing a parameter window at the tail.
inline std::shared_ptr<ParametricCurve> make_rocket_outline(double scale = 1.0) {
    std::vector<Vec2> poly = {{0.0, 1.6},  {0.45, 0.8},  {0.45, -0.9}, {0.75, -1.4},
                              {0.3, -1.4}, {0.3, -1.15}, {-0.3, -1.15}, {-0.3, -1.4},
                              {-0.75, -1.4}, {-0.45, -0.9}, {-0.45, 0.8}};
    for (auto& p : poly) p = p * scale;
    return std::make_shared<TrigCurve>(detail::rounded_polygon_samples(poly, 0.1 * scale, 256));
}

// eta(t; t0, t1): 1 for |t|<=t0, exp(2 e^{-1/s}/(s-1)) with s=(|t|-t0)/(t1-t0)
// on t0<|t|<t1, 0 beyond t1. Infinitely smooth in t.
inline double eta_window(double t, double t0, double t1) {
    const double a = std::abs(t);
    if (a <= t0) return 1.0;
    if (a >= t1) return 0.0;
    const double s = (a - t0) / (t1 - t0);
    return std::exp(2.0 * std::exp(-1.0 / s) / (s - 1.0));
}

struct WindowProfile {
    double t0, t1;
    double operator()(double t) const { return eta_window(t, t0, t1); }
};

struct PatchInterval {
    double a, b;               // parameter interval on the parent curve
    bool has_left_overlap, has_right_overlap;
    double tov_a, tov_b;       // interval where the window equals one
    double tr_a, tr_b;         // interval where the window is nonzero
};

// Overlapping decomposition of one parent curve into N patches of equal
// parameter length extended by overlap_fraction of the partition step on
// each shared side. Windows use the eta profile with thresholds c0, c1
// relative to the chordal diameter of each overlap.
//
// Conventions. Overlap j is the region shared by patch j and its successor;
// in parent parameters it is [ov_begin(j), ov_end(j)] with ov_end(j) the
// right endpoint of patch j, which also serves as the *reference endpoint*
// of the overlap's window distance function. On a cyclic chain the overlap
// between the last patch and patch 0 is stored in last-patch coordinates
// (one period above patch 0's own interval).
class PatchDecomposition {
public:
    PatchDecomposition(std::shared_ptr<const ParametricCurve> parent, int n_patches,
                       double overlap_fraction, double c0 = 1.0 / 3.0, double c1 = 2.0 / 3.0)
        : parent_(std::move(parent)), n_(n_patches), c0_(c0), c1_(c1) {
        if (n_ < 1) throw config_error("PatchDecomposition: need at least one patch");
        if (!(overlap_fraction >= 0) || overlap_fraction >= 1.0)
            throw config_error("PatchDecomposition: overlap_fraction must lie in [0,1)");
        if (!(c0 > 0) || !(c0 < c1) || !(c1 < 1))
            throw config_error("PatchDecomposition: need 0 < c0 < c1 < 1");
        cyclic_ = parent_->closed() && n_ >= 2;
        if (n_ >= 2 && overlap_fraction <= 0)
            throw config_error("PatchDecomposition: overlapping patches need a positive overlap");
        const double lo = parent_->param_begin(), len = parent_->param_length();
        const double step = len / n_;
        const double ov = overlap_fraction * step;
        patches_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            PatchInterval& p = patches_[j];
            p.a = lo + j * step;
            p.b = lo + (j + 1) * step;
            p.has_left_overlap = cyclic_ || j > 0;
            p.has_right_overlap = cyclic_ || j + 1 < n_;
            if (p.has_left_overlap) p.a -= 0.5 * ov;
            if (p.has_right_overlap) p.b += 0.5 * ov;
        }
        if (n_ >= 2) {
            const int n_ov = cyclic_ ? n_ : n_ - 1;
            ov_diam_.resize(n_ov, 0.0);
            for (int j = 0; j < n_ov; ++j) ov_diam_[j] = arc_diameter(ov_begin(j), ov_end(j));
        }
        for (int j = 0; j < n_; ++j) {
            PatchInterval& p = patches_[j];
            p.tov_a = p.has_left_overlap ? ov_end(prev_index(j)) - left_shift(j) : p.a;
            p.tov_b = p.has_right_overlap ? ov_begin(j) : p.b;
            if (!(p.tov_b > p.tov_a))
                throw config_error("PatchDecomposition: overlaps swallow a whole patch");
            p.tr_a = p.a;
            p.tr_b = p.b;
            // Window support boundaries: on the right overlap chi_j =
            // eta(A - d) vanishes once d <= (1-c1) A; on the left overlap
            // chi_j = 1 - eta(A - d) vanishes once d >= (1-c0) A. Both d are
            // measured to the overlap's reference endpoint and decrease
            // monotonically toward it, so bisection applies.
            if (p.has_right_overlap) {
                const double target = (1.0 - c1_) * ov_diam_[j];
                p.tr_b = bisect([&](double th) { return dov(j, th) - target; }, p.tov_b, p.b);
            }
            if (p.has_left_overlap) {
                const int o = prev_index(j);
                const double target = (1.0 - c0_) * ov_diam_[o];
                const double root = bisect([&](double th) { return dov(o, th) - target; },
                                           ov_begin(o), ov_end(o));
                p.tr_a = root - left_shift(j);
            }
        }
    }

    int size() const { return n_; }
    bool cyclic() const { return cyclic_; }
    const ParametricCurve& parent() const { return *parent_; }
    std::shared_ptr<const ParametricCurve> parent_ptr() const { return parent_; }
    const PatchInterval& patch(int j) const { return patches_[j]; }
    double c0() const { return c0_; }
    double c1() const { return c1_; }

    int prev_index(int j) const { return cyclic_ ? (j + n_ - 1) % n_ : j - 1; }
    int next_index(int j) const { return cyclic_ ? (j + 1) % n_ : j + 1; }

    double ov_begin(int j) const { return patches_[next_index(j)].a + wrap_shift(j); }
    double ov_end(int j) const { return patches_[j].b; }
    double ov_length(int j) const { return ov_end(j) - ov_begin(j); }
    double overlap_diameter(int j) const { return ov_diam_[j]; }

    // Chordal diameter of the sub-arc between theta and the reference
    // endpoint of overlap j (theta in overlap-j coordinates).
    double dov(int j, double theta) const { return arc_diameter(theta, ov_end(j)); }

    // Window of patch j at parent parameter theta (normalized by whole
    // periods into the patch interval where possible).
    double chi(int j, double theta) const {
        const PatchInterval& p = patches_[j];
        const double th = normalize_into(theta, p.a, p.b);
        if (th < p.a || th > p.b) return 0.0;
        if (th >= p.tov_a && th <= p.tov_b) return 1.0;
        if (p.has_right_overlap && th > p.tov_b) return overlap_eta(j, th);
        if (p.has_left_overlap && th < p.tov_a)
            return 1.0 - overlap_eta(prev_index(j), th + left_shift(j));
        return 1.0;
    }

    // eta factor of overlap j at theta (overlap-j coordinates). The patch
    // left of the overlap uses this value directly, the successor uses one
    // minus the same value, making the partition of unity exact by
    // construction.
    double overlap_eta(int j, double theta) const {
        const double a = ov_diam_[j];
        return eta_window(a - dov(j, theta), c0_ * a, c1_ * a);
    }

    // Distance between the essential support of patch j's window and the
    // rest of the parent curve. Gaps to other boundary components are the
    // caller's business.
    double patch_gap(int j) const {
        const PatchInterval& p = patches_[j];
        if (n_ < 2) return std::numeric_limits<double>::infinity();
        if (cyclic_)
            return arc_set_distance(p.tr_a, p.tr_b, p.b, p.a + parent_->param_length());
        double g = std::numeric_limits<double>::infinity();
        if (p.a > parent_->param_begin() + 1e-14)
            g = std::min(g, arc_set_distance(p.tr_a, p.tr_b, parent_->param_begin(), p.a));
        if (p.b < parent_->param_end() - 1e-14)
            g = std::min(g, arc_set_distance(p.tr_a, p.tr_b, p.b, parent_->param_end()));
        return g;
    }

    double delta_min() const {
        double d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_; ++j) d = std::min(d, patch_gap(j));
        return d;
    }

    // Chordal diameter of the parent sub-arc [u, v] (dense pairwise search).
    double arc_diameter(double u, double v) const {
        if (v < u) std::swap(u, v);
        const int m = 96;
        double best = 0.0;
        std::vector<Vec2> pts(m + 1);
        for (int i = 0; i <= m; ++i) pts[i] = parent_->position(u + (v - u) * i / m);
        for (int i = 0; i <= m; ++i)
            for (int k = i + 1; k <= m; ++k) best = std::max(best, dist(pts[i], pts[k]));
        return best;
    }

    // Minimal distance between the parent sub-arcs [u0,v0] and [u1,v1],
    // dense sampling refined by alternating golden-section sweeps.
    double arc_set_distance(double u0, double v0, double u1, double v1) const {
        const int m = 2048;
        double best = std::numeric_limits<double>::infinity();
        double arg0 = u0, arg1 = u1;
        std::vector<Vec2> a(m + 1), b(m + 1);
        for (int i = 0; i <= m; ++i) a[i] = parent_->position(u0 + (v0 - u0) * i / m);
        for (int i = 0; i <= m; ++i) b[i] = parent_->position(u1 + (v1 - u1) * i / m);
        for (int i = 0; i <= m; ++i)
            for (int k = 0; k <= m; k += 8) {
                const double d = dist(a[i], b[k]);
                if (d < best) {
                    best = d;
                    arg0 = u0 + (v0 - u0) * i / m;
                    arg1 = u1 + (v1 - u1) * k / m;
                }
            }
        const double h0 = (v0 - u0) / m, h1 = 8.0 * (v1 - u1) / m;
        for (int round = 0; round < 4; ++round) {
            arg1 = golden_min(
                [&](double t) { return dist(parent_->position(arg0), parent_->position(t)); },
                std::max(u1, arg1 - h1), std::min(v1, arg1 + h1), 1e-10);
            arg0 = golden_min(
                [&](double t) { return dist(parent_->position(t), parent_->position(arg1)); },
                std::max(u0, arg0 - h0), std::min(v0, arg0 + h0), 1e-10);
        }
        return std::min(best, dist(parent_->position(arg0), parent_->position(arg1)));
    }

private:
    // Shift theta by whole periods until it lies in [a,b] if possible.
    double normalize_into(double theta, double a, double b) const {
        if (!parent_->closed()) return theta;
        const double per = parent_->param_length();
        while (theta > b) theta -= per;
        while (theta < a) theta += per;
        return theta;
    }
    // ov_begin for the wrap-around overlap (cyclic chains): successor patch 0
    // lives one period up.
    double wrap_shift(int j) const {
        return (cyclic_ && j == n_ - 1) ? parent_->param_length() : 0.0;
    }
    // Offset between patch j's local coordinates and its left overlap's
    // coordinates: one period for patch 0 of a cyclic chain, zero otherwise.
    double left_shift(int j) const {
        return (cyclic_ && j == 0) ? parent_->param_length() : 0.0;
    }

    std::shared_ptr<const ParametricCurve> parent_;
    int n_;
    double c0_, c1_;
    bool cyclic_ = false;
    std::vector<PatchInterval> patches_;
    std::vector<double> ov_diam_;
};

inline PatchDecomposition build_patch_decomposition(std::shared_ptr<const ParametricCurve> parent,
                                                    int n_patches, double overlap_fraction,
                                                    double c0 = 1.0 / 3.0, double c1 = 2.0 / 3.0) {
    return PatchDecomposition(std::move(parent), n_patches, overlap_fraction, c0, c1);
}

// Distance from a point to the sub-arc [u,v] of a curve.
inline double point_arc_distance(const ParametricCurve& c, double u, double v, const Vec2& p) {
    const int m = 512;
    double best = std::numeric_limits<double>::infinity(), arg = u;
    for (int i = 0; i <= m; ++i) {
        const double th = u + (v - u) * i / m;
        const double d = dist(c.position(th), p);
        if (d < best) {
            best = d;
            arg = th;
        }
    }
    const double h = (v - u) / m;
    const double t = golden_min([&](double th) { return dist(c.position(th), p); },
                                std::max(u, arg - h), std::min(v, arg + h), 1e-12);
    return std::min(best, dist(c.position(t), p));
}

// Distance between sub-arcs of two (possibly different) curves.
inline double patch_distance(const ParametricCurve& c0, double u0, double v0,
                             const ParametricCurve& c1, double u1, double v1) {
    const int m = 384;
    double best = std::numeric_limits<double>::infinity();
    double a0 = u0, a1 = u1;
    for (int i = 0; i <= m; ++i)
        for (int k = 0; k <= m; k += 4) {
            const double t0 = u0 + (v0 - u0) * i / m, t1 = u1 + (v1 - u1) * k / m;
            const double d = dist(c0.position(t0), c1.position(t1));
            if (d < best) {
                best = d;
                a0 = t0;
                a1 = t1;
            }
        }
    const double h0 = (v0 - u0) / m, h1 = 4.0 * (v1 - u1) / m;
    for (int round = 0; round < 4; ++round) {
        a1 = golden_min([&](double t) { return dist(c0.position(a0), c1.position(t)); },
                        std::max(u1, a1 - h1), std::min(v1, a1 + h1), 1e-11);
        a0 = golden_min([&](double t) { return dist(c0.position(t), c1.position(a1)); },
                        std::max(u0, a0 - h0), std::min(v0, a0 + h0), 1e-11);
    }
    return std::min(best, dist(c0.position(a0), c1.position(a1)));
}

}  // namespace fthms
