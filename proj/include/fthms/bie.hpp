#pragma once

// Frequency-domain boundary integral equations. Two discretizations live
// here: a spectral Nystrom method for closed curves (combined-field equation
// for the exterior Dirichlet problem) and a Chebyshev collocation method for
// first-kind single-layer equations on open arcs, with cosine changes of
// variable that absorb endpoint and induced density singularities into the
// working unknown.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fthms/cheb.hpp"
#include "fthms/core.hpp"
#include "fthms/dense_solver.hpp"
#include "fthms/geometry.hpp"
#include "fthms/special.hpp"

namespace fthms {

// ---------------------------------------------------------------------------
// Closed curves: 2n equispaced nodes, Kussmaul-Martensen log-quadrature.
// ---------------------------------------------------------------------------

class ClosedCurveDiscretization {
public:
    ClosedCurveDiscretization(std::shared_ptr<const ParametricCurve> curve, int n_half)
        : curve_(std::move(curve)), n_half_(n_half) {
        if (!curve_->closed())
            throw config_error("ClosedCurveDiscretization: curve must be closed");
        if (n_half_ < 4) throw config_error("ClosedCurveDiscretization: too few nodes");
        const int m = size();
        const double lo = curve_->param_begin();
        scale_ = curve_->param_length() / (2.0 * pi);

        nodes_.resize(m);
        pts_.resize(m);
        speed_.resize(m);
        normal_.resize(m);
        for (int i = 0; i < m; ++i) {
            nodes_[i] = pi * i / n_half_;
            CurvePoint cp = curve_->eval(lo + scale_ * nodes_[i]);
            // Work in the rescaled 2pi-periodic parameter.
            cp.d1 = cp.d1 * scale_;
            cp.d2 = cp.d2 * (scale_ * scale_);
            pts_[i] = cp;
            speed_[i] = cp.d1.norm();
            normal_[i] = cp.d1.perp_cw() * (1.0 / speed_[i]);
        }

        // Quadrature weights for the ln(4 sin^2((t - tau)/2)) factor.
        logw_.resize(m);
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int mm = 1; mm < n_half_; ++mm)
                s += std::cos(mm * j * pi / n_half_) / mm;
            const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
            logw_[j] = -(2.0 * pi / n_half_) * s - sgn * pi / (n_half_ * n_half_);
        }
    }

    int size() const { return 2 * n_half_; }
    double node(int i) const { return nodes_[i]; }
    Vec2 position(int i) const { return pts_[i].pos; }
    Vec2 normal(int i) const { return normal_[i]; }
    double speed(int i) const { return speed_[i]; }
    double log_weight(int i, int j) const { return logw_[std::abs(i - j)]; }
    double trapezoid_weight() const { return pi / n_half_; }

    // All operators at negative frequency are conjugates of the positive
    // ones (the coupling parameter flips sign with kappa so that conjugate
    // data produces conjugate densities); only kappa > 0 gets assembled.

    MatC single_layer(double kappa) const {
        if (kappa < 0.0) return single_layer(-kappa).conjugate();
        const int m = size();
        MatC a(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                KernelSplit ks;
                if (i == j) {
                    ks = split_single_layer_diag(kappa, speed_[i]);
                } else {
                    ks = split_single_layer(kappa, pts_[i].pos, pts_[j].pos,
                                            nodes_[i] - nodes_[j]);
                }
                a(i, j) = (log_weight(i, j) * ks.m1 + trapezoid_weight() * ks.m2) * speed_[j];
            }
        }
        return a;
    }

    MatC double_layer(double kappa) const {
        if (kappa < 0.0) return double_layer(-kappa).conjugate();
        const int m = size();
        MatC a(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                KernelSplit ks;
                if (i == j) {
                    ks = split_double_layer_diag(pts_[i].d2, normal_[i], speed_[i]);
                } else {
                    ks = split_double_layer(kappa, pts_[i].pos, pts_[j].pos, normal_[j],
                                            nodes_[i] - nodes_[j]);
                }
                a(i, j) = (log_weight(i, j) * ks.m1 + trapezoid_weight() * ks.m2) * speed_[j];
            }
        }
        return a;
    }

    // Exterior Dirichlet combined-field operator (1/2) I + K - i eta V.
    MatC cfie(double kappa, double eta) const {
        if (kappa < 0.0) return cfie(-kappa, eta).conjugate();
        MatC a = double_layer(kappa) - iu * eta * single_layer(kappa);
        a.diagonal().array() += 0.5;
        return a;
    }

    // Layer potentials at off-curve targets (plain trapezoid; spectrally
    // accurate once the target keeps a few node spacings of clearance).
    cplx eval_single(double kappa, const VecC& psi, const Vec2& x) const {
        require_off_curve(x);
        cplx s{0.0, 0.0};
        for (int j = 0; j < size(); ++j)
            s += kernel_phi(kappa, x, pts_[j].pos) * speed_[j] * psi(j);
        return s * trapezoid_weight();
    }

    cplx eval_double(double kappa, const VecC& psi, const Vec2& x) const {
        require_off_curve(x);
        cplx s{0.0, 0.0};
        for (int j = 0; j < size(); ++j)
            s += kernel_normal_derivative(kappa, x, pts_[j].pos, normal_[j]) * speed_[j] *
                 psi(j);
        return s * trapezoid_weight();
    }

    cplx eval_combined(double kappa, double eta, const VecC& psi, const Vec2& x) const {
        if (kappa < 0.0)
            return std::conj(eval_combined(-kappa, eta, psi.conjugate(), x));
        return eval_double(kappa, psi, x) - iu * eta * eval_single(kappa, psi, x);
    }

    // Combined-field potential rows (D - i eta S) for a batch of off-curve
    // targets, one row per target. Same trapezoid rule and clearance
    // requirement as the point evaluators.
    MatC combined_matrix(double kappa, double eta, const std::vector<Vec2>& targets) const {
        if (kappa < 0.0) return combined_matrix(-kappa, eta, targets).conjugate();
        MatC a(static_cast<long>(targets.size()), size());
        for (size_t t = 0; t < targets.size(); ++t) {
            const Vec2& x = targets[t];
            require_off_curve(x);
            for (int j = 0; j < size(); ++j) {
                const cplx k = kernel_normal_derivative(kappa, x, pts_[j].pos, normal_[j]) -
                               iu * eta * kernel_phi(kappa, x, pts_[j].pos);
                a(static_cast<long>(t), j) = k * speed_[j] * trapezoid_weight();
            }
        }
        return a;
    }

private:
    void require_off_curve(const Vec2& x) const {
        double dmin = 1e300;
        for (int j = 0; j < size(); ++j) dmin = std::min(dmin, dist(x, pts_[j].pos));
        const double h = 2.0 * pi / size();
        if (dmin < 3.0 * h * speed_[0])
            throw domain_error(
                "ClosedCurveDiscretization: target too close to the curve; "
                "use the boundary-trace path");
    }

    std::shared_ptr<const ParametricCurve> curve_;
    int n_half_;
    double scale_;
    std::vector<double> nodes_, speed_, logw_;
    std::vector<CurvePoint> pts_;
    std::vector<Vec2> normal_;
};

// ---------------------------------------------------------------------------
// Open arcs: integration patches with cosine changes of variable.
// ---------------------------------------------------------------------------

enum class CovKind { none, both, left, right };

struct CovValue {
    double theta, dtheta;  // map [-1,1] -> [-1,1] and its derivative
};

inline CovValue cov_theta(double s, CovKind kind) {
    switch (kind) {
        case CovKind::none:
            return {s, 1.0};
        case CovKind::both:
            return {std::cos(0.5 * pi * (1.0 - s)), 0.5 * pi * std::sin(0.5 * pi * (1.0 - s))};
        case CovKind::left:
            return {1.0 - 2.0 * std::cos(0.25 * pi * (1.0 + s)),
                    0.5 * pi * std::sin(0.25 * pi * (1.0 + s))};
        case CovKind::right:
            return {2.0 * std::cos(0.25 * pi * (1.0 - s)) - 1.0,
                    0.5 * pi * std::sin(0.25 * pi * (1.0 - s))};
    }
    throw config_error("cov_theta: bad selector");
}

// One Chebyshev integration patch of an arc discretization.
struct ArcPatch {
    double a, b;    // parameter interval on the parent curve
    CovKind cov;
    int first;      // index of the patch's first global node
    double length;  // arc length, for near/far decisions
};

// First-kind single-layer equation V[Psi] = G on an open arc. The unknown
// stored at the nodes is psi-tilde(s) = Psi(theta(s)) dtheta/ds, which stays
// smooth when the cosine map's derivative vanishes at singular endpoints
// (arc tips and the endpoints of neighboring arcs, where generated data has
// square-root behavior). Collocation happens at the mapped nodes themselves;
// near-singular rows integrate the Chebyshev interpolant on geometrically
// refined panels with precomputed per-target weights.
class OpenArcDiscretization {
public:
    OpenArcDiscretization(std::shared_ptr<const ParametricCurve> arc,
                          std::vector<double> breakpoints, std::vector<double> singular_points,
                          int nodes_per_patch)
        : arc_(std::move(arc)), n_(nodes_per_patch) {
        if (arc_->closed()) throw config_error("OpenArcDiscretization: arc must be open");
        if (n_ < 6) throw config_error("OpenArcDiscretization: need at least 6 nodes per patch");
        if (breakpoints.size() < 2)
            throw config_error("OpenArcDiscretization: need at least one patch");
        std::sort(breakpoints.begin(), breakpoints.end());
        const double lo = arc_->param_begin(), hi = arc_->param_end();
        const double tol = 1e-9 * (hi - lo);
        if (std::abs(breakpoints.front() - lo) > tol || std::abs(breakpoints.back() - hi) > tol)
            throw config_error("OpenArcDiscretization: breakpoints must span the arc");

        // Arc tips always carry density singularities.
        singular_points.push_back(lo);
        singular_points.push_back(hi);

        sx_ = fejer1_nodes(n_);
        wx_ = fejer1_weights(n_);
        coef_ = cheb_coeff_matrix(n_);

        auto is_singular = [&](double t) {
            for (double sp : singular_points)
                if (std::abs(t - sp) <= tol) return true;
            return false;
        };

        for (size_t k = 0; k + 1 < breakpoints.size(); ++k) {
            ArcPatch p;
            p.a = breakpoints[k];
            p.b = breakpoints[k + 1];
            const bool sl = is_singular(p.a), sr = is_singular(p.b);
            p.cov = sl && sr ? CovKind::both
                    : sl     ? CovKind::left
                    : sr     ? CovKind::right
                             : CovKind::none;
            p.first = static_cast<int>(s_.size());
            double len = 0.0;
            for (int i = 0; i < n_; ++i) {
                const CovValue cv = cov_theta(sx_[i], p.cov);
                const double mid = 0.5 * (p.a + p.b), h = 0.5 * (p.b - p.a);
                const double theta = mid + h * cv.theta;
                const CurvePoint cp = arc_->eval(theta);
                s_.push_back(sx_[i]);
                theta_.push_back(theta);
                pos_.push_back(cp.pos);
                speed_.push_back(cp.d1.norm());
                jac_.push_back(h * cv.dtheta);
                patch_of_.push_back(static_cast<int>(patches_.size()));
                len += wx_[i] * cp.d1.norm() * h * cv.dtheta;
            }
            p.length = len;
            patches_.push_back(p);
        }

        // Collocation rows reuse one precomputed quadrature plan per node;
        // a node is an on-arc target, so its own patch always takes the
        // refined rule with the node itself as the singular preimage.
        self_plans_.reserve(s_.size());
        for (size_t g = 0; g < s_.size(); ++g)
            self_plans_.push_back(plan_row_impl(pos_[g], patch_of_[g], s_[g]));
    }

    int size() const { return static_cast<int>(s_.size()); }
    int patch_count() const { return static_cast<int>(patches_.size()); }
    int nodes_per_patch() const { return n_; }
    const ArcPatch& patch(int p) const { return patches_[p]; }
    const ParametricCurve& arc() const { return *arc_; }

    Vec2 position(int g) const { return pos_[g]; }
    double theta(int g) const { return theta_[g]; }
    double jacobian(int g) const { return jac_[g]; }
    double speed(int g) const { return speed_[g]; }
    int patch_of(int g) const { return patch_of_[g]; }
    // Arc-length quadrature weight of node g for smooth integrands.
    double node_weight(int g) const {
        return wx_[g - patches_[patch_of_[g]].first] * speed_[g] * jac_[g];
    }

    // Physical density from the working unknown at node g. Blows up toward
    // flagged endpoints by design; diagnostic use only.
    cplx physical_density(const VecC& psi_tilde, int g) const {
        return psi_tilde(g) / jac_[g];
    }

    // Wavenumber-independent half of an evaluation row: the rule choice per
    // integration patch plus, where the refined rule fires, its quadrature
    // nodes with target distances and speed-scaled weights. Building a plan
    // walks the curve (nearest-point searches, panel layout); applying one
    // is a pure kernel sweep, so assembling the same geometry at many
    // frequencies pays the walk once.
    struct RowPlan {
        struct PatchRule {
            bool refined = false;
            std::vector<double> s, r, cw;  // parameter, target distance, weight * speed
        };
        Vec2 x;
        std::vector<PatchRule> patch;
    };

    RowPlan plan_row(const Vec2& x) const { return plan_row_impl(x, -1, 0.0); }

    std::vector<RowPlan> plan_rows(const std::vector<Vec2>& targets) const {
        std::vector<RowPlan> plans;
        plans.reserve(targets.size());
        for (const Vec2& x : targets) plans.push_back(plan_row(x));
        return plans;
    }

    // One evaluation row at a positive wavenumber; negative frequencies are
    // the callers' conjugation of a positive assembly.
    void apply_row(cplx* row, double kappa, const RowPlan& plan) const {
        for (int p = 0; p < patch_count(); ++p) {
            cplx* out = row + patches_[p].first;
            if (plan.patch[p].refined)
                near_patch_row(out, kappa, plan.patch[p]);
            else
                far_patch_row(out, p, kappa, plan.x);
        }
    }

    // Square collocation matrix of the single-layer operator acting on the
    // working unknown. Negative frequencies conjugate the positive assembly.
    MatC single_layer(double kappa) const {
        if (kappa < 0.0) return single_layer(-kappa).conjugate();
        MatC a(size(), size());
        std::vector<cplx> row(size());
        for (int g = 0; g < size(); ++g) {
            apply_row(row.data(), kappa, self_plans_[g]);
            for (int l = 0; l < size(); ++l) a(g, l) = row[l];
        }
        return a;
    }

    // Potential evaluation matrix: row per target, column per node weight.
    MatC potential_matrix(double kappa, const std::vector<Vec2>& targets) const {
        return potential_matrix(kappa, plan_rows(targets));
    }

    MatC potential_matrix(double kappa, const std::vector<RowPlan>& plans) const {
        if (kappa < 0.0) return potential_matrix(-kappa, plans).conjugate();
        MatC a(static_cast<long>(plans.size()), size());
        std::vector<cplx> row(size());
        for (size_t t = 0; t < plans.size(); ++t) {
            apply_row(row.data(), kappa, plans[t]);
            for (int l = 0; l < size(); ++l) a(static_cast<long>(t), l) = row[l];
        }
        return a;
    }

    VecC eval_potential(double kappa, const VecC& psi_tilde,
                        const std::vector<Vec2>& targets) const {
        return potential_matrix(kappa, targets) * psi_tilde;
    }

private:
    RowPlan plan_row_impl(const Vec2& x, int self_patch, double self_s) const {
        RowPlan plan;
        plan.x = x;
        plan.patch.resize(patch_count());
        for (int p = 0; p < patch_count(); ++p) {
            if (p == self_patch) {
                build_near_rule(plan.patch[p], p, x, self_s, 0.0);
                continue;
            }
            // Distance from the target to this patch decides the rule. The
            // plain rule's error is roughly rho^-n with rho the Bernstein
            // ellipse parameter of the kernel's nearest singularity, at
            // imaginary parameter offset ~ 2 d / patch length; switch to the
            // refined rule wherever that estimate exceeds roundoff.
            double sstar, d;
            nearest_preimage(p, x, sstar, d);
            const double rho_req = std::exp(28.0 / n_);
            const double d_far = 0.25 * (rho_req - 1.0 / rho_req) * patches_[p].length;
            if (d <= d_far) build_near_rule(plan.patch[p], p, x, sstar, d);
        }
        return plan;
    }

    void far_patch_row(cplx* out, int p, double kappa, const Vec2& x) const {
        const int base = patches_[p].first;
        for (int l = 0; l < n_; ++l) {
            const int g = base + l;
            out[l] = wx_[l] * kernel_phi(kappa, x, pos_[g]) * speed_[g];
        }
    }

    // Geometrically refined composite Gauss rule toward the singular
    // preimage s*; records parameter, distance, and weight per node.
    void build_near_rule(RowPlan::PatchRule& rule, int p, const Vec2& x, double sstar,
                         double d) const {
        rule.refined = true;
        const ArcPatch& pa = patches_[p];
        const double mid = 0.5 * (pa.a + pa.b), h = 0.5 * (pa.b - pa.a);
        const double sc = std::clamp(sstar, -1.0, 1.0);

        auto dist_at = [&](double s) {
            const CovValue cv = cov_theta(s, pa.cov);
            return dist(x, arc_->position(mid + h * cv.theta));
        };

        // Half-width of the central region around s*, measured per side as
        // the parameter offset at which the target distance doubles. On-arc
        // targets (d = 0, log singularity) instead drop a roundoff sliver
        // whose integrable mass is negligible.
        auto central_halfwidth = [&](double dir) {
            if (d <= 0.0) return 1e-13;
            double w = 1e-12;
            while (w < 2.0) {
                const double s = sc + dir * w;
                if (s <= -1.0 || s >= 1.0 || dist_at(s) >= 2.0 * d) break;
                w *= 2.0;
            }
            return 0.5 * w;
        };

        static thread_local QuadRule gl = gauss_legendre(10);

        auto add_panel = [&](double a, double b) {
            if (!(b > a)) return;
            for (size_t q = 0; q < gl.nodes.size(); ++q) {
                const double s = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[q];
                const CovValue cv = cov_theta(s, pa.cov);
                const double theta = mid + h * cv.theta;
                const CurvePoint cp = arc_->eval(theta);
                const double r = dist(x, cp.pos);
                if (!(r > 0.0)) continue;  // roundoff-coincident; weight is negligible
                rule.s.push_back(s);
                rule.r.push_back(r);
                rule.cw.push_back(0.5 * (b - a) * gl.weights[q] * cp.d1.norm());
            }
        };

        // Cover [from, s*] with panels halving toward s*, stopping f short;
        // off-arc targets get one extra panel over the remaining gap, where
        // the integrand is smooth at the scale of the target distance.
        auto cover = [&](double from, double f) {
            const double dir = sc > from ? 1.0 : -1.0;
            const double stop = sc - dir * f;
            double cur = from;
            while (dir * (stop - cur) > 0.0) {
                double nxt = 0.5 * (cur + sc);
                if (dir * (stop - nxt) <= 0.0) nxt = stop;
                add_panel(std::min(cur, nxt), std::max(cur, nxt));
                cur = nxt;
            }
            if (d > 0.0) {
                const double edge = dir > 0.0 ? std::max(from, stop) : std::min(from, stop);
                add_panel(std::min(edge, sc), std::max(edge, sc));
            }
        };
        if (sc > -1.0) cover(-1.0, central_halfwidth(-1.0));
        if (sc < 1.0) cover(1.0, central_halfwidth(1.0));
    }

    // Kernel sweep over a recorded refined rule, accumulated in Chebyshev
    // coefficient space; one transform back to nodal (Lagrange) weights at
    // the end.
    void near_patch_row(cplx* out, double kappa, const RowPlan::PatchRule& rule) const {
        std::vector<cplx> acc(n_, cplx{0.0, 0.0});
        for (size_t g = 0; g < rule.s.size(); ++g) {
            const double s = rule.s[g];
            const cplx f = rule.cw[g] * (0.25 * iu * hankel1_0(kappa * rule.r[g]));
            double t0 = 1.0, t1 = s;
            acc[0] += f;
            if (n_ > 1) acc[1] += f * s;
            for (int m = 2; m < n_; ++m) {
                const double tm = 2.0 * s * t1 - t0;
                t0 = t1;
                t1 = tm;
                acc[m] += f * tm;
            }
        }
        for (int l = 0; l < n_; ++l) {
            cplx v{0.0, 0.0};
            for (int m = 0; m < n_; ++m) v += acc[m] * coef_[static_cast<size_t>(m) * n_ + l];
            out[l] = v;
        }
    }

    // Parameter preimage of the nearest point of patch p to x, plus the
    // Euclidean distance.
    void nearest_preimage(int p, const Vec2& x, double& sstar, double& d) const {
        const ArcPatch& pa = patches_[p];
        const double mid = 0.5 * (pa.a + pa.b), h = 0.5 * (pa.b - pa.a);
        auto dist_at = [&](double s) {
            const CovValue cv = cov_theta(s, pa.cov);
            return dist(x, arc_->position(mid + h * cv.theta));
        };
        const int m = 64;
        double best = 1e300, arg = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double s = -1.0 + 2.0 * i / m;
            const double di = dist_at(s);
            if (di < best) {
                best = di;
                arg = s;
            }
        }
        const double hstep = 2.0 / m;
        sstar = golden_min(dist_at, std::max(-1.0, arg - hstep), std::min(1.0, arg + hstep),
                           1e-12);
        d = dist_at(sstar);
        if (best < d) {
            sstar = arg;
            d = best;
        }
    }

    std::shared_ptr<const ParametricCurve> arc_;
    int n_;
    std::vector<double> sx_, wx_, coef_;
    std::vector<ArcPatch> patches_;
    std::vector<double> s_, theta_, speed_, jac_;
    std::vector<Vec2> pos_;
    std::vector<int> patch_of_;
    std::vector<RowPlan> self_plans_;
};

// Convenience: discretization of one overlapping-decomposition patch, with
// integration-patch breakpoints at the plateau boundaries (neighbor arc
// endpoints) where generated data carries induced singularities.
inline OpenArcDiscretization discretize_patch(const PatchDecomposition& dec, int j,
                                              int nodes_per_patch) {
    const PatchInterval& p = dec.patch(j);
    auto arc = std::make_shared<SubArc>(dec.parent_ptr(), p.a, p.b);
    std::vector<double> breaks = {p.a, p.b};
    std::vector<double> sing;
    if (p.tov_a > p.a) {
        breaks.push_back(p.tov_a);
        sing.push_back(p.tov_a);
    }
    if (p.tov_b < p.b) {
        breaks.push_back(p.tov_b);
        sing.push_back(p.tov_b);
    }
    return OpenArcDiscretization(arc, breaks, sing, nodes_per_patch);
}

// Uniform subdivision of a stand-alone arc (used for whole-boundary
// reference solves on open cavities).
inline OpenArcDiscretization discretize_arc(std::shared_ptr<const ParametricCurve> arc,
                                            int n_patches, int nodes_per_patch) {
    std::vector<double> breaks(n_patches + 1);
    const double lo = arc->param_begin(), hi = arc->param_end();
    for (int k = 0; k <= n_patches; ++k) breaks[k] = lo + (hi - lo) * k / n_patches;
    return OpenArcDiscretization(arc, breaks, {}, nodes_per_patch);
}

}  // namespace fthms
