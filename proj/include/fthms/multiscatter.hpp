#pragma once

// Time-domain multiple-scattering engine. The boundary is covered by
// overlapping windowed patches; each generation solves one frequency-domain
// problem per patch and time window, with data generated from the traces of
// every other patch's wave from the previous generation. Summing the
// generations reconstructs the scattered field exactly on a time range that
// grows linearly with the generation count: neglected interactions must
// cross the smallest inter-patch gap once per generation.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fthms/bie.hpp"
#include "fthms/core.hpp"
#include "fthms/dense_solver.hpp"
#include "fthms/ftransform.hpp"
#include "fthms/geometry.hpp"
#include "fthms/incident.hpp"

namespace fthms {

namespace detail {

// Strided work loop over [0, n); body(i) must be safe to run concurrently
// for distinct i. Results must not depend on scheduling: callers write to
// disjoint slots and do any reductions in index order afterwards.
template <class F>
inline void parallel_for(int n, int workers, F&& body) {
    const int k = std::max(1, std::min(workers, n));
    if (k == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto drain = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(k - 1);
    for (int w = 1; w < k; ++w) pool.emplace_back(drain);
    drain();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Even-odd crossing test against a dense polyline sampling of a closed
// curve. Used only to blank snapshot pixels on the wrong side of the
// boundary, so polyline accuracy is plenty.
inline bool point_inside(const ParametricCurve& c, const Vec2& p) {
    const int m = 720;
    const double lo = c.param_begin(), len = c.param_length();
    bool inside = false;
    Vec2 a = c.position(lo);
    for (int i = 1; i <= m; ++i) {
        const Vec2 b = c.position(lo + len * i / m);
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) inside = !inside;
        }
        a = b;
    }
    return inside;
}

}  // namespace detail

// How the scene should be read. The recursion itself is identical in every
// mode (the integral representation radiates into whichever region the
// evaluation points sit in); the mode only drives shape validation and
// which side of closed boundaries gets blanked in snapshots.
enum class ScatterMode { interior, exterior_obstacles, exterior_arcs, open_cavity };

// Frequency content of one run: a principal band handled by Fourier
// continuation plus, for real (two-sided) signals, a graded tail below
// log_cutoff where the response is logarithmically singular in frequency.
// One-sided (complex analytic-signal) runs integrate the band alone.
struct FrequencyGrid {
    double band_lo = 5.0;
    double band_hi = 25.0;
    int n_grid = 501;   // solve frequencies across the band
    int n_modes = 170;  // continuation modes; bounds the reachable horizon
    bool two_sided = false;
    double log_cutoff = 1.0;
    int log_intervals = 8;
    double log_grading = 3.0;
    int log_cheb = 16;
    int log_basis = 6;

    int solve_count() const { return n_grid + (two_sided ? log_intervals * log_cheb : 0); }

    // Largest recentered |t| the continuation synthesizes reliably (frame
    // period is twice the band span, so modes reach n_modes * pi / span).
    double mode_reach() const { return n_modes * pi / (band_hi - band_lo); }

    void validate() const {
        if (!(band_hi > band_lo) || !(band_lo >= 0.0))
            throw config_error("FrequencyGrid: band limits out of order");
        if (n_modes < 8) throw config_error("FrequencyGrid: too few continuation modes");
        if (n_grid < 2 * n_modes + 4)
            throw config_error("FrequencyGrid: n_grid must be at least 2 n_modes + 4");
        if (two_sided) {
            if (std::abs(band_lo - log_cutoff) > 1e-12 * std::max(1.0, log_cutoff))
                throw config_error(
                    "FrequencyGrid: two-sided runs need the band to start at log_cutoff");
        } else if (!(band_lo > 0.0)) {
            throw config_error("FrequencyGrid: a one-sided band must stay away from zero");
        }
    }
};

struct SnapshotRequest {
    Vec2 lo{-3.0, -3.0}, hi{3.0, 3.0};
    int nx = 0, ny = 0;
    std::vector<double> times;

    bool empty() const { return times.empty() || nx <= 0 || ny <= 0; }

    // Row-major grid, x fastest; degenerate axes collapse onto lo.
    std::vector<Vec2> points() const {
        std::vector<Vec2> pts;
        pts.reserve(static_cast<size_t>(nx) * static_cast<size_t>(ny));
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                pts.push_back({nx > 1 ? lo.x + (hi.x - lo.x) * ix / (nx - 1.0) : lo.x,
                               ny > 1 ? lo.y + (hi.y - lo.y) * iy / (ny - 1.0) : lo.y});
        return pts;
    }
};

struct RunPlan {
    ScatterMode mode = ScatterMode::exterior_obstacles;
    int generations = 4;       // reflection passes to resolve
    int windows = 1;           // time windows per patch solve
    double half_width = 10.0;  // window half-support H; centers sit 1.5 H apart
    double dt = 0.01;          // uniform output grid spacing
    double wave_speed = 1.0;
    FrequencyGrid freq;
    double prune_tol = 0.0;  // drop patch data below this times the incident scale
    int workers = 1;
    SolveOptions solver;  // automatic resolves to a cached dense LU at these sizes
    std::vector<Vec2> observation;
    SnapshotRequest snapshot;
    bool keep_generation_data = false;
    bool keep_subsolutions = false;

    // End of the output grid; the last window's support ends here.
    double horizon() const { return 1.5 * half_width * (windows - 1) + half_width; }

    void validate() const {
        if (generations < 1) throw config_error("RunPlan: need at least one generation");
        if (windows < 1) throw config_error("RunPlan: need at least one time window");
        if (!(half_width > 0.0)) throw config_error("RunPlan: window width must be positive");
        if (!(dt > 0.0)) throw config_error("RunPlan: dt must be positive");
        const double half_steps = 0.5 * half_width / dt;
        if (std::abs(half_steps - std::round(half_steps)) > 1e-9 * std::max(1.0, half_steps))
            throw config_error(
                "RunPlan: half the window width must be a whole number of time steps");
        if (2.0 * half_width / dt < 8.0)
            throw config_error("RunPlan: dt too coarse to sample the window");
        if (!(wave_speed > 0.0)) throw config_error("RunPlan: wave speed must be positive");
        if (prune_tol < 0.0) throw config_error("RunPlan: prune tolerance must be >= 0");
        if (workers < 1) throw config_error("RunPlan: need at least one worker");
        freq.validate();
        for (double t : snapshot.times)
            if (t < 0.0 || t > horizon())
                throw config_error("RunPlan: snapshot times must lie inside the horizon");
    }
};

// Time up to which the first `generations` passes reconstruct the field
// exactly: every neglected interaction has crossed the smallest patch
// separation that many times.
inline double guarantee_time(int generations, double delta_min, double wave_speed) {
    return generations * delta_min / wave_speed;
}

// One windowed piece of the boundary cover: either an open-arc
// discretization (a decomposition patch or a whole standalone arc) or a
// whole closed obstacle. Nodes carry the window weight and overlap
// membership that data assembly needs.
struct ScenePatch {
    std::shared_ptr<const OpenArcDiscretization> arc;  // exactly one of arc
    std::shared_ptr<const ClosedCurveDiscretization> body;  // and body is set
    int chain = -1;  // decomposition this patch belongs to; -1 for whole pieces
    int index_in_chain = 0;
    int left = -1, right = -1;  // patch ids sharing an overlap within the chain
    int offset = 0;             // first global node id
    int count = 0;
    Eigen::VectorXd window;  // window weight at each node
    std::vector<char> in_left_overlap, in_right_overlap;
    std::vector<Vec2> nodes;
};

class Scene {
public:
    // Split a parent curve (closed or open) into an overlapping windowed
    // cover of n_patches pieces. Returns the global id of the first patch.
    int add_decomposed(std::shared_ptr<const ParametricCurve> parent, int n_patches,
                       double overlap_fraction, int nodes_per_patch, double c0 = 1.0 / 3.0,
                       double c1 = 2.0 / 3.0) {
        auto dec =
            std::make_shared<PatchDecomposition>(parent, n_patches, overlap_fraction, c0, c1);
        const int chain_id = static_cast<int>(chains_.size());
        const int base = static_cast<int>(patches_.size());
        for (int j = 0; j < dec->size(); ++j) {
            ScenePatch sp;
            sp.arc = std::make_shared<OpenArcDiscretization>(
                discretize_patch(*dec, j, nodes_per_patch));
            sp.chain = chain_id;
            sp.index_in_chain = j;
            const int prev = dec->prev_index(j), next = dec->next_index(j);
            sp.left = prev >= 0 && prev != j ? base + prev : -1;
            sp.right = next < dec->size() && next != j ? base + next : -1;
            const PatchInterval& iv = dec->patch(j);
            const int n = sp.arc->size();
            sp.window.resize(n);
            sp.in_left_overlap.assign(n, 0);
            sp.in_right_overlap.assign(n, 0);
            for (int g = 0; g < n; ++g) {
                const double th = sp.arc->theta(g);
                sp.window(g) = dec->chi(j, th);
                sp.in_left_overlap[g] = iv.has_left_overlap && th < iv.tov_a ? 1 : 0;
                sp.in_right_overlap[g] = iv.has_right_overlap && th > iv.tov_b ? 1 : 0;
                sp.nodes.push_back(sp.arc->position(g));
            }
            push_patch(std::move(sp));
        }
        chains_.push_back(dec);
        components_.push_back({parent, parent->closed(), base, dec->size()});
        return base;
    }

    // Whole closed obstacle solved as a single patch (combined-field
    // equation); its window is identically one and it has no overlaps.
    int add_obstacle(std::shared_ptr<const ParametricCurve> curve, int n_half) {
        ScenePatch sp;
        sp.body = std::make_shared<ClosedCurveDiscretization>(curve, n_half);
        const int n = sp.body->size();
        sp.window = Eigen::VectorXd::Ones(n);
        sp.in_left_overlap.assign(n, 0);
        sp.in_right_overlap.assign(n, 0);
        for (int g = 0; g < n; ++g) sp.nodes.push_back(sp.body->position(g));
        const int id = static_cast<int>(patches_.size());
        push_patch(std::move(sp));
        components_.push_back({std::move(curve), true, id, 1});
        return id;
    }

    // Whole open arc as a single patch (first-kind single-layer equation).
    int add_arc(std::shared_ptr<const ParametricCurve> arc, int n_patches,
                int nodes_per_patch) {
        ScenePatch sp;
        sp.arc = std::make_shared<OpenArcDiscretization>(
            discretize_arc(arc, n_patches, nodes_per_patch));
        const int n = sp.arc->size();
        sp.window = Eigen::VectorXd::Ones(n);
        sp.in_left_overlap.assign(n, 0);
        sp.in_right_overlap.assign(n, 0);
        for (int g = 0; g < n; ++g) sp.nodes.push_back(sp.arc->position(g));
        const int id = static_cast<int>(patches_.size());
        push_patch(std::move(sp));
        components_.push_back({std::move(arc), false, id, 1});
        return id;
    }

    int patch_count() const { return static_cast<int>(patches_.size()); }
    const ScenePatch& patch(int j) const { return patches_[j]; }
    int total_nodes() const { return total_nodes_; }
    int component_count() const { return static_cast<int>(components_.size()); }

    std::vector<Vec2> all_nodes() const {
        std::vector<Vec2> pts;
        pts.reserve(total_nodes_);
        for (const auto& sp : patches_) pts.insert(pts.end(), sp.nodes.begin(), sp.nodes.end());
        return pts;
    }

    // Smallest distance a wave must cross between the active part of one
    // patch and the rest of the boundary. Within a chain the decomposition
    // reports it exactly; across components the whole-curve separation is a
    // safe (conservative) stand-in. Infinite for a single isolated piece.
    double delta_min() const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& dec : chains_) d = std::min(d, dec->delta_min());
        for (size_t a = 0; a + 1 < components_.size(); ++a)
            for (size_t b = a + 1; b < components_.size(); ++b) {
                const auto& ca = components_[a];
                const auto& cb = components_[b];
                d = std::min(d, patch_distance(*ca.curve, ca.curve->param_begin(),
                                               ca.curve->param_end(), *cb.curve,
                                               cb.curve->param_begin(), cb.curve->param_end()));
            }
        return d;
    }

    double boundary_clearance(const Vec2& x) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& c : components_)
            d = std::min(d, point_arc_distance(*c.curve, c.curve->param_begin(),
                                               c.curve->param_end(), x));
        return d;
    }

    // True when an evaluation point lies on the far side of a closed
    // boundary for the given mode (inside an obstacle, or outside the
    // domain of an interior problem).
    bool masks_point(ScatterMode mode, const Vec2& p) const {
        if (mode == ScatterMode::interior)
            return !detail::point_inside(*components_.front().curve, p);
        if (mode == ScatterMode::exterior_obstacles) {
            for (const auto& c : components_)
                if (c.closed && detail::point_inside(*c.curve, p)) return true;
        }
        return false;
    }

    void check_mode(ScatterMode mode) const {
        if (patches_.empty()) throw config_error("Scene: no boundary pieces");
        auto all_closed = [&] {
            return std::all_of(components_.begin(), components_.end(),
                               [](const Component& c) { return c.closed; });
        };
        auto all_open = [&] {
            return std::all_of(components_.begin(), components_.end(),
                               [](const Component& c) { return !c.closed; });
        };
        switch (mode) {
            case ScatterMode::interior:
                if (components_.size() != 1 || chains_.size() != 1 ||
                    !components_.front().closed)
                    throw config_error(
                        "Scene: interior mode needs one closed curve split into patches");
                break;
            case ScatterMode::open_cavity:
                if (components_.size() != 1 || chains_.size() != 1 ||
                    components_.front().closed)
                    throw config_error(
                        "Scene: open_cavity mode needs one open arc split into patches");
                break;
            case ScatterMode::exterior_obstacles:
                if (!all_closed())
                    throw config_error(
                        "Scene: exterior_obstacles mode allows closed components only");
                break;
            case ScatterMode::exterior_arcs:
                if (!all_open())
                    throw config_error("Scene: exterior_arcs mode allows open arcs only");
                break;
        }
    }

private:
    struct Component {
        std::shared_ptr<const ParametricCurve> curve;
        bool closed = false;
        int first_patch = 0;
        int patch_count = 0;
    };

    void push_patch(ScenePatch sp) {
        sp.offset = total_nodes_;
        sp.count = static_cast<int>(sp.nodes.size());
        total_nodes_ += sp.count;
        patches_.push_back(std::move(sp));
    }

    std::vector<ScenePatch> patches_;
    std::vector<std::shared_ptr<const PatchDecomposition>> chains_;
    std::vector<Component> components_;
    int total_nodes_ = 0;
};

// Boundary data of one generation: a complex (nodes x time grid) block per
// patch, already multiplied by the patch window. The first generation is
// the negated windowed incident trace; later ones are assembled from the
// other patches' waves. Inactive patches hold exact zeros, either because
// nothing has reached them yet or because pruning dropped them.
struct GenerationData {
    int generation = 0;
    std::vector<MatC> data;
    std::vector<char> active;
};

// One patch's wave for one generation: time traces at every boundary node
// and observation point (rows follow the scene's node order, then the
// observation list), plus values on the snapshot grid when requested.
struct SubSolution {
    int patch = -1;
    int generation = 0;
    MatC at_points;
    MatC at_snapshot;
};

struct SolutionAccumulator {
    MatC at_points;
    MatC at_snapshot;

    void add(const SubSolution& s) {
        at_points += s.at_points;
        if (s.at_snapshot.size() > 0) at_snapshot += s.at_snapshot;
    }
};

struct PruneEvent {
    int generation = 0;
    int patch = 0;
    double norm = 0.0;
    double threshold = 0.0;
};

// Deactivate patches whose data norm fell to or below the threshold. Exact
// zeros are dropped silently (there is nothing to solve); positive norms
// below the threshold are logged as pruned so runs can account for the
// energy they discarded.
inline std::vector<char> prune_converged(const std::vector<double>& norms, double threshold,
                                         int generation,
                                         std::vector<PruneEvent>* events = nullptr) {
    std::vector<char> active(norms.size(), 1);
    for (size_t j = 0; j < norms.size(); ++j) {
        if (norms[j] > threshold) continue;
        active[j] = 0;
        if (events && norms[j] > 0.0)
            events->push_back({generation, static_cast<int>(j), norms[j], threshold});
    }
    return active;
}

struct PatchSolveStats {
    double data_norm = 0.0;    // max |data| over the whole grid
    double causal_norm = 0.0;  // max |data| before the previous guarantee time
    long iterations = 0;       // accumulated GMRES iterations (0 when direct)
    double max_residual = 0.0;
    bool solved = false;
    double solve_ms = 0.0, synth_ms = 0.0;
};

struct GenerationReport {
    int generation = 0;
    double guarantee = 0.0;  // reconstruction is exact up to this time
    std::vector<PatchSolveStats> patches;

    double solve_ms() const {
        double s = 0.0;
        for (const auto& p : patches) s += p.solve_ms;
        return s;
    }
    double synth_ms() const {
        double s = 0.0;
        for (const auto& p : patches) s += p.synth_ms;
        return s;
    }
};

struct RunReport {
    int patch_count = 0;
    int node_count = 0;
    int solve_frequencies = 0;
    int windows = 0;
    int time_steps = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double cover_end = 0.0;  // window cover sums to one up to here
    double delta_min = 0.0;
    double wave_speed = 1.0;
    double prepare_ms = 0.0;
    double total_ms = 0.0;
    int masked_snapshot_points = 0;
    std::vector<GenerationReport> generations;
    std::vector<PruneEvent> pruned;

    double guarantee() const {
        return generations.empty() ? 0.0 : generations.back().guarantee;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << std::setprecision(4);
        os << "boundary: " << patch_count << " patches, " << node_count << " nodes\n";
        os << "frequencies: " << solve_frequencies << " solves per window, " << windows
           << " window(s)\n";
        os << "time grid: " << time_steps << " steps of " << dt << " (horizon " << horizon
           << ", cover ends at " << cover_end << ")\n";
        os << "separation: delta_min = " << delta_min << ", wave speed = " << wave_speed
           << ", guaranteed time = " << guarantee() << "\n";
        os << std::scientific << std::setprecision(3);
        for (const auto& g : generations) {
            os << "generation " << g.generation << ": guaranteed to t = " << std::defaultfloat
               << std::setprecision(4) << g.guarantee << std::scientific
               << std::setprecision(3);
            double dn = 0.0, cn = 0.0, res = 0.0;
            long its = 0;
            int solved = 0;
            for (const auto& p : g.patches) {
                dn = std::max(dn, p.data_norm);
                cn = std::max(cn, p.causal_norm);
                res = std::max(res, p.max_residual);
                its += p.iterations;
                solved += p.solved ? 1 : 0;
            }
            os << ", data " << dn << ", causal residual " << cn << ", " << solved
               << " patch solves";
            if (its > 0) os << ", " << its << " GMRES iterations (worst residual " << res << ")";
            os << ", " << std::defaultfloat << std::setprecision(4)
               << 1e-3 * (g.solve_ms() + g.synth_ms()) << " s\n"
               << std::scientific << std::setprecision(3);
        }
        if (!pruned.empty()) {
            os << "pruned " << pruned.size() << " patch data block(s):";
            for (const auto& e : pruned)
                os << " (gen " << e.generation << ", patch " << e.patch << ", " << e.norm
                   << ")";
            os << "\n";
        }
        if (masked_snapshot_points > 0)
            os << "snapshot: " << masked_snapshot_points
               << " grid point(s) masked (inside an obstacle or outside the domain)\n";
        os << std::defaultfloat << std::setprecision(4);
        os << "wall clock: " << 1e-3 * prepare_ms << " s setup, " << 1e-3 * total_ms
           << " s total\n";
        return os.str();
    }
};

struct RunResult {
    std::vector<double> times;
    SolutionAccumulator u;
    std::vector<MatC> obs_by_generation;  // per-generation increment at the observations
    GenerationData next_data;  // data the next generation would have solved
    std::vector<GenerationData> data_history;        // kept on request
    std::vector<std::vector<SubSolution>> sub_history;  // kept on request
    RunReport report;
};

class MultiScatterSolver {
public:
    MultiScatterSolver(Scene scene, RunPlan plan)
        : scene_(std::move(scene)), plan_(std::move(plan)) {
        const auto t0 = std::chrono::steady_clock::now();
        plan_.validate();
        scene_.check_mode(plan_.mode);
        prepare();
        prepare_ms_ = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    }

    const Scene& scene() const { return scene_; }
    const RunPlan& plan() const { return plan_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& omegas() const { return omegas_; }
    const TimeWindowSet& windows() const { return win_; }
    double cover_end() const { return win_.cover_end(); }
    double delta_min() const { return delta_; }
    double guarantee_time(int generations) const {
        return fthms::guarantee_time(generations, delta_, plan_.wave_speed);
    }
    int observation_row(int i) const { return scene_.total_nodes() + i; }

    // Incident traces on the scene's nodes over the output grid.
    MatC incident_node_traces(const IncidentFieldSpec& spec) const {
        IncidentTimeField field(spec, scene_.all_nodes(), plan_.freq.n_grid,
                                plan_.freq.n_modes);
        MatC tr(scene_.total_nodes(), nt_);
        for (int i = 0; i < nt_; ++i) tr.col(i) = field.at(times_[i]);
        return tr;
    }

    GenerationData init_first_generation(const IncidentFieldSpec& spec) const {
        return first_generation_from(incident_node_traces(spec));
    }

    // First-generation data: the negated incident trace under each patch's
    // window. Patches the field never reaches stay inactive.
    GenerationData first_generation_from(const MatC& incident_at_nodes) const {
        if (incident_at_nodes.rows() != scene_.total_nodes() ||
            incident_at_nodes.cols() != nt_)
            throw config_error("first_generation_from: trace matrix has the wrong shape");
        GenerationData g;
        g.generation = 1;
        g.data.resize(scene_.patch_count());
        g.active.assign(scene_.patch_count(), 1);
        for (int j = 0; j < scene_.patch_count(); ++j) {
            const ScenePatch& sp = scene_.patch(j);
            g.data[j] = incident_at_nodes.middleRows(sp.offset, sp.count);
            for (int r = 0; r < sp.count; ++r) g.data[j].row(r) *= -sp.window(r);
            g.active[j] = g.data[j].cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
        }
        return g;
    }

    // Sum of every other patch's wave at this patch's nodes. On an overlap
    // shared with a neighbor the neighbor's newest wave is excluded: the
    // two windows split the data on the shared piece between the pair, and
    // the neighbor's share is already carried by its own boundary
    // condition. Everything else (non-neighbors, and neighbor waves on the
    // non-shared part) enters in full.
    MatC masked_neighbor_sum(const std::vector<SubSolution>& subs, int j) const {
        require_complete(subs);
        const ScenePatch& sp = scene_.patch(j);
        MatC sum = MatC::Zero(sp.count, nt_);
        for (int k = 0; k < scene_.patch_count(); ++k) {
            if (k == j) continue;
            sum += subs[k].at_points.middleRows(sp.offset, sp.count);
        }
        for (int r = 0; r < sp.count; ++r) {
            if (sp.in_left_overlap[r] && sp.left >= 0)
                sum.row(r) -= subs[sp.left].at_points.row(sp.offset + r);
            if (sp.in_right_overlap[r] && sp.right >= 0)
                sum.row(r) -= subs[sp.right].at_points.row(sp.offset + r);
        }
        return sum;
    }

    // Assemble the next generation's data from the current waves, then
    // deactivate whatever fell below the pruning threshold (scaled by
    // data_scale, normally the incident trace norm).
    GenerationData next_generation_data(const GenerationData& prev,
                                        const std::vector<SubSolution>& subs,
                                        std::vector<PruneEvent>* events = nullptr,
                                        double data_scale = 1.0) const {
        require_complete(subs);
        for (const auto& s : subs)
            if (s.generation != prev.generation)
                throw config_error(
                    "next_generation_data: waves and data are from different generations");
        GenerationData g;
        g.generation = prev.generation + 1;
        g.data.resize(scene_.patch_count());
        std::vector<double> norms(scene_.patch_count(), 0.0);
        for (int j = 0; j < scene_.patch_count(); ++j) {
            const ScenePatch& sp = scene_.patch(j);
            g.data[j] = masked_neighbor_sum(subs, j);
            for (int r = 0; r < sp.count; ++r) g.data[j].row(r) *= -sp.window(r);
            norms[j] = g.data[j].cwiseAbs().maxCoeff();
        }
        g.active = prune_converged(norms, plan_.prune_tol * data_scale, g.generation, events);
        return g;
    }

    // Solve one patch's windowed frequency problems for one generation and
    // synthesize its wave on the output grid. The patch's own rows carry
    // the boundary data itself resummed through the window cover (equal to
    // the data wherever the cover sums to one); every other row is the
    // radiated representation.
    SubSolution solve_subproblem(const GenerationData& gen, int j,
                                 PatchSolveStats* stats = nullptr) const {
        if (j < 0 || j >= scene_.patch_count())
            throw config_error("solve_subproblem: patch index out of range");
        if (static_cast<int>(gen.data.size()) != scene_.patch_count())
            throw config_error("solve_subproblem: generation data has the wrong shape");

        const ScenePatch& sp = scene_.patch(j);
        SubSolution sub;
        sub.patch = j;
        sub.generation = gen.generation;
        sub.at_points = MatC::Zero(total_rows_, nt_);
        if (!snap_points_.empty())
            sub.at_snapshot = MatC::Zero(static_cast<long>(snap_points_.size()),
                                         static_cast<long>(plan_.snapshot.times.size()));

        PatchSolveStats st;
        if (!gen.active[j]) {
            if (stats) *stats = st;
            return sub;
        }
        const MatC& data = gen.data[j];
        st.data_norm = data.cwiseAbs().maxCoeff();
        const double t_prev = guarantee_time(gen.generation - 1);
        int causal_cols = 0;
        while (causal_cols < nt_ && times_[causal_cols] < t_prev) ++causal_cols;
        if (causal_cols > 0)
            st.causal_norm = data.leftCols(causal_cols).cwiseAbs().maxCoeff();

        for (int r = 0; r < sp.count; ++r)
            sub.at_points.row(sp.offset + r) = data.row(r).cwiseProduct(win_sum_);

        const int n_omega = static_cast<int>(omegas_.size());
        const int n_point = n_point_targets_[j];
        const int n_snap = static_cast<int>(snap_targets_.size());
        MatC samples(sp.count, n_samples_);
        for (int q = 0; q < plan_.windows; ++q) {
            const long base =
                std::llround((win_.center(q) - plan_.half_width) / plan_.dt);
            samples.setZero();
            const int i0 = static_cast<int>(std::max<long>(0, -base));
            const int i1 = static_cast<int>(
                std::min<long>(n_samples_, static_cast<long>(nt_) - base));
            if (i1 > i0)
                samples.middleCols(i0, i1 - i0) =
                    data.middleCols(static_cast<int>(base) + i0, i1 - i0);
            if (samples.cwiseAbs().maxCoeff() == 0.0) continue;  // window sees no data
            st.solved = true;

            const auto t_solve = std::chrono::steady_clock::now();
            const MatC rhs = sft_->transform(samples);  // nodes x frequencies
            MatC traces(n_point + n_snap, n_omega);
            std::vector<int> its(n_omega, 0);
            std::vector<double> res(n_omega, 0.0);
            const PatchOps& ops = ops_[j];
            detail::parallel_for(n_omega, plan_.workers, [&](int w) {
                VecC psi;
                if (ops.lu[w]) {
                    psi = ops.lu[w]->solve(rhs.col(w));
                } else {
                    GmresResult r = gmres(ops.sys[w], rhs.col(w), plan_.solver.tol,
                                          plan_.solver.cap);
                    if (!r.converged)
                        throw solver_error("solve_subproblem: GMRES stalled at frequency " +
                                               std::to_string(omegas_[w]),
                                           r);
                    its[w] = r.iterations;
                    res[w] = r.residual;
                    psi = std::move(r.x);
                }
                traces.col(w) = ops.target[w] * psi;
            });
            for (int w = 0; w < n_omega; ++w) {
                st.iterations += its[w];
                st.max_residual = std::max(st.max_residual, res[w]);
            }
            st.solve_ms += std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t_solve)
                               .count();

            const auto t_synth = std::chrono::steady_clock::now();
            const MatC coef = band_->fit(traces.rightCols(plan_.freq.n_grid));
            MatC v = coef.topRows(n_point) * band_e_[q];
            if (tail_) v += traces.topLeftCorner(n_point, n_tail_) * tail_e_[q];
            scale_signal(v);
            for (int r = 0; r < n_point; ++r) sub.at_points.row(point_rows_[j][r]) += v.row(r);
            if (n_snap > 0) {
                MatC vs = coef.bottomRows(n_snap) * snap_band_e_[q];
                if (tail_) vs += traces.bottomLeftCorner(n_snap, n_tail_) * snap_tail_e_[q];
                scale_signal(vs);
                for (int r = 0; r < n_snap; ++r)
                    sub.at_snapshot.row(snap_targets_[r]) += vs.row(r);
            }
            st.synth_ms += std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t_synth)
                               .count();
        }
        if (stats) *stats = st;
        return sub;
    }

    RunResult run(const IncidentFieldSpec& spec) const {
        return run(incident_node_traces(spec));
    }

    // Full recursion: generations of simultaneous patch solves with a
    // barrier between generations (each one's data needs every wave of the
    // one before). Reductions run in fixed index order so results do not
    // depend on the worker count.
    RunResult run(const MatC& incident_at_nodes) const {
        const auto t0 = std::chrono::steady_clock::now();
        RunResult res;
        res.times = times_;
        res.u.at_points = MatC::Zero(total_rows_, nt_);
        if (!snap_points_.empty())
            res.u.at_snapshot = MatC::Zero(static_cast<long>(snap_points_.size()),
                                           static_cast<long>(plan_.snapshot.times.size()));

        GenerationData gen = first_generation_from(incident_at_nodes);
        double scale = 0.0;
        for (const auto& d : gen.data) scale = std::max(scale, d.cwiseAbs().maxCoeff());

        const int n_obs = static_cast<int>(plan_.observation.size());
        for (int m = 1; m <= plan_.generations; ++m) {
            GenerationReport gr;
            gr.generation = m;
            gr.guarantee = guarantee_time(m);
            gr.patches.resize(scene_.patch_count());
            std::vector<SubSolution> subs(scene_.patch_count());
            for (int j = 0; j < scene_.patch_count(); ++j)
                subs[j] = solve_subproblem(gen, j, &gr.patches[j]);
            for (int j = 0; j < scene_.patch_count(); ++j) res.u.add(subs[j]);
            MatC inc = MatC::Zero(n_obs, nt_);
            for (int j = 0; j < scene_.patch_count(); ++j)
                inc += subs[j].at_points.bottomRows(n_obs);
            res.obs_by_generation.push_back(std::move(inc));
            if (plan_.keep_generation_data) res.data_history.push_back(gen);
            GenerationData next = next_generation_data(gen, subs, &res.report.pruned, scale);
            if (plan_.keep_subsolutions) res.sub_history.push_back(std::move(subs));
            gen = std::move(next);
            res.report.generations.push_back(std::move(gr));
        }
        res.next_data = std::move(gen);

        res.report.patch_count = scene_.patch_count();
        res.report.node_count = scene_.total_nodes();
        res.report.solve_frequencies = static_cast<int>(omegas_.size());
        res.report.windows = plan_.windows;
        res.report.time_steps = nt_;
        res.report.dt = plan_.dt;
        res.report.horizon = plan_.horizon();
        res.report.cover_end = win_.cover_end();
        res.report.delta_min = delta_;
        res.report.wave_speed = plan_.wave_speed;
        res.report.prepare_ms = prepare_ms_;
        res.report.masked_snapshot_points = masked_snapshot_;
        res.report.total_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
        return res;
    }

private:
    struct PatchOps {
        std::vector<std::optional<DirectSolver>> lu;
        std::vector<MatC> sys;  // kept only for the iterative path
        std::vector<MatC> target;
    };

    void require_complete(const std::vector<SubSolution>& subs) const {
        if (static_cast<int>(subs.size()) != scene_.patch_count())
            throw config_error("every patch's wave is required before assembling data");
        for (int k = 0; k < scene_.patch_count(); ++k) {
            if (subs[k].patch != k || subs[k].at_points.rows() != total_rows_ ||
                subs[k].at_points.cols() != nt_)
                throw config_error("patch wave set is incomplete or out of order");
            if (subs[k].generation != subs[0].generation)
                throw config_error("patch waves span more than one generation");
        }
    }

    void scale_signal(MatC& v) const {
        if (plan_.freq.two_sided)
            v = (v.real() / pi).cast<cplx>();  // conjugate half adds its mirror
        else
            v *= cplx{1.0 / (2.0 * pi), 0.0};
    }

    void prepare() {
        win_ = TimeWindowSet{plan_.half_width, plan_.windows, 0.0};
        nt_ = static_cast<int>(std::llround(plan_.horizon() / plan_.dt));
        times_.resize(nt_);
        for (int i = 0; i < nt_; ++i) times_[i] = i * plan_.dt;
        delta_ = scene_.delta_min();

        if (plan_.freq.two_sided)
            tail_.emplace(plan_.freq.log_cutoff, plan_.freq.log_intervals,
                          plan_.freq.log_grading, plan_.freq.log_cheb, plan_.freq.log_basis);
        band_.emplace(plan_.freq.band_lo, plan_.freq.band_hi, plan_.freq.n_grid,
                      plan_.freq.n_modes);
        if (tail_) omegas_ = tail_->nodes();
        n_tail_ = static_cast<int>(omegas_.size());
        omegas_.insert(omegas_.end(), band_->grid().begin(), band_->grid().end());

        n_samples_ = static_cast<int>(std::llround(2.0 * plan_.half_width / plan_.dt));
        sft_.emplace(omegas_, plan_.half_width, n_samples_);

        win_sum_.resize(nt_);
        for (int i = 0; i < nt_; ++i) {
            double s = 0.0;
            for (int q = 0; q < plan_.windows; ++q) s += win_.value(q, times_[i]);
            win_sum_(i) = cplx{s, 0.0};
        }

        for (int q = 0; q < plan_.windows; ++q) {
            const double sq = win_.center(q);
            MatC e(band_->mode_count(), nt_);
            for (int i = 0; i < nt_; ++i) e.col(i) = band_->mode_integrals(times_[i] - sq);
            band_e_.push_back(std::move(e));
            if (tail_) {
                MatC w(n_tail_, nt_);
                for (int i = 0; i < nt_; ++i) w.col(i) = tail_->weights(times_[i] - sq);
                tail_e_.push_back(std::move(w));
            }
        }

        // Snapshot targets: blank points behind closed boundaries and points
        // hugging an obstacle where the plain evaluation rule breaks down.
        if (!plan_.snapshot.empty()) {
            snap_points_ = plan_.snapshot.points();
            const int n_times = static_cast<int>(plan_.snapshot.times.size());
            for (int i = 0; i < static_cast<int>(snap_points_.size()); ++i) {
                const Vec2& p = snap_points_[i];
                bool keep = !scene_.masks_point(plan_.mode, p);
                if (keep && !body_clear(p)) keep = false;
                if (keep)
                    snap_targets_.push_back(i);
                else
                    ++masked_snapshot_;
            }
            for (int q = 0; q < plan_.windows; ++q) {
                const double sq = win_.center(q);
                MatC e(band_->mode_count(), n_times);
                for (int i = 0; i < n_times; ++i)
                    e.col(i) = band_->mode_integrals(plan_.snapshot.times[i] - sq);
                snap_band_e_.push_back(std::move(e));
                if (tail_) {
                    MatC w(n_tail_, n_times);
                    for (int i = 0; i < n_times; ++i)
                        w.col(i) = tail_->weights(plan_.snapshot.times[i] - sq);
                    snap_tail_e_.push_back(std::move(w));
                }
            }
        }

        for (const Vec2& p : plan_.observation)
            if (!body_clear(p))
                throw config_error(
                    "RunPlan: an observation point sits too close to an obstacle "
                    "boundary for the evaluation rule; move it a few node spacings "
                    "away or refine the obstacle");

        const int n_obs = static_cast<int>(plan_.observation.size());
        total_rows_ = scene_.total_nodes() + n_obs;

        // Mode reach. Each window's trace is fitted in recentered time, so
        // the continuation must cover the window itself, the travel to the
        // farthest evaluation point, and an allowance of two patch
        // diameters for diffraction ringing down around a patch. The
        // output horizon is irrelevant here; recentering is what keeps
        // long runs cheap.
        {
            std::vector<Vec2> targets = scene_.all_nodes();
            targets.insert(targets.end(), plan_.observation.begin(),
                           plan_.observation.end());
            for (int r : snap_targets_) targets.push_back(snap_points_[r]);
            double r_max = 0.0, d_patch = 0.0;
            for (int j = 0; j < scene_.patch_count(); ++j)
                for (const Vec2& y : scene_.patch(j).nodes) {
                    for (const Vec2& x : targets) r_max = std::max(r_max, dist(x, y));
                    for (const Vec2& y2 : scene_.patch(j).nodes)
                        d_patch = std::max(d_patch, dist(y, y2));
                }
            const double required =
                plan_.half_width + (r_max + 2.0 * d_patch) / plan_.wave_speed;
            if (plan_.freq.mode_reach() < required)
                throw config_error(
                    "MultiScatterSolver: continuation modes reach " +
                    std::to_string(plan_.freq.mode_reach()) + " but the window plus "
                    "travel needs " + std::to_string(required) +
                    "; raise freq.n_modes (and n_grid with it)");
        }

        // Target lists: every other patch's nodes in global order, then the
        // observations, then the surviving snapshot points.
        const int np = scene_.patch_count();
        point_rows_.resize(np);
        n_point_targets_.resize(np);
        std::vector<std::vector<Vec2>> tpos(np);
        for (int j = 0; j < np; ++j) {
            for (int k = 0; k < np; ++k) {
                if (k == j) continue;
                const ScenePatch& sk = scene_.patch(k);
                for (int g = 0; g < sk.count; ++g) {
                    point_rows_[j].push_back(sk.offset + g);
                    tpos[j].push_back(sk.nodes[g]);
                }
            }
            for (int i = 0; i < n_obs; ++i) {
                point_rows_[j].push_back(scene_.total_nodes() + i);
                tpos[j].push_back(plan_.observation[i]);
            }
            n_point_targets_[j] = static_cast<int>(tpos[j].size());
            for (int r : snap_targets_) tpos[j].push_back(snap_points_[r]);
        }

        // Frequency-independent quadrature plans for the arc patches, then
        // one factored operator and target-row matrix per patch and
        // frequency. Assembly order never matters: every (patch, frequency)
        // cell is written exactly once.
        const int n_omega = static_cast<int>(omegas_.size());
        std::vector<std::vector<OpenArcDiscretization::RowPlan>> plans(np);
        for (int j = 0; j < np; ++j)
            if (scene_.patch(j).arc) plans[j] = scene_.patch(j).arc->plan_rows(tpos[j]);

        ops_.resize(np);
        for (int j = 0; j < np; ++j) {
            ops_[j].lu.resize(n_omega);
            ops_[j].sys.resize(n_omega);
            ops_[j].target.resize(n_omega);
        }
        detail::parallel_for(np * n_omega, plan_.workers, [&](int f) {
            const int j = f / n_omega, w = f % n_omega;
            const ScenePatch& sp = scene_.patch(j);
            const double kappa = omegas_[w] / plan_.wave_speed;
            MatC a;
            if (sp.arc) {
                a = sp.arc->single_layer(kappa);
                ops_[j].target[w] = sp.arc->potential_matrix(kappa, plans[j]);
            } else {
                const double eta = std::max(1.0, kappa);
                a = sp.body->cfie(kappa, eta);
                ops_[j].target[w] = sp.body->combined_matrix(kappa, eta, tpos[j]);
            }
            const bool direct =
                plan_.solver.method == SolveOptions::Method::direct ||
                (plan_.solver.method == SolveOptions::Method::automatic &&
                 a.rows() < plan_.solver.direct_threshold);
            if (direct)
                ops_[j].lu[w].emplace(a);
            else
                ops_[j].sys[w] = std::move(a);
        });
    }

    // Mirrors the closed-curve evaluators' clearance rule.
    bool body_clear(const Vec2& p) const {
        for (int j = 0; j < scene_.patch_count(); ++j) {
            const ScenePatch& sp = scene_.patch(j);
            if (!sp.body) continue;
            double dmin = std::numeric_limits<double>::infinity();
            for (const Vec2& y : sp.nodes) dmin = std::min(dmin, dist(p, y));
            const double h = 2.0 * pi / sp.body->size();
            if (dmin < 3.0 * h * sp.body->speed(0)) return false;
        }
        return true;
    }

    Scene scene_;
    RunPlan plan_;
    TimeWindowSet win_;
    int nt_ = 0;
    int n_samples_ = 0;
    int n_tail_ = 0;
    int total_rows_ = 0;
    int masked_snapshot_ = 0;
    double delta_ = 0.0;
    double prepare_ms_ = 0.0;
    std::vector<double> times_;
    std::vector<double> omegas_;
    Eigen::RowVectorXcd win_sum_;
    std::optional<GradedLogFilon> tail_;
    std::optional<FourierContinuation> band_;
    std::optional<SlowFourierTransform> sft_;
    std::vector<MatC> band_e_, tail_e_;            // per window: modes/tail x grid
    std::vector<MatC> snap_band_e_, snap_tail_e_;  // per window: modes/tail x snap times
    std::vector<Vec2> snap_points_;
    std::vector<int> snap_targets_;  // surviving snapshot rows, in grid order
    std::vector<std::vector<int>> point_rows_;  // per patch: destination rows
    std::vector<int> n_point_targets_;
    std::vector<PatchOps> ops_;
};

}  // namespace fthms
