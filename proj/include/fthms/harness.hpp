#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fthms/bie.hpp"
#include "fthms/core.hpp"
#include "fthms/dense_solver.hpp"
#include "fthms/geometry.hpp"
#include "fthms/multiscatter.hpp"

// Measurement side of the library: error tables against references,
// silence-before-arrival checks, iteration-count studies, and a small
// content-addressed store for reference traces. Everything here is
// read-only over solver outputs.

namespace fthms {

namespace detail {

// 17 significant digits round-trip an IEEE double through text.
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    return std::string(buf);
}

}  // namespace detail

// --------------------------------------------------------------------------
// Error measurement

// Max-norm difference between two traces on a shared time grid, restricted
// to samples with t in [t_lo, t_hi].
inline double error_metric(const Eigen::Ref<const Eigen::RowVectorXcd>& num,
                           const Eigen::Ref<const Eigen::RowVectorXcd>& ref,
                           const std::vector<double>& times, double t_lo, double t_hi) {
    if (num.size() != ref.size() || num.size() != static_cast<long>(times.size()))
        throw config_error("error_metric: traces and time grid sizes differ");
    if (!(t_hi >= t_lo)) throw config_error("error_metric: empty time range");
    double eps = -1.0;
    for (long k = 0; k < num.size(); ++k) {
        if (times[k] < t_lo || times[k] > t_hi) continue;
        eps = std::max(eps, std::abs(num(k) - ref(k)));
    }
    if (eps < 0.0) throw config_error("error_metric: no samples inside the time range");
    return eps;
}

// Error of each partial sum of generations against a reference, from the
// per-generation observation increments a run records. Entry m is the error
// of the (m+1)-generation solution.
inline std::vector<double> generation_errors(const std::vector<MatC>& obs_by_generation,
                                             int obs_index,
                                             const Eigen::Ref<const Eigen::RowVectorXcd>& ref,
                                             const std::vector<double>& times, double t_lo,
                                             double t_hi) {
    std::vector<double> out;
    out.reserve(obs_by_generation.size());
    Eigen::RowVectorXcd sum = Eigen::RowVectorXcd::Zero(ref.size());
    for (const MatC& inc : obs_by_generation) {
        if (obs_index < 0 || obs_index >= inc.rows())
            throw config_error("generation_errors: observation index out of range");
        sum += inc.row(obs_index);
        out.push_back(error_metric(sum, ref, times, t_lo, t_hi));
    }
    return out;
}

struct ErrorReport {
    Vec2 point{0.0, 0.0};
    double t_lo = 0.0;
    double t_hi = 0.0;
    double epsilon = 0.0;               // error of the full sum over the range
    std::vector<double> per_generation;  // error after 1, 2, ... generations
    std::string reference;               // provenance of the reference trace

    void to_csv(std::ostream& os) const {
        os << "M,epsilon\n";
        for (std::size_t m = 0; m < per_generation.size(); ++m)
            os << m + 1 << ',' << detail::csv_num(per_generation[m]) << '\n';
    }
};

inline ErrorReport observation_error(const MultiScatterSolver& eng, const RunResult& res,
                                     int obs_index,
                                     const Eigen::Ref<const Eigen::RowVectorXcd>& ref,
                                     double t_lo, double t_hi, std::string provenance) {
    const auto& obs = eng.plan().observation;
    if (obs_index < 0 || obs_index >= static_cast<int>(obs.size()))
        throw config_error("observation_error: observation index out of range");
    if (provenance.empty())
        throw config_error("observation_error: reference provenance must be recorded");
    ErrorReport rep;
    rep.point = obs[obs_index];
    rep.t_lo = t_lo;
    rep.t_hi = t_hi;
    rep.per_generation =
        generation_errors(res.obs_by_generation, obs_index, ref, res.times, t_lo, t_hi);
    rep.epsilon = rep.per_generation.empty() ? 0.0 : rep.per_generation.back();
    rep.reference = std::move(provenance);
    return rep;
}

// --------------------------------------------------------------------------
// Silence before arrival

struct HuygensOptions {
    double tol = 1e-6;        // silence bound, relative to max |data|
    double onset_rel = 1e-8;  // data-onset detection level, relative to max |data|
    double guard = 0.0;       // time subtracted from each arrival bound
};

struct HuygensProbe {
    Vec2 point{0.0, 0.0};
    double arrival = 0.0;     // conservative arrival bound (guard already applied)
    double max_before = 0.0;  // max |field| over samples strictly before arrival
    bool pass = false;
};

struct HuygensReport {
    double data_norm = 0.0;
    double limit = 0.0;  // absolute silence bound: tol * data_norm
    bool all_pass = true;
    std::vector<HuygensProbe> probes;

    void to_csv(std::ostream& os) const {
        os << "x,y,arrival_bound,max_before,limit,pass\n";
        for (const HuygensProbe& p : probes)
            os << detail::csv_num(p.point.x) << ',' << detail::csv_num(p.point.y) << ','
               << detail::csv_num(p.arrival) << ',' << detail::csv_num(p.max_before) << ','
               << detail::csv_num(limit) << ',' << (p.pass ? 1 : 0) << '\n';
    }
};

// A node radiates nothing before its own data onset, and a wave needs
// |x - y| / c to travel from node y to probe x, so the minimum over nodes of
// onset + distance / c bounds the first possible arrival at the probe.
// Straight-line distance only shortens paths and the onset detection level
// sits two orders below the silence bound, so the bound errs early and the
// assertion stays conservative.
inline HuygensReport huygens_check(const std::vector<Vec2>& data_nodes, const MatC& data,
                                   const std::vector<Vec2>& probe_points,
                                   const MatC& probe_traces, const std::vector<double>& times,
                                   double wave_speed, const HuygensOptions& opt = {}) {
    const long nt = static_cast<long>(times.size());
    if (data.rows() != static_cast<long>(data_nodes.size()) || data.cols() != nt)
        throw config_error("huygens_check: data shape does not match nodes and times");
    if (probe_traces.rows() != static_cast<long>(probe_points.size()) ||
        probe_traces.cols() != nt)
        throw config_error("huygens_check: probe trace shape does not match probes and times");
    if (!(wave_speed > 0.0)) throw config_error("huygens_check: wave speed must be positive");

    HuygensReport rep;
    rep.data_norm = data.size() > 0 ? data.cwiseAbs().maxCoeff() : 0.0;
    rep.limit = opt.tol * rep.data_norm;

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> onset(data_nodes.size(), inf);
    if (rep.data_norm > 0.0) {
        const double level = opt.onset_rel * rep.data_norm;
        for (std::size_t j = 0; j < data_nodes.size(); ++j)
            for (long k = 0; k < nt; ++k)
                if (std::abs(data(static_cast<long>(j), k)) > level) {
                    onset[j] = times[k];
                    break;
                }
    }

    for (std::size_t i = 0; i < probe_points.size(); ++i) {
        HuygensProbe p;
        p.point = probe_points[i];
        double arr = inf;
        for (std::size_t j = 0; j < data_nodes.size(); ++j)
            arr = std::min(arr, onset[j] + dist(p.point, data_nodes[j]) / wave_speed);
        p.arrival = arr - opt.guard;
        p.max_before = 0.0;
        for (long k = 0; k < nt && times[k] < p.arrival; ++k)
            p.max_before = std::max(p.max_before, std::abs(probe_traces(static_cast<long>(i), k)));
        p.pass = p.max_before <= rep.limit;
        rep.all_pass = rep.all_pass && p.pass;
        rep.probes.push_back(p);
    }
    return rep;
}

// --------------------------------------------------------------------------
// Iteration-count study

struct IterationStudyRow {
    double kappa = 0.0;
    int full_arc = 0;
    bool full_converged = false;
    std::vector<int> patch;
    std::vector<char> patch_converged;

    int max_patch() const {
        int m = 0;
        for (int c : patch) m = std::max(m, c);
        return m;
    }
};

struct IterationStudy {
    int n_patches = 0;
    std::vector<IterationStudyRow> rows;

    // The decomposition pays off when every subproblem beats the one-piece
    // solve at every swept wavenumber.
    bool decomposed_below_full() const {
        if (rows.empty()) return false;
        for (const IterationStudyRow& r : rows) {
            if (!r.full_converged) return false;
            for (std::size_t j = 0; j < r.patch.size(); ++j)
                if (!r.patch_converged[j] || r.patch[j] >= r.full_arc) return false;
        }
        return true;
    }

    void to_csv(std::ostream& os) const {
        os << "kappa,full_arc";
        for (int j = 0; j < n_patches; ++j) os << ",patch_" << j;
        os << '\n';
        for (const IterationStudyRow& r : rows) {
            os << detail::csv_num(r.kappa) << ',' << r.full_arc;
            for (int c : r.patch) os << ',' << c;
            os << '\n';
        }
    }
};

// GMRES iteration counts on one open arc, solved whole and as windowed
// overlapping patches, across a sweep of wavenumbers. Plane-wave data; each
// patch subproblem takes its windowed share of the same trace. Failure to
// converge is recorded in the table, not thrown.
inline IterationStudy iteration_study(std::shared_ptr<const ParametricCurve> arc, int n_patches,
                                      double overlap_fraction, int nodes_per_patch,
                                      const std::vector<double>& kappas,
                                      const SolveOptions& opts,
                                      Vec2 direction = Vec2{1.0, 0.0}) {
    if (opts.method != SolveOptions::Method::iterative)
        throw config_error("iteration_study: iteration counts need the iterative solver");
    if (kappas.empty()) throw config_error("iteration_study: empty wavenumber sweep");
    if (!arc || arc->closed()) throw config_error("iteration_study: expects an open arc");
    if (n_patches < 2) throw config_error("iteration_study: need at least two patches");

    const OpenArcDiscretization full = discretize_arc(arc, n_patches, nodes_per_patch);
    const PatchDecomposition dec(arc, n_patches, overlap_fraction);
    std::vector<OpenArcDiscretization> parts;
    parts.reserve(n_patches);
    for (int j = 0; j < n_patches; ++j) parts.push_back(discretize_patch(dec, j, nodes_per_patch));

    auto trace = [&](const OpenArcDiscretization& d, double kappa, int windowed_patch) {
        VecC b(d.size());
        for (int g = 0; g < d.size(); ++g) {
            cplx v = std::exp(iu * kappa * direction.dot(d.position(g)));
            if (windowed_patch >= 0) v *= dec.chi(windowed_patch, d.theta(g));
            b(g) = v;
        }
        return b;
    };

    IterationStudy out;
    out.n_patches = n_patches;
    for (double kappa : kappas) {
        if (!(kappa > 0.0)) throw config_error("iteration_study: wavenumbers must be positive");
        IterationStudyRow row;
        row.kappa = kappa;
        {
            const GmresResult r =
                gmres(full.single_layer(kappa), trace(full, kappa, -1), opts.tol, opts.cap);
            row.full_arc = r.iterations;
            row.full_converged = r.converged;
        }
        for (int j = 0; j < n_patches; ++j) {
            const GmresResult r =
                gmres(parts[j].single_layer(kappa), trace(parts[j], kappa, j), opts.tol, opts.cap);
            row.patch.push_back(r.iterations);
            row.patch_converged.push_back(r.converged ? 1 : 0);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// --------------------------------------------------------------------------
// Reference trace store

// 64-bit FNV-1a of the config text, as a fixed-width hex key.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// One file per stored trace set: a short text header carrying the full
// config text it was produced from, then raw little-endian doubles (the time
// grid, then the traces row by row as re/im pairs). Keying files by config
// hash makes reuse automatic and collisions detectable.
class ReferenceStore {
public:
    struct Entry {
        std::string config;
        std::vector<double> times;
        MatC traces;  // one row per stored trace
    };

    explicit ReferenceStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path path_for(const std::string& config) const {
        return dir_ / (fnv1a_hex(config) + ".ref");
    }

    bool has(const std::string& config) const {
        const std::filesystem::path p = path_for(config);
        if (!std::filesystem::exists(p)) return false;
        std::ifstream is(p, std::ios::binary);
        check_config(read_header(is, p), config, p);
        return true;
    }

    void put(const std::string& config, const std::vector<double>& times,
             const MatC& traces) const {
        static_assert(std::endian::native == std::endian::little,
                      "store layout is little-endian");
        if (static_cast<long>(times.size()) != traces.cols())
            throw config_error("ReferenceStore: times and trace columns must match");
        const std::filesystem::path p = path_for(config);
        if (std::filesystem::exists(p)) {
            std::ifstream is(p, std::ios::binary);
            check_config(read_header(is, p), config, p);
        }
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) throw config_error("ReferenceStore: cannot write " + p.string());
        os << "fthms-ref 1\n"
           << "hash " << fnv1a_hex(config) << '\n'
           << "rows " << traces.rows() << '\n'
           << "cols " << traces.cols() << '\n'
           << "config " << config.size() << '\n'
           << config << '\n';
        write_doubles(os, times.data(), times.size());
        for (long i = 0; i < traces.rows(); ++i)
            for (long k = 0; k < traces.cols(); ++k) {
                const double re = traces(i, k).real(), im = traces(i, k).imag();
                write_doubles(os, &re, 1);
                write_doubles(os, &im, 1);
            }
        if (!os) throw config_error("ReferenceStore: short write to " + p.string());
    }

    Entry get(const std::string& config) const {
        const std::filesystem::path p = path_for(config);
        std::ifstream is(p, std::ios::binary);
        if (!is) throw config_error("ReferenceStore: no stored reference for this config");
        const Header h = read_header(is, p);
        check_config(h, config, p);
        Entry e;
        e.config = h.config;
        e.times.resize(static_cast<std::size_t>(h.cols));
        read_doubles(is, e.times.data(), e.times.size(), p);
        e.traces.resize(h.rows, h.cols);
        for (long i = 0; i < h.rows; ++i)
            for (long k = 0; k < h.cols; ++k) {
                double re = 0.0, im = 0.0;
                read_doubles(is, &re, 1, p);
                read_doubles(is, &im, 1, p);
                e.traces(i, k) = cplx{re, im};
            }
        return e;
    }

private:
    struct Header {
        std::string hash;
        long rows = 0;
        long cols = 0;
        std::string config;
    };

    static Header read_header(std::ifstream& is, const std::filesystem::path& p) {
        if (!is) throw config_error("ReferenceStore: cannot open " + p.string());
        auto line_after = [&](const char* key) {
            std::string line;
            std::getline(is, line);
            const std::string k = std::string(key) + " ";
            if (!is || line.rfind(k, 0) != 0)
                throw config_error("ReferenceStore: malformed header in " + p.string());
            return line.substr(k.size());
        };
        std::string magic;
        std::getline(is, magic);
        if (!is || magic != "fthms-ref 1")
            throw config_error("ReferenceStore: malformed header in " + p.string());
        Header h;
        h.hash = line_after("hash");
        h.rows = std::stol(line_after("rows"));
        h.cols = std::stol(line_after("cols"));
        const long nbytes = std::stol(line_after("config"));
        h.config.resize(static_cast<std::size_t>(nbytes));
        is.read(h.config.data(), nbytes);
        char nl = 0;
        is.get(nl);
        if (!is || nl != '\n')
            throw config_error("ReferenceStore: malformed header in " + p.string());
        return h;
    }

    static void check_config(const Header& h, const std::string& config,
                             const std::filesystem::path& p) {
        if (h.config != config)
            throw config_error("ReferenceStore: hash collision at " + p.string() +
                               ": stored config text differs from the requested one");
    }

    static void write_doubles(std::ofstream& os, const double* v, std::size_t n) {
        os.write(reinterpret_cast<const char*>(v),
                 static_cast<std::streamsize>(n * sizeof(double)));
    }

    static void read_doubles(std::ifstream& is, double* v, std::size_t n,
                             const std::filesystem::path& p) {
        is.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw config_error("ReferenceStore: truncated data in " + p.string());
    }

    std::filesystem::path dir_;
};

struct RefinementFactors {
    double nodes = 2.0;
    double freq = 2.0;
    double time = 2.0;
};

struct ReferenceTraces {
    std::vector<double> times;
    MatC traces;
};

// Observation rows of a finished run, in store-ready form.
inline ReferenceTraces observation_traces(const MultiScatterSolver& eng, const RunResult& res) {
    ReferenceTraces out;
    out.times = res.times;
    out.traces = res.u.at_points.bottomRows(static_cast<long>(eng.plan().observation.size()));
    return out;
}

// Reference solutions come from a refined rerun of the same setup; the
// factors assert that the rerun really is finer on every axis. The producer
// only runs when the store has no entry for this config yet. Geometries with
// closed-form solutions should not come through here at all.
inline ReferenceStore::Entry make_reference(const ReferenceStore& store,
                                            const std::string& config,
                                            const RefinementFactors& f,
                                            const std::function<ReferenceTraces()>& producer) {
    if (f.nodes < 2.0)
        throw config_error("make_reference: node refinement factor must be at least 2");
    if (f.freq < 2.0)
        throw config_error("make_reference: frequency refinement factor must be at least 2");
    if (f.time < 2.0)
        throw config_error("make_reference: time refinement factor must be at least 2");
    if (!store.has(config)) {
        const ReferenceTraces r = producer();
        store.put(config, r.times, r.traces);
    }
    return store.get(config);
}

}  // namespace fthms
