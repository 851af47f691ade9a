// Measurement layer: max-norm error tables, silence-before-arrival checks,
// iteration-count studies, and the content-addressed reference store. The
// physical checks reuse one small interior disc run; numeric tolerances on
// that run follow the synthesis floor at its mode count.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "fthms/harness.hpp"
#include "fthms/incident.hpp"

using namespace fthms;
using Catch::Approx;

namespace {

Scene small_disc_scene(int nodes_per_patch = 12) {
    Scene sc;
    sc.add_decomposed(std::make_shared<Circle>(Vec2{0.0, 0.0}, 1.0), 3, 0.53, nodes_per_patch);
    return sc;
}

RunPlan small_disc_plan() {
    RunPlan p;
    p.mode = ScatterMode::interior;
    p.generations = 3;
    p.half_width = 10.0;
    p.dt = 0.05;
    p.freq.band_lo = 5.0;
    p.freq.band_hi = 25.0;
    p.freq.n_grid = 360;
    p.freq.n_modes = 170;
    p.observation = {{0.5, 0.0}};
    p.keep_generation_data = true;
    return p;
}

const MultiScatterSolver& disc_engine() {
    static MultiScatterSolver eng(small_disc_scene(), small_disc_plan());
    return eng;
}

const IncidentFieldSpec& disc_spec() {
    static IncidentFieldSpec s = gaussian_plane_field(0.0);
    return s;
}

const RunResult& disc_run() {
    static RunResult r = disc_engine().run(disc_spec());
    return r;
}

// The interior solution cancels the incident pulse, so the scattered field
// at any interior point has the closed form -u_inc.
Eigen::RowVectorXcd exact_obs_trace() {
    const auto& eng = disc_engine();
    Eigen::RowVectorXcd ref(eng.times().size());
    for (std::size_t k = 0; k < eng.times().size(); ++k)
        ref(static_cast<long>(k)) =
            -incident_time_closed(disc_spec(), Vec2{0.5, 0.0}, eng.times()[k]);
    return ref;
}

std::filesystem::path fresh_store_dir(const char* leaf) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / leaf;
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("error metric on shared time grids") {
    const std::vector<double> times = {0.0, 0.5, 1.0, 1.5, 2.0};
    Eigen::RowVectorXcd a(5), b(5);
    a << 1.0, 2.0, 3.0, 4.0, 5.0;
    b = a;

    CHECK(error_metric(a, b, times, 0.0, 2.0) == 0.0);

    b.array() += cplx{0.0, 1e-3};
    CHECK(error_metric(a, b, times, 0.0, 2.0) == Approx(1e-3));

    // A large deviation outside the requested range is invisible.
    b = a;
    b(4) += 7.0;
    b(1) += cplx{3e-4, 4e-4};
    CHECK(error_metric(a, b, times, 0.0, 1.9) == Approx(5e-4));

    CHECK_THROWS_AS(error_metric(a, b, times, 2.0, 1.0), config_error);
    CHECK_THROWS_AS(error_metric(a, b, times, 10.0, 11.0), config_error);
    Eigen::RowVectorXcd wrong(4);
    wrong.setZero();
    CHECK_THROWS_AS(error_metric(a, wrong, times, 0.0, 2.0), config_error);

    // Partial sums: two synthetic increments whose sum matches the
    // reference exactly, so the error drops to zero at the second entry.
    std::vector<MatC> incs;
    incs.push_back(a.matrix());
    incs.push_back((b - a).matrix());
    const std::vector<double> errs = generation_errors(incs, 0, b, times, 0.0, 2.0);
    REQUIRE(errs.size() == 2);
    CHECK(errs[0] == Approx(7.0));
    CHECK(errs[1] == 0.0);
    CHECK_THROWS_AS(generation_errors(incs, 3, b, times, 0.0, 2.0), config_error);
}

TEST_CASE("per-generation error curve against the closed form") {
    const auto& eng = disc_engine();
    const RunResult& res = disc_run();
    const Eigen::RowVectorXcd ref = exact_obs_trace();

    const ErrorReport rep = observation_error(eng, res, 0, ref, 0.0, eng.cover_end(),
                                              "closed form: interior cancellation");
    REQUIRE(rep.per_generation.size() == 3);
    CHECK(rep.epsilon == rep.per_generation.back());
    CHECK(rep.point.x == Approx(0.5));
    CHECK(rep.t_hi == Approx(eng.cover_end()));
    CHECK(rep.reference == "closed form: interior cancellation");

    // Later generations extend the matched interval, so the max-norm error
    // over the fixed range drops as M grows.
    CHECK(rep.per_generation[1] < rep.per_generation[0]);
    CHECK(rep.per_generation[2] < 0.6 * rep.per_generation[0]);

    std::ostringstream csv;
    rep.to_csv(csv);
    const std::string table = csv.str();
    CHECK(table.rfind("M,epsilon\n1,", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);

    CHECK_THROWS_AS(observation_error(eng, res, 1, ref, 0.0, 5.0, "x"), config_error);
    CHECK_THROWS_AS(observation_error(eng, res, 0, ref, 0.0, 5.0, ""), config_error);
}

TEST_CASE("silence before the arrival bound") {
    const std::vector<double> times = {0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<Vec2> nodes = {Vec2{0.0, 0.0}};
    MatC data = MatC::Zero(1, 5);
    data(0, 1) = 1.0;  // onset at t = 1
    data(0, 2) = 1.0;

    const std::vector<Vec2> probes = {Vec2{2.0, 0.0}, Vec2{0.5, 0.0}};
    MatC traces = MatC::Zero(2, 5);
    traces(0, 3) = 0.5;  // arrives exactly at the bound t = 3: allowed
    traces(1, 1) = 0.25;  // before its bound t = 1.5: a violation

    const HuygensReport rep = huygens_check(nodes, data, probes, traces, times, 1.0);
    REQUIRE(rep.probes.size() == 2);
    CHECK(rep.data_norm == 1.0);
    CHECK(rep.limit == Approx(1e-6));
    CHECK(rep.probes[0].arrival == Approx(3.0));
    CHECK(rep.probes[0].max_before == 0.0);
    CHECK(rep.probes[0].pass);
    CHECK(rep.probes[1].arrival == Approx(1.5));
    CHECK(rep.probes[1].max_before == Approx(0.25));
    CHECK_FALSE(rep.probes[1].pass);
    CHECK_FALSE(rep.all_pass);

    std::ostringstream csv;
    rep.to_csv(csv);
    const std::string table = csv.str();
    CHECK(table.rfind("x,y,arrival_bound,max_before,limit,pass\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);

    // Guard time pulls the bound earlier; a halved wave speed delays it.
    HuygensOptions opt;
    opt.guard = 0.75;
    CHECK(huygens_check(nodes, data, probes, traces, times, 1.0, opt).probes[0].arrival ==
          Approx(2.25));
    CHECK(huygens_check(nodes, data, probes, traces, times, 0.5).probes[0].arrival ==
          Approx(5.0));

    // Zero data promises silence forever: only an identically zero field
    // passes.
    const MatC quiet = MatC::Zero(1, 5);
    MatC zero2 = MatC::Zero(2, 5);
    CHECK(huygens_check(nodes, quiet, probes, zero2, times, 1.0).all_pass);
    zero2(0, 4) = 1e-9;
    CHECK_FALSE(huygens_check(nodes, quiet, probes, zero2, times, 1.0).all_pass);

    CHECK_THROWS_AS(huygens_check(nodes, data, probes, traces, times, 0.0), config_error);
    CHECK_THROWS_AS(huygens_check(nodes, MatC::Zero(2, 5), probes, traces, times, 1.0),
                    config_error);
    CHECK_THROWS_AS(huygens_check(nodes, data, probes, MatC::Zero(2, 4), times, 1.0),
                    config_error);
}

TEST_CASE("disc run is silent before the incident data can reach the probe") {
    const auto& eng = disc_engine();
    const RunResult& res = disc_run();
    const MatC data = eng.incident_node_traces(disc_spec());

    std::vector<Vec2> all_nodes;
    for (int j = 0; j < eng.scene().patch_count(); ++j)
        for (const Vec2& x : eng.scene().patch(j).nodes) all_nodes.push_back(x);

    HuygensOptions opt;
    // The scattered field's pre-arrival floor is the synthesis residue,
    // around 1e-5 of the data scale at this mode count; the acceptance
    // benchmarks enforce the tighter bound at their finer sizing.
    opt.tol = 5e-5;
    const HuygensReport rep = huygens_check(
        all_nodes, data, {Vec2{0.5, 0.0}},
        res.u.at_points.row(eng.observation_row(0)), eng.times(), 1.0, opt);

    REQUIRE(rep.probes.size() == 1);
    CHECK(rep.probes[0].arrival > 0.5);
    CHECK(rep.probes[0].arrival < 3.0);
    CHECK(rep.all_pass);
}

TEST_CASE("iteration study: windowed patches beat the whole trapping arc") {
    const auto circle = std::make_shared<Circle>(Vec2{0.0, 0.0}, 1.0);
    const auto cavity = std::make_shared<SubArc>(circle, 0.15 * pi, 1.85 * pi);

    SolveOptions opts;
    opts.method = SolveOptions::Method::iterative;
    opts.tol = 1e-6;
    opts.cap = 600;

    const IterationStudy study =
        iteration_study(cavity, 6, 0.5, 10, {5.0, 10.0, 15.0}, opts);
    REQUIRE(study.rows.size() == 3);
    REQUIRE(study.n_patches == 6);
    for (const IterationStudyRow& r : study.rows) {
        CHECK(r.full_converged);
        REQUIRE(r.patch.size() == 6);
        CHECK(r.full_arc > 0);
        CHECK(r.max_patch() > 0);
        for (std::size_t j = 0; j < r.patch.size(); ++j) {
            CHECK(r.patch_converged[j] == 1);
            CHECK(r.patch[j] < r.full_arc);
        }
    }
    CHECK(study.decomposed_below_full());

    std::ostringstream csv;
    study.to_csv(csv);
    const std::string table = csv.str();
    CHECK(table.rfind("kappa,full_arc,patch_0,", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);

    SolveOptions direct = opts;
    direct.method = SolveOptions::Method::direct;
    CHECK_THROWS_AS(iteration_study(cavity, 6, 0.5, 10, {5.0}, direct), config_error);
    direct.method = SolveOptions::Method::automatic;
    CHECK_THROWS_AS(iteration_study(cavity, 6, 0.5, 10, {5.0}, direct), config_error);
    CHECK_THROWS_AS(iteration_study(cavity, 6, 0.5, 10, {}, opts), config_error);
    CHECK_THROWS_AS(iteration_study(cavity, 1, 0.5, 10, {5.0}, opts), config_error);
    CHECK_THROWS_AS(iteration_study(circle, 6, 0.5, 10, {5.0}, opts), config_error);
    CHECK_THROWS_AS(iteration_study(cavity, 6, 0.5, 10, {-2.0}, opts), config_error);
}

TEST_CASE("reference store round trips, reuses, and flags collisions") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");

    const ReferenceStore store(fresh_store_dir("fthms-harness-store"));
    const std::string config = "disc r=1 npp=8 band=[5,25] dt=0.05";

    std::vector<double> times = {0.0, 0.25, 0.5};
    MatC traces(2, 3);
    traces << cplx{1.0, -2.0}, cplx{0.0, 0.5}, cplx{-3.25, 0.0},
              cplx{1e-300, 4.0}, cplx{7.5, -7.5}, cplx{0.0, 0.0};

    CHECK_FALSE(store.has(config));
    CHECK_THROWS_AS(store.get(config), config_error);

    store.put(config, times, traces);
    REQUIRE(store.has(config));
    const ReferenceStore::Entry e = store.get(config);
    CHECK(e.config == config);
    REQUIRE(e.times.size() == 3);
    REQUIRE(e.traces.rows() == 2);
    for (std::size_t k = 0; k < times.size(); ++k) CHECK(e.times[k] == times[k]);
    for (long i = 0; i < traces.rows(); ++i)
        for (long k = 0; k < traces.cols(); ++k) CHECK(e.traces(i, k) == traces(i, k));

    // Same config again is a plain overwrite.
    store.put(config, times, traces);
    CHECK(store.has(config));

    // A file whose stored config text differs from the one that hashes to
    // its name is a collision and must never be served silently.
    const std::string other = "kite exterior npp=12";
    std::filesystem::copy_file(store.path_for(config), store.path_for(other));
    CHECK_THROWS_AS(store.get(other), config_error);
    CHECK_THROWS_AS(store.has(other), config_error);
    CHECK_THROWS_AS(store.put(other, times, traces), config_error);

    CHECK_THROWS_AS(store.put(config, {0.0, 1.0}, traces), config_error);
}

TEST_CASE("make_reference validates factors and runs the producer once") {
    const ReferenceStore store(fresh_store_dir("fthms-harness-makeref"));
    int calls = 0;
    auto producer = [&calls]() {
        ++calls;
        ReferenceTraces r;
        r.times = {0.0, 1.0};
        r.traces = MatC::Ones(1, 2);
        return r;
    };

    RefinementFactors f;
    f.nodes = 1.5;
    CHECK_THROWS_AS(make_reference(store, "k", f, producer), config_error);
    f = RefinementFactors{};
    f.freq = 1.0;
    CHECK_THROWS_AS(make_reference(store, "k", f, producer), config_error);
    f = RefinementFactors{};
    f.time = 0.5;
    CHECK_THROWS_AS(make_reference(store, "k", f, producer), config_error);
    CHECK(calls == 0);

    f = RefinementFactors{};
    const ReferenceStore::Entry a = make_reference(store, "k", f, producer);
    CHECK(calls == 1);
    const ReferenceStore::Entry b = make_reference(store, "k", f, producer);
    CHECK(calls == 1);  // served from the store
    CHECK(a.traces == b.traces);
}

TEST_CASE("coarse runs drift less from a refined reference as they refine") {
    const ReferenceStore store(fresh_store_dir("fthms-harness-twolevel"));

    auto run_disc = [](int npp, double dt, int n_grid, int n_modes) {
        RunPlan p = small_disc_plan();
        p.generations = 1;
        p.keep_generation_data = false;
        p.dt = dt;
        p.freq.n_grid = n_grid;
        p.freq.n_modes = n_modes;
        MultiScatterSolver eng(small_disc_scene(npp), p);
        return observation_traces(eng, eng.run(disc_spec()));
    };

    // Reference: twice the nodes, frequencies, and time resolution of the
    // coarser run below. The boundary resolution dominates the error at
    // these sizes, so refining it on the coarse side must shrink the drift.
    const ReferenceStore::Entry ref =
        make_reference(store, "disc two-level", RefinementFactors{}, [&]() {
            return run_disc(20, 0.025, 480, 220);
        });
    const ReferenceTraces a = run_disc(10, 0.05, 240, 110);
    const ReferenceTraces b = run_disc(12, 0.05, 240, 110);

    // Reference samples land on every second coarse-grid time.
    auto drift = [&](const ReferenceTraces& r) {
        double m = 0.0;
        for (std::size_t k = 0; k < r.times.size(); ++k)
            m = std::max(m, std::abs(r.traces(0, static_cast<long>(k)) -
                                     ref.traces(0, static_cast<long>(2 * k))));
        return m;
    };
    const double ea = drift(a);
    const double eb = drift(b);
    CHECK(ea > 0.0);
    CHECK(eb < 0.8 * ea);
}
