// Boundary integral operators and solvers, checked against separation of
// variables on the circle, manufactured exterior solutions, and independent
// dense references.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "fthms/bie.hpp"
#include "oracles.hpp"

using namespace fthms;

namespace {

std::shared_ptr<ParametricCurve> unit_circle() {
    return std::make_shared<Circle>(Vec2{0.0, 0.0}, 1.0);
}

std::shared_ptr<ParametricCurve> kite() { return std::make_shared<Kite>(); }

// Straight segment from (-1,0) to (1,0), parameterized over [-1,1].
std::shared_ptr<ParametricCurve> flat_arc() {
    return std::make_shared<ChebCurve>(
        std::vector<Vec2>{{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
}

cplx fundamental(double kappa, const Vec2& x, const Vec2& z) {
    return 0.25 * iu * oracle::h0(kappa * dist(x, z));
}

double cond2(const MatC& a) {
    Eigen::JacobiSVD<MatC> svd(a);
    const auto& s = svd.singularValues();
    return s(0) / s(s.size() - 1);
}

}  // namespace

TEST_CASE("single layer on the unit circle reproduces Fourier eigenvalues") {
    const double kappa = 2.0;
    ClosedCurveDiscretization disc(unit_circle(), 64);
    const MatC v = disc.single_layer(kappa);

    for (int n = 0; n <= 8; ++n) {
        const cplx lambda =
            0.5 * pi * iu * oracle::jn(n, kappa) * oracle::hn(n, kappa);
        VecC psi(disc.size());
        for (int j = 0; j < disc.size(); ++j)
            psi(j) = std::exp(iu * static_cast<double>(n) * disc.node(j));
        const double err = (v * psi - lambda * psi).cwiseAbs().maxCoeff();
        CAPTURE(n);
        CHECK(err < 1e-10);
    }
}

TEST_CASE("double layer applied to a constant approaches the Gauss identity") {
    // Interior Gauss identity: the Laplace double layer maps 1 to -1/2 on the
    // boundary; the Helmholtz operator deviates by O(kappa^2 log kappa).
    for (auto curve : {unit_circle(), kite()}) {
        ClosedCurveDiscretization disc(curve, 64);
        VecC one = VecC::Ones(disc.size());
        const double dev1 = ((disc.double_layer(0.005) * one).array() + 0.5)
                                .matrix()
                                .cwiseAbs()
                                .maxCoeff();
        const double dev2 = ((disc.double_layer(0.0025) * one).array() + 0.5)
                                .matrix()
                                .cwiseAbs()
                                .maxCoeff();
        CHECK(dev1 < 1e-3);
        CHECK(dev2 < dev1);
    }
}

TEST_CASE("closed-curve operators at -omega are conjugates") {
    ClosedCurveDiscretization disc(kite(), 16);
    const double kappa = 1.7;
    CHECK((disc.single_layer(-kappa) - disc.single_layer(kappa).conjugate()).norm() == 0.0);
    CHECK((disc.double_layer(-kappa) - disc.double_layer(kappa).conjugate()).norm() == 0.0);
    CHECK((disc.cfie(-kappa, 1.7) - disc.cfie(kappa, 1.7).conjugate()).norm() == 0.0);
}

TEST_CASE("combined-field solve reproduces an interior point source") {
    const double kappa = 3.0;
    const double eta = std::max(1.0, kappa);
    const Vec2 z0{-0.1, 0.2};
    ClosedCurveDiscretization disc(kite(), 128);

    VecC rhs(disc.size());
    for (int i = 0; i < disc.size(); ++i)
        rhs(i) = fundamental(kappa, disc.position(i), z0);
    const VecC psi = linear_solve(disc.cfie(kappa, eta), rhs);

    const Vec2 targets[] = {{2.4, 0.8}, {-3.1, 1.2}, {0.4, -2.7}};
    for (const Vec2& x : targets) {
        const cplx u = disc.eval_combined(kappa, eta, psi, x);
        CHECK(std::abs(u - fundamental(kappa, x, z0)) < 1e-9);
    }

    SECTION("zero data gives the zero density") {
        const VecC zero = linear_solve(disc.cfie(kappa, eta), VecC::Zero(disc.size()));
        CHECK(zero.norm() < 1e-14);
    }

    SECTION("targets on the curve are rejected") {
        CHECK_THROWS_AS(disc.eval_combined(kappa, eta, psi, disc.position(3)),
                        domain_error);
    }
}

TEST_CASE("boundary-trace error drops faster than any fixed power per doubling") {
    const double kappa = 3.0, eta = 3.0;
    const Vec2 z0{-0.1, 0.2};
    const Vec2 probe{2.4, 0.8};

    auto field_error = [&](int n_half) {
        ClosedCurveDiscretization disc(kite(), n_half);
        VecC rhs(disc.size());
        for (int i = 0; i < disc.size(); ++i)
            rhs(i) = fundamental(kappa, disc.position(i), z0);
        const VecC psi = linear_solve(disc.cfie(kappa, eta), rhs);
        return std::abs(disc.eval_combined(kappa, eta, psi, probe) -
                        fundamental(kappa, probe, z0));
    };

    const double e16 = field_error(16);
    const double e32 = field_error(32);
    CHECK(e16 > 100.0 * e32);
}

TEST_CASE("scattered far field decays like 1/sqrt(r)") {
    const double kappa = 5.0, eta = 5.0;
    const Vec2 z0{-0.1, 0.2};
    ClosedCurveDiscretization disc(kite(), 128);
    VecC rhs(disc.size());
    for (int i = 0; i < disc.size(); ++i)
        rhs(i) = fundamental(kappa, disc.position(i), z0);
    const VecC psi = linear_solve(disc.cfie(kappa, eta), rhs);

    const Vec2 dir{std::cos(0.3), std::sin(0.3)};
    const cplx u100 = disc.eval_combined(kappa, eta, psi, dir * 100.0);
    const cplx u200 = disc.eval_combined(kappa, eta, psi, dir * 200.0);
    const double ratio = std::abs(u100) / std::abs(u200);
    CHECK(std::abs(ratio - std::sqrt(2.0)) < 0.02 * std::sqrt(2.0));
}

TEST_CASE("combined-field system stays well conditioned at a disc resonance") {
    // kappa = first zero of J0: the single-layer operator alone is nearly
    // singular there, the combined field is not.
    ClosedCurveDiscretization disc(unit_circle(), 48);
    const double k_res = 2.404826, k_off = 2.6;

    CHECK(cond2(disc.single_layer(k_res)) > 1e4);
    CHECK(cond2(disc.single_layer(k_off)) < 200.0);

    const double c_res = cond2(disc.cfie(k_res, std::max(1.0, k_res)));
    const double c_off = cond2(disc.cfie(k_off, std::max(1.0, k_off)));
    CHECK(c_res < 100.0);
    CHECK(c_res < 5.0 * c_off);
}

TEST_CASE("iterative path solves the combined-field system and reports counts") {
    const double kappa = 10.0, eta = 10.0;
    ClosedCurveDiscretization disc(unit_circle(), 64);
    const Vec2 d{1.0, 0.0};
    VecC rhs(disc.size());
    for (int i = 0; i < disc.size(); ++i)
        rhs(i) = -std::exp(iu * kappa * disc.position(i).dot(d));

    SolveOptions opts;
    opts.method = SolveOptions::Method::iterative;
    opts.tol = 1e-6;
    SolveReport rep;
    const VecC psi = linear_solve(disc.cfie(kappa, eta), rhs, opts, &rep);
    CHECK_FALSE(rep.direct);
    CHECK(rep.iterations > 0);
    CHECK(rep.iterations < 128);
    CHECK(rep.residual < 1e-5);

    // Same solution as the direct path.
    const VecC ref = linear_solve(disc.cfie(kappa, eta), rhs);
    CHECK((psi - ref).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("cosine change of variable: branch formulas and derivative behavior") {
    CHECK(cov_theta(0.3, CovKind::none).theta == 0.3);
    CHECK(cov_theta(0.3, CovKind::none).dtheta == 1.0);

    // Endpoint values and vanishing derivatives at flagged ends.
    for (auto kind : {CovKind::both, CovKind::left, CovKind::right}) {
        CHECK(std::abs(cov_theta(-1.0, kind).theta + 1.0) < 1e-15);
        CHECK(std::abs(cov_theta(1.0, kind).theta - 1.0) < 1e-15);
    }
    CHECK(std::abs(cov_theta(-1.0, CovKind::both).dtheta) < 1e-15);
    CHECK(std::abs(cov_theta(1.0, CovKind::both).dtheta) < 1e-15);
    CHECK(std::abs(cov_theta(-1.0, CovKind::left).dtheta) < 1e-15);
    CHECK(cov_theta(1.0, CovKind::left).dtheta > 1.0);
    CHECK(std::abs(cov_theta(1.0, CovKind::right).dtheta) < 1e-15);
    CHECK(cov_theta(-1.0, CovKind::right).dtheta > 1.0);

    for (auto kind :
         {CovKind::none, CovKind::both, CovKind::left, CovKind::right}) {
        double prev = -1.0 - 1e-12;
        for (int i = 0; i <= 200; ++i) {
            const double s = -1.0 + 2.0 * i / 200.0;
            const CovValue cv = cov_theta(s, kind);
            CHECK(cv.theta > prev);
            CHECK(cv.dtheta >= 0.0);
            prev = cv.theta;
        }
    }
}

TEST_CASE("open-arc single layer is symmetric under the arc-length pairing") {
    auto disc = discretize_arc(flat_arc(), 3, 24);
    const MatC v = disc.single_layer(2.0);

    // Densities vanishing to high order at the tips keep every integrand
    // smooth, so both pairings converge spectrally.
    auto phi = [](double t) { return std::pow(1.0 - t * t, 8) * std::cos(1.3 * t + 0.4); };
    auto psi = [](double t) { return std::pow(1.0 - t * t, 8) * std::sin(0.7 * t - 0.2); };

    VecC phit(disc.size()), psit(disc.size());
    for (int g = 0; g < disc.size(); ++g) {
        phit(g) = phi(disc.theta(g)) * disc.jacobian(g);
        psit(g) = psi(disc.theta(g)) * disc.jacobian(g);
    }
    const VecC vphi = v * phit, vpsi = v * psit;

    cplx a{0.0}, b{0.0};
    double scale = 0.0;
    for (int g = 0; g < disc.size(); ++g) {
        a += vphi(g) * psi(disc.theta(g)) * disc.node_weight(g);
        b += vpsi(g) * phi(disc.theta(g)) * disc.node_weight(g);
        scale += std::abs(vphi(g)) * disc.node_weight(g);
    }
    CHECK(std::abs(a - b) < 1e-10 * scale);
}

TEST_CASE("open-arc operator at -omega is the conjugate") {
    auto disc = discretize_arc(flat_arc(), 2, 10);
    CHECK((disc.single_layer(-2.0) - disc.single_layer(2.0).conjugate()).norm() == 0.0);
}

TEST_CASE("applied open-arc operator converges spectrally") {
    const double kappa = 2.0;
    auto phi = [](double t) { return std::cos(2.0 * t); };
    const std::vector<Vec2> targets = {{0.3, 1.1}, {-0.5, 1.4}, {2.0, 0.9}, {0.0, -1.2}};

    auto applied = [&](int n) {
        auto disc = discretize_arc(flat_arc(), 3, n);
        VecC ph(disc.size());
        for (int g = 0; g < disc.size(); ++g)
            ph(g) = phi(disc.theta(g)) * disc.jacobian(g);
        return VecC(disc.potential_matrix(kappa, targets) * ph);
    };

    const VecC ref = applied(48);
    const double e12 = (applied(12) - ref).cwiseAbs().maxCoeff();
    const double e24 = (applied(24) - ref).cwiseAbs().maxCoeff();
    CHECK(e12 > 1e3 * e24);
}

TEST_CASE("open-arc solve matches a double-resolution reference") {
    const double kappa = 2.0;
    const Vec2 z0{0.2, 0.6};
    const std::vector<Vec2> targets = {{0.5, 0.9}, {-0.7, 1.3}, {1.5, -0.4}, {0.0, 0.3}};

    auto solve_field = [&](int n) {
        auto disc = discretize_arc(flat_arc(), 3, n);
        VecC rhs(disc.size());
        for (int g = 0; g < disc.size(); ++g)
            rhs(g) = fundamental(kappa, disc.position(g), z0);
        const VecC psi = linear_solve(disc.single_layer(kappa), rhs);
        return VecC(disc.potential_matrix(kappa, targets) * psi);
    };

    const VecC coarse = solve_field(18);
    const VecC fine = solve_field(36);
    CHECK((coarse - fine).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("solved open-arc density: smooth unknown, singular physical trace") {
    const double kappa = 2.0;
    const Vec2 z0{0.2, 0.6};
    auto disc = discretize_arc(flat_arc(), 3, 24);
    VecC rhs(disc.size());
    for (int g = 0; g < disc.size(); ++g)
        rhs(g) = fundamental(kappa, disc.position(g), z0);
    const VecC psi = linear_solve(disc.single_layer(kappa), rhs);

    SECTION("residual at the nodes is at solver accuracy") {
        CHECK((disc.single_layer(kappa) * psi - rhs).cwiseAbs().maxCoeff() < 1e-11);
    }

    SECTION("per-patch Chebyshev tails carry under 1e-6 relative mass") {
        const int n = disc.nodes_per_patch();
        const auto cm = cheb_coeff_matrix(n);
        for (int p = 0; p < disc.patch_count(); ++p) {
            double head = 0.0, tail = 0.0;
            for (int k = 0; k < n; ++k) {
                cplx c{0.0};
                for (int i = 0; i < n; ++i)
                    c += cm[static_cast<size_t>(k) * n + i] * psi(disc.patch(p).first + i);
                (k >= 3 * n / 4 ? tail : head) += std::abs(c);
            }
            CAPTURE(p);
            CHECK(tail < 1e-6 * (head + tail));
        }
    }

    SECTION("physical density blows up toward the arc tips") {
        // First patch is CoV-left; its first node sits closest to the tip.
        const double at_tip = std::abs(disc.physical_density(psi, 0));
        const double mid = std::abs(disc.physical_density(psi, disc.nodes_per_patch() / 2));
        CHECK(at_tip > 3.0 * mid);
    }

    SECTION("zero data gives the zero unknown") {
        const VecC z = linear_solve(disc.single_layer(kappa), VecC::Zero(disc.size()));
        CHECK(z.norm() < 1e-13);
        const std::vector<Vec2> t = {{0.4, 0.8}};
        CHECK(std::abs(disc.eval_potential(kappa, z, t)(0)) < 1e-13);
    }
}

TEST_CASE("decomposition patches discretize with singular flags at shared points") {
    auto dec = std::make_shared<PatchDecomposition>(unit_circle(), 3, 0.5, 0.3, 0.7);
    auto disc = discretize_patch(*dec, 0, 16);

    // Three integration patches: overlap, plateau, overlap; every boundary
    // point is either an arc tip or a neighbor-arc endpoint, so all are
    // flagged on both sides.
    REQUIRE(disc.patch_count() == 3);
    for (int p = 0; p < 3; ++p) CHECK(disc.patch(p).cov == CovKind::both);

    for (int g = 0; g < disc.size(); ++g)
        CHECK(std::abs(disc.position(g).norm() - 1.0) < 1e-12);

    // Node weights integrate arc length exactly for the analytic Jacobian.
    double len = 0.0;
    for (int g = 0; g < disc.size(); ++g) len += disc.node_weight(g);
    const auto& pi0 = dec->patch(0);
    CHECK(std::abs(len - (pi0.b - pi0.a)) < 1e-10);
}

TEST_CASE("near-target potential evaluation stays accurate close to the arc") {
    // Compare the evaluation matrix against adaptive quadrature of the
    // interpolated density for targets approaching the arc.
    const double kappa = 2.0;
    auto disc = discretize_arc(flat_arc(), 2, 20);
    auto phi = [](double t) { return std::cos(1.1 * t) + 0.3 * std::sin(2.0 * t); };
    VecC ph(disc.size());
    for (int g = 0; g < disc.size(); ++g)
        ph(g) = phi(disc.theta(g)) * disc.jacobian(g);

    for (double d : {0.3, 0.05, 1e-3, 1e-6}) {
        const Vec2 x{0.37, d};
        const cplx mine = disc.eval_potential(kappa, ph, {x})(0);
        const cplx ref = oracle::integrate(
            [&](double t) {
                return cplx(0.25 * iu * oracle::h0(kappa * dist(x, {t, 0.0}))) * phi(t);
            },
            -1.0, 1.0, 1e-13);
        CAPTURE(d);
        CHECK(std::abs(mine - ref) < 1e-10);
    }
}
