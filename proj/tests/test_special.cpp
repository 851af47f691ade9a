#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "fthms/core.hpp"
#include "fthms/special.hpp"
#include "oracles.hpp"

using fthms::cplx;
using Catch::Approx;

TEST_CASE("Bessel values at x = 1 match frozen references", "[special]") {
    CHECK(fthms::bessel_j0(1.0) == Approx(0.76519768655796655145).epsilon(1e-14));
    CHECK(fthms::bessel_y0(1.0) == Approx(0.08825696421567695798).epsilon(1e-13));
    CHECK(fthms::bessel_j1(1.0) == Approx(0.44005058574493351596).epsilon(1e-14));
    CHECK(fthms::bessel_y1(1.0) == Approx(-0.78121282130028871655).epsilon(1e-13));

    const cplx h0 = fthms::hankel1_0(1.0);
    CHECK(h0.real() == Approx(0.76519768655796655145).epsilon(1e-13));
    CHECK(h0.imag() == Approx(0.08825696421567695798).epsilon(1e-13));
}

TEST_CASE("Bessel functions agree with GSL over a wide range", "[special]") {
    // Near a zero the relative error of any series blows up, so measure the
    // error against the amplitude envelope sqrt(2/(pi x)) for large x and
    // against 1 for small x.  The target is 1e-12 over x <= 1e4.
    auto scaled_err = [](double got, double ref, double x) {
        const double envelope = (x > 1.0) ? std::sqrt(2.0 / (fthms::pi * x)) : 1.0;
        return std::abs(got - ref) / envelope;
    };

    double worst = 0.0;
    for (int i = 0; i <= 700; ++i) {
        const double x = std::pow(10.0, -3.0 + 7.0 * i / 700.0);
        worst = std::max(worst, scaled_err(fthms::bessel_j0(x), oracle::j0(x), x));
        worst = std::max(worst, scaled_err(fthms::bessel_j1(x), oracle::j1(x), x));
        worst = std::max(worst, scaled_err(fthms::bessel_y0(x), oracle::y0(x), x));
        worst = std::max(worst, scaled_err(fthms::bessel_y1(x), oracle::y1(x), x));
    }
    CHECK(worst < 1e-12);

    // Plain relative error at fixed points away from zeros.
    for (double x : {0.1, 0.5, 2.0, 7.3, 13.9, 14.1, 31.4, 250.0, 9000.0}) {
        CHECK(fthms::bessel_j0(x) == Approx(oracle::j0(x)).margin(1e-13).epsilon(1e-12));
        CHECK(fthms::bessel_y0(x) == Approx(oracle::y0(x)).margin(1e-13).epsilon(1e-12));
    }
}

TEST_CASE("Bessel Wronskian identity holds", "[special]") {
    for (double x : {0.05, 0.7, 3.0, 13.5, 14.5, 80.0, 1200.0}) {
        const double w =
            fthms::bessel_j1(x) * fthms::bessel_y0(x) - fthms::bessel_j0(x) * fthms::bessel_y1(x);
        CHECK(w == Approx(2.0 / (fthms::pi * x)).epsilon(1e-12));
    }
}

TEST_CASE("Bessel accuracy holds on both sides of the series/asymptotic switch", "[special]") {
    const double xs = 14.0;
    for (double h : {1e-9, 1e-7, 1e-3}) {
        for (double x : {xs - h, xs + h}) {
            CHECK(std::abs(fthms::bessel_j0(x) - oracle::j0(x)) < 1e-13);
            CHECK(std::abs(fthms::bessel_y0(x) - oracle::y0(x)) < 1e-13);
            CHECK(std::abs(fthms::bessel_j1(x) - oracle::j1(x)) < 1e-13);
            CHECK(std::abs(fthms::bessel_y1(x) - oracle::y1(x)) < 1e-13);
        }
    }
}

TEST_CASE("Y and Hankel reject nonpositive arguments", "[special]") {
    CHECK_THROWS_AS(fthms::bessel_y0(0.0), fthms::domain_error);
    CHECK_THROWS_AS(fthms::bessel_y0(-1.0), fthms::domain_error);
    CHECK_THROWS_AS(fthms::bessel_y1(-0.5), fthms::domain_error);
    CHECK_THROWS_AS(fthms::hankel1_0(0.0), fthms::domain_error);
}

TEST_CASE("Free-space kernel value at unit wavenumber and unit distance", "[special]") {
    const fthms::Vec2 x{1.0, 0.0}, y{0.0, 0.0};
    const cplx phi = fthms::kernel_phi(1.0, x, y);
    const cplx expected = 0.25 * fthms::iu * oracle::h0(1.0);
    CHECK(std::abs(phi - expected) < 1e-14);

    // Negative wavenumber maps to the complex conjugate.
    const cplx phim = fthms::kernel_phi(-1.0, x, y);
    CHECK(std::abs(phim - std::conj(phi)) < 1e-15);

    CHECK_THROWS_AS(fthms::kernel_phi(1.0, x, x), fthms::domain_error);
    CHECK_THROWS_AS(fthms::kernel_phi(0.0, x, y), fthms::domain_error);
}

TEST_CASE("Kernel normal derivative matches a finite difference", "[special]") {
    const double kappa = 2.7;
    const fthms::Vec2 x{0.3, 1.9};
    const fthms::Vec2 y{-0.4, 0.2};
    const fthms::Vec2 nu{0.6, 0.8};

    const double h = 1e-5;
    const fthms::Vec2 yp{y.x + h * nu.x, y.y + h * nu.y};
    const fthms::Vec2 ym{y.x - h * nu.x, y.y - h * nu.y};
    const cplx fd = (fthms::kernel_phi(kappa, x, yp) - fthms::kernel_phi(kappa, x, ym)) / (2.0 * h);

    const cplx got = fthms::kernel_normal_derivative(kappa, x, y, nu);
    CHECK(std::abs(got - fd) < 1e-8);
}

TEST_CASE("Log-split of the single-layer kernel reassembles the kernel", "[special]") {
    // On the unit circle parametrised by angle, the split must satisfy
    // phi = m1 * log(4 sin^2((t - s)/2)) + m2 away from the diagonal.
    const double kappa = 3.1;
    auto pos = [](double t) { return fthms::Vec2{std::cos(t), std::sin(t)}; };
    for (double t : {0.3, 2.0}) {
        for (double s : {1.1, 4.9}) {
            const auto split = fthms::split_single_layer(kappa, pos(t), pos(s), t - s);
            const cplx lhs =
                split.m1 * std::log(4.0 * std::pow(std::sin(0.5 * (t - s)), 2)) + split.m2;
            const cplx rhs = fthms::kernel_phi(kappa, pos(t), pos(s));
            CHECK(std::abs(lhs - rhs) < 1e-13);

            const auto dsplit = fthms::split_double_layer(
                kappa, pos(t), pos(s), fthms::Vec2{std::cos(s), std::sin(s)}, t - s);
            const cplx dlhs =
                dsplit.m1 * std::log(4.0 * std::pow(std::sin(0.5 * (t - s)), 2)) + dsplit.m2;
            const cplx drhs = fthms::kernel_normal_derivative(
                kappa, pos(t), pos(s), fthms::Vec2{std::cos(s), std::sin(s)});
            CHECK(std::abs(dlhs - drhs) < 1e-13);
        }
    }
}

TEST_CASE("Diagonal limits of the kernel splits", "[special]") {
    const double kappa = 3.1;
    auto pos = [](double t) { return fthms::Vec2{std::cos(t), std::sin(t)}; };

    // Smooth part of the single-layer split approaches its diagonal limit.
    // Evaluating symmetrically about the diagonal gives O(h^2) approach.
    const double t = 0.8;
    const cplx diag = fthms::split_single_layer_diag(kappa, 1.0).m2;
    const cplx expected =
        fthms::iu / 4.0 - (std::log(kappa / 2.0) + fthms::euler_gamma) / (2.0 * fthms::pi);
    CHECK(std::abs(diag - expected) < 1e-15);

    const double h = 1e-4;
    const auto near = fthms::split_single_layer(kappa, pos(t - h), pos(t + h), -2.0 * h);
    CHECK(std::abs(near.m2 - diag) < 1e-6);

    // Double-layer smooth part on the unit circle tends to -1/(4 pi).
    const fthms::Vec2 nu{std::cos(t), std::sin(t)};
    const fthms::Vec2 d2{-std::cos(t), -std::sin(t)};
    const cplx kdiag = fthms::split_double_layer_diag(d2, nu, 1.0).m2;
    CHECK(std::abs(kdiag - cplx{-1.0 / (4.0 * fthms::pi), 0.0}) < 1e-15);

    const auto knear = fthms::split_double_layer(
        kappa, pos(t - h), pos(t + h), fthms::Vec2{std::cos(t + h), std::sin(t + h)}, -2.0 * h);
    CHECK(std::abs(knear.m2 - kdiag) < 1e-3);
}
