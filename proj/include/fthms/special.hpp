#pragma once

// Cylinder functions J0, J1, Y0, Y1 and the 2-D Helmholtz kernels built from
// them. Everything is evaluated in long double so the double-precision result
// keeps ~1e-14 accuracy: power series up to the switch point, Hankel-type
// asymptotic expansions beyond it.

#include <cassert>

#include "fthms/core.hpp"

namespace fthms {

namespace detail {

inline constexpr long double bessel_series_switch = 14.0L;

inline long double j0_series(long double x) {
    const long double q = x * x / 4.0L;
    long double term = 1.0L, sum = 1.0L;
    for (int m = 1; m <= 80; ++m) {
        term *= -q / (static_cast<long double>(m) * m);
        sum += term;
        if (fabsl(term) < 1e-24L * fabsl(sum)) break;
    }
    return sum;
}

inline long double j1_series(long double x) {
    const long double q = x * x / 4.0L;
    long double term = 1.0L, sum = 1.0L;
    for (int m = 1; m <= 80; ++m) {
        term *= -q / (static_cast<long double>(m) * (m + 1));
        sum += term;
        if (fabsl(term) < 1e-24L * fabsl(sum)) break;
    }
    return (x / 2.0L) * sum;
}

inline constexpr long double euler_gamma_l = 0.577215664901532860606512090082402431L;

inline long double y0_series(long double x) {
    // (2/pi)[(ln(x/2)+gamma) J0 + sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k/(k!)^2]
    const long double q = x * x / 4.0L;
    long double term = 1.0L, hk = 0.0L, sum = 0.0L, sign = 1.0L;
    for (int k = 1; k <= 80; ++k) {
        term *= q / (static_cast<long double>(k) * k);
        hk += 1.0L / k;
        sum += sign * hk * term;
        sign = -sign;
        if (hk * term < 1e-24L * (fabsl(sum) + 1e-30L)) break;
    }
    const long double pi_l = 3.141592653589793238462643383279502884L;
    return (2.0L / pi_l) * ((logl(x / 2.0L) + euler_gamma_l) * j0_series(x) + sum);
}

inline long double y1_series(long double x) {
    // (2/pi)(ln(x/2)+gamma) J1 - 2/(pi x)
    //   - (x/(2 pi)) sum_{k>=0} (-1)^k (H_k + H_{k+1}) (x^2/4)^k / (k!(k+1)!)
    const long double q = x * x / 4.0L;
    long double term = 1.0L, hk = 0.0L, hk1 = 1.0L, sum = hk + hk1, sign = -1.0L;
    for (int k = 1; k <= 80; ++k) {
        term *= q / (static_cast<long double>(k) * (k + 1));
        hk += 1.0L / k;
        hk1 += 1.0L / (k + 1);
        sum += sign * (hk + hk1) * term;
        sign = -sign;
        if ((hk + hk1) * term < 1e-24L * (fabsl(sum) + 1e-30L)) break;
    }
    const long double pi_l = 3.141592653589793238462643383279502884L;
    return (2.0L / pi_l) * (logl(x / 2.0L) + euler_gamma_l) * j1_series(x)
           - 2.0L / (pi_l * x) - (x / (2.0L * pi_l)) * sum;
}

// Modulus/phase factors of the large-argument expansion,
//   J_n(x) = sqrt(2/(pi x)) [P cos(chi) - Q sin(chi)],
//   Y_n(x) = sqrt(2/(pi x)) [P sin(chi) + Q cos(chi)],  chi = x - (2n+1) pi/4,
// with P = t0 - t2 + t4 - ..., Q = t1 - t3 + ... and
// t_m = t_{m-1} (4n^2 - (2m-1)^2)/(8 m x). Truncated at the smallest term.
struct AsymPQ {
    long double p, q;
};

inline AsymPQ bessel_pq(int n, long double x) {
    const long double a = 4.0L * n * n;
    long double t = 1.0L, p = 1.0L, q = 0.0L, prev = 1e30L;
    for (int m = 1; m <= 60; ++m) {
        const long double f = 2.0L * m - 1.0L;
        t *= (a - f * f) / (8.0L * m * x);
        if (fabsl(t) >= prev) break;
        prev = fabsl(t);
        const int r = m % 4;
        if (r == 1)      q += t;
        else if (r == 2) p -= t;
        else if (r == 3) q -= t;
        else             p += t;
        if (fabsl(t) < 1e-24L) break;
    }
    return {p, q};
}

inline long double bessel_asym(int n, int kind, long double x) {
    const long double pi_l = 3.141592653589793238462643383279502884L;
    const auto [p, q] = bessel_pq(n, x);
    const long double chi = x - (2 * n + 1) * pi_l / 4.0L;
    const long double c = cosl(chi), s = sinl(chi);
    const long double amp = sqrtl(2.0L / (pi_l * x));
    return kind == 0 ? amp * (p * c - q * s) : amp * (p * s + q * c);
}

}  // namespace detail

// J0, J1 accept any real argument; Y0, Y1 require x > 0.
inline double bessel_j0(double x) {
    const long double ax = fabsl(static_cast<long double>(x));
    if (ax <= detail::bessel_series_switch) return static_cast<double>(detail::j0_series(ax));
    return static_cast<double>(detail::bessel_asym(0, 0, ax));
}

inline double bessel_j1(double x) {
    const long double lx = static_cast<long double>(x);
    const long double ax = fabsl(lx);
    long double v = ax <= detail::bessel_series_switch ? detail::j1_series(ax)
                                                       : detail::bessel_asym(1, 0, ax);
    return static_cast<double>(x < 0 ? -v : v);
}

inline double bessel_y0(double x) {
    if (!(x > 0.0)) throw domain_error("bessel_y0: argument must be positive");
    const long double lx = static_cast<long double>(x);
    if (lx <= detail::bessel_series_switch) return static_cast<double>(detail::y0_series(lx));
    return static_cast<double>(detail::bessel_asym(0, 1, lx));
}

inline double bessel_y1(double x) {
    if (!(x > 0.0)) throw domain_error("bessel_y1: argument must be positive");
    const long double lx = static_cast<long double>(x);
    if (lx <= detail::bessel_series_switch) return static_cast<double>(detail::y1_series(lx));
    return static_cast<double>(detail::bessel_asym(1, 1, lx));
}

// Hankel functions of the first kind, H_n^{(1)} = J_n + i Y_n, x > 0.
inline cplx hankel1_0(double x) { return {bessel_j0(x), bessel_y0(x)}; }
inline cplx hankel1_1(double x) { return {bessel_j1(x), bessel_y1(x)}; }

// Free-space kernel Phi(x,y) = (i/4) H0^{(1)}(kappa |x-y|).
// Negative kappa follows the real-signal convention Phi_{-k} = conj(Phi_k).
inline cplx kernel_phi(double kappa, const Vec2& x, const Vec2& y) {
    if (kappa < 0) return std::conj(kernel_phi(-kappa, x, y));
    const double r = dist(x, y);
    if (!(r > 0.0)) throw domain_error("kernel_phi: coincident target and source");
    if (!(kappa > 0.0)) throw domain_error("kernel_phi: kappa must be nonzero");
    return 0.25 * iu * hankel1_0(kappa * r);
}

// d Phi / d nu(y) = (i kappa / 4) H1^{(1)}(kappa r) (x-y).nu(y) / r.
inline cplx kernel_normal_derivative(double kappa, const Vec2& x, const Vec2& y,
                                     const Vec2& normal_y) {
    if (kappa < 0) return std::conj(kernel_normal_derivative(-kappa, x, y, normal_y));
    const double r = dist(x, y);
    if (!(r > 0.0)) throw domain_error("kernel_normal_derivative: coincident points");
    if (!(kappa > 0.0)) throw domain_error("kernel_normal_derivative: kappa must be nonzero");
    return 0.25 * iu * kappa * hankel1_1(kappa * r) * ((x - y).dot(normal_y) / r);
}

// Smooth/logarithmic kernel decomposition on closed curves parameterized over
// [0,2pi): kernel(theta,tau) = m1 * ln(4 sin^2((theta-tau)/2)) + m2.
// The curve speed |x'(tau)| is NOT folded in; quadrature applies it.
struct KernelSplit {
    cplx m1, m2;
};

inline KernelSplit split_single_layer(double kappa, const Vec2& x, const Vec2& y,
                                      double theta_minus_tau) {
    const double r = dist(x, y);
    const cplx m1 = -bessel_j0(kappa * r) / (4.0 * pi);
    const double s = 2.0 * std::sin(0.5 * theta_minus_tau);
    const cplx m2 = kernel_phi(kappa, x, y) - m1 * std::log(s * s);
    return {m1, m2};
}

// theta == tau limit of the single-layer split; needs the local speed.
inline KernelSplit split_single_layer_diag(double kappa, double speed) {
    const cplx m1 = -1.0 / (4.0 * pi);
    const cplx m2 = 0.25 * iu - (std::log(0.5 * kappa * speed) + euler_gamma) / (2.0 * pi);
    return {m1, m2};
}

inline KernelSplit split_double_layer(double kappa, const Vec2& x, const Vec2& y,
                                      const Vec2& normal_y, double theta_minus_tau) {
    const double r = dist(x, y);
    const double proj = (x - y).dot(normal_y) / r;
    const cplx m1 = -kappa * bessel_j1(kappa * r) * proj / (4.0 * pi);
    const double s = 2.0 * std::sin(0.5 * theta_minus_tau);
    const cplx m2 = kernel_normal_derivative(kappa, x, y, normal_y) - m1 * std::log(s * s);
    return {m1, m2};
}

// Diagonal limit of the double-layer split: m1 -> 0 and
// m2 -> (1/4pi) x''(t).nu(t) / |x'(t)|^2 (curvature term, kappa-independent).
inline KernelSplit split_double_layer_diag(const Vec2& second_derivative, const Vec2& normal,
                                           double speed) {
    const cplx m2 = second_derivative.dot(normal) / (4.0 * pi * speed * speed);
    return {cplx{0.0}, m2};
}

}  // namespace fthms
