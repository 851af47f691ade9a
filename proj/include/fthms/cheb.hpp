#pragma once

// Chebyshev interpolation helpers, classical quadrature rules and tiny 1-D
// optimization utilities shared by the geometry and integral-equation code.

#include <functional>

#include "fthms/core.hpp"

namespace fthms {

// Chebyshev points of the first kind (Fejer-1 nodes), interior to (-1,1),
// listed in increasing order.
inline std::vector<double> fejer1_nodes(int n) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = -std::cos(pi * (2.0 * i + 1.0) / (2.0 * n));
    return s;
}

// Weights of the Fejer-1 quadrature rule on [-1,1] (positive, exact for
// polynomials of degree < n).
inline std::vector<double> fejer1_weights(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) {
        const double th = pi * (2.0 * i + 1.0) / (2.0 * n);  // node = -cos(th)
        double sum = 0.0;
        for (int m = 1; m <= n / 2; ++m) sum += std::cos(2.0 * m * th) / (4.0 * m * m - 1.0);
        w[i] = (2.0 / n) * (1.0 - 2.0 * sum);
    }
    return w;
}

// Map values at the n Fejer-1 nodes to Chebyshev coefficients a_0..a_{n-1}
// (row-major n x n matrix; exact for the interpolant).
inline std::vector<double> cheb_coeff_matrix(int n) {
    std::vector<double> c(static_cast<size_t>(n) * n);
    for (int k = 0; k < n; ++k) {
        const double scale = (k == 0 ? 1.0 : 2.0) / n;
        for (int i = 0; i < n; ++i) {
            // T_k(-cos(th_i)) = cos(k(pi - th_i))
            const double th = pi * (2.0 * i + 1.0) / (2.0 * n);
            c[static_cast<size_t>(k) * n + i] = scale * std::cos(k * (pi - th));
        }
    }
    return c;
}

inline double cheb_eval(const std::vector<double>& a, double s) {
    // Clenshaw recurrence.
    double b1 = 0.0, b2 = 0.0;
    for (int k = static_cast<int>(a.size()) - 1; k >= 1; --k) {
        const double b0 = a[k] + 2.0 * s * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return a.empty() ? 0.0 : a[0] + s * b1 - b2;
}

inline std::vector<double> cheb_derivative(const std::vector<double>& a) {
    const int n = static_cast<int>(a.size());
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[n - 1] = 0.0;
    if (n >= 2) d[n - 2] = 2.0 * (n - 1) * a[n - 1];
    for (int k = n - 3; k >= 0; --k) d[k] = d[k + 2] + 2.0 * (k + 1) * a[k + 1];
    d[0] *= 0.5;
    return d;
}

struct QuadRule {
    std::vector<double> nodes, weights;
};

// Gauss-Legendre rule on [-1,1]; Newton iteration on P_n in long double.
inline QuadRule gauss_legendre(int n) {
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        long double x = cosl(3.141592653589793238462643383L * (i + 0.75L) / (n + 0.5L));
        long double pp = 0.0L;
        for (int iter = 0; iter < 100; ++iter) {
            long double p0 = 1.0L, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const long double p2 = ((2.0L * k - 1.0L) * x * p1 - (k - 1.0L) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0L);
            const long double dx = p1 / pp;
            x -= dx;
            if (fabsl(dx) < 1e-19L) break;
        }
        r.nodes[i] = static_cast<double>(-x);
        r.nodes[n - 1 - i] = static_cast<double>(x);
        const double w = static_cast<double>(2.0L / ((1.0L - x * x) * pp * pp));
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

// Golden-section minimization of a unimodal-enough function on [a,b].
inline double golden_min(const std::function<double(double)>& f, double a, double b,
                         double reltol = 1e-10) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    const double span = std::abs(b - a) + 1e-300;
    while (std::abs(b - a) > reltol * span + 1e-15 * (std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Bisection for f(x)=0 with f(a), f(b) of opposite sign.
inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double tol = 1e-13) {
    double fa = f(a);
    for (int i = 0; i < 200 && std::abs(b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
        const double m = 0.5 * (a + b), fm = f(m);
        if ((fa <= 0) == (fm <= 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace fthms
