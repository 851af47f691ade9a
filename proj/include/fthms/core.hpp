#pragma once

#include <complex>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fthms {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846264338327950288;
inline constexpr double euler_gamma = 0.57721566490153286060651209008240243;
inline const cplx iu{0.0, 1.0};

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    // 90-degree clockwise rotation; for a positively oriented closed curve
    // this turns the tangent into the outward normal.
    Vec2 perp_cw() const { return {y, -x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Thrown for invalid user input (configs, CLI arguments, malformed geometry).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numerical routine is used outside its supported domain
// (unsupported evaluation variant, target on a source curve, ...).
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fthms
