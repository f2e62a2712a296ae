#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace qadapt {

// 2-vector in the synchronously rotating dq frame (power-invariant scaling).
struct DqVector {
    double d = 0.0;
    double q = 0.0;
};

constexpr DqVector operator+(DqVector a, DqVector b) { return {a.d + b.d, a.q + b.q}; }
constexpr DqVector operator-(DqVector a, DqVector b) { return {a.d - b.d, a.q - b.q}; }
constexpr DqVector operator-(DqVector a) { return {-a.d, -a.q}; }
constexpr DqVector operator*(double s, DqVector a) { return {s * a.d, s * a.q}; }
constexpr DqVector operator*(DqVector a, double s) { return s * a; }
constexpr DqVector operator/(DqVector a, double s) { return {a.d / s, a.q / s}; }

constexpr double dot(DqVector a, DqVector b) { return a.d * b.d + a.q * b.q; }
constexpr double norm_squared(DqVector a) { return dot(a, a); }
inline double norm(DqVector a) { return std::hypot(a.d, a.q); }

// 90-degree rotation J = [0 -1; 1 0] applied to x.
constexpr DqVector rotate90(DqVector x) { return {-x.q, x.d}; }

struct InstantaneousPower {
    double active_w = 0.0;
    double reactive_var = 0.0;
};

// P = v.i, Q = v.Ji for power-invariant dq quantities.
constexpr InstantaneousPower instantaneous_power(DqVector v, DqVector i) {
    return {dot(v, i), v.q * i.d - v.d * i.q};
}

inline double sat_scalar(double x, double limit) {
    if (limit < 0.0) throw std::invalid_argument("sat_scalar: limit must be non-negative");
    return std::clamp(x, -limit, limit);
}

// Scales x onto the disc of radius limit, preserving direction.
inline DqVector sat_circular(DqVector x, double limit) {
    if (limit < 0.0) throw std::invalid_argument("sat_circular: limit must be non-negative");
    const double n = norm(x);
    if (n <= limit) return x;
    return (limit / n) * x;
}

using Abc = std::array<double, 3>;

// Orthonormal (power-invariant) Clarke transform followed by rotation by
// theta_g. Returns (d, q, zero-sequence).
inline Abc park_transform(const Abc& x_abc, double theta_g) {
    constexpr double k = 0.81649658092772603;  // sqrt(2/3)
    constexpr double h = 0.86602540378443865;  // sqrt(3)/2
    constexpr double r = 0.70710678118654752;  // 1/sqrt(2)
    const double alpha = k * (x_abc[0] - 0.5 * x_abc[1] - 0.5 * x_abc[2]);
    const double beta = k * h * (x_abc[1] - x_abc[2]);
    const double zero = k * r * (x_abc[0] + x_abc[1] + x_abc[2]);
    const double c = std::cos(theta_g);
    const double s = std::sin(theta_g);
    return {c * alpha + s * beta, -s * alpha + c * beta, zero};
}

inline Abc inverse_park_transform(const Abc& dq0, double theta_g) {
    constexpr double k = 0.81649658092772603;
    constexpr double h = 0.86602540378443865;
    constexpr double r = 0.70710678118654752;
    const double c = std::cos(theta_g);
    const double s = std::sin(theta_g);
    const double alpha = c * dq0[0] - s * dq0[1];
    const double beta = s * dq0[0] + c * dq0[1];
    const double g = dq0[2];
    return {k * (alpha + r * g),
            k * (-0.5 * alpha + h * beta + r * g),
            k * (-0.5 * alpha - h * beta + r * g)};
}

} // namespace qadapt
