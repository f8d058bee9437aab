#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace nlhk {

/// A point of R^d stored in a fixed two-slot array; for d = 1 the second
/// slot is ignored and kept at zero.
using Point = std::array<double, 2>;

inline constexpr int kMaxDim = 2;

struct ModelParams {
    int d = 1;
    double beta = 1.0;

    void validate() const {
        if (d < 1 || d > kMaxDim)
            throw std::invalid_argument("dimension must be 1 or 2");
        if (!(beta > 0.0 && beta < 2.0))
            throw std::invalid_argument("beta must lie in (0, 2)");
    }
};

inline double norm(const Point& x, int d) {
    return d == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
}

inline double dist(const Point& x, const Point& y, int d) {
    return d == 1 ? std::abs(x[0] - y[0]) : std::hypot(x[0] - y[0], x[1] - y[1]);
}

inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }

/// Surface measure of the unit sphere in R^d (2 for d = 1, 2π for d = 2).
inline double sphere_area(int d) { return d == 1 ? 2.0 : 2.0 * M_PI; }

}  // namespace nlhk
