#pragma once

#include "nlhk/params.hpp"

namespace nlhk {

/// Heat kernel of Δ at distance r:  (4πt)^{-d/2} exp(-r²/4t).
double gaussian_r(double t, double r, int d);

/// p0(t, x, y); throws for t <= 0.
double gaussian(double t, const Point& x, const Point& y, int d);

/// Constant C9 of the Gaussian bounds
///   p0 <= C9 t^{-d/2} (1 ∧ √t/|x|)^{d+2},  |∂²p0| <= C9 t^{-(d+2)/2} (1 ∧ √t/|x|)^{d+4},
/// fitted once per dimension by a dense scan of the scaled profile.
double gaussian_c9(int d);

/// C9 t^{-(d+2)/2} (1 ∧ √t/|x|)^{d+4}
double gaussian_hessian_bound(double t, const Point& x, int d);

/// Largest |∂_i∂_j p0(t, x)| over i, j (closed form).
double gaussian_max_second_partial(double t, const Point& x, int d);

/// f0(t,x,y) = (√t ∨ |x-y|)^{-(d+β)}
double f0(double t, double r, const ModelParams& p);
double f0(double t, const Point& x, const Point& y, const ModelParams& p);

/// h(t,x,y) = t^{-d/2} ∧ (p0(t,x,y) + t/|x-y|^{d+β}); h(t,x,x) = t^{-d/2}.
double h_fn(double t, double r, const ModelParams& p);
double h_fn(double t, const Point& x, const Point& y, const ModelParams& p);

/// A(d,-β): the constant making A/|z|^{d+β} the jump kernel of Δ^{β/2}.
struct StableNormalizer {
    double value = 0.0;
};

StableNormalizer stable_normalizer(const ModelParams& p);

}  // namespace nlhk
